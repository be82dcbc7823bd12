"""
Error types raised across the simulation pipeline
"""


class OptostoreError(Exception):
    """Base class for every error raised by optostore."""


class InvalidParameterError(OptostoreError, ValueError):
    """A physical parameter violates a pre-condition."""


class InvalidSequenceError(OptostoreError, ValueError):
    """A pulse sequence cannot be built or evaluated."""


class DivergenceError(OptostoreError):
    """The integrated state became non-finite or exceeded the divergence limit."""

    def __init__(self, time_us: float, message: str | None = None):
        self.time_us = time_us
        super().__init__(message or f"integration diverged at t = {time_us:.6g} us")


class UndersampledError(OptostoreError):
    """A beat record cannot be sampled finely enough for its carrier."""


class GateError(OptostoreError):
    """A detection gate does not overlap the record."""


class InsufficientSignalError(OptostoreError):
    """The windowed record carries no usable oscillation."""


class FitError(OptostoreError):
    """A least-squares fit did not converge."""


class ConfigError(OptostoreError):
    """The run configuration cannot be read or applied."""
