"""Routers package"""
from .simulate import router as simulate_router

__all__ = ["simulate_router"]
