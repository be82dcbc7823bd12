"""
测试闭式解 (OMIT 稳态, 绝热读出速率)
"""
import numpy as np
import pytest

from optostore.exceptions import InvalidParameterError
from optostore.models.params import coupling_from_cooperativity, cooperativity
from optostore.services.analytic import (
    adiabatic_retrieval_rate,
    dip_half_depth_width,
    mechanical_free_decay,
    omit_dip_width,
    omit_steady_state,
)
from optostore.utils.units import angular_to_mhz, mhz_to_angular


def test_no_coupling_is_bare_lorentzian(sample_b):
    delta = np.linspace(-200.0, 200.0, 11)
    r = omit_steady_state(delta, 0.0, sample_b)
    expected = sample_b.kappa_ext / (sample_b.kappa**2 / 4 + delta**2)
    np.testing.assert_allclose(r.intracavity_power, expected, rtol=1e-12)


def test_dip_depth_on_resonance(sample_b):
    """delta = 0: 腔内功率下降 1/(1+C)^2"""
    G = mhz_to_angular(0.38)
    C = cooperativity(G, sample_b.gamma_m, sample_b.kappa)
    dressed = omit_steady_state(0.0, G, sample_b).intracavity_power
    bare = omit_steady_state(0.0, 0.0, sample_b).intracavity_power
    assert dressed / bare == pytest.approx(1.0 / (1.0 + C) ** 2, rel=1e-12)


def test_scalar_and_array_agree(sample_a):
    G = mhz_to_angular(0.77)
    grid = omit_steady_state(np.array([0.1, 0.2]), G, sample_a)
    single = omit_steady_state(0.2, G, sample_a)
    assert isinstance(single.alpha_ss, complex)
    assert grid.alpha_ss[1] == pytest.approx(single.alpha_ss)
    assert single.emitted_power == pytest.approx(sample_a.kappa_ext * single.intracavity_power)


def test_mirror_symmetry(sample_b):
    """实输入: alpha(-delta) = conj(alpha(delta))"""
    G = mhz_to_angular(0.38)
    delta = np.linspace(0.01, 5.0, 50)
    plus = omit_steady_state(delta, G, sample_b).alpha_ss
    minus = omit_steady_state(-delta, G, sample_b).alpha_ss
    np.testing.assert_allclose(minus, np.conj(plus), rtol=1e-12)


def test_mechanical_pole_rejected(sample_a):
    p = sample_a.with_overrides(gamma_m=0.0)
    with pytest.raises(InvalidParameterError):
        omit_steady_state(0.0, 1.0, p)
    assert omit_steady_state(0.0, 0.0, p).intracavity_power > 0


@pytest.mark.parametrize("C", [0.301, 1.0, 30.0])
def test_dip_width_in_bad_cavity_limit(sample_b, C):
    """(1+C) gamma_m 在 kappa -> inf 时精确成立"""
    p = sample_b.with_overrides(kappa_total=sample_b.kappa * 1e4, kappa_ext=sample_b.kappa * 5e3)
    G = coupling_from_cooperativity(C, p.gamma_m, p.kappa)
    width = dip_half_depth_width(G, p, points=200001)
    assert width == pytest.approx(omit_dip_width(C, p.gamma_m), rel=1e-3)


def test_dip_width_sample_b(sample_b):
    G = mhz_to_angular(0.38)
    C = cooperativity(G, sample_b.gamma_m, sample_b.kappa)
    width = dip_half_depth_width(G, sample_b)
    assert angular_to_mhz(width) == pytest.approx(angular_to_mhz(omit_dip_width(C, sample_b.gamma_m)), rel=0.02)
    with pytest.raises(InvalidParameterError):
        omit_dip_width(-0.1, sample_b.gamma_m)


def test_dip_width_without_coupling(sample_b):
    """G = 0 没有凹陷, 宽度为 0; 区间小于凹陷时报错"""
    assert dip_half_depth_width(0.0, sample_b) == 0.0
    G = mhz_to_angular(0.38)
    with pytest.raises(InvalidParameterError):
        dip_half_depth_width(G, sample_b, span=0.1 * sample_b.gamma_m)


@pytest.mark.parametrize("g_mhz, rate", [(0.2, 0.3267), (0.45, 0.4288), (0.6, 0.5278)])
def test_adiabatic_retrieval_rate(sample_b, g_mhz, rate):
    r = adiabatic_retrieval_rate(mhz_to_angular(g_mhz), sample_b)
    assert r.rate == pytest.approx(rate, rel=1e-3)
    assert r.in_regime


def test_adiabatic_rate_out_of_regime(sample_a, caplog):
    r = adiabatic_retrieval_rate(mhz_to_angular(0.77), sample_a)
    assert not r.in_regime
    assert "adiabatic elimination" in caplog.text


def test_free_decay(sample_a):
    beta = mechanical_free_decay(2.0 + 1.0j, 8.0, sample_a.gamma_m)
    assert abs(beta) ** 2 == pytest.approx(5.0 * np.exp(-sample_a.gamma_m * 8.0), rel=1e-12)
    with pytest.raises(InvalidParameterError):
        mechanical_free_decay(1.0, -1.0, sample_a.gamma_m)
