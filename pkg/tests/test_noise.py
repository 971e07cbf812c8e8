import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impa.errors import DomainError
from impa.noise import (
    AmplChain,
    EfficiencyEstimate,
    efficiency_from_noise,
    noise_photons_from_temperature,
    quantum_limit_temperature,
    system_noise_temperature,
    temperature_from_noise_photons,
)

from oracles import quantum_limit

positive = st.floats(1e-3, 1e3)


def test_quantum_limit_values():
    assert quantum_limit_temperature(0.0) == 0.0
    assert quantum_limit_temperature(9.4e9) == pytest.approx(0.4511, abs=1e-4)
    assert quantum_limit_temperature(6e9) == pytest.approx(0.2880, abs=1e-4)
    assert quantum_limit_temperature(9.4e9) == pytest.approx(quantum_limit(9.4e9), rel=1e-14)


def test_quantum_limit_vectorised_and_domain():
    f = np.array([1e9, 5e9, 9.4e9])
    assert np.allclose(quantum_limit_temperature(f), [quantum_limit(x) for x in f], rtol=1e-14)
    with pytest.raises(DomainError):
        quantum_limit_temperature(-1.0)


def test_system_noise_examples():
    chain = AmplChain(100, 1, 1, 4.0)
    assert system_noise_temperature(1.0, chain) == 0.0
    assert system_noise_temperature(3.0, chain) == pytest.approx(0.08, rel=1e-12)
    assert system_noise_temperature(3.0, AmplChain(100, 1, 1, 8.0)) == pytest.approx(0.16, rel=1e-12)


def test_system_noise_insertion_factor_squared():
    assert system_noise_temperature(3.0, AmplChain(100, 2, 1, 4.0)) == pytest.approx(0.02, rel=1e-12)


def test_system_noise_domain():
    with pytest.raises(DomainError):
        system_noise_temperature(0.5, AmplChain(100, 1, 1, 4.0))
    with pytest.raises(DomainError):
        AmplChain(0, 1, 1, 4.0)
    with pytest.raises(DomainError):
        AmplChain(100, 1, 1, -4.0)


@settings(max_examples=1000, deadline=None)
@given(st.floats(1.01, 1e3), positive, positive, positive, positive, st.floats(0.1, 10))
def test_system_noise_scaling(y, g_p, g_i, g_a, t_h, k):
    base = system_noise_temperature(y, AmplChain(g_p, g_i, g_a, t_h))
    assert system_noise_temperature(y, AmplChain(g_p, g_i, g_a, k * t_h)) == pytest.approx(k * base, rel=1e-12)
    assert system_noise_temperature(1 + k * (y - 1), AmplChain(g_p, g_i, g_a, t_h)) == \
        pytest.approx(k * base, rel=1e-12, abs=1e-300)
    assert system_noise_temperature(y, AmplChain(k * g_p, g_i, g_a, t_h)) == pytest.approx(base / k, rel=1e-12)
    assert system_noise_temperature(y, AmplChain(g_p, g_i, k * g_a, t_h)) == pytest.approx(base / k, rel=1e-12)
    assert system_noise_temperature(y, AmplChain(g_p, k * g_i, g_a, t_h)) == \
        pytest.approx(base / k**2, rel=1e-12)


def test_photons_at_quantum_limit_is_one():
    for f in (1e9, 6e9, 9.4e9):
        assert noise_photons_from_temperature(quantum_limit_temperature(f), f) == pytest.approx(1.0, rel=1e-15)
    assert noise_photons_from_temperature(0.0, 9.4e9) == 0.0
    with pytest.raises(DomainError):
        noise_photons_from_temperature(1.0, 0.0)
    with pytest.raises(DomainError):
        noise_photons_from_temperature(-1.0, 9.4e9)


@settings(max_examples=500, deadline=None)
@given(st.one_of(st.just(0.0), st.floats(1e-200, 1e3)), st.floats(1e6, 1e12))
def test_photon_temperature_round_trip(n, f):
    t = quantum_limit_temperature(f) * n
    assert noise_photons_from_temperature(t, f) == pytest.approx(n, rel=1e-12, abs=1e-300)
    assert temperature_from_noise_photons(n, f) == pytest.approx(t, rel=1e-12, abs=1e-300)


def test_efficiency_values():
    assert efficiency_from_noise(0.0) == 1.0
    assert efficiency_from_noise(2.78) == pytest.approx(0.26455, abs=1e-5)
    assert efficiency_from_noise(3.0) < efficiency_from_noise(2.78)
    with pytest.raises(DomainError):
        efficiency_from_noise(-0.1)


def test_efficiency_from_temperature_chain():
    f = 9.4e9
    t_sys = temperature_from_noise_photons(2.78, f)
    eta = efficiency_from_noise(noise_photons_from_temperature(t_sys, f))
    assert eta == pytest.approx(0.2646, abs=1e-4)
    est = EfficiencyEstimate.from_noise(2.78)
    assert est.eta == pytest.approx(1 / 3.78, rel=1e-15)


@settings(max_examples=500, deadline=None)
@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_efficiency_strictly_decreasing_into_unit_interval(a, b):
    ea, eb = efficiency_from_noise(a), efficiency_from_noise(b)
    assert 0 < ea <= 1 and 0 < eb <= 1
    if b > a * (1 + 1e-9) + 1e-9:
        assert ea > eb
