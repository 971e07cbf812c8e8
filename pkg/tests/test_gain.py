import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impa.errors import DomainError, ThresholdError
from impa.gain import (
    GainProfile,
    KerrModel,
    PumpSettings,
    bandwidth_above,
    count_local_maxima,
    coupling_rate,
    db_to_watts,
    default_kerr,
    duffing_steady_state,
    kerr_cubic,
    oscillation_threshold,
    real_cubic_roots,
    saturation_power,
    series_coupling_rate,
    small_signal_gain,
    strength_for_peak_gain,
    total_admittance,
    tune_pump,
    watts_to_dbm,
)
from impa.network import default_chain
from impa.squid import DeviceModel, SquidParams, calibrate_stray, josephson_inductance, resonant_frequency

from oracles import bare_lc_frequency, cubic_roots, degenerate_gain, direct_gains, lorentzian_width

HBAR = 6.62607015e-34 / (2 * math.pi)


@pytest.fixture(scope="module")
def plain():
    """50-ohm environment with no transformer, calibrated to the same 9.4 GHz maximum."""
    dev = DeviceModel().without_chain(50.0)
    return replace(dev, l_stray=calibrate_stray(dev, 9.4e9))


@pytest.fixture(scope="module")
def operating(device, f0, grid):
    pump = PumpSettings(2 * f0, strength_for_peak_gain(device, 0.0, 2 * f0, 16.5, grid))
    prof = small_signal_gain(device, 0.0, pump, grid)
    return pump, float(grid[np.argmax(prof.gain_db)])


# --- settings and helpers ---------------------------------------------------------------


def test_pump_validation():
    with pytest.raises(DomainError):
        PumpSettings(0.0)
    with pytest.raises(DomainError):
        PumpSettings(18e9, -1.0)
    with pytest.raises(DomainError):
        KerrModel(1.0)


def test_dbm_conversions():
    assert db_to_watts(-30.0) == pytest.approx(1e-6, rel=1e-15)
    assert watts_to_dbm(1e-3) == pytest.approx(0.0, abs=1e-12)
    p = np.linspace(-150, 0, 31)
    assert np.allclose(watts_to_dbm(db_to_watts(p)), p, atol=1e-12)


def test_count_local_maxima():
    x = np.linspace(-1, 1, 201)
    assert count_local_maxima(-x**2) == 1
    assert count_local_maxima(np.cos(3 * np.pi * x)) == 3
    assert count_local_maxima(np.ones(10)) == 0
    assert count_local_maxima(np.r_[0, 1, 1, 1, 0, 2, 0.0]) == 2
    # ripple below the prominence floor does not count
    assert count_local_maxima(-x**2 + 1e-4 * np.sin(80 * x), prominence=0.01) == 1


# --- coupling rate ----------------------------------------------------------------------


def test_coupling_rate_parallel_mapping(device):
    kappa = coupling_rate(device, 9.4e9, 0.0)
    assert kappa == pytest.approx((1 / 30.0) / 3e-12, rel=1e-9)
    # the transformed 30-ohm environment couples more strongly than bare 50 ohm
    assert kappa > coupling_rate(device.without_chain(50.0), 9.4e9, 0.0)


def test_coupling_rate_proportional_to_conductance():
    a = DeviceModel().without_chain(50.0)
    b = DeviceModel().without_chain(25.0)
    assert coupling_rate(b, 9e9, 0.0) == pytest.approx(2 * coupling_rate(a, 9e9, 0.0), rel=1e-12)


def test_series_mapping_examples():
    lj = josephson_inductance(SquidParams(), 0.0)
    dev = DeviceModel(l_stray=95.56e-12 - lj).without_chain(50.0)
    kappa = series_coupling_rate(dev, 9.4e9, 0.0)
    assert kappa == pytest.approx(5.232e11, rel=1e-3)
    half = DeviceModel(l_stray=95.56e-12 - lj).without_chain(25.0)
    assert series_coupling_rate(half, 9.4e9, 0.0) == pytest.approx(kappa / 2, rel=1e-12)
    thirty = DeviceModel(l_stray=95.56e-12 - lj).without_chain(30.0)
    assert series_coupling_rate(thirty, 9.4e9, 0.0) < kappa


# --- small-signal gain ---------------------------------------------------------------------


def test_pump_off_is_unity(device, grid, f0):
    prof = small_signal_gain(device, 0.0, PumpSettings(2 * f0, 0.0), grid)
    assert np.allclose(np.abs(prof.signal_gain), 1.0, atol=1e-12)
    assert np.allclose(prof.gain_db, 0.0, atol=1e-10)


def test_constant_kappa_degenerate_gain(plain):
    f0 = bare_lc_frequency(plain.total_inductance(0.0), plain.c_p)
    kappa = coupling_rate(plain, f0, 0.0)
    x = 0.9045
    prof = small_signal_gain(plain, 0.0, PumpSettings(2 * f0, x * kappa / 2), [f0])
    assert abs(prof.signal_gain[0]) == pytest.approx(degenerate_gain(x), rel=1e-9)
    assert abs(prof.signal_gain[0]) == pytest.approx(10.0, rel=1e-3)


def _mode(device, f):
    y = total_admittance(device, f, 0.0)
    return y.real / device.c_p, y.imag / (2 * device.c_p)


def test_gain_matches_direct_solve(device, grid, f0):
    pump = PumpSettings(2 * f0 + 3e7, 3.1e9, 0.7)
    prof = small_signal_gain(device, 0.0, pump, grid)
    ks, ds = _mode(device, grid)
    ki, di = _mode(device, pump.f_pump - grid)
    gs, gi = direct_gains(ks, ds, ki, di, pump.strength * np.exp(1j * pump.phase))
    assert np.allclose(prof.signal_gain, gs, rtol=1e-10, atol=1e-12)
    assert np.allclose(np.abs(prof.idler_gain), np.abs(gi), rtol=1e-10, atol=1e-12)


def test_photon_conservation_random_pumps(device, f0):
    grid = np.linspace(f0 - 1.5e9, f0 + 1.5e9, 1001)
    rng = np.random.default_rng(2024)
    for _ in range(20):
        f_pump = 2 * f0 + rng.uniform(-2e8, 2e8)
        thr = oscillation_threshold(device, 0.0, f_pump, grid)
        pump = PumpSettings(f_pump, rng.uniform(0, 0.98) * thr, rng.uniform(-math.pi, math.pi))
        prof = small_signal_gain(device, 0.0, pump, grid)
        err = np.abs(prof.signal_gain) ** 2 - np.abs(prof.idler_gain) ** 2 - 1
        assert np.max(np.abs(err)) < 1e-9


def test_threshold_raises(device, grid, f0):
    thr = oscillation_threshold(device, 0.0, 2 * f0, grid)
    with pytest.raises(ThresholdError):
        small_signal_gain(device, 0.0, PumpSettings(2 * f0, thr), grid)
    with pytest.raises(ThresholdError):
        small_signal_gain(device, 0.0, PumpSettings(2 * f0, 1.2 * thr), grid)


def test_idler_must_be_positive(device):
    with pytest.raises(DomainError):
        small_signal_gain(device, 0.0, PumpSettings(10e9, 1e8), [11e9])


def test_gain_diverges_monotonically_toward_threshold(plain):
    f0 = bare_lc_frequency(plain.total_inductance(0.0), plain.c_p)
    kappa = coupling_rate(plain, f0, 0.0)
    ladder = np.array([0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999]) * kappa / 2
    gains = [abs(small_signal_gain(plain, 0.0, PumpSettings(2 * f0, s), [f0]).signal_gain[0]) for s in ladder]
    assert np.all(np.diff(gains) > 0)
    assert gains[-1] == pytest.approx(degenerate_gain(0.999), rel=1e-9)
    assert gains[-1] > 999


def test_bimodal_with_chain(tuned, device, grid):
    prof = small_signal_gain(device, 0.0, tuned.pump, grid)
    assert prof.local_maxima() >= 2


def test_single_peak_without_chain(plain):
    f0 = resonant_frequency(plain, 0.0)
    grid = np.linspace(f0 - 1.5e9, f0 + 1.5e9, 1201)
    res = tune_pump(plain, 0.0, 16.5, (grid[0], grid[-1]))
    assert small_signal_gain(plain, 0.0, res.pump, grid).local_maxima() == 1


def test_thirty_ohm_half_section_chain_stays_unimodal():
    dev = DeviceModel(chain=default_chain(9.4e9, z_half=30.0))
    dev = replace(dev, l_stray=calibrate_stray(dev, 9.4e9))
    f0 = resonant_frequency(dev, 0.0)
    grid = np.linspace(f0 - 1.5e9, f0 + 1.5e9, 1201)
    s = strength_for_peak_gain(dev, 0.0, 2 * f0, 16.5, grid)
    assert small_signal_gain(dev, 0.0, PumpSettings(2 * f0, s), grid).local_maxima() == 1


# --- bandwidth ---------------------------------------------------------------------------


def _profile(f, g_db):
    amp = 10 ** (np.asarray(g_db) / 20)
    return GainProfile(f, amp, np.sqrt(amp**2 - 1 + 0j))


def test_bandwidth_uniform():
    f = np.linspace(8e9, 10e9, 101)
    assert bandwidth_above(_profile(f, np.full(101, 12.0)), 10) == pytest.approx(2e9)
    assert bandwidth_above(_profile(f, np.full(101, 5.0)), 10) == 0.0


def test_bandwidth_lorentzian():
    f0, w, g0 = 9e9, 100e6, 10 ** 2.0  # 20 dB power gain
    f = np.linspace(f0 - 1e9, f0 + 1e9, 20001)
    power = g0 / (1 + ((f - f0) / w) ** 2)
    prof = _profile(f, 10 * np.log10(power))
    assert bandwidth_above(prof, 10) == pytest.approx(lorentzian_width(g0, 10.0, w), rel=1e-3)


def test_bandwidth_sums_disjoint_intervals():
    f = np.linspace(0, 10, 11)
    g = np.array([0, 20, 20, 0, 0, 0, 20, 20, 20, 0, 0.0])
    # crossings at the midpoints of the rising/falling steps: 2 + 3 GHz-equivalent units
    assert bandwidth_above(_profile(f, g), 10) == pytest.approx(2.0 + 3.0)


# --- Kerr / Duffing ------------------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(
    st.floats(0.1, 10), st.floats(-20, 20), st.floats(-50, 50), st.floats(-100, 100),
)
def test_cubic_roots_match_polynomial_solver(a, b, c, d):
    ours = real_cubic_roots(a, b, c, d)
    ref = cubic_roots(a, b, c, d)
    if ours.size != ref.size:
        # near-double roots may split either way; the values must still be roots
        assert np.all(np.abs(np.polyval([a, b, c, d], ours)) < 1e-6 * max(1, abs(d)))
        return
    assert np.allclose(ours, ref, rtol=1e-7, atol=1e-7)


def test_kerr_zero_is_linear(device, operating):
    pump, f_s = operating
    for p_dbm in (-140, -110, -80):
        st_ = duffing_steady_state(device, 0.0, pump, KerrModel(0.0), p_dbm, f_s)
        a, b, c = kerr_cubic(device, 0.0, pump, KerrModel(0.0), f_s)
        flux_in = db_to_watts(p_dbm) / (HBAR * 2 * math.pi * f_s)
        assert a == 0 and b == 0
        assert st_.photons == pytest.approx(flux_in / c, rel=1e-12)


def test_small_signal_limit(device, operating, f0):
    pump, f_s = operating
    kerr = default_kerr(device, 0.0, f0)
    p1 = saturation_power(device, 0.0, pump, kerr, f_s)
    st_ = duffing_steady_state(device, 0.0, pump, kerr, p1 - 30, f_s)
    linear = duffing_steady_state(device, 0.0, pump, KerrModel(0.0), p1 - 30, f_s)
    assert st_.amplitude == pytest.approx(linear.amplitude, rel=0.01)


def test_bistable_branch_is_low_root(device, f0):
    kerr = default_kerr(device, 0.0, f0)
    pump = PumpSettings(2 * f0, 0.0)
    f_s = f0 - 1.4e9
    state = duffing_steady_state(device, 0.0, pump, kerr, -74.0, f_s)
    assert state.tristable
    a, b, c = kerr_cubic(device, 0.0, pump, kerr, f_s)
    flux_in = db_to_watts(-74.0) / (HBAR * 2 * math.pi * f_s)
    ref = cubic_roots(a, b, c, -flux_in)
    assert ref.size == 3
    assert np.allclose(state.roots, ref, rtol=1e-9)
    assert state.photons == pytest.approx(ref.min(), rel=1e-9)
    upper = duffing_steady_state(device, 0.0, pump, kerr, -74.0, f_s, previous=ref.max() * 1.01)
    assert upper.photons == pytest.approx(ref.max(), rel=1e-9)


def test_far_tail_drive_still_solvable(device, operating, f0):
    pump, _ = operating
    kerr = default_kerr(device, 0.0, f0)
    state = duffing_steady_state(device, 0.0, pump, kerr, -60.0, f0 - 1.4e9)
    assert state.photons > 0


def test_default_kerr_value(device, f0):
    kerr = default_kerr(device, 0.0, f0)
    lj = josephson_inductance(device.squid, 0.0)
    p = lj / (lj + device.l_stray)
    e = 1.602176634e-19
    assert kerr.kerr_per_photon == pytest.approx(-(e**2 / (2 * HBAR * 3e-12)) * p**3, rel=1e-9)
    assert kerr.photon_energy == pytest.approx(HBAR * 2 * math.pi * f0, rel=1e-12)


def test_saturation_undefined_and_disabled(device, f0, grid):
    kerr = default_kerr(device, 0.0, f0)
    weak = PumpSettings(2 * f0, 1e8)
    with pytest.raises(DomainError):
        saturation_power(device, 0.0, weak, kerr, f0)
    pump = PumpSettings(2 * f0, strength_for_peak_gain(device, 0.0, 2 * f0, 16.5, grid))
    assert saturation_power(device, 0.0, pump, KerrModel(0.0), f0) is None


def test_saturation_kerr_doubling(device, operating, f0):
    pump, f_s = operating
    kerr = default_kerr(device, 0.0, f0)
    p1 = saturation_power(device, 0.0, pump, kerr, f_s)
    p2 = saturation_power(device, 0.0, pump, KerrModel(2 * kerr.kerr_per_photon), f_s)
    assert p1 - p2 == pytest.approx(3.0103, abs=0.3)


def test_saturation_decreases_with_gain(device, f0, grid):
    kerr = default_kerr(device, 0.0, f0)
    p1db = []
    for target in (14.0, 16.5, 19.0):
        pump = PumpSettings(2 * f0, strength_for_peak_gain(device, 0.0, 2 * f0, target, grid))
        prof = small_signal_gain(device, 0.0, pump, grid)
        p1db.append(saturation_power(device, 0.0, pump, kerr, float(grid[np.argmax(prof.gain_db)])))
    assert p1db[0] > p1db[1] > p1db[2]


# --- pump tuning ---------------------------------------------------------------------------


def test_tune_target_zero(device, band):
    res = tune_pump(device, 0.0, 0.0, band, points=401)
    assert res.pump.strength == 0.0
    assert res.evaluations == 1


def test_tune_reaches_target(tuned):
    assert not tuned.unreachable
    assert tuned.peak_gain_db >= 16.5
    assert tuned.bandwidth > 0


def test_tune_is_deterministic(device, band, tuned):
    again = tune_pump(device, 0.0, 16.5, band, points=1201)
    assert again.pump == tuned.pump
    assert again.bandwidth == tuned.bandwidth


def test_tune_peak_monotone_in_strength(device, band):
    results = [tune_pump(device, 0.0, t, band, points=601) for t in (5.0, 10.0, 15.0)]
    order = np.argsort([r.pump.strength for r in results])
    peaks = np.array([results[k].peak_gain_db for k in order])
    assert np.all(np.diff(peaks) >= 0)


def test_tune_negative_target_rejected(device, band):
    with pytest.raises(DomainError):
        tune_pump(device, 0.0, -1.0, band)


def test_tune_unreachable_flagged(device, f0):
    # a band far below the resonance cannot reach 16.5 dB before oscillation
    band = (f0 - 3.0e9, f0 - 2.5e9)
    res = tune_pump(device, 0.0, 16.5, band, points=201, rounds=1)
    assert res.unreachable
