"""Pumped response: parametric gain, bandwidth, Kerr saturation and pump tuning.

The resonator is mapped onto a single mode through the total node admittance
``Y = Y_jpa + Y_env``: ``Y / (2 C_p) = kappa/2 + i*Delta``. The environment's
conductance sets the decay rate and its susceptance adds to the detuning, so
a frequency-dependent environment reshapes the gain profile directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import constants as cst
from scipy.optimize import brentq

from .errors import DomainError, ImpaError, ThresholdError
from .network import environment_impedance
from .squid import DeviceModel, jpa_admittance, josephson_inductance, resonant_frequency

HBAR = cst.hbar
E_CHARGE = cst.e

SWEEP_START_DBM = -150.0
SWEEP_STOP_DBM = -60.0
SWEEP_STEP_DB = 0.25


@dataclass(frozen=True)
class PumpSettings:
    f_pump: float
    strength: float = 0.0  # rad/s
    phase: float = 0.0

    def __post_init__(self):
        if not self.f_pump > 0:
            raise DomainError(f"f_pump must be positive, got {self.f_pump}")
        if not self.strength >= 0:
            raise DomainError(f"strength must be non-negative, got {self.strength}")


@dataclass
class GainProfile:
    freq_grid: np.ndarray
    signal_gain: np.ndarray
    idler_gain: np.ndarray
    pump: PumpSettings | None = None

    @property
    def gain_db(self):
        return 20.0 * np.log10(np.abs(self.signal_gain))

    @property
    def peak_gain_db(self):
        return float(np.max(self.gain_db))

    def local_maxima(self, prominence_db=0.01):
        return count_local_maxima(self.gain_db, prominence_db)


@dataclass(frozen=True)
class KerrModel:
    kerr_per_photon: float  # rad/s per photon
    photon_energy: float = 0.0  # J

    def __post_init__(self):
        if self.kerr_per_photon > 0:
            raise DomainError("Josephson self-Kerr must be negative (or zero to disable)")


def db_to_watts(p_dbm):
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def watts_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)


def count_local_maxima(values, prominence=0.0):
    """Interior local maxima rising at least ``prominence`` above the lower neighbouring dip."""
    y = np.asarray(values, dtype=float)
    if y.size < 3:
        return 0
    # collapse flat runs so a plateau counts once
    y = y[np.concatenate(([True], np.diff(y) != 0))]
    d = np.sign(np.diff(y))
    peaks = np.nonzero((d[:-1] > 0) & (d[1:] < 0))[0] + 1
    count = 0
    for p in peaks:
        left = y[:p][::-1]
        right = y[p + 1:]
        l_stop = np.argmax(left > y[p]) if np.any(left > y[p]) else left.size
        r_stop = np.argmax(right > y[p]) if np.any(right > y[p]) else right.size
        l_dip = left[:l_stop].min() if l_stop else y[p]
        r_dip = right[:r_stop].min() if r_stop else y[p]
        if y[p] - max(l_dip, r_dip) >= prominence:
            count += 1
    return count


# --- linear response ---------------------------------------------------------


def total_admittance(device: DeviceModel, f, flux):
    return jpa_admittance(device, f, flux) + 1.0 / environment_impedance(device.chain, f)


def coupling_rate(device: DeviceModel, f, flux):
    """Decay rate kappa(f) = Re[Y_env(f)] / c_p (rad/s).

    Parallel-RLC mapping of the shunting environment: a lower environment
    impedance couples the resonator more strongly.
    """
    y_env = 1.0 / environment_impedance(device.chain, f)
    if np.any(y_env.real <= 0):
        raise ImpaError("environment has non-positive conductance")
    return y_env.real / device.c_p


def series_coupling_rate(device: DeviceModel, f, flux):
    """Decay rate Re[Z_env(f)] / L_tot (rad/s) of the series-RL mapping.

    Provided for comparison only; the gain model uses :func:`coupling_rate`.
    In this mapping a lower environment impedance gives a *slower* decay,
    which runs against the purpose of the impedance transformer.
    """
    z_env = environment_impedance(device.chain, f)
    if np.any(z_env.real <= 0):
        raise ImpaError("environment has non-positive resistance")
    return z_env.real / device.total_inductance(flux)


def _mode_terms(device, flux, f, shift=0.0):
    """(kappa/2 + i*Delta) at frequency f, with the mode pulled by ``shift`` rad/s."""
    y = total_admittance(device, f, flux)
    kappa = y.real / device.c_p
    delta = y.imag / (2.0 * device.c_p) - shift
    return kappa, delta


def _response(device, flux, pump: PumpSettings, f_s, shift=0.0):
    """Signal/idler gains and intracavity amplitudes per unit input amplitude."""
    f_s = np.asarray(f_s, dtype=float)
    f_i = pump.f_pump - f_s
    if np.any(f_i <= 0):
        raise DomainError("idler frequency must be positive; signal above pump frequency")
    k_s, d_s = _mode_terms(device, flux, f_s, shift)
    k_i, d_i = _mode_terms(device, flux, f_i, shift)
    lam = pump.strength * np.exp(1j * pump.phase)
    m11 = k_s / 2 - 1j * d_s
    m22 = k_i / 2 + 1j * d_i
    m12 = 1j * lam
    m21 = -1j * np.conj(lam)
    det = m11 * m22 - m12 * m21
    if abs(lam) >= oscillation_threshold(device, flux, pump.f_pump, f_s):
        raise ThresholdError(
            f"pump strength {pump.strength:.6g} rad/s at or above the oscillation threshold"
        )
    sq_s, sq_i = np.sqrt(k_s), np.sqrt(k_i)
    a_s = sq_s * m22 / det  # intracavity signal per unit signal input
    a_i = -sq_s * m21 / det  # conjugate idler amplitude
    g_s = 1.0 - sq_s * a_s
    g_i = -sq_i * (-m12 / det) * sq_s
    return g_s, g_i, a_s, a_i


def small_signal_gain(device: DeviceModel, flux, pump: PumpSettings, freq_grid) -> GainProfile:
    freq_grid = np.atleast_1d(np.asarray(freq_grid, dtype=float))
    g_s, g_i, _, _ = _response(device, flux, pump, freq_grid)
    return GainProfile(freq_grid, g_s, g_i, pump)


def _pair_product(device, flux, f_pump, f_s):
    """m11*m22 of the signal/idler system; the system is singular where it equals |lambda|^2."""
    k_s, d_s = _mode_terms(device, flux, f_s)
    k_i, d_i = _mode_terms(device, flux, f_pump - f_s)
    return (k_s / 2 - 1j * d_s) * (k_i / 2 + 1j * d_i)


def oscillation_threshold(device: DeviceModel, flux, f_pump, freq_grid):
    """Smallest strength making the signal/idler system singular at a real frequency.

    The product m11*m22 is real and positive wherever the system can become
    singular; the symmetric point f_s = f_pump/2 always qualifies. Crossings
    of Im(m11*m22) through zero on the grid are located by linear interpolation.
    """
    f = np.atleast_1d(np.asarray(freq_grid, dtype=float))
    f = f[(f > 0) & (f < f_pump)]
    candidates = [np.sqrt(abs(_pair_product(device, flux, f_pump, 0.5 * f_pump)))]
    if f.size:
        prod = np.atleast_1d(_pair_product(device, flux, f_pump, f))
        im = prod.imag
        hit = np.nonzero(im[:-1] * im[1:] <= 0)[0]
        for k in hit:
            a, b = im[k], im[k + 1]
            t = 0.5 if a == b else a / (a - b)
            re = prod[k].real + t * (prod[k + 1].real - prod[k].real)
            if re > 0:
                candidates.append(np.sqrt(re))
    return float(min(candidates))


def threshold_strength(device: DeviceModel, flux, f_pump, freq_grid):
    return oscillation_threshold(device, flux, f_pump, freq_grid)


def strength_for_peak_gain(device: DeviceModel, flux, f_pump, target_db, freq_grid, phase=0.0):
    """Bisect the strength whose profile peaks at ``target_db``."""
    s_thr = threshold_strength(device, flux, f_pump, freq_grid)
    lo, hi = 0.0, s_thr
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        prof = small_signal_gain(device, flux, PumpSettings(f_pump, mid, phase), freq_grid)
        if prof.peak_gain_db < target_db:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * s_thr:
            break
    return hi


def bandwidth_above(profile: GainProfile, threshold_db) -> float:
    """Total frequency measure where gain >= threshold, interpolating at crossings."""
    f = np.asarray(profile.freq_grid, dtype=float)
    g = profile.gain_db - threshold_db
    if f.size == 0:
        raise DomainError("empty profile")
    if f.size == 1:
        return 0.0
    total = 0.0
    for k in range(f.size - 1):
        a, b = g[k], g[k + 1]
        width = f[k + 1] - f[k]
        if a >= 0 and b >= 0:
            total += width
        elif a >= 0 > b:
            total += width * a / (a - b)
        elif b >= 0 > a:
            total += width * b / (b - a)
    return float(total)


# --- Kerr saturation ---------------------------------------------------------


def default_kerr(device: DeviceModel, flux, f=None) -> KerrModel:
    """Leading-order Josephson self-Kerr diluted by the linear inductance participation."""
    l_j = josephson_inductance(device.squid, flux - device.flux_offset)
    p = l_j / (l_j + device.l_stray)
    k = -(E_CHARGE**2 / (2 * HBAR * device.c_p)) * p**3
    if f is None:
        f = resonant_frequency(device, flux)
    return KerrModel(kerr_per_photon=float(k), photon_energy=float(HBAR * 2 * np.pi * f))


def real_cubic_roots(a, b, c, d):
    """Real roots of a x^3 + b x^2 + c x + d, ascending (trigonometric/Cardano form)."""
    if a == 0:
        if b == 0:
            return np.array([-d / c]) if c != 0 else np.array([])
        disc = c * c - 4 * b * d
        if disc < 0:
            return np.array([])
        r = math.sqrt(disc)
        return np.sort(np.array([(-c - r) / (2 * b), (-c + r) / (2 * b)]))
    b, c, d = b / a, c / a, d / a
    # rescale x = s*y so the monic coefficients are of order one
    s = max(abs(b), math.sqrt(abs(c)), abs(d) ** (1.0 / 3.0))
    if s == 0:
        return np.array([0.0])
    return s * _monic_cubic_roots(b / s, c / (s * s), d / s**3)


def _monic_cubic_roots(b, c, d):
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2 * b**3 / 27.0 - b * c / 3.0 + d
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc > 0 or p > 0:
        s = math.sqrt(max(disc, 0.0))
        u = math.copysign(abs(-q / 2 + s) ** (1 / 3), -q / 2 + s)
        v = math.copysign(abs(-q / 2 - s) ** (1 / 3), -q / 2 - s)
        roots = [u + v]
    elif p == 0:
        roots = [0.0]
    else:
        r = 2 * math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, 3 * q / (p * r)))
        phi = math.acos(arg) / 3
        roots = [r * math.cos(phi - 2 * math.pi * k / 3) for k in range(3)]
    roots = np.array(roots) - shift
    # Newton polish, keeping a step only when it reduces the residual
    def poly(x):
        return ((x + b) * x + c) * x + d

    for _ in range(2):
        dval = (3 * roots + 2 * b) * roots + c
        ok = dval != 0
        trial = roots.copy()
        trial[ok] = roots[ok] - poly(roots[ok]) / dval[ok]
        better = np.abs(poly(trial)) < np.abs(poly(roots))
        roots[better] = trial[better]
    return np.sort(roots)


@dataclass
class DuffingState:
    photons: float  # intracavity signal + idler photons
    amplitude: float  # sqrt(photons)
    gain_db: float
    roots: np.ndarray = field(repr=False)
    tristable: bool = False


def _susceptibility(device, flux, pump, f_s, shift):
    _, _, a_s, a_i = _response(device, flux, pump, f_s, shift)
    return float(np.abs(a_s) ** 2 + np.abs(a_i) ** 2)


def kerr_cubic(device, flux, pump: PumpSettings, kerr: KerrModel, f_s):
    """Coefficients of n * q(K n) = flux_in with q the inverse photon susceptibility.

    ``q`` is the quadratic in the mode pull ``delta`` through the exact linear
    response at ``delta`` in {-h, 0, +h}; its reciprocal is a Lorentzian in
    the pull, which makes the steady state a Duffing-type cubic in ``n``.
    Returns ``(a, b, c)`` so that ``a n^3 + b n^2 + c n - flux_in = 0``.
    """
    k_s, _ = _mode_terms(device, flux, f_s)
    h = 1e-3 * float(k_s)
    q_m = 1.0 / _susceptibility(device, flux, pump, f_s, -h)
    q_0 = 1.0 / _susceptibility(device, flux, pump, f_s, 0.0)
    q_p = 1.0 / _susceptibility(device, flux, pump, f_s, h)
    qa = (q_p + q_m - 2 * q_0) / (2 * h * h)
    qb = (q_p - q_m) / (2 * h)
    K = kerr.kerr_per_photon
    return qa * K * K, qb * K, q_0


def _exact_photons(device, flux, pump, kerr, f_s, photon_flux, n_lin):
    """Lowest root of n * q(K n) = flux_in with the exact inverse susceptibility.

    Used where the quadratic model of q is not convex and the cubic loses
    its physical root; the root is bracketed by a geometric scan from the
    linear-response photon number.
    """
    def excess(n):
        return n / _susceptibility(device, flux, pump, f_s, kerr.kerr_per_photon * n) - photon_flux

    lo = 0.0
    n = n_lin
    for _ in range(400):
        if excess(n) >= 0:
            return float(brentq(excess, lo, n, xtol=1e-12 * n, rtol=1e-12))
        lo, n = n, n * 1.25
    raise ImpaError("Kerr steady state: no photon number balances the drive")


def duffing_steady_state(device, flux, pump, kerr: KerrModel, drive_power_dbm, f_s, previous=None):
    """Intracavity photons and signal gain at one input power.

    Among several positive roots the low-amplitude one is returned (the branch
    reached on an upward power sweep) unless ``previous`` photons are given,
    in which case the root nearest to it is followed.
    """
    if not np.isfinite(drive_power_dbm):
        raise DomainError("drive power must be finite")
    photon_flux = float(db_to_watts(drive_power_dbm)) / (HBAR * 2 * np.pi * f_s)
    a, b, c = kerr_cubic(device, flux, pump, kerr, f_s)
    roots = real_cubic_roots(a, b, c, -photon_flux)
    roots = roots[roots > 0]
    if a < 0 or roots.size == 0:
        # quadratic susceptibility model not convex here: solve the exact balance
        roots = np.array([_exact_photons(device, flux, pump, kerr, f_s, photon_flux, photon_flux / c)])
    if previous is None:
        n = float(roots[0])
    else:
        n = float(roots[np.argmin(np.abs(roots - previous))]) if roots.size > 1 else float(roots[0])
    g_s, _, _, _ = _response(device, flux, pump, f_s, kerr.kerr_per_photon * n)
    return DuffingState(
        photons=n,
        amplitude=math.sqrt(n),
        gain_db=float(20 * np.log10(np.abs(g_s))),
        roots=roots,
        tristable=roots.size == 3,
    )


@dataclass
class PowerSweepResult:
    power_dbm: np.ndarray
    gain_db: np.ndarray
    small_signal_db: float
    p1db_dbm: float | None


def gain_vs_power(device, flux, pump, kerr, f_s, start=SWEEP_START_DBM, stop=SWEEP_STOP_DBM,
                  step=SWEEP_STEP_DB):
    powers = np.arange(start, stop + step / 2, step)
    g0 = float(20 * np.log10(np.abs(_response(device, flux, pump, f_s)[0])))
    gains = np.empty_like(powers)
    n_prev = 0.0
    for k, p in enumerate(powers):
        state = duffing_steady_state(device, flux, pump, kerr, p, f_s, previous=n_prev)
        n_prev = state.photons
        gains[k] = state.gain_db
    p1db = _first_drop(powers, gains, g0 - 1.0)
    return PowerSweepResult(powers, gains, g0, p1db)


def _first_drop(powers, gains, level):
    below = np.nonzero(gains <= level)[0]
    if below.size == 0:
        return None
    k = below[0]
    if k == 0:
        return float(powers[0])
    g1, g2 = gains[k - 1], gains[k]
    return float(powers[k - 1] + (level - g1) / (g2 - g1) * (powers[k] - powers[k - 1]))


def saturation_power(device, flux, pump, kerr, f_s):
    """1-dB compression input power (dBm), or None when the sweep never compresses."""
    g0 = float(20 * np.log10(np.abs(_response(device, flux, pump, f_s)[0])))
    if g0 < 2.0:
        raise DomainError(f"small-signal gain {g0:.2f} dB below 2 dB; compression undefined")
    if kerr.kerr_per_photon == 0:
        return None
    return gain_vs_power(device, flux, pump, kerr, f_s).p1db_dbm


# --- pump tuning -------------------------------------------------------------

INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section_max(func, lo, hi, tol, max_iter=200):
    """Maximise a unimodal function on [lo, hi]; returns (x, f(x))."""
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = func(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = func(d)
    return (c, fc) if fc >= fd else (d, fd)


@dataclass
class TuneResult:
    pump: PumpSettings
    bandwidth: float
    peak_gain_db: float
    unreachable: bool = False
    evaluations: int = 0


def tune_pump(device: DeviceModel, flux, target_gain_db, band, points=1201,
              ripple_db=1.0, pump_span=1e9, rounds=4):
    """Coordinate descent over (f_pump, strength) maximising bandwidth above target.

    Settings whose peak exceeds ``target_gain_db + ripple_db`` are infeasible,
    so the search trades surplus peak gain for bandwidth instead of running to
    the oscillation threshold. Starts from strength 0 at f_pump = 2 f0.
    """
    if target_gain_db < 0:
        raise DomainError("target gain must be non-negative")
    grid = np.linspace(band[0], band[1], points)
    f0 = resonant_frequency(device, flux)
    ceiling = target_gain_db + ripple_db
    calls = 0

    def score(f_pump, strength):
        nonlocal calls
        calls += 1
        try:
            prof = small_signal_gain(device, flux, PumpSettings(f_pump, strength), grid)
        except ThresholdError:
            return -1e12, None
        peak = prof.peak_gain_db
        if peak > ceiling:
            return -1e6 * (peak - ceiling), prof
        if peak < target_gain_db:
            return -1e6 * (target_gain_db - peak), prof
        return bandwidth_above(prof, target_gain_db), prof

    f_pump, strength = 2.0 * f0, 0.0
    best, _ = score(f_pump, strength)
    if best >= 0:
        # already meets the target without pumping
        return TuneResult(PumpSettings(f_pump, 0.0), best, 0.0, False, calls)

    k_max = float(np.max(coupling_rate(device, grid, flux)))
    for _ in range(rounds):
        s_new, v = golden_section_max(lambda s: score(f_pump, s)[0], 0.0, k_max, 1e-7 * k_max)
        if v >= best:
            strength, best = s_new, v
        fp_new, v = golden_section_max(
            lambda fp: score(fp, strength)[0], f_pump - pump_span, f_pump + pump_span, 1e3
        )
        if v >= best:
            f_pump, best = fp_new, v
    final, prof = score(f_pump, strength)
    peak = prof.peak_gain_db if prof is not None else float("nan")
    return TuneResult(
        PumpSettings(f_pump, strength),
        bandwidth=max(final, 0.0),
        peak_gain_db=peak,
        unreachable=not (final >= 0),
        evaluations=calls,
    )
