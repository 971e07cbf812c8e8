"""Dispersive readout: pulled resonator frequencies, single-shot I/Q clouds,
state discrimination figures, coherence fits and tomography-repetition scatter.

Noise is in vacuum units (variance 1/2 per quadrature). Efficiency scales the
pointer-state separation by sqrt(eta); the noise stays fixed.

Random numbers come from numpy's PCG64 generator. Batched simulations give
each batch its own stream spawned from ``(seed, batch_index)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy.optimize import least_squares
from scipy.special import erf

from .errors import DomainError, FitError, ImpaError, NoDecayError

VACUUM_VARIANCE = 0.5
RNG_ALGORITHM = "PCG64"


def make_rng(seed, *stream):
    """PCG64 generator for ``seed``, optionally on a spawned substream."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class DispersiveModel:
    f_q: float
    f_r: float
    chi: float
    g_coupling: float
    kappa_r: float = 0.0
    separation: float = 0.0
    shots: int = 3000

    def __post_init__(self):
        if abs(self.f_q - self.f_r) < 10 * self.g_coupling:
            raise DomainError(
                "dispersive regime requires |f_q - f_r| >= 10 g "
                f"(got {abs(self.f_q - self.f_r):.4g} Hz vs g = {self.g_coupling:.4g} Hz)"
            )
        for name in ("chi", "kappa_r", "separation"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if self.shots < 2:
            raise DomainError("need at least 2 shots per state")


@dataclass
class IQCloudSet:
    samples0: np.ndarray  # (N0, 2)
    samples1: np.ndarray  # (N1, 2)

    def __post_init__(self):
        self.samples0 = np.asarray(self.samples0, dtype=float).reshape(-1, 2)
        self.samples1 = np.asarray(self.samples1, dtype=float).reshape(-1, 2)
        if len(self.samples0) == 0 or len(self.samples1) == 0:
            raise DomainError("both clouds need samples")

    @property
    def means(self):
        return self.samples0.mean(axis=0), self.samples1.mean(axis=0)

    @property
    def covariances(self):
        return np.cov(self.samples0, rowvar=False), np.cov(self.samples1, rowvar=False)

    @property
    def projection_axis(self):
        m0, m1 = self.means
        diff = m1 - m0
        norm = np.hypot(*diff)
        if norm == 0:
            return None
        return diff / norm

    def projected(self):
        axis = self.projection_axis
        if axis is None:
            raise ImpaError("cloud means coincide; projection axis undefined")
        return self.samples0 @ axis, self.samples1 @ axis

    def transformed(self, rotation=0.0, scale=1.0, offset=(0.0, 0.0)):
        """Copy rotated by ``rotation`` rad, scaled, then shifted."""
        c, s = math.cos(rotation), math.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        off = np.asarray(offset, dtype=float)
        return IQCloudSet(scale * self.samples0 @ rot.T + off, scale * self.samples1 @ rot.T + off)


def pulled_frequencies(model: DispersiveModel):
    """Resonator frequency for the qubit in |0> (sigma_z = -1) and |1> (sigma_z = +1)."""
    return model.f_r - model.chi, model.f_r + model.chi


def simulate_clouds(model: DispersiveModel, eta, seed) -> IQCloudSet:
    if not 0 < eta <= 1:
        raise DomainError(f"efficiency must lie in (0, 1], got {eta}")
    half = 0.5 * math.sqrt(eta) * model.separation
    sigma = math.sqrt(VACUUM_VARIANCE)
    rng0, rng1 = make_rng(seed, 0), make_rng(seed, 1)
    s0 = rng0.normal(0.0, sigma, size=(model.shots, 2))
    s1 = rng1.normal(0.0, sigma, size=(model.shots, 2))
    s0[:, 0] -= half
    s1[:, 0] += half
    return IQCloudSet(s0, s1)


def snr(clouds: IQCloudSet) -> float:
    """Projected mean separation over the RMS of the two projected spreads."""
    if clouds.projection_axis is None:
        warnings.warn("identical cloud means; SNR reported as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    p0, p1 = clouds.projected()
    spread = math.sqrt(0.5 * (p0.var(ddof=1) + p1.var(ddof=1)))
    return float(abs(p1.mean() - p0.mean()) / spread)


def visibility(clouds: IQCloudSet) -> float:
    """max_t [P(0 | 0; t) + P(1 | 1; t) - 1] from empirical CDFs along the projection axis."""
    if clouds.projection_axis is None:
        warnings.warn("identical cloud means; visibility reported as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    p0, p1 = clouds.projected()
    values = np.concatenate([p0, p1])
    labels = np.concatenate([np.zeros(p0.size), np.ones(p1.size)])
    order = np.argsort(values, kind="mergesort")
    values, labels = values[order], labels[order]
    cdf0 = np.cumsum(labels == 0) / p0.size
    cdf1 = np.cumsum(labels == 1) / p1.size
    # thresholds only between distinct values
    last = np.concatenate([values[1:] != values[:-1], [True]])
    best = np.max(cdf0[last] - cdf1[last])
    return float(max(best, 0.0))


def expected_snr(separation, eta):
    return math.sqrt(eta) * separation / math.sqrt(VACUUM_VARIANCE)


def expected_visibility(separation, eta):
    return float(erf(expected_snr(separation, eta) / (2 * math.sqrt(2))))


def calibrate_separation(target_snr, eta):
    """Pointer separation whose expected SNR at efficiency ``eta`` is ``target_snr``."""
    if target_snr < 0:
        raise DomainError("target SNR must be non-negative")
    if not 0 < eta <= 1:
        raise DomainError(f"efficiency must lie in (0, 1], got {eta}")
    return target_snr * math.sqrt(VACUUM_VARIANCE) / math.sqrt(eta)


def efficiency_for_snr(target_snr, separation):
    """Inverse of :func:`expected_snr` in eta."""
    return (target_snr * math.sqrt(VACUUM_VARIANCE) / separation) ** 2


# --- coherence fits ----------------------------------------------------------


@dataclass
class CoherenceFit:
    kind: str  # "t1" or "t2"
    time: float  # T1 or T2, s
    amplitude: float
    offset: float
    frequency: float = 0.0
    phase: float = 0.0
    residual_norm: float = 0.0
    fallback: bool = False
    params: np.ndarray = field(default=None, repr=False)

    @property
    def t1(self):
        return self.time if self.kind == "t1" else None

    @property
    def t2(self):
        return self.time if self.kind == "t2" else None


def exp_model(p, t):
    a, tau, b = p
    with np.errstate(over="ignore"):
        return a * np.exp(-t / tau) + b


def exp_jacobian(p, t):
    a, tau, _ = p
    with np.errstate(over="ignore"):
        e = np.exp(-t / tau)
    return np.column_stack([e, a * t * e / tau**2, np.ones_like(t)])


def ramsey_model(p, t):
    a, tau, f, phi, b = p
    with np.errstate(over="ignore", invalid="ignore"):
        return a * np.exp(-t / tau) * np.cos(2 * np.pi * f * t + phi) + b


def ramsey_jacobian(p, t):
    a, tau, f, phi, _ = p
    with np.errstate(over="ignore"):
        e = np.exp(-t / tau)
    arg = 2 * np.pi * f * t + phi
    c, s = np.cos(arg), np.sin(arg)
    return np.column_stack([
        e * c,
        a * t * e * c / tau**2,
        -a * e * s * 2 * np.pi * t,
        -a * e * s,
        np.ones_like(t),
    ])


def _prepare(times, values, minimum):
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitError("times and values must be 1-D arrays of equal length")
    if t.size < minimum:
        raise FitError(f"need at least {minimum} points, got {t.size}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise FitError("non-finite samples")
    order = np.argsort(t)
    return t[order], y[order]


def _scaled_lm(model, jac, p0, t, y, scale, max_nfev=2000):
    """Levenberg-Marquardt on parameters divided by ``scale`` (keeps them O(1))."""
    y_scale = max(np.ptp(y), np.max(np.abs(y)), 1e-300)

    def res(q):
        return (model(q * scale, t) - y) / y_scale

    def jq(q):
        return jac(q * scale, t) * scale / y_scale

    sol = least_squares(res, p0 / scale, jac=jq, method="lm", xtol=1e-12, ftol=1e-12, gtol=1e-12,
                        max_nfev=max_nfev)
    return sol.x * scale, np.linalg.norm(sol.fun) * y_scale, sol


def fit_exponential(times, values, max_nfev=2000) -> CoherenceFit:
    """Fit A exp(-t/T1) + B; ``max_nfev`` bounds each Levenberg-Marquardt run."""
    t, y = _prepare(times, values, 4)
    span = t[-1] - t[0]
    if span <= 0 or np.ptp(y) <= 1e-12 * max(np.max(np.abs(y)), 1e-300):
        raise NoDecayError("constant data: no decay to fit")
    b0 = y[-1]
    a0 = y[0] - b0
    # log-linear seed from the points still clearly above the tail
    z = (y - b0) / a0
    ok = z > 0.05
    if ok.sum() >= 2:
        slope = np.polyfit(t[ok], np.log(z[ok]), 1)[0]
        tau0 = -1.0 / slope if slope < 0 else span / 3
    else:
        tau0 = span / 3
    best = None
    for tau_seed in (tau0, span / 5, span / 2, span):
        p0 = np.array([a0, tau_seed, b0])
        scale = np.array([abs(a0) or 1.0, span, max(abs(b0), abs(a0), 1e-300)])
        p, rnorm, sol = _scaled_lm(exp_model, exp_jacobian, p0, t, y, scale, max_nfev)
        if best is None or rnorm < best[1]:
            best = (p, rnorm, sol)
    p, rnorm, sol = best
    if not np.all(np.isfinite(p)):
        raise FitError("exponential fit diverged", {"message": sol.message})
    if p[1] <= 0:
        raise NoDecayError("data grows with time; no decaying exponential")
    if p[1] > 1e3 * span:
        raise NoDecayError("decay constant far exceeds the record length; no decay resolved")
    return CoherenceFit("t1", float(p[1]), float(p[0]), float(p[2]), residual_norm=float(rnorm),
                        params=p)


def dominant_frequency(times, values, oversample=8):
    """Periodogram peak (Hz) of the detrended record and its peak-to-median power ratio."""
    t, y = np.asarray(times, float), np.asarray(values, float)
    n = t.size
    dt = np.median(np.diff(t))
    uniform = np.allclose(np.diff(t), dt, rtol=1e-6, atol=0)
    y = y - y.mean()
    f_max = 0.5 / dt
    freqs = np.linspace(0, f_max, oversample * n // 2 + 1)[1:]
    if uniform:
        spec = np.abs(np.fft.rfft(y, n=oversample * n)) ** 2
        fr = np.fft.rfftfreq(oversample * n, dt)
        freqs, spec = fr[1:], spec[1:]
    else:
        from scipy.signal import lombscargle
        spec = lombscargle(t, y, 2 * np.pi * freqs)
    k = int(np.argmax(spec))
    ratio = spec[k] / max(np.median(spec), 1e-300)
    return float(freqs[k]), float(ratio)


OSCILLATION_POWER_RATIO = 50.0
TREND_NFEV = 200  # an oscillating record never settles on a pure exponential


def fit_ramsey(times, values) -> CoherenceFit:
    """Fit A exp(-t/T2) cos(2 pi f t + phi) + B, seeding f from a periodogram.

    Records without a detectable oscillation are fitted with
    :func:`fit_exponential` instead and returned with ``fallback=True``.
    """
    t, y = _prepare(times, values, 8)
    span = t[-1] - t[0]
    if np.ptp(y) <= 1e-12 * max(np.max(np.abs(y)), 1e-300):
        raise NoDecayError("constant data: no decay to fit")
    # strip any plain exponential trend before looking for an oscillation
    try:
        trend = fit_exponential(t, y, max_nfev=TREND_NFEV)
        resid = y - exp_model(trend.params, t)
    except FitError:
        trend, resid = None, y - y.mean()
    f_guess, ratio = dominant_frequency(t, resid)
    cycles = f_guess * span
    oscillating = ratio >= OSCILLATION_POWER_RATIO and cycles >= 1.0
    if trend is not None and np.ptp(resid) < 1e-6 * np.ptp(y):
        oscillating = False
    if not oscillating:
        if trend is None:
            raise NoDecayError("no oscillation and no decay detected")
        trend.kind = "t2"
        trend.fallback = True
        return trend

    best = None
    for tau_seed in (span / 4, span / 2, span, span / 8):
        env = np.exp(-t / tau_seed)
        arg = 2 * np.pi * f_guess * t
        design = np.column_stack([env * np.cos(arg), -env * np.sin(arg), np.ones_like(t)])
        (cc, ss, b0), *_ = np.linalg.lstsq(design, y, rcond=None)
        a0 = math.hypot(cc, ss)
        phi0 = math.atan2(ss, cc)
        p0 = np.array([a0, tau_seed, f_guess, phi0, b0])
        scale = np.array([a0 or 1.0, span, f_guess, 1.0, max(abs(b0), a0, 1e-300)])
        p, rnorm, sol = _scaled_lm(ramsey_model, ramsey_jacobian, p0, t, y, scale)
        if np.all(np.isfinite(p)) and p[1] > 0 and (best is None or rnorm < best[1]):
            best = (p, rnorm)
    if best is None:
        raise FitError("Ramsey fit did not converge to a decaying solution")
    p, rnorm = best
    a, tau, f, phi, b = p
    if a < 0:
        a, phi = -a, phi + np.pi
    if f < 0:
        f, phi = -f, -phi
    phi = (phi + np.pi) % (2 * np.pi) - np.pi
    return CoherenceFit("t2", float(tau), float(a), float(b), float(f), float(phi),
                        residual_norm=float(rnorm), params=np.array([a, tau, f, phi, b]))


# --- tomography repetition scatter -------------------------------------------

QST_POINTER = 0.5  # <a> of (|0> + |1>)/sqrt(2) emitted into the line


def coefficient_of_variation(estimates):
    est = np.asarray(estimates, dtype=float)
    if np.all(est == est[0]):
        return 0.0
    mean = est.mean()
    std = est.std(ddof=1)
    if std == 0:
        return 0.0
    if abs(mean) <= 3 * std / math.sqrt(est.size):
        raise ImpaError("mean indistinguishable from zero; coefficient of variation undefined")
    return float(std / abs(mean))


def qst_cv(eta, shots_per_batch, batches, seed, pointer=QST_POINTER, chunk=1_000_000):
    """Batch-to-batch coefficient of variation of the in-phase quadrature mean.

    Each batch averages ``shots_per_batch`` single-shot outcomes
    ``sqrt(eta) * pointer + vacuum noise`` on its own random substream.
    """
    if batches < 10:
        raise DomainError("need at least 10 batches")
    if not 0 < eta <= 1:
        raise DomainError(f"efficiency must lie in (0, 1], got {eta}")
    shots_per_batch = int(shots_per_batch)
    mean_signal = math.sqrt(eta) * pointer
    sigma = math.sqrt(VACUUM_VARIANCE)
    estimates = np.empty(batches)
    for k in range(batches):
        rng = make_rng(seed, k)
        total, left = 0.0, shots_per_batch
        while left:
            m = min(left, chunk)
            total += rng.normal(mean_signal, sigma, size=m).sum()
            left -= m
        estimates[k] = total / shots_per_batch
    return coefficient_of_variation(estimates)
