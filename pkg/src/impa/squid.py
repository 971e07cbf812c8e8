"""Flux-tunable SQUID resonator, pump off.

Flux is a plain float in units of the flux quantum. The device's
``flux_offset`` marks the bias of maximal critical current; the SQUID
modulation is evaluated at ``flux - flux_offset``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import bisect, least_squares

from .errors import (
    DivergenceError,
    DomainError,
    FitError,
    InfeasibleError,
    NoResonanceError,
    PoleError,
)
from .network import (
    TransformerChain,
    TransmissionLineSection,
    TwoPortABCD,
    chain_abcd,
    default_chain,
    input_impedance,
    input_impedance_from_admittance,
    reflection,
)

FLUX_QUANTUM = 2.067833848e-15  # Wb

C_P_DEFAULT = 3e-12
I_C_DEFAULT = 11.1e-6
F_MAX_DEFAULT = 9.4e9

SEARCH_BAND = (1e9, 40e9)
SEARCH_POINTS = 3901
FREQ_XTOL = 1e3  # Hz
CALIBRATION_TOL = 1e6  # Hz
COS_GUARD = 1e-9
POLE_GUARD = 1e-12  # |1 - w^2 L C| treated as an exact antiresonance


@dataclass(frozen=True)
class SquidParams:
    i_c_total: float = I_C_DEFAULT
    flux_quantum: float = FLUX_QUANTUM

    def __post_init__(self):
        if not self.i_c_total > 0:
            raise DomainError(f"i_c_total must be positive, got {self.i_c_total}")


@dataclass(frozen=True)
class DeviceModel:
    squid: SquidParams = field(default_factory=SquidParams)
    c_p: float = C_P_DEFAULT
    l_stray: float = 0.0
    chain: TransformerChain = field(default_factory=lambda: default_chain(F_MAX_DEFAULT))
    flux_offset: float = 0.0

    def __post_init__(self):
        if not self.c_p > 0:
            raise DomainError(f"c_p must be positive, got {self.c_p}")
        if not self.l_stray >= 0:
            raise DomainError(f"l_stray must be non-negative, got {self.l_stray}")

    def total_inductance(self, flux):
        return self.l_stray + josephson_inductance(self.squid, np.asarray(flux) - self.flux_offset)

    def without_chain(self, z_env=50.0):
        """Same device shunted by a constant real impedance.

        A line matched to its own reference transforms nothing, so the JPA sees
        exactly ``z_env`` at every frequency.
        """
        f_design = self.chain.sections[0].f_design
        matched = TransformerChain((TransmissionLineSection(z_env, f_design, 0.25),), z_ref=z_env)
        return replace(self, chain=matched)


@dataclass
class PhaseMap:
    flux_grid: np.ndarray
    freq_grid: np.ndarray
    phase: np.ndarray  # shape (len(flux_grid), len(freq_grid))


def josephson_inductance(squid: SquidParams, flux):
    """Symmetric-SQUID inductance Phi0 / (2 pi Ic |cos(pi phi)|)."""
    cos = np.abs(np.cos(np.pi * np.asarray(flux, dtype=float)))
    if np.any(cos <= COS_GUARD):
        raise DivergenceError("flux at half-integer: critical current fully suppressed")
    out = squid.flux_quantum / (2.0 * np.pi * squid.i_c_total * cos)
    return out[()] if np.ndim(out) == 0 else out


def _omega(f):
    f = np.asarray(f, dtype=float)
    if np.any(~(f > 0)):
        raise DomainError("frequency must be positive")
    return 2.0 * np.pi * f


def jpa_admittance(device: DeviceModel, f, flux):
    w = _omega(f)
    l_tot = device.total_inductance(flux)
    return 1.0 / (1j * w * l_tot) + 1j * w * device.c_p


def jpa_impedance(device: DeviceModel, f, flux):
    """Inductive branch (stray + Josephson) in parallel with c_p."""
    w = _omega(f)
    l_tot = device.total_inductance(flux)
    den = 1.0 - w**2 * l_tot * device.c_p
    if np.any(np.abs(den) <= POLE_GUARD):
        raise PoleError("evaluation at the LC antiresonance")
    out = np.asarray(1j * w * l_tot / den)
    return out[()] if out.ndim == 0 else out


def _port_net(device: DeviceModel, f) -> TwoPortABCD:
    return chain_abcd(device.chain.sections, f)


def pump_off_reflection(device: DeviceModel, f, flux):
    """Reflection at the external port with the JPA terminating the chain."""
    net = _port_net(device, f)
    z_in = input_impedance_from_admittance(net, jpa_admittance(device, f, flux))
    return reflection(z_in, device.chain.z_ref)


def detuned_reflection(device: DeviceModel, f):
    """Port reflection with the JPA replaced by a short, its far-detuned limit."""
    net = _port_net(device, f)
    return reflection(input_impedance(net, 0.0), device.chain.z_ref)


def relative_phase(device: DeviceModel, f, flux):
    """Unwrapped phase of the port reflection relative to the far-detuned reference.

    Rises or falls by 2 pi across each resonance; the midpoint (an offset of
    pi from the low-frequency value) marks the loaded resonance, where the
    total node admittance is real.
    """
    ratio = pump_off_reflection(device, f, flux) / detuned_reflection(device, f)
    return np.unwrap(np.angle(ratio))


def resonant_frequency(device: DeviceModel, flux, band=SEARCH_BAND, points=SEARCH_POINTS):
    """Loaded resonance from the reflection phase-center crossing, bisected to 1 kHz."""
    flux = float(flux)
    grid = np.linspace(band[0], band[1], points)
    psi = relative_phase(device, grid, flux)
    # the JPA is a short as f -> 0, so the traversal starts at 0 (mod 2 pi)
    psi = psi - 2 * np.pi * np.round(psi[0] / (2 * np.pi))
    idx = np.nonzero(np.abs(psi) >= np.pi)[0]
    if idx.size == 0:
        raise NoResonanceError(
            f"no phase traversal in {band[0]:.4g}-{band[1]:.4g} Hz at flux {flux:.6g}"
        )
    k = idx[0]
    if k == 0:
        raise NoResonanceError("resonance lies below the search band")

    def centred(f):
        ratio = pump_off_reflection(device, f, flux) / detuned_reflection(device, f)
        # zero exactly at the phase center, continuous across it
        return float(np.angle(-ratio))

    return bisect(centred, grid[k - 1], grid[k], xtol=FREQ_XTOL)


def bare_resonance(device: DeviceModel, flux=None):
    """Unloaded LC resonance 1/(2 pi sqrt(L C))."""
    flux = device.flux_offset if flux is None else flux
    return 1.0 / (2.0 * np.pi * np.sqrt(device.total_inductance(flux) * device.c_p))


def calibrate_stray(device: DeviceModel, f_max_target, band=SEARCH_BAND):
    """Stray inductance that places the maximal resonance at ``f_max_target``."""
    zero = replace(device, l_stray=0.0)
    f_top = resonant_frequency(zero, zero.flux_offset, band)
    if f_max_target > f_top + CALIBRATION_TOL:
        raise InfeasibleError(
            f"target {f_max_target:.6g} Hz above the l_stray=0 resonance {f_top:.6g} Hz"
        )
    if f_max_target >= f_top:
        return 0.0

    def miss(l_stray):
        dev = replace(device, l_stray=l_stray)
        return resonant_frequency(dev, dev.flux_offset, band) - f_max_target

    # bare-LC inversion brackets the answer; widen until the sign flips
    l_hi = max(1.0 / ((2 * np.pi * f_max_target) ** 2 * device.c_p), 1e-15)
    for _ in range(60):
        if miss(l_hi) < 0:
            break
        l_hi *= 2.0
    else:
        raise InfeasibleError("could not bracket the stray inductance")
    return bisect(miss, 0.0, l_hi, xtol=1e-18, rtol=1e-12)


def phase_map(device: DeviceModel, flux_grid, freq_grid) -> PhaseMap:
    flux_grid = np.atleast_1d(np.asarray(flux_grid, dtype=float))
    freq_grid = np.atleast_1d(np.asarray(freq_grid, dtype=float))
    if flux_grid.size == 0 or freq_grid.size == 0:
        raise DomainError("phase_map needs non-empty grids")
    rows = [np.unwrap(np.angle(pump_off_reflection(device, freq_grid, phi))) for phi in flux_grid]
    return PhaseMap(flux_grid, freq_grid, np.vstack(rows))


# --- flux-modulation fitting -------------------------------------------------


def _chain_env(chain: TransformerChain, f):
    """Environment admittance seen by the JPA and its frequency derivative."""
    f = np.asarray(f, dtype=float)
    a, b, c, d = 1.0 + 0j, 0j, 0j, 1.0 + 0j
    da = db = dc = dd = 0j
    for s in reversed(chain.sections):
        theta = s.electrical_length(f)
        dtheta = theta / f
        cs, sn = np.cos(theta), np.sin(theta)
        ma, mb, mc, md = cs + 0j, 1j * s.z0 * sn, 1j * sn / s.z0, cs + 0j
        dma, dmb = -sn * dtheta, 1j * s.z0 * cs * dtheta
        dmc, dmd = 1j * cs * dtheta / s.z0, -sn * dtheta
        na, nb = a * ma + b * mc, a * mb + b * md
        nc, nd = c * ma + d * mc, c * mb + d * md
        da, db, dc, dd = (
            da * ma + a * dma + db * mc + b * dmc,
            da * mb + a * dmb + db * md + b * dmd,
            dc * ma + c * dma + dd * mc + d * dmc,
            dc * mb + c * dmb + dd * md + d * dmd,
        )
        a, b, c, d = na, nb, nc, nd
    z = chain.z_ref
    num, den = a * z + b, c * z + d
    dnum, dden = da * z + db, dc * z + dd
    y = den / num
    dy = (dden * num - den * dnum) / num**2
    return y, dy


def loaded_resonance(device: DeviceModel, l_tot, iterations=60, f_start=None):
    """Roots of Im[Y_jpa + Y_env] = 0 by vectorised Newton steps.

    Mathematically the same point as the phase-center crossing used by
    :func:`resonant_frequency`, but cheap enough for least-squares loops.
    Newton starts from ``f_start`` when given, else from the bare LC value.
    """
    l_tot = np.asarray(l_tot, dtype=float)
    c = device.c_p
    f = 1.0 / (2 * np.pi * np.sqrt(l_tot * c)) if f_start is None else np.asarray(f_start, float)
    for _ in range(iterations):
        w = 2 * np.pi * f
        y_env, dy_env = _chain_env(device.chain, f)
        g = w * c - 1.0 / (w * l_tot) + y_env.imag
        dg = 2 * np.pi * (c + 1.0 / (w**2 * l_tot)) + dy_env.imag
        step = g / dg
        f = f - step
        if np.all(np.abs(step) < 1e-3):
            break
    return f


def _resonance_partials(device: DeviceModel, f, l_tot):
    """d f_res / d L_tot at a loaded resonance (implicit differentiation)."""
    w = 2 * np.pi * f
    _, dy_env = _chain_env(device.chain, f)
    dg_df = 2 * np.pi * (device.c_p + 1.0 / (w**2 * l_tot)) + dy_env.imag
    dg_dl = 1.0 / (w * l_tot**2)
    return -dg_dl / dg_df


@dataclass
class FluxFit:
    i_c_est: float
    flux_offset_est: float
    period_est: float
    f_max_est: float
    residual_norm: float
    nfev: int = 0
    jacobian: np.ndarray | None = field(default=None, repr=False)


class FluxModulationModel:
    """Resonance versus flux for fixed c_p, l_stray and chain.

    Parameters are packed as ``p = [i_c in uA, flux_offset, period]``.
    """

    IC_UNIT = 1e-6
    F_UNIT = 1e9

    def __init__(self, device: DeviceModel):
        self.device = device
        self._warm = None  # (l_tot, f_res) of the previous evaluation

    def _resonance(self, l_tot):
        start = None
        if self._warm is not None and self._warm[0].shape == l_tot.shape:
            l_prev, f_prev = self._warm
            start = f_prev * np.sqrt(l_prev / l_tot)
        f = loaded_resonance(self.device, l_tot, f_start=start)
        if not np.all(np.isfinite(f) & (f > 0)):
            f = loaded_resonance(self.device, l_tot)
        self._warm = (l_tot, f)
        return f

    def _inductance(self, p, flux):
        i_c = p[0] * self.IC_UNIT
        u = np.pi * (np.asarray(flux, dtype=float) - p[1]) / p[2]
        cos = np.cos(u)
        if np.any(np.abs(cos) <= COS_GUARD):
            raise DivergenceError("model flux reaches a half-integer point")
        l_j = self.device.squid.flux_quantum / (2 * np.pi * i_c * np.abs(cos))
        return l_j, u

    def __call__(self, p, flux):
        l_j, _ = self._inductance(p, flux)
        return self._resonance(self.device.l_stray + l_j) / self.F_UNIT

    def jacobian(self, p, flux):
        l_j, u = self._inductance(p, flux)
        l_tot = self.device.l_stray + l_j
        f = self._resonance(l_tot)
        df_dl = _resonance_partials(self.device, f, l_tot) / self.F_UNIT
        dl_dic = -l_j / p[0]
        dl_du = l_j * np.tan(u)
        dl_doff = dl_du * (-np.pi / p[2])
        dl_dper = dl_du * (-u / p[2])
        return np.column_stack([df_dl * dl_dic, df_dl * dl_doff, df_dl * dl_dper])


START_OFFSETS = ((0.0, 0.0), (-0.03, 0.0), (0.03, 0.0), (0.0, -0.02), (0.0, 0.02))


def fit_flux_modulation(flux, resonance, device: DeviceModel, period_guess=1.0, max_nfev=200):
    """Least-squares fit of the loaded-resonance curve to (flux, f_res) samples.

    ``device`` supplies the fixed circuit (c_p, l_stray, chain); critical
    current, flux offset and period are estimated.
    """
    flux = np.asarray(flux, dtype=float)
    resonance = np.asarray(resonance, dtype=float)
    if flux.shape != resonance.shape or flux.size < 8:
        raise FitError("need at least 8 (flux, resonance) samples of equal length")
    if np.ptp(flux) < 0.5 * period_guess:
        raise FitError("samples must span at least half a flux period")
    if np.ptp(resonance) <= 1e-9 * np.max(np.abs(resonance)):
        raise FitError("resonance data is constant; modulation is undetermined")

    model = FluxModulationModel(device)
    f_top = resonance.max()
    # invert the bare LC at the maximum for a starting critical current
    l_j0 = 1.0 / ((2 * np.pi * f_top) ** 2 * device.c_p) - device.l_stray
    if l_j0 <= 0:
        l_j0 = 1.0 / ((2 * np.pi * f_top) ** 2 * device.c_p)
    ic0 = device.squid.flux_quantum / (2 * np.pi * l_j0) / model.IC_UNIT
    top = np.argsort(resonance)[-max(3, flux.size // 10):]
    w = resonance[top] - resonance[top].min() + 1e-12
    off0 = float(np.sum(flux[top] * w) / np.sum(w))
    y = resonance / model.F_UNIT

    def residuals(p):
        try:
            return model(p, flux) - y
        except DivergenceError:
            return np.full_like(y, 1e3)

    def jac(p):
        try:
            return model.jacobian(p, flux)
        except DivergenceError:
            return np.zeros((y.size, 3))

    # several starts guard against the steep region next to half-integer flux,
    # where the fit surface has spurious minima; the lowest cost wins
    best = None
    for dper, doff in START_OFFSETS:
        p0 = np.array([ic0, off0 + doff * period_guess, period_guess * (1 + dper)])
        sol = least_squares(
            residuals, p0, jac=jac, method="lm", max_nfev=max_nfev, xtol=1e-14, ftol=1e-14
        )
        if sol.success and (best is None or sol.cost < best.cost):
            best = sol
    if best is None:
        raise FitError(
            "flux-modulation fit did not converge",
            {"message": sol.message, "nfev": sol.nfev, "params": sol.x.tolist()},
        )
    sol = best
    ic, off, per = sol.x
    per = abs(per)
    f_max = float(model(np.array([ic, off, per]), np.array([off]))[0] * model.F_UNIT)
    return FluxFit(
        i_c_est=abs(ic) * model.IC_UNIT,
        flux_offset_est=float(off),
        period_est=float(per),
        f_max_est=f_max,
        residual_norm=float(np.linalg.norm(sol.fun) * model.F_UNIT),
        nfev=int(sol.nfev),
        jacobian=sol.jac,
    )


def calibrated_device(f_max=F_MAX_DEFAULT, **overrides):
    """Default device with l_stray calibrated so the top resonance sits at ``f_max``."""
    dev = DeviceModel(**overrides)
    return replace(dev, l_stray=calibrate_stray(dev, f_max))
