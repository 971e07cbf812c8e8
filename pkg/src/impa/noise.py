"""Noise bookkeeping for the amplification chain.

Constants are the exact SI values; temperature and photon number are related
linearly, so one photon at frequency f corresponds to T = h f / k_B.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

H_PLANCK = 6.62607015e-34  # J s
K_BOLTZMANN = 1.380649e-23  # J/K


@dataclass(frozen=True)
class AmplChain:
    g_p: float  # IMPA power gain, linear
    g_i: float  # insertion factor, enters squared
    g_a: float  # post-amplifier gain, linear
    t_h: float  # hot reference temperature, K

    def __post_init__(self):
        for name in ("g_p", "g_i", "g_a", "t_h"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class EfficiencyEstimate:
    n_noise: float
    eta: float

    @classmethod
    def from_noise(cls, n_noise):
        return cls(float(n_noise), float(efficiency_from_noise(n_noise)))


def quantum_limit_temperature(f):
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise DomainError("frequency must be non-negative")
    out = H_PLANCK * f / K_BOLTZMANN
    return out[()] if out.ndim == 0 else out


def system_noise_temperature(y, chain: AmplChain):
    """Y-factor estimate T_sys = (Y - 1) / (G_p G_i^2 G_a) * T_H."""
    if y < 1:
        raise DomainError(f"Y-factor must be >= 1, got {y}")
    return (y - 1.0) / (chain.g_p * chain.g_i**2 * chain.g_a) * chain.t_h


def noise_photons_from_temperature(t_sys, f):
    t_sys = np.asarray(t_sys, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise DomainError("frequency must be positive")
    if np.any(t_sys < 0):
        raise DomainError("temperature must be non-negative")
    out = K_BOLTZMANN * t_sys / (H_PLANCK * f)
    return out[()] if out.ndim == 0 else out


def temperature_from_noise_photons(n, f):
    return np.asarray(n, dtype=float) * quantum_limit_temperature(f)


def efficiency_from_noise(n_noise):
    n = np.asarray(n_noise, dtype=float)
    if np.any(n < 0):
        raise DomainError("noise photon number must be non-negative")
    out = 1.0 / (1.0 + n)
    return out[()] if out.ndim == 0 else out
