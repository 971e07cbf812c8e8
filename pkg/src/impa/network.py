"""Lossless transmission-line two-port algebra.

All frequency arguments may be scalars or numpy arrays; matrix entries
broadcast accordingly so a whole frequency grid can be evaluated at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, PoleError

Z_REF_DEFAULT = 50.0
Z_TARGET_DEFAULT = 30.0
Z_HALF_DEFAULT = 75.0


@dataclass(frozen=True)
class TransmissionLineSection:
    """Ideal line section whose length is given in wavelengths at ``f_design``."""

    z0: float
    f_design: float
    length_fraction: float

    def __post_init__(self):
        if not self.z0 > 0:
            raise DomainError(f"z0 must be positive, got {self.z0}")
        if not self.f_design > 0:
            raise DomainError(f"f_design must be positive, got {self.f_design}")
        if not self.length_fraction > 0:
            raise DomainError(f"length_fraction must be positive, got {self.length_fraction}")

    def electrical_length(self, f):
        return 2.0 * np.pi * self.length_fraction * np.asarray(f, dtype=float) / self.f_design


@dataclass(frozen=True)
class TwoPortABCD:
    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def identity(cls):
        return cls(1.0 + 0j, 0j, 0j, 1.0 + 0j)

    def det(self):
        return self.a * self.d - self.b * self.c

    def as_array(self):
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def __matmul__(self, other):
        return cascade(self, other)


@dataclass(frozen=True)
class TransformerChain:
    """Sections ordered from the external port toward the JPA."""

    sections: tuple = field(default_factory=tuple)
    z_ref: float = Z_REF_DEFAULT

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        if not self.sections:
            raise DomainError("transformer chain needs at least one section")
        if not self.z_ref > 0:
            raise DomainError(f"z_ref must be positive, got {self.z_ref}")


def quarter_wave_z0(z_ref=Z_REF_DEFAULT, z_target=Z_TARGET_DEFAULT):
    """Characteristic impedance of the quarter-wave section matching z_ref to z_target."""
    return math.sqrt(z_ref * z_target)


def default_chain(f_design, z_ref=Z_REF_DEFAULT, z_target=Z_TARGET_DEFAULT, z_half=Z_HALF_DEFAULT):
    """lambda/4 matching section followed by a lambda/2 section at z_half.

    The half-wave section is transparent at f_design, so the environment is
    z_target there whatever z_half is; z_half only sets the slope of the
    environment across the band. A value different from z_target gives the
    reactance slope that splits the gain profile into two lobes.
    """
    if z_half is None:
        z_half = z_target
    return TransformerChain(
        sections=(
            TransmissionLineSection(quarter_wave_z0(z_ref, z_target), f_design, 0.25),
            TransmissionLineSection(z_half, f_design, 0.5),
        ),
        z_ref=z_ref,
    )


def _check_freq(f):
    f = np.asarray(f, dtype=float)
    if np.any(~(f > 0)):
        raise DomainError("frequency must be positive")
    return f


def line_abcd(section: TransmissionLineSection, f) -> TwoPortABCD:
    f = _check_freq(f)
    theta = section.electrical_length(f)
    cos, sin = np.cos(theta), np.sin(theta)
    return TwoPortABCD(
        a=cos + 0j,
        b=1j * section.z0 * sin,
        c=1j * sin / section.z0,
        d=cos + 0j,
    )


def cascade(first: TwoPortABCD, second: TwoPortABCD) -> TwoPortABCD:
    """Matrix product ``first @ second``; ``first`` is nearer the driving port."""
    return TwoPortABCD(
        a=first.a * second.a + first.b * second.c,
        b=first.a * second.b + first.b * second.d,
        c=first.c * second.a + first.d * second.c,
        d=first.c * second.b + first.d * second.d,
    )


def chain_abcd(sections, f) -> TwoPortABCD:
    net = TwoPortABCD.identity()
    for section in sections:
        net = cascade(net, line_abcd(section, f))
    return net


def input_impedance(net: TwoPortABCD, z_load):
    """Impedance at port 1 when port 2 is terminated in ``z_load``.

    ``z_load = np.inf`` is accepted and treated as an open circuit.
    """
    z_load = np.asarray(z_load, dtype=complex)
    is_open = np.isinf(z_load)
    zl = np.where(is_open, 0.0, z_load)
    num = np.where(is_open, net.a, net.a * zl + net.b)
    den = np.where(is_open, net.c, net.c * zl + net.d)
    if np.any(den == 0):
        raise PoleError("input impedance is singular (open-circuit condition)")
    out = num / den
    return out[()] if out.ndim == 0 else out


def input_impedance_from_admittance(net: TwoPortABCD, y_load):
    """Same as :func:`input_impedance` but with the load given as an admittance.

    Avoids the pole of a parallel resonator, whose admittance stays finite.
    """
    y_load = np.asarray(y_load, dtype=complex)
    den = net.c + net.d * y_load
    if np.any(den == 0):
        raise PoleError("input impedance is singular (open-circuit condition)")
    out = (net.a + net.b * y_load) / den
    return out[()] if out.ndim == 0 else out


def reflection(z_in, z_ref):
    """Reflection coefficient of ``z_in`` against a real reference; infinite z_in gives +1."""
    if not z_ref > 0:
        raise DomainError(f"z_ref must be positive, got {z_ref}")
    z_in = np.asarray(z_in, dtype=complex)
    is_open = np.isinf(z_in)
    zi = np.where(is_open, 0.0, z_in)
    den = zi + z_ref
    if np.any((den == 0) & ~is_open):
        raise PoleError("reflection singular: z_in = -z_ref")
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(is_open, 1.0 + 0j, (zi - z_ref) / den)
    return gamma[()] if gamma.ndim == 0 else gamma


def environment_impedance(chain: TransformerChain, f):
    """Impedance seen from the JPA node looking out through the chain into z_ref."""
    f = _check_freq(f)
    net = chain_abcd(reversed(chain.sections), f)
    return input_impedance(net, chain.z_ref)
