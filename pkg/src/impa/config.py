"""Device configuration files.

Grammar (one entry per line)::

    # comment
    section.key = value [unit]

Every dimensioned quantity carries its unit suffix; dimensionless keys take
none. ``auto`` is accepted where a value can be derived from the rest of the
configuration. Unknown keys, duplicate keys and missing required keys are
errors that name the key and the 1-based line.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

from .errors import ParseError

# key -> (unit or None, default, allows "auto", kind); default None means required
SCHEMA = {
    "squid.i_c": ("a", None, False, float),
    "device.c_p": ("f", None, False, float),
    "device.l_stray": ("h", "auto", True, float),
    "device.f_max": ("hz", 9.4e9, False, float),
    "device.flux_offset": (None, 0.0, False, float),
    "device.flux": (None, 0.0, False, float),
    "chain.z_ref": ("ohm", 50.0, False, float),
    "chain.z_target": ("ohm", 30.0, False, float),
    "chain.z_quarter": ("ohm", "auto", True, float),
    "chain.z_half": ("ohm", 75.0, False, float),
    "chain.f_design": ("hz", "auto", True, float),
    "pump.f_pump": ("hz", "auto", True, float),
    "pump.strength": ("rad/s", "auto", True, float),
    "pump.phase": (None, 0.0, False, float),
    "pump.target_gain": ("db", 16.5, False, float),
    "pump.ripple": ("db", 1.0, False, float),
    "kerr.k": ("rad/s", "auto", True, float),
    "noise.y": (None, 3.0, False, float),
    "noise.g_p": (None, 100.0, False, float),
    "noise.g_i": (None, 1.0, False, float),
    "noise.g_a": (None, 1.0, False, float),
    "noise.t_h": ("k", 4.0, False, float),
    "noise.f": ("hz", 9.4e9, False, float),
    "noise.n_noise": (None, 2.78, False, float),
    "readout.f_q": ("hz", 5.0e9, False, float),
    "readout.f_r": ("hz", 6.5e9, False, float),
    "readout.chi": ("hz", 1.0e6, False, float),
    "readout.g": ("hz", 50e6, False, float),
    "readout.kappa_r": ("hz", 2.0e6, False, float),
    "readout.eta": (None, 0.2646, False, float),
    "readout.snr_on": (None, 14.56, False, float),
    "readout.snr_off": (None, 1.69, False, float),
    "readout.shots": (None, 3000, False, int),
    "band.sim_min": ("hz", "auto", True, float),
    "band.sim_max": ("hz", "auto", True, float),
    "band.sim_points": (None, 1201, False, int),
    "band.analysis_min": ("hz", 4e9, False, float),
    "band.analysis_max": ("hz", 8e9, False, float),
    "band.flux_min": (None, -0.45, False, float),
    "band.flux_max": (None, 0.45, False, float),
    "band.flux_points": (None, 91, False, int),
    "band.map_min": ("hz", 4e9, False, float),
    "band.map_max": ("hz", 12e9, False, float),
    "band.map_points": (None, 201, False, int),
    "saturate.p_min": ("dbm", -150.0, False, float),
    "saturate.p_max": ("dbm", -60.0, False, float),
    "run.seed": (None, 1234, False, int),
}

UNITS = {"hz", "ohm", "f", "h", "a", "k", "dbm", "db", "rad/s", "s"}

# range checks applied after parsing; value must satisfy the predicate
_POSITIVE = {
    "squid.i_c", "device.c_p", "device.f_max", "chain.z_ref", "chain.z_target", "chain.z_quarter",
    "chain.z_half", "chain.f_design", "pump.f_pump", "noise.g_p", "noise.g_i", "noise.g_a",
    "noise.t_h", "noise.f", "readout.f_q", "readout.f_r", "readout.eta", "band.sim_min",
    "band.sim_max", "band.analysis_min", "band.analysis_max", "band.map_min", "band.map_max",
}
_NON_NEGATIVE = {
    "device.l_stray", "pump.strength", "pump.ripple", "readout.chi", "readout.g", "readout.kappa_r",
    "readout.snr_on", "readout.snr_off", "noise.n_noise", "pump.target_gain",
}


@dataclass(frozen=True)
class DeviceConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def is_auto(self, key):
        return self.values[key] == "auto"

    def with_values(self, **updates):
        """Copy with ``section__key=value`` overrides (double underscore for the dot)."""
        vals = dict(self.values)
        for k, v in updates.items():
            key = k.replace("__", ".")
            if key not in SCHEMA:
                raise ParseError("unknown key", key=key)
            vals[key] = v
        _validate(vals)
        return replace(self, values=vals)

    # builders live in impa.build to keep this module free of physics imports


def default_text(i_c=11.1e-6, c_p=3e-12):
    return f"squid.i_c = {i_c!r} a\ndevice.c_p = {c_p!r} f\n"


def _parse_value(raw, key, line, kind, allows_auto):
    if raw == "auto":
        if not allows_auto:
            raise ParseError("'auto' not allowed", line=line, key=key)
        return "auto"
    try:
        if kind is int:
            val = int(raw)
        else:
            val = float(raw)
    except ValueError:
        raise ParseError(f"cannot parse value {raw!r}", line=line, key=key) from None
    if kind is float and not math.isfinite(val):
        raise ParseError("value must be finite", line=line, key=key)
    return val


def _validate(values, lines=None):
    lines = lines or {}
    for key, val in values.items():
        if val == "auto":
            continue
        if key in _POSITIVE and not val > 0:
            raise ParseError(f"value {val!r} must be positive", line=lines.get(key), key=key)
        if key in _NON_NEGATIVE and not val >= 0:
            raise ParseError(f"value {val!r} must be non-negative", line=lines.get(key), key=key)
    if values.get("readout.eta", 1) != "auto" and not values.get("readout.eta", 1) <= 1:
        raise ParseError("efficiency must be <= 1", line=lines.get("readout.eta"), key="readout.eta")
    if values.get("noise.y", 1) < 1:
        raise ParseError("Y-factor must be >= 1", line=lines.get("noise.y"), key="noise.y")
    for key in ("readout.shots", "band.sim_points", "band.flux_points", "band.map_points"):
        if values.get(key, 2) < 2:
            raise ParseError("need at least 2", line=lines.get(key), key=key)


def parse_config(text) -> DeviceConfig:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from None
    values, lines = {}, {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'section.key = value [unit]'", line=lineno)
        key, rhs = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ParseError("unknown key", line=lineno, key=key)
        if key in values:
            raise ParseError("duplicate key", line=lineno, key=key)
        unit, _, allows_auto, kind = SCHEMA[key]
        tokens = rhs.split()
        if not tokens:
            raise ParseError("missing value", line=lineno, key=key)
        if len(tokens) > 2:
            raise ParseError("trailing tokens after unit", line=lineno, key=key)
        given_unit = tokens[1].lower() if len(tokens) == 2 else None
        if given_unit is not None and given_unit not in UNITS:
            raise ParseError(f"bad unit suffix {tokens[1]!r}", line=lineno, key=key)
        if tokens[0] != "auto" and given_unit != unit:
            expected = f"'{unit}'" if unit else "no unit"
            raise ParseError(f"bad unit suffix: expected {expected}", line=lineno, key=key)
        if tokens[0] == "auto" and given_unit not in (None, unit):
            raise ParseError("bad unit suffix", line=lineno, key=key)
        values[key] = _parse_value(tokens[0], key, lineno, kind, allows_auto)
        lines[key] = lineno
    for key, (_, default, _, _) in SCHEMA.items():
        if key not in values:
            if default is None:
                raise ParseError("missing required key", key=key)
            values[key] = default
    _validate(values, lines)
    return DeviceConfig(values)


def serialize_config(config: DeviceConfig) -> str:
    out = []
    for key, (unit, _, _, kind) in SCHEMA.items():
        val = config.values[key]
        text = "auto" if val == "auto" else (str(val) if kind is int else repr(float(val)))
        out.append(f"{key} = {text}" + (f" {unit}" if unit else ""))
    return "\n".join(out) + "\n"
