"""Measured S21 traces and power sweeps: parsing, gain extraction and CSV output.

Trace files are UTF-8 CSV with optional ``# key=value`` metadata lines, a
``freq_hz,s21_re,s21_im`` header and strictly increasing frequencies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import os
import tempfile

import numpy as np

from .errors import DomainError, ImpaError, OrderError, ParseError
from .gain import GainProfile

TRACE_HEADER = ("freq_hz", "s21_re", "s21_im")
SWEEP_HEADER = ("power_dbm", "gain_db")
PLATEAU_POINTS = 3
PLATEAU_SPREAD_DB = 0.2
MIN_SWEEP_POINTS = 5


@dataclass
class MeasuredTrace:
    freq: np.ndarray
    s21: np.ndarray  # complex
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=float)
        self.s21 = np.asarray(self.s21, dtype=complex)
        if self.freq.shape != self.s21.shape or self.freq.ndim != 1:
            raise DomainError("frequency and S21 arrays must be 1-D and the same length")
        if np.any(np.diff(self.freq) <= 0):
            raise OrderError("frequencies must be strictly increasing")


@dataclass
class PowerSweep:
    power_dbm: np.ndarray
    gain_db: np.ndarray

    def __post_init__(self):
        self.power_dbm = np.asarray(self.power_dbm, dtype=float)
        self.gain_db = np.asarray(self.gain_db, dtype=float)
        if self.power_dbm.shape != self.gain_db.shape:
            raise DomainError("power and gain arrays differ in length")


def fmt(x):
    return f"{float(x):.12g}"


def _read_text(source):
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from None
    return source


def read_file(path):
    """File contents as text; raises OSError for I/O problems, ParseError for bad encoding."""
    with open(path, "rb") as fh:
        return _read_text(fh.read())


def parse_table(text, header, what):
    """Rows of floats under ``header``; returns (rows, metadata, line numbers)."""
    meta, rows, linenos = {}, [], []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = (s.strip() for s in body.split("=", 1))
                meta[k] = v
            continue
        cells = [c.strip() for c in line.split(",")]
        if not seen_header:
            if tuple(cells) != header:
                raise ParseError(f"expected {what} header {','.join(header)!r}", line=lineno)
            seen_header = True
            continue
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(cells)}", line=lineno)
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise ParseError(f"non-numeric value in row {line!r}", line=lineno) from None
        if not all(np.isfinite(vals)):
            raise ParseError("non-finite value", line=lineno)
        rows.append(vals)
        linenos.append(lineno)
    if not seen_header:
        raise ParseError(f"missing {what} header")
    return np.array(rows, dtype=float).reshape(-1, len(header)), meta, linenos


def parse_trace_csv(source) -> MeasuredTrace:
    rows, meta, linenos = parse_table(_read_text(source), TRACE_HEADER, "trace")
    if rows.shape[0] < 2:
        raise ParseError("trace needs at least 2 rows")
    freq = rows[:, 0]
    for k in range(1, freq.size):
        if not freq[k] > freq[k - 1]:
            raise OrderError("frequencies must be strictly increasing", line=linenos[k])
    if freq[0] <= 0:
        raise ParseError("frequency must be positive", line=linenos[0])
    return MeasuredTrace(freq, rows[:, 1] + 1j * rows[:, 2], meta)


def parse_sweep_csv(source) -> PowerSweep:
    rows, _, linenos = parse_table(_read_text(source), SWEEP_HEADER, "power sweep")
    p = rows[:, 0]
    for k in range(1, p.size):
        if not p[k] > p[k - 1]:
            raise OrderError("powers must be strictly increasing", line=linenos[k])
    return PowerSweep(p, rows[:, 1])


def measured_gain(on: MeasuredTrace, off: MeasuredTrace) -> GainProfile:
    """|S21_on| / |S21_off| on the on-trace grid, restricted to the overlap.

    The off magnitude is linearly interpolated onto the on frequencies; points
    of the on trace outside the off span are dropped, never extrapolated.
    """
    keep = (on.freq >= off.freq[0]) & (on.freq <= off.freq[-1])
    if not np.any(keep):
        raise DomainError("pump-on and pump-off traces do not overlap in frequency")
    f = on.freq[keep]
    ref = np.interp(f, off.freq, np.abs(off.s21))
    zero = np.nonzero(ref == 0)[0]
    if zero.size:
        raise ZeroDivisionError(f"pump-off magnitude is zero at {f[zero[0]]:.12g} Hz")
    g = np.abs(on.s21[keep]) / ref
    return GainProfile(f, g, np.full_like(g, np.nan))


def compression_from_sweep(sweep: PowerSweep, drop_db=1.0):
    """Input power where gain first falls ``drop_db`` below the small-signal plateau.

    The plateau is the leading run of points (at least three) whose spread
    stays within 0.2 dB; its mean is the reference. Returns None when the
    sweep never compresses.
    """
    p, g = sweep.power_dbm, sweep.gain_db
    if p.size < MIN_SWEEP_POINTS:
        raise DomainError(f"power sweep needs at least {MIN_SWEEP_POINTS} points")
    if np.ptp(g[:PLATEAU_POINTS]) > PLATEAU_SPREAD_DB:
        raise ImpaError("no small-signal plateau in the first three points")
    n = PLATEAU_POINTS
    while n < p.size and np.ptp(g[: n + 1]) <= PLATEAU_SPREAD_DB:
        n += 1
    level = float(np.mean(g[:n])) - drop_db
    below = np.nonzero(g <= level)[0]
    if below.size == 0:
        return None
    k = below[0]
    g1, g2 = g[k - 1], g[k]
    return float(p[k - 1] + (level - g1) / (g2 - g1) * (p[k] - p[k - 1]))


# --- writers -----------------------------------------------------------------

def table_csv(header, columns, metadata=None):
    lines = [f"# {k}={v}" for k, v in (metadata or {}).items()]
    lines.append(",".join(header))
    cols = [np.asarray(c) for c in columns]
    for row in zip(*cols):
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def trace_csv(trace: MeasuredTrace):
    return table_csv(TRACE_HEADER, [trace.freq, trace.s21.real, trace.s21.imag], trace.metadata)


def sweep_csv(sweep: PowerSweep):
    return table_csv(SWEEP_HEADER, [sweep.power_dbm, sweep.gain_db])


def atomic_write(path, text):
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
