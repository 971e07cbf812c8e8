"""Command-line front end: ``impa <command> [--config FILE] [--seed N] [--out FILE]``.

Each command prints a short summary to stdout and, with ``--out``, writes a
CSV table atomically. Exit status: 0 on success, 1 for invalid input or a
failed computation, 2 for I/O errors.
"""
from __future__ import annotations

import math
import os
import sys

import click
import numpy as np

from . import build
from .config import default_text, parse_config
from .errors import ImpaError
from .gain import (
    bandwidth_above,
    gain_vs_power,
    small_signal_gain,
    tune_pump,
)
from .noise import (
    efficiency_from_noise,
    noise_photons_from_temperature,
    quantum_limit_temperature,
    system_noise_temperature,
)
from .readout import efficiency_for_snr, fit_exponential, fit_ramsey, simulate_clouds, snr, visibility
from .squid import fit_flux_modulation, phase_map, pump_off_reflection, resonant_frequency
from .traces import (
    MeasuredTrace,
    PowerSweep,
    atomic_write,
    compression_from_sweep,
    fmt,
    measured_gain,
    parse_sweep_csv,
    parse_table,
    parse_trace_csv,
    read_file,
    sweep_csv,
    table_csv,
    trace_csv,
)

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
BANDWIDTH_LEVELS_DB = (10.0, 14.0)


class ImpaGroup(click.Group):
    """Maps library and I/O failures onto the documented exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.exceptions.Exit as exc:
            sys.exit(exc.exit_code)
        except click.exceptions.Abort:
            click.echo("aborted", err=True)
            sys.exit(EXIT_INVALID)
        except click.FileError as exc:
            exc.show()
            sys.exit(EXIT_IO)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_INVALID)
        except (ImpaError, ValueError, ZeroDivisionError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INVALID)
        except OSError as exc:
            click.echo(f"I/O error: {exc}", err=True)
            sys.exit(EXIT_IO)
        if not standalone_mode:
            return rv
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def common(func):
    func = click.option("--out", "out", type=click.Path(dir_okay=False), default=None,
                        help="CSV output path.")(func)
    func = click.option("--seed", type=int, default=None, help="RNG seed (overrides run.seed).")(func)
    func = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                        help="Device configuration file.")(func)
    return func


def load_config(path):
    return parse_config(read_file(path) if path else default_text())


def emit(out, text):
    if out:
        atomic_write(out, text)


def say(line):
    click.echo(line)


@click.group(cls=ImpaGroup)
def cli():
    """Impedance-transformed parametric amplifier toolkit."""


@cli.command("flux-map")
@common
def flux_map_cmd(config_path, seed, out):
    """Reflection phase versus flux and frequency, plus the resonance curve."""
    cfg = load_config(config_path)
    dev = build.device(cfg)
    flux = np.linspace(cfg["band.flux_min"], cfg["band.flux_max"], cfg["band.flux_points"])
    freq = np.linspace(cfg["band.map_min"], cfg["band.map_max"], cfg["band.map_points"])
    pm = phase_map(dev, flux, freq)
    ff, gg = np.meshgrid(flux, freq, indexing="ij")
    emit(out, table_csv(("flux", "freq_hz", "phase_rad"), [ff.ravel(), gg.ravel(), pm.phase.ravel()]))
    f_top = resonant_frequency(dev, 0.0)
    say(f"l_stray = {dev.l_stray * 1e12:.4f} pH")
    say(f"f_res(flux=0) = {f_top / 1e9:.6f} GHz")
    say(f"grid = {flux.size} flux x {freq.size} freq")


@cli.command("gain")
@click.option("--export-traces", type=click.Path(file_okay=False), default=None,
              help="Directory for simulated pump-on/off S21 traces.")
@common
def gain_cmd(export_traces, config_path, seed, out):
    """Small-signal gain profile and bandwidths."""
    cfg = load_config(config_path)
    dev = build.device(cfg)
    flux = cfg["device.flux"]
    grid, f0 = build.sim_grid(cfg, dev)
    pump = build.pump(cfg, dev, grid, f0)
    prof = small_signal_gain(dev, flux, pump, grid)
    emit(out, table_csv(("freq_hz", "gain_db", "idler_gain_db"),
                        [grid, prof.gain_db, 20 * np.log10(np.abs(prof.idler_gain))]))
    if export_traces:
        off = pump_off_reflection(dev, grid, flux)
        os.makedirs(export_traces, exist_ok=True)
        meta = {"flux": fmt(flux)}
        atomic_write(os.path.join(export_traces, "off.csv"),
                     trace_csv(MeasuredTrace(grid, off, {**meta, "pump": "off"})))
        atomic_write(os.path.join(export_traces, "on.csv"),
                     trace_csv(MeasuredTrace(grid, off * prof.signal_gain, {**meta, "pump": "on"})))
    say(f"f0 = {f0 / 1e9:.6f} GHz")
    say(f"pump = {pump.f_pump / 1e9:.6f} GHz, strength = {pump.strength:.6g} rad/s")
    _report_profile(prof)


def _report_profile(prof):
    say(f"peak gain = {prof.peak_gain_db:.3f} dB")
    say(f"local maxima = {prof.local_maxima()}")
    for level in BANDWIDTH_LEVELS_DB:
        say(f"bandwidth@{level:g}dB = {bandwidth_above(prof, level) / 1e6:.3f} MHz")


@cli.command("saturate")
@common
def saturate_cmd(config_path, seed, out):
    """Gain versus input power and the 1-dB compression point."""
    cfg = load_config(config_path)
    dev = build.device(cfg)
    flux = cfg["device.flux"]
    grid, f0 = build.sim_grid(cfg, dev)
    pump = build.pump(cfg, dev, grid, f0)
    prof = small_signal_gain(dev, flux, pump, grid)
    f_s = float(grid[np.argmax(prof.gain_db)])
    kerr = build.kerr(cfg, dev, f0)
    res = gain_vs_power(dev, flux, pump, kerr, f_s, cfg["saturate.p_min"], cfg["saturate.p_max"])
    emit(out, sweep_csv(PowerSweep(res.power_dbm, res.gain_db)))
    say(f"signal = {f_s / 1e9:.6f} GHz, small-signal gain = {res.small_signal_db:.3f} dB")
    say(f"kerr = {kerr.kerr_per_photon / (2 * math.pi):.6g} Hz/photon")
    if res.p1db_dbm is None:
        say("P1dB = none (no compression in sweep)")
    else:
        say(f"P1dB = {res.p1db_dbm:.3f} dBm")


@cli.command("noise")
@common
def noise_cmd(config_path, seed, out):
    """Y-factor system noise, quantum limit and measurement efficiency."""
    cfg = load_config(config_path)
    t_sys = system_noise_temperature(cfg["noise.y"], build.ampl_chain(cfg))
    f = np.linspace(cfg["band.analysis_min"], cfg["band.analysis_max"], 41)
    t_q = quantum_limit_temperature(f)
    n = noise_photons_from_temperature(t_sys, f)
    emit(out, table_csv(("freq_hz", "t_quantum_k", "t_sys_k", "n_noise", "eta"),
                        [f, t_q, np.full_like(f, t_sys), n, efficiency_from_noise(n)]))
    f_ref = cfg["noise.f"]
    say(f"T_sys = {t_sys:.6g} K")
    say(f"T_q({f_ref / 1e9:g} GHz) = {quantum_limit_temperature(f_ref):.6g} K")
    n_ref = noise_photons_from_temperature(t_sys, f_ref)
    say(f"n_noise(Y-factor) = {n_ref:.6g}, eta = {efficiency_from_noise(n_ref):.6g}")
    n_cfg = cfg["noise.n_noise"]
    say(f"n_noise(config) = {n_cfg:.6g}, eta = {efficiency_from_noise(n_cfg):.6g}")


@cli.command("readout")
@common
def readout_cmd(config_path, seed, out):
    """Simulated IQ clouds with the amplifier on and off."""
    cfg = load_config(config_path)
    seed = cfg["run.seed"] if seed is None else seed
    model = build.dispersive(cfg)
    eta_on = cfg["readout.eta"]
    eta_off = efficiency_for_snr(cfg["readout.snr_off"], model.separation)
    if not 0 < eta_off <= 1:
        raise ImpaError(f"pump-off SNR implies efficiency {eta_off:.4g} outside (0, 1]")
    runs = {"on": simulate_clouds(model, eta_on, [seed, 0]), "off": simulate_clouds(model, eta_off, [seed, 1])}
    cols = ([], [], [], [])
    for name, clouds in runs.items():
        for state, samples in ((0, clouds.samples0), (1, clouds.samples1)):
            cols[0].extend([name] * len(samples))
            cols[1].extend([str(state)] * len(samples))
            cols[2].extend(samples[:, 0])
            cols[3].extend(samples[:, 1])
    emit(out, table_csv(("pump", "state", "i", "q"), [np.array(c, dtype=object) for c in cols]))
    say(f"separation = {model.separation:.6g}")
    for name, clouds in runs.items():
        eta = eta_on if name == "on" else eta_off
        say(f"pump {name}: eta = {eta:.4f}, SNR = {snr(clouds):.3f}, visibility = {visibility(clouds):.4f}")


@cli.command("fit")
@click.argument("kind", type=click.Choice(["t1", "t2", "fluxmod"]))
@click.option("--input", "input_path", type=click.Path(dir_okay=False), required=True,
              help="CSV with time_s,value (t1/t2) or flux,freq_hz (fluxmod).")
@common
def fit_cmd(kind, input_path, config_path, seed, out):
    """Fit T1, T2 (Ramsey) or the flux-modulation curve."""
    text = read_file(input_path)
    if kind == "fluxmod":
        cfg = load_config(config_path)
        rows, _, _ = parse_table(text, ("flux", "freq_hz"), "flux data")
        res = fit_flux_modulation(rows[:, 0], rows[:, 1], build.device(cfg))
        names = ("i_c_a", "flux_offset", "period", "f_max_hz", "residual_norm_hz")
        vals = (res.i_c_est, res.flux_offset_est, res.period_est, res.f_max_est, res.residual_norm)
        emit(out, table_csv(("name", "value"), [list(names), [fmt(v) for v in vals]]))
        say(f"I_c = {res.i_c_est * 1e6:.4f} uA")
        say(f"flux offset = {res.flux_offset_est:.5f}, period = {res.period_est:.5f}")
        say(f"f_max = {res.f_max_est / 1e9:.6f} GHz")
        return
    rows, _, _ = parse_table(text, ("time_s", "value"), "coherence data")
    t, y = rows[:, 0], rows[:, 1]
    res = fit_exponential(t, y) if kind == "t1" else fit_ramsey(t, y)
    names = (res.kind + "_s", "amplitude", "offset", "frequency_hz", "phase_rad", "residual_norm")
    vals = (res.time, res.amplitude, res.offset, res.frequency, res.phase, res.residual_norm)
    emit(out, table_csv(("name", "value"), [list(names), [fmt(v) for v in vals]]))
    say(f"{res.kind.upper()} = {res.time * 1e6:.3f} us")
    if res.kind == "t2" and not res.fallback:
        say(f"detuning = {res.frequency / 1e6:.4f} MHz")
    if res.fallback:
        say("no oscillation detected; reported an exponential T2")


@cli.command("analyze")
@click.option("--on", "on_path", type=click.Path(dir_okay=False), required=True)
@click.option("--off", "off_path", type=click.Path(dir_okay=False), required=True)
@click.option("--sweep", "sweep_path", type=click.Path(dir_okay=False), default=None,
              help="Optional power sweep CSV (power_dbm,gain_db).")
@click.option("--band", nargs=2, type=float, default=None,
              help="Analysis band in Hz (default from config).")
@common
def analyze_cmd(on_path, off_path, sweep_path, band, config_path, seed, out):
    """Measured gain from pump-on/off traces, bandwidths and compression."""
    cfg = load_config(config_path)
    on = parse_trace_csv(read_file(on_path))
    off = parse_trace_csv(read_file(off_path))
    lo, hi = band if band else (cfg["band.analysis_min"], cfg["band.analysis_max"])
    if not hi > lo:
        raise ImpaError("analysis band must have max > min")
    prof = measured_gain(on, off)
    keep = (prof.freq_grid >= lo) & (prof.freq_grid <= hi)
    if np.count_nonzero(keep) < 2:
        raise ImpaError(f"fewer than 2 trace points inside the analysis band {lo:g}-{hi:g} Hz")
    prof = type(prof)(prof.freq_grid[keep], prof.signal_gain[keep], prof.idler_gain[keep])
    emit(out, table_csv(("freq_hz", "gain_db"), [prof.freq_grid, prof.gain_db]))
    _report_profile(prof)
    if sweep_path:
        p1 = compression_from_sweep(parse_sweep_csv(read_file(sweep_path)))
        say("P1dB = none (no compression in sweep)" if p1 is None else f"P1dB = {p1:.3f} dBm")


@cli.command("tune")
@common
def tune_cmd(config_path, seed, out):
    """Search pump frequency and strength for the widest band above the target gain."""
    cfg = load_config(config_path)
    dev = build.device(cfg)
    flux = cfg["device.flux"]
    grid, f0 = build.sim_grid(cfg, dev)
    target = cfg["pump.target_gain"]
    res = tune_pump(dev, flux, target, (grid[0], grid[-1]), points=grid.size, ripple_db=cfg["pump.ripple"])
    names = ("f_pump_hz", "strength_rad_s", "bandwidth_hz", "peak_gain_db", "unreachable")
    vals = (fmt(res.pump.f_pump), fmt(res.pump.strength), fmt(res.bandwidth),
            fmt(res.peak_gain_db), str(int(res.unreachable)))
    emit(out, table_csv(("name", "value"), [list(names), list(vals)]))
    if res.unreachable:
        say(f"target {target:g} dB unreachable; best peak {res.peak_gain_db:.3f} dB")
    say(f"pump = {res.pump.f_pump / 1e9:.6f} GHz, strength = {res.pump.strength:.6g} rad/s")
    say(f"peak gain = {res.peak_gain_db:.3f} dB")
    say(f"bandwidth@{target:g}dB = {res.bandwidth / 1e6:.3f} MHz")


def main():
    cli(prog_name="impa")


if __name__ == "__main__":
    main()
