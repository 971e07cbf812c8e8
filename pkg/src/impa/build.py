"""Turn a parsed DeviceConfig into model objects, resolving ``auto`` entries."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .config import DeviceConfig
from .gain import KerrModel, PumpSettings, default_kerr, strength_for_peak_gain
from .network import default_chain, TransformerChain, TransmissionLineSection
from .noise import AmplChain
from .readout import DispersiveModel, calibrate_separation
from .squid import DeviceModel, SquidParams, calibrate_stray, resonant_frequency

SIM_HALF_SPAN = 1.5e9  # default simulation band is f0 +/- this


def chain(cfg: DeviceConfig) -> TransformerChain:
    f_design = cfg["device.f_max"] if cfg.is_auto("chain.f_design") else cfg["chain.f_design"]
    base = default_chain(f_design, cfg["chain.z_ref"], cfg["chain.z_target"], cfg["chain.z_half"])
    if cfg.is_auto("chain.z_quarter"):
        return base
    quarter = TransmissionLineSection(cfg["chain.z_quarter"], f_design, 0.25)
    return replace(base, sections=(quarter,) + base.sections[1:])


def device(cfg: DeviceConfig) -> DeviceModel:
    dev = DeviceModel(
        squid=SquidParams(cfg["squid.i_c"]),
        c_p=cfg["device.c_p"],
        l_stray=0.0,
        chain=chain(cfg),
        flux_offset=cfg["device.flux_offset"],
    )
    if cfg.is_auto("device.l_stray"):
        return replace(dev, l_stray=calibrate_stray(dev, cfg["device.f_max"]))
    return replace(dev, l_stray=cfg["device.l_stray"])


def sim_grid(cfg: DeviceConfig, dev: DeviceModel, flux=None):
    flux = cfg["device.flux"] if flux is None else flux
    f0 = resonant_frequency(dev, flux)
    lo = f0 - SIM_HALF_SPAN if cfg.is_auto("band.sim_min") else cfg["band.sim_min"]
    hi = f0 + SIM_HALF_SPAN if cfg.is_auto("band.sim_max") else cfg["band.sim_max"]
    return np.linspace(lo, hi, cfg["band.sim_points"]), f0


def pump(cfg: DeviceConfig, dev: DeviceModel, grid, f0) -> PumpSettings:
    flux = cfg["device.flux"]
    f_pump = 2.0 * f0 if cfg.is_auto("pump.f_pump") else cfg["pump.f_pump"]
    if cfg.is_auto("pump.strength"):
        strength = strength_for_peak_gain(
            dev, flux, f_pump, cfg["pump.target_gain"], grid, phase=cfg["pump.phase"]
        )
    else:
        strength = cfg["pump.strength"]
    return PumpSettings(f_pump, strength, cfg["pump.phase"])


def kerr(cfg: DeviceConfig, dev: DeviceModel, f=None) -> KerrModel:
    if cfg.is_auto("kerr.k"):
        return default_kerr(dev, cfg["device.flux"], f)
    return KerrModel(-abs(cfg["kerr.k"]))


def ampl_chain(cfg: DeviceConfig) -> AmplChain:
    return AmplChain(cfg["noise.g_p"], cfg["noise.g_i"], cfg["noise.g_a"], cfg["noise.t_h"])


def dispersive(cfg: DeviceConfig) -> DispersiveModel:
    return DispersiveModel(
        f_q=cfg["readout.f_q"],
        f_r=cfg["readout.f_r"],
        chi=cfg["readout.chi"],
        g_coupling=cfg["readout.g"],
        kappa_r=cfg["readout.kappa_r"],
        separation=calibrate_separation(cfg["readout.snr_on"], cfg["readout.eta"]),
        shots=cfg["readout.shots"],
    )
