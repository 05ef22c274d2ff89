"""JSON run-configuration parsing and validation.

Canonical keys::

    emitters[].gamma_ghz            total decay rate Gamma/2pi
    emitters[].beta                 waveguide fraction
    emitters[].detuning_ghz         static detuning (optional, default 0)
    emitters[].sigma_sd_ghz         spectral-diffusion width
    emitters[].gamma_dephase_ghz    pure dephasing rate
    emitters[].zeeman               optional {nu0_thz, fss_ghz, g_factor,
                                    dia_shift_ghz_per_t2}
    phases.phi_rad                  full symmetric matrix, radians
    phases.separations_cells        alternative: adjacent gaps in lattice
    phases.k_a                      cells, with k*a (default pi)
    pulse.areas_rad / pulse.phases_rad      instantaneous excitation
    drive.rabi_ghz / drive.phases_rad / drive.window_ns   square drive
    grid.t0_ns / t1_ns / n_points / dt_internal_ns
    ensemble.mode / scheme / n_nodes / seed / n_samples
    irf.fwhm_ns
    normalize                       max | sum | none
    ports                           1 | 2 | both
    sweep.emitter / sweep.detunings_ghz (or start/stop/num)

Validation failures raise ConfigError naming the offending key path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .ensemble import DiffusionSpec, IrfSpec
from .errors import ConfigError
from .fitproc import SweepPlan
from .liouvillian import DriveSpec
from .model import EmitterParams, PhaseLags, SystemModel, ZeemanParams, build_system
from .propagate import PulseSpec, TimeGrid
from .units import BAND_EDGE_KA

#: CSV port columns: port 1 collects the right-going field, port 2 the left.
PORT_BY_NUMBER = {1: "right", 2: "left"}


@dataclass
class RunConfig:
    """Everything a simulate/sweep command run needs, plus the resolved dict."""

    system: SystemModel
    grid: TimeGrid
    pulse: Optional[PulseSpec]
    drive: DriveSpec
    diffusion: DiffusionSpec
    irf: IrfSpec
    normalization: str
    ports: tuple
    sweep_emitter: int
    sweep_detunings: Optional[np.ndarray]
    resolved: dict


def _require(mapping, key, path, kind=None):
    if key not in mapping:
        raise ConfigError(f"missing key {path}.{key}")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{path}.{key} has wrong type {type(value).__name__}")
    return value


def _emitter(entry: dict, path: str) -> EmitterParams:
    zeeman = None
    if entry.get("zeeman") is not None:
        z = entry["zeeman"]
        zeeman = ZeemanParams(
            fss_ghz=float(_require(z, "fss_ghz", f"{path}.zeeman")),
            g_factor=float(_require(z, "g_factor", f"{path}.zeeman")),
            dia_shift_ghz_per_t2=float(_require(z, "dia_shift_ghz_per_t2",
                                                f"{path}.zeeman")),
            nu0_thz=float(z.get("nu0_thz", 0.0)))
    try:
        return EmitterParams(
            gamma_total=float(_require(entry, "gamma_ghz", path)),
            beta=float(_require(entry, "beta", path)),
            detuning=float(entry.get("detuning_ghz", 0.0)),
            sigma_sd=float(entry.get("sigma_sd_ghz", 0.0)),
            gamma_dephase=float(entry.get("gamma_dephase_ghz", 0.0)),
            zeeman=zeeman)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _phases(section: dict, n: int) -> PhaseLags:
    if "phi_rad" in section:
        return PhaseLags(np.asarray(section["phi_rad"], dtype=float))
    if "separations_cells" in section:
        seps = section["separations_cells"]
        if len(seps) != n - 1:
            raise ConfigError(
                f"phases.separations_cells needs {n - 1} entries, got {len(seps)}")
        return PhaseLags.from_separations(seps, float(section.get("k_a", BAND_EDGE_KA)))
    raise ConfigError("phases needs either phi_rad or separations_cells")


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    """Load, validate, and resolve a JSON run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(raw, overrides)


def parse_config(raw: dict, overrides: Optional[dict] = None) -> RunConfig:
    data = json.loads(json.dumps(raw))  # deep copy, JSON-clean
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})

    entries = _require(data, "emitters", "config", list)
    if not entries:
        raise ConfigError("config.emitters is empty")
    emitters = [_emitter(e, f"emitters[{i}]") for i, e in enumerate(entries)]
    phases = _phases(_require(data, "phases", "config", dict), len(emitters))
    system = build_system(emitters, phases)

    g = data.get("grid", {})
    grid = TimeGrid(t0=float(g.get("t0_ns", 0.0)), t1=float(g.get("t1_ns", 3.0)),
                    n_points=int(g.get("n_points", 2000)),
                    dt_internal=(float(g["dt_internal_ns"])
                                 if g.get("dt_internal_ns") else None))

    pulse = None
    if data.get("pulse") is not None:
        p = data["pulse"]
        areas = _require(p, "areas_rad", "pulse", list)
        if len(areas) != len(emitters):
            raise ConfigError("pulse.areas_rad needs one entry per emitter")
        pulse = PulseSpec(areas=tuple(areas),
                          phases=tuple(p.get("phases_rad", [0.0] * len(areas))))

    drive = DriveSpec.off()
    if data.get("drive") is not None:
        d = data["drive"]
        rabi = _require(d, "rabi_ghz", "drive", list)
        window = _require(d, "window_ns", "drive", list)
        drive = DriveSpec(rabi=tuple(rabi),
                          phases=tuple(d.get("phases_rad", [0.0] * len(rabi))),
                          envelope=(float(window[0]), float(window[1])))

    e = data.get("ensemble", {})
    diffusion = DiffusionSpec(
        sigmas=tuple(em.sigma_sd for em in emitters),
        n_nodes=int(e.get("n_nodes", 21)),
        scheme=str(e.get("scheme", "gauss-hermite")),
        mode=str(e.get("mode", "relative")),
        seed=int(e.get("seed", 0)),
        n_samples=int(e.get("n_samples", 20000)))

    irf = IrfSpec(fwhm=float(data.get("irf", {}).get("fwhm_ns", 0.0)))

    normalization = str(data.get("normalize", "none"))
    if normalization not in ("max", "sum", "none"):
        raise ConfigError(f"normalize must be max|sum|none, got {normalization!r}")

    ports_key = data.get("ports", "both")
    if ports_key in (1, "1"):
        ports = ("right",)
    elif ports_key in (2, "2"):
        ports = ("left",)
    elif ports_key == "both":
        ports = ("right", "left")
    else:
        raise ConfigError(f"ports must be 1|2|both, got {ports_key!r}")

    sweep_emitter = 0
    sweep_detunings = None
    if data.get("sweep") is not None:
        s = data["sweep"]
        sweep_emitter = int(s.get("emitter", 0))
        if "detunings_ghz" in s:
            sweep_detunings = np.asarray(s["detunings_ghz"], dtype=float)
        elif all(k in s for k in ("start_ghz", "stop_ghz", "num")):
            sweep_detunings = np.linspace(float(s["start_ghz"]),
                                          float(s["stop_ghz"]), int(s["num"]))
        else:
            raise ConfigError("sweep needs detunings_ghz or start/stop/num")
        if sweep_detunings.size == 0:
            raise ConfigError("sweep.detunings_ghz is empty")

    return RunConfig(system=system, grid=grid, pulse=pulse, drive=drive,
                     diffusion=diffusion, irf=irf, normalization=normalization,
                     ports=ports, sweep_emitter=sweep_emitter,
                     sweep_detunings=sweep_detunings, resolved=data)


def sweep_plan(cfg: RunConfig) -> SweepPlan:
    if cfg.sweep_detunings is None:
        raise ConfigError("config has no sweep section")
    return SweepPlan(system=cfg.system, swept_emitter=cfg.sweep_emitter,
                     detunings=cfg.sweep_detunings, grid=cfg.grid,
                     pulse=cfg.pulse, drive=cfg.drive, diffusion=cfg.diffusion,
                     irf=cfg.irf, normalization=cfg.normalization,
                     ports=cfg.ports)
