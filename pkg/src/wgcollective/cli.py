"""Command-line interface.

Subcommands: simulate, sweep, fit, oracle-check.  All data interchange is
CSV with fixed 9-significant-digit float formatting, so identical configs
produce byte-identical outputs.  Exit codes: 0 success, 1 numeric failure,
2 config/validation error, 3 fit non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import TwoEmitterParams, closed_form_intensity
from .config import PORT_BY_NUMBER, load_config, sweep_plan
from .ensemble import normalize_trace
from .errors import ConfigError, FitConvergenceError, IntegrationError, WgError
from .fitproc import fit_biexponential, load_trace, run_sweep, simulate_trace
from .model import build_system
from .propagate import TimeGrid, evolve_single_excitation

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_CONFIG = 2
EXIT_NOCONV = 3


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _write_lines(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")


def _write_sidecar_config(out_path, resolved: dict):
    sidecar = Path(str(out_path) + ".config.json")
    sidecar.write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")


def _pop_columns(traj):
    keys = ("p_sup", "p_sub", "p_ee", "p_gg")
    if traj.populations is None:
        zero = np.zeros_like(traj.times)
        return {k: zero for k in keys}
    return {k: traj.populations[k] for k in keys}


def _apply_seed(cfg, args):
    if getattr(args, "seed", None):
        from dataclasses import replace
        cfg.diffusion = replace(cfg.diffusion, seed=args.seed)
        cfg.resolved.setdefault("ensemble", {})["seed"] = args.seed
    return cfg


def cmd_simulate(args) -> int:
    cfg = _apply_seed(load_config(args.config, _overrides(args)), args)
    traj = simulate_trace(cfg.system, cfg.grid, cfg.pulse, cfg.drive,
                          cfg.diffusion, cfg.irf, cfg.normalization)
    pops = _pop_columns(traj)
    lines = ["time_ns,intensity_port1,intensity_port2,pop_sup,pop_sub,pop_ee,pop_gg"]
    for i, t in enumerate(traj.times):
        lines.append(",".join([
            _fmt(t),
            _fmt(traj.intensities["right"][i]),
            _fmt(traj.intensities["left"][i]),
            _fmt(pops["p_sup"][i]),
            _fmt(pops["p_sub"][i]),
            _fmt(pops["p_ee"][i]),
            _fmt(pops["p_gg"][i]),
        ]))
    _write_lines(args.out, lines)
    _write_sidecar_config(args.out, cfg.resolved)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _apply_seed(load_config(args.config, _overrides(args)), args)
    plan = sweep_plan(cfg)
    result = run_sweep(plan, threads=args.threads)

    port_numbers = [n for n, name in PORT_BY_NUMBER.items() if name in cfg.ports]
    with_pops = result.populations is not None
    header = "detuning_ghz,time_ns,port,intensity"
    if with_pops:
        header += ",pop_sup,pop_sub,pop_ee"
    lines = [header]
    for i, det in enumerate(result.detunings):
        for j, t in enumerate(result.times):
            for n in sorted(port_numbers):
                row = [_fmt(det), _fmt(t), str(n),
                       _fmt(result.intensity[PORT_BY_NUMBER[n]][i, j])]
                if with_pops:
                    row += [_fmt(result.populations["p_sup"][i, j]),
                            _fmt(result.populations["p_sub"][i, j]),
                            _fmt(result.populations["p_ee"][i, j])]
                lines.append(",".join(row))
    _write_lines(args.out, lines)
    _write_sidecar_config(args.out, cfg.resolved)

    peaks_path = args.peaks or str(Path(args.out).with_suffix("")) + "_peaks.csv"
    peak_lines = ["detuning_ghz,peak_time_ns"]
    for det, tp in zip(result.detunings, result.peak_times):
        peak_lines.append(f"{_fmt(det)},{_fmt(tp)}")
    _write_lines(peaks_path, peak_lines)
    return EXIT_OK


def cmd_fit(args) -> int:
    trace = load_trace(args.trace)
    if args.normalize != "none":
        trace = normalize_trace(trace, args.normalize)
    fit = fit_biexponential(trace, t_start=args.t_start,
                            with_background=args.background)
    report = {
        "gamma_fast_ghz": fit.gamma_fast,
        "gamma_slow_ghz": fit.gamma_slow,
        "a_fast": fit.a_fast,
        "a_slow": fit.a_slow,
        "enhancement": fit.enhancement,
        "t_start_ns": fit.t_start,
        "residual_rms": fit.residual_rms,
        "degenerate": fit.degenerate,
    }
    if args.background:
        report["gamma_bg_ghz"] = fit.gamma_bg
        report["a_bg"] = fit.a_bg
    resolved = {"trace": str(args.trace), "t_start": args.t_start,
                "background": args.background, "normalize": args.normalize}
    lines = [f"{k}={_fmt(v) if isinstance(v, float) else v}"
             for k, v in report.items()]
    lines.append(f"config={json.dumps(resolved, sort_keys=True)}")
    text = "\n".join(lines)
    if args.out:
        _write_lines(args.out, lines)
        Path(str(args.out) + ".json").write_text(
            json.dumps({"result": report, "config": resolved},
                       indent=2, sort_keys=True) + "\n")
    print(text)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    """Compare closed-form port intensities against no-jump propagation."""
    rng = np.random.default_rng(args.seed)
    grid = TimeGrid(0.0, 3.0, 50)
    worst = 0.0
    for _ in range(args.draws):
        g1, g2 = rng.uniform(0.3, 1.5, 2)
        b1, b2 = rng.uniform(0.5, 1.0, 2)
        phi = rng.uniform(0.0, np.pi)
        delta = rng.uniform(-6.0, 6.0) * 0.5 * (g1 + g2)
        params = TwoEmitterParams(g1, g2, b1, b2, delta=delta, phi=phi)
        system = _pair_system(params)
        traj = evolve_single_excitation(system, [1.0, 0.0], grid)
        for port in ("right", "left"):
            ana = closed_form_intensity(params, port, grid.times)
            err = float(np.abs(ana - traj.intensities[port]).max())
            worst = max(worst, err)
    # Ideal dark-state case: the subradiant branch carries no field at all.
    ideal = TwoEmitterParams(0.8, 0.8, 1.0, 1.0, delta=0.0, phi=0.0)
    from .analytic import closed_form_fields
    sub_max = max(abs(closed_form_fields(ideal, "right", t).e_sub)
                  for t in grid.times)
    print(f"draws={args.draws}")
    print(f"max_abs_error={worst:.3e}")
    print(f"dark_state_subradiant_field={sub_max:.3e}")
    ok = worst < args.tol and sub_max < 1e-12
    print(f"status={'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_NUMERIC


def _pair_system(p: TwoEmitterParams):
    from .model import EmitterParams, PhaseLags
    emitters = [
        EmitterParams(p.gamma1, p.beta1, detuning=+0.5 * p.delta),
        EmitterParams(p.gamma2, p.beta2, detuning=-0.5 * p.delta),
    ]
    phases = PhaseLags(np.array([[0.0, p.phi], [p.phi, 0.0]]))
    return build_system(emitters, phases)


def _overrides(args) -> dict:
    return {"normalize": args.normalize, "ports": args.ports}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wgcollective",
        description="Collective emission dynamics of waveguide-coupled emitters")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--ports", choices=["1", "2", "both"], default=None)
        p.add_argument("--normalize", choices=["max", "sum", "none"], default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=0,
                       help="Monte-Carlo diffusion seed")

    p_sim = sub.add_parser("simulate", help="time-resolved decay trace")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="detuning sweep map")
    common(p_sweep)
    p_sweep.add_argument("--peaks", default=None,
                         help="sidecar crest-curve CSV path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_fit = sub.add_parser("fit", help="bi-exponential decay fit")
    p_fit.add_argument("trace", help="CSV with header time_ns,counts[,port]")
    p_fit.add_argument("--out", default=None, help="report path")
    p_fit.add_argument("--t-start", type=float, default=None)
    p_fit.add_argument("--background", action="store_true",
                       help="add a third (spin-flip) exponential")
    p_fit.add_argument("--normalize", choices=["max", "sum", "none"],
                       default="none")
    p_fit.set_defaults(func=cmd_fit)

    p_oracle = sub.add_parser("oracle-check",
                              help="closed form vs numerical cross-validation")
    p_oracle.add_argument("--draws", type=int, default=200)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--tol", type=float, default=1e-8)
    p_oracle.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitConvergenceError as exc:
        print(f"fit did not converge: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (IntegrationError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except WgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
