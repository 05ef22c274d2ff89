"""Parameter extraction and experiment orchestration.

fit_biexponential models a decay trace as

    I(t) = a_f exp(-2 pi G_f t) + a_s exp(-2 pi G_s t) [+ a_b exp(-2 pi G_b t)]

with non-negative amplitudes and rates in GHz.  Initialization uses variable
projection: rates are scanned on a log-spaced grid, the amplitudes solved
linearly (non-negative least squares) at each grid point, and the best pair
seeds a bounded nonlinear refinement.  Weights are Poisson-motivated,
sqrt(max(I, I_min)) with a small floor.

run_sweep drives the full pipeline (pulse, master equation, diffusion
averaging, detector convolution, per-trace normalization) over a detuning
grid and returns the 2-D intensity map together with the predicted
oscillation-crest curve t(Delta) = pi / f_osc for overlay.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares, nnls

from .analytic import oscillation_frequency
from .ensemble import DiffusionSpec, IrfSpec, TimeTrace, convolve_irf, normalize_trace
from .errors import ConfigError, FitConvergenceError
from .liouvillian import DensityMatrix, DriveSpec
from .model import SystemModel
from .propagate import (PulseSpec, TimeGrid, Trajectory, apply_instant_pulse,
                        evolve_master_batch)

DEGENERATE_RATE_FRACTION = 0.02
MAX_ITERATIONS = 500


@dataclass(frozen=True)
class BiExpFit:
    """Result of a bi-exponential decay fit (rates in GHz)."""

    a_fast: float
    a_slow: float
    gamma_fast: float
    gamma_slow: float
    t_start: float
    residual_rms: float
    a_bg: float = 0.0
    gamma_bg: float = 0.0
    degenerate: bool = False
    stderr: dict = field(default_factory=dict)
    n_iterations: int = 0

    @property
    def enhancement(self) -> float:
        return self.gamma_fast / self.gamma_slow if self.gamma_slow > 0 else np.inf


def _model_matrix(t: np.ndarray, rates: Sequence[float]) -> np.ndarray:
    return np.exp(-2.0 * np.pi * np.outer(t, np.asarray(rates)))


def _weights(values: np.ndarray) -> np.ndarray:
    floor = 1e-6 * values.max()
    return 1.0 / np.sqrt(np.maximum(values, floor))


def _varpro_seed(t, y, w, n_components, rate_grid):
    """Best rate tuple on the grid by weighted NNLS amplitude projection."""
    best = None
    from itertools import combinations
    for rates in combinations(rate_grid, n_components):
        basis = _model_matrix(t, rates) * w[:, None]
        amps, rnorm = nnls(basis, y * w)
        if best is None or rnorm < best[0]:
            best = (rnorm, rates, amps)
    return best[1], best[2]


def fit_biexponential(trace: TimeTrace, t_start: Optional[float] = None,
                      with_background: bool = False) -> BiExpFit:
    """Fit a (bi-)exponential decay starting at ``t_start``.

    Rates within 2% of each other collapse to a single exponential, reported
    with ``degenerate=True`` and equal fast/slow rates.  Raises
    FitConvergenceError when the bounded refinement does not converge.
    """
    times = trace.times
    values = trace.values
    if t_start is None:
        t_start = float(times[np.argmax(values)])
        irf = trace.meta.get("irf_fwhm_ns", 0.0)
        t_start += irf
        if t_start == times[0]:
            t_start = float(times[min(1, len(times) - 1)])
    if not times[0] <= t_start <= times[-1]:
        raise ConfigError(f"t_start {t_start} outside the trace")
    sel = times >= t_start
    t = times[sel] - t_start
    y = values[sel]
    if len(y) < 20:
        raise ConfigError("need at least 20 samples after t_start")
    if y.min() < 0 and y.min() < -1e-9 * max(y.max(), 1.0):
        raise ConfigError("trace has significantly negative values")
    y = np.maximum(y, 0.0)
    if not y.max() > 0:
        raise ConfigError("trace is all zero after t_start")

    w = _weights(y)
    span = t[-1] - t[0]
    dt = t[1] - t[0]
    rate_lo = max(1.0 / (2.0 * np.pi * span * 5.0), 1e-4)
    rate_hi = 1.0 / (2.0 * np.pi * dt * 2.0)
    grid = np.geomspace(rate_lo, rate_hi, 25)
    n_comp = 3 if with_background else 2
    seed_rates, seed_amps = _varpro_seed(t, y, w, n_comp, grid)
    seed_amps = np.maximum(seed_amps, 1e-12 * y.max())

    def residual(params):
        amps = params[:n_comp]
        rates = params[n_comp:]
        model = _model_matrix(t, rates) @ amps
        return (model - y) * w

    p0 = np.concatenate([seed_amps, seed_rates])
    lower = np.concatenate([np.zeros(n_comp), np.full(n_comp, rate_lo * 1e-3)])
    upper = np.concatenate([np.full(n_comp, np.inf), np.full(n_comp, rate_hi * 10)])
    result = least_squares(residual, p0, bounds=(lower, upper),
                           xtol=1e-8, ftol=1e-12, gtol=1e-12,
                           max_nfev=MAX_ITERATIONS * (2 * n_comp + 1))
    if not result.success and result.status <= 0:
        raise FitConvergenceError(f"least squares did not converge: {result.message}")

    amps = result.x[:n_comp]
    rates = result.x[n_comp:]
    # Undo the time-origin shift: reported amplitudes refer to t = 0.
    amps_t0 = amps * np.exp(2.0 * np.pi * rates * t_start)

    # Label by rate ordering at convergence: fast >= slow; the slowest
    # component is the spin-flip background when one was requested.
    order = np.argsort(rates)[::-1]
    g_fast, g_slow = rates[order[0]], rates[order[1]]
    a_fast, a_slow = amps_t0[order[0]], amps_t0[order[1]]
    a_bg = amps_t0[order[2]] if with_background else 0.0
    g_bg = rates[order[2]] if with_background else 0.0

    rms = float(np.sqrt(np.mean(((result.fun / w))**2)))
    stderr = {}
    try:
        jtj = result.jac.T @ result.jac
        dof = max(len(y) - len(result.x), 1)
        cov = np.linalg.pinv(jtj) * np.sum(result.fun**2) / dof
        names = [f"a{k}" for k in range(n_comp)] + [f"rate{k}" for k in range(n_comp)]
        stderr = {n: float(np.sqrt(max(cov[i, i], 0.0)))
                  for i, n in enumerate(names)}
    except np.linalg.LinAlgError:
        pass

    degenerate = g_fast - g_slow <= DEGENERATE_RATE_FRACTION * g_fast
    if degenerate:
        def single_residual(params):
            return (params[0] * np.exp(-2.0 * np.pi * params[1] * t) - y) * w

        single = least_squares(single_residual,
                               [y[0], 0.5 * (g_fast + g_slow)],
                               bounds=([0, rate_lo * 1e-3], [np.inf, rate_hi * 10]),
                               xtol=1e-8, ftol=1e-12)
        amp = single.x[0] * np.exp(2.0 * np.pi * single.x[1] * t_start)
        rms = float(np.sqrt(np.mean((single.fun / w)**2)))
        return BiExpFit(a_fast=amp, a_slow=0.0, gamma_fast=single.x[1],
                        gamma_slow=single.x[1], t_start=t_start,
                        residual_rms=rms, degenerate=True,
                        n_iterations=int(single.nfev))

    return BiExpFit(a_fast=a_fast, a_slow=a_slow, gamma_fast=g_fast,
                    gamma_slow=g_slow, t_start=t_start, residual_rms=rms,
                    a_bg=a_bg, gamma_bg=g_bg, stderr=stderr,
                    n_iterations=int(result.nfev))


def load_trace(path) -> TimeTrace:
    """Read a CSV trace with header time_ns,counts[,port]."""
    import csv

    times, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["time_ns", "counts"]:
            raise ConfigError(f"{path}: expected header 'time_ns,counts[,port]'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}:{lineno}: malformed row {row!r}") from exc
    times = np.asarray(times)
    if len(times) < 2:
        raise ConfigError(f"{path}: need at least two samples")
    if np.any(np.diff(times) <= 0):
        bad = int(np.nonzero(np.diff(times) <= 0)[0][0]) + 3
        raise ConfigError(f"{path}:{bad}: time column is not strictly increasing")
    return TimeTrace(times, np.asarray(values), {"source": str(path)})


@dataclass(frozen=True)
class SweepPlan:
    """One detuning sweep: who is swept, how the system is driven, and how
    the traces are post-processed."""

    system: SystemModel
    swept_emitter: int
    detunings: np.ndarray
    grid: TimeGrid
    pulse: Optional[PulseSpec] = None
    drive: DriveSpec = DriveSpec.off()
    diffusion: Optional[DiffusionSpec] = None
    irf: IrfSpec = IrfSpec()
    normalization: str = "none"
    ports: tuple = ("right", "left")

    def __post_init__(self):
        det = np.asarray(self.detunings, dtype=float)
        if det.size == 0:
            raise ConfigError("detuning grid is empty")
        if det.size > 1 and not (np.all(np.diff(det) > 0) or np.all(np.diff(det) < 0)):
            raise ConfigError("detuning grid must be strictly monotonic")
        if not 0 <= self.swept_emitter < self.system.size:
            raise ConfigError(f"swept emitter index {self.swept_emitter} out of range")
        object.__setattr__(self, "detunings", det)


@dataclass
class SweepMap:
    """Time-resolved intensity versus detuning, plus the crest-curve overlay."""

    detunings: np.ndarray
    times: np.ndarray
    intensity: dict                       # port -> (n_det, n_t)
    populations: Optional[dict] = None    # key -> (n_det, n_t), two emitters
    peak_times: Optional[np.ndarray] = None
    normalization: str = "none"


def simulate_trace(system: SystemModel, grid: TimeGrid,
                   pulse: Optional[PulseSpec] = None,
                   drive: DriveSpec = DriveSpec.off(),
                   diffusion: Optional[DiffusionSpec] = None,
                   irf: IrfSpec = IrfSpec(),
                   normalization: str = "none") -> Trajectory:
    """Full single-point pipeline shared by the CLI and the sweep rows.

    Prepares the ground state, applies the instantaneous pulse if given,
    integrates the master equation over every diffusion node at once,
    averages, convolves the port intensities with the detector response, and
    normalizes per trace.
    """
    rho0 = DensityMatrix.ground(system.size)
    if pulse is not None:
        rho0 = apply_instant_pulse(rho0, pulse)
    if diffusion is None:
        diffusion = DiffusionSpec(sigmas=(0.0,) * system.size)
    offsets, weights = diffusion.nodes()
    traj = evolve_master_batch(system, drive, rho0, grid, offsets, weights)

    intens = {}
    for port, values in traj.intensities.items():
        if values.min() < -1e-8 * max(values.max(), 1.0):
            raise ConfigError(f"negative intensity beyond tolerance at port {port}")
        trace = TimeTrace(traj.times, np.maximum(values, 0.0))
        trace = convolve_irf(trace, irf)
        trace = normalize_trace(trace, normalization)
        intens[port] = trace.values
    meta = dict(traj.meta)
    meta.update({"normalization": normalization, "irf_fwhm_ns": irf.fwhm})
    return Trajectory(times=traj.times, intensities=intens,
                      populations=traj.populations, norm=traj.norm, meta=meta)


def _sweep_row(plan: SweepPlan, detuning: float) -> Trajectory:
    detunings = list(plan.system.detunings)
    detunings[plan.swept_emitter] = detuning
    system = plan.system.with_detunings(detunings)
    return simulate_trace(system, plan.grid, plan.pulse, plan.drive,
                          plan.diffusion, plan.irf, plan.normalization)


def predicted_peak_times(plan: SweepPlan) -> np.ndarray:
    """Crest-curve overlay t(Delta) = pi / f_osc for two-emitter sweeps.

    NaN marks rows without a crest (overdamped or critically damped).
    """
    if plan.system.size != 2:
        return np.full(len(plan.detunings), np.nan)
    other = 1 - plan.swept_emitter
    gamma_mn = float(plan.system.gamma_mat[0, 1])
    j_mn = float(plan.system.j_mat[0, 1])
    out = np.empty(len(plan.detunings))
    for i, det in enumerate(plan.detunings):
        delta = (det - plan.system.emitters[other].detuning
                 if plan.swept_emitter == 0
                 else plan.system.emitters[other].detuning - det)
        _, peak = oscillation_frequency(delta, j_mn, gamma_mn)
        out[i] = peak if peak is not None else np.nan
    return out


def run_sweep(plan: SweepPlan, threads: int = 1) -> SweepMap:
    """Evaluate the pipeline at every detuning of the plan.

    Rows are independent jobs; results are assembled in grid order regardless
    of scheduling, so the output is deterministic.  Failures are re-raised
    with the offending detuning identified.
    """
    def row(detuning):
        try:
            return _sweep_row(plan, detuning)
        except Exception as exc:
            raise type(exc)(f"detuning {detuning} GHz: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, plan.detunings))
    else:
        rows = [row(d) for d in plan.detunings]

    times = rows[0].times
    intensity = {port: np.stack([r.intensities[port] for r in rows])
                 for port in rows[0].intensities}
    populations = None
    if rows[0].populations is not None:
        populations = {k: np.stack([r.populations[k] for r in rows])
                       for k in ("p_sup", "p_sub", "p_ee")}
    return SweepMap(detunings=plan.detunings, times=times, intensity=intensity,
                    populations=populations, peak_times=predicted_peak_times(plan),
                    normalization=plan.normalization)
