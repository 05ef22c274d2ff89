"""Inhomogeneous averaging, detector-response convolution, normalization.

Slow spectral wandering of the emitter frequencies is modelled by averaging
trajectories over a normal distribution of detunings.  The default scheme is
Gauss-Hermite quadrature applied to the *relative* detuning of the pair (one
offset variable added to the first emitter): only the relative detuning
enters the undriven two-emitter dynamics, and the tabulated diffusion widths
are quoted per pair.  Independent per-emitter offsets (tensor-product
quadrature) and seeded Monte-Carlo sampling are available as alternatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .errors import ConfigError
from .propagate import Trajectory


@dataclass(frozen=True)
class TimeTrace:
    """A sampled scalar time series (times in ns)."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ConfigError("times and values must be 1-D arrays of equal length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        steps = np.diff(self.times)
        if len(steps) == 0:
            raise ConfigError("trace needs at least two samples")
        if not np.allclose(steps, steps[0], rtol=1e-8, atol=1e-12):
            raise ConfigError("trace grid is not uniform")
        return float(steps[0])


@dataclass(frozen=True)
class DiffusionSpec:
    """Spectral-diffusion averaging specification.

    sigmas: per-emitter Gaussian widths in GHz.  mode 'relative' uses a
    single offset on the first emitter with the shared pair width; mode
    'independent' jitters every emitter separately (tensor grid).  scheme is
    'gauss-hermite' (deterministic, default) or 'monte-carlo' with a seed.
    """

    sigmas: tuple
    n_nodes: int = 21
    scheme: str = "gauss-hermite"
    mode: str = "relative"
    seed: int = 0
    n_samples: int = 20000

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if any(s < 0 for s in self.sigmas):
            raise ConfigError("sigma_sd must be >= 0")
        if self.n_nodes < 1 or self.n_nodes % 2 == 0:
            raise ConfigError("n_nodes must be odd and >= 1")
        if self.scheme not in ("gauss-hermite", "monte-carlo"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.mode not in ("relative", "independent"):
            raise ConfigError(f"unknown mode {self.mode!r}")

    @property
    def is_trivial(self) -> bool:
        return all(s == 0.0 for s in self.sigmas)

    def _relative_sigma(self) -> float:
        nonzero = [s for s in self.sigmas if s > 0]
        if not nonzero:
            return 0.0
        if max(nonzero) - min(nonzero) > 1e-9:
            raise ConfigError(
                "relative-detuning averaging needs one shared pair width; "
                "use mode='independent' for distinct per-emitter widths")
        return nonzero[0]

    def nodes(self):
        """Offset vectors (k, N) in GHz and weights (k,) summing to 1."""
        n_emit = len(self.sigmas)
        if self.is_trivial:
            return np.zeros((1, n_emit)), np.ones(1)

        if self.scheme == "monte-carlo":
            rng = np.random.default_rng(self.seed)
            offsets = np.zeros((self.n_samples, n_emit))
            if self.mode == "relative":
                offsets[:, 0] = rng.normal(0.0, self._relative_sigma(), self.n_samples)
            else:
                for m, s in enumerate(self.sigmas):
                    if s > 0:
                        offsets[:, m] = rng.normal(0.0, s, self.n_samples)
            return offsets, np.full(self.n_samples, 1.0 / self.n_samples)

        x, w = hermgauss(self.n_nodes)
        w = w / np.sqrt(np.pi)
        if self.mode == "relative":
            offsets = np.zeros((self.n_nodes, n_emit))
            offsets[:, 0] = np.sqrt(2.0) * self._relative_sigma() * x
            return offsets, w

        # Independent mode: tensor product over emitters with sigma > 0.
        active = [m for m, s in enumerate(self.sigmas) if s > 0]
        grids = np.meshgrid(*[np.sqrt(2.0) * self.sigmas[m] * x for m in active],
                            indexing="ij")
        weights = np.ones(1)
        for _ in active:
            weights = np.outer(weights, w).ravel()
        offsets = np.zeros((weights.size, n_emit))
        for col, m in enumerate(active):
            offsets[:, m] = grids[col].ravel()
        return offsets, weights


@dataclass(frozen=True)
class IrfSpec:
    """Gaussian detector response of given FWHM (ns); 0 disables it."""

    fwhm: float = 0.0

    def __post_init__(self):
        if self.fwhm < 0:
            raise ConfigError("IRF FWHM must be >= 0")


def _combine(trajectories, weights) -> Trajectory:
    base = trajectories[0]
    intens = {port: np.zeros_like(base.intensities[port]) for port in base.intensities}
    pops = None
    if base.populations is not None:
        pops = {k: np.zeros_like(v) for k, v in base.populations.items()}
    norm = np.zeros_like(base.norm) if base.norm is not None else None
    for w, traj in zip(weights, trajectories):
        for port in intens:
            values = traj.intensities[port]
            if not np.all(np.isfinite(values)):
                raise ConfigError("non-finite trajectory at a quadrature node")
            intens[port] += w * values
        if pops is not None:
            for k in pops:
                pops[k] += w * traj.populations[k]
        if norm is not None:
            norm += w * traj.norm
    return Trajectory(times=base.times, intensities=intens, populations=pops,
                      norm=norm, meta={"n_nodes": len(weights)})


def diffusion_average(sim: Callable[[np.ndarray], Trajectory],
                      spec: DiffusionSpec) -> Trajectory:
    """Average trajectories produced by ``sim`` over the detuning offsets.

    ``sim`` receives one offset vector (GHz, one entry per emitter) and must
    be deterministic in it.  Weights are normalized to one, so the average is
    linear in the trace and preserves non-negativity.
    """
    offsets, weights = spec.nodes()
    trajectories = [sim(offsets[k]) for k in range(len(weights))]
    return _combine(trajectories, weights)


def convolve_irf(trace: TimeTrace, spec: IrfSpec) -> TimeTrace:
    """Convolve a uniformly sampled trace with the Gaussian detector kernel.

    The kernel is sampled on the trace grid out to +-5 sigma, normalized to
    unit sum, and applied with zero-padded edges, so the total integral is
    preserved for traces that have decayed at the boundary.
    """
    if spec.fwhm == 0.0:
        return TimeTrace(trace.times, trace.values.copy(), dict(trace.meta))
    dt = trace.dt
    sigma = spec.fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    half = max(1, int(np.ceil(5.0 * sigma / dt)))
    ts = np.arange(-half, half + 1) * dt
    kernel = np.exp(-0.5 * (ts / sigma)**2)
    kernel /= kernel.sum()
    values = np.convolve(trace.values, kernel, mode="same")
    meta = dict(trace.meta)
    meta["irf_fwhm_ns"] = spec.fwhm
    return TimeTrace(trace.times, values, meta)


def normalize_trace(trace: TimeTrace, mode: str) -> TimeTrace:
    """Scale a trace to its maximum, to its sum, or not at all."""
    if mode not in ("max", "sum", "none"):
        raise ConfigError(f"unknown normalization mode {mode!r}")
    if mode == "none":
        scale = 1.0
    else:
        scale = trace.values.max() if mode == "max" else trace.values.sum()
        if not scale > 0:
            raise ConfigError("cannot normalize an all-zero trace")
    meta = dict(trace.meta)
    meta["normalization"] = mode
    return TimeTrace(trace.times, trace.values / scale, meta)
