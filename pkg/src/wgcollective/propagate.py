"""Time evolution: RK4 master-equation integrator, exact single-excitation
propagation, and instantaneous pulse application.

The master equation is integrated with a classical fixed-step 4th-order
Runge-Kutta scheme.  Output sampling is decoupled from the internal step: the
integrator subdivides each sample interval into an integer number of steps no
longer than dt_internal.  The default step keeps omega_max * dt well below
0.13 for the largest angular rate in the problem.

For single-excitation initial states without dephasing or re-excitation, the
dynamics reduces to amplitudes c(t) = exp(-i H_eff t) c0 under the N x N
effective Hamiltonian (no-jump evolution); the dropped jump terms only feed
the dark ground state.  Eigendecomposition is used when well conditioned,
otherwise a scaling-and-squaring matrix exponential fallback kicks in (and is
flagged), which matters near exceptional points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigError, IntegrationError
from .liouvillian import (DensityMatrix, DriveSpec, LiouvillianOps,
                          collective_state_vectors, intensity_operator)
from .model import SystemModel, effective_hamiltonian
from .units import to_angular

ABORT_POSITIVITY = -1e-6

PORTS = ("left", "right")


@dataclass(frozen=True)
class TimeGrid:
    """Output sampling grid plus internal integration step."""

    t0: float
    t1: float
    n_points: int
    dt_internal: Optional[float] = None

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ConfigError("need t1 > t0")
        if self.n_points < 2:
            raise ConfigError("need at least 2 output samples")
        if self.dt_internal is not None:
            if self.dt_internal <= 0:
                raise ConfigError("dt_internal must be positive")
            if self.dt_internal > self.sample_dt * (1 + 1e-12):
                raise ConfigError("dt_internal must not exceed the sample spacing")

    @property
    def sample_dt(self) -> float:
        return (self.t1 - self.t0) / (self.n_points - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n_points)


@dataclass(frozen=True)
class PulseSpec:
    """Quasi-instantaneous excitation pulse: per-emitter areas and phases.

    areas are rotation angles in radians (pi flips |g> to |e>), phases set the
    relative phase imprinted between emitters.
    """

    areas: tuple
    phases: tuple

    def __post_init__(self):
        object.__setattr__(self, "areas", tuple(float(a) for a in self.areas))
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        if any(not 0.0 <= a <= 2.0 * np.pi for a in self.areas):
            raise ConfigError("pulse areas must be in [0, 2 pi]")
        if len(self.areas) != len(self.phases):
            raise ConfigError("areas and phases must have equal length")


@dataclass
class Trajectory:
    """Time-resolved output of one propagation run."""

    times: np.ndarray
    intensities: dict                      # port name -> array, photons/ns
    populations: Optional[dict] = None     # p_sup/p_sub/... -> array (N = 2)
    states: Optional[np.ndarray] = None    # (n_t, dim, dim) or (n_t, N) amplitudes
    norm: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def intensity(self, port: str) -> np.ndarray:
        return self.intensities[port]


def pulse_unitary(pulse: PulseSpec) -> np.ndarray:
    """Tensor product of single-emitter rotations.

    U_m = exp[-i area/2 (e^{-i theta} sigma^+ + e^{+i theta} sigma^-)]; from
    the ground state the excited amplitude picks up -i e^{-i theta} sin(a/2).
    """
    u = np.array([[1.0 + 0.0j]])
    for area, theta in zip(pulse.areas, pulse.phases):
        c, s = np.cos(0.5 * area), np.sin(0.5 * area)
        u1 = np.array([[c, -1j * s * np.exp(1j * theta)],
                       [-1j * s * np.exp(-1j * theta), c]], dtype=complex)
        u = np.kron(u, u1)
    return u


def apply_instant_pulse(rho: DensityMatrix, pulse: PulseSpec) -> DensityMatrix:
    """rho -> U rho U^dagger for an instantaneous drive pulse."""
    if 2**len(pulse.areas) != rho.dim:
        raise ConfigError("pulse vector length does not match state size")
    u = pulse_unitary(pulse)
    return DensityMatrix(u @ rho.data @ u.conj().T)


def default_dt(system: SystemModel, grid: TimeGrid, drive: DriveSpec = DriveSpec.off(),
               extra_detunings_ghz: float = 0.0) -> float:
    """Default internal step: min(0.02 / nu_max, span / 4000) in ns.

    nu_max is the largest linear rate in the problem (decay, detuning, Rabi),
    which keeps omega * dt <= about 0.13.
    """
    rates = [e.gamma_total for e in system.emitters]
    rates += [abs(e.detuning) for e in system.emitters]
    rates += [abs(r) for r in drive.rabi]
    rates.append(abs(extra_detunings_ghz))
    nu_max = max(max(rates), 0.05)
    return min(0.02 / nu_max, (grid.t1 - grid.t0) / 4000.0)


def _substeps(sample_dt: float, dt_internal: float) -> int:
    return max(1, int(np.ceil(sample_dt / dt_internal - 1e-12)))


def _rk4_run(ops: LiouvillianOps, drive: DriveSpec, rho_batch: np.ndarray,
             grid: TimeGrid, dt_internal: float,
             detuning_offsets: Optional[np.ndarray],
             check_invariants: bool = True):
    """Integrate stacked density matrices, yielding (t, rho_batch) at samples.

    The drive envelope is piecewise constant, so the two Hamiltonian stacks
    (drive on / drive off) are prebuilt and substeps are split at the window
    edges; within each segment the problem is smooth and classical RK4 keeps
    its full order.
    """
    n_sub = _substeps(grid.sample_dt, dt_internal)
    times = grid.times
    rho = rho_batch.astype(complex).copy()

    h_off = ops.hamiltonian(DriveSpec.off(), 0.0, detuning_offsets)
    driven = bool(drive.rabi) and drive.envelope is not None
    h_on = ops.hamiltonian(drive, drive.envelope[0], detuning_offsets) \
        if driven else None
    edges = list(drive.envelope) if driven else []

    def segments(t0, t1):
        cuts = np.linspace(t0, t1, n_sub + 1)
        if driven:
            inner = [e for e in edges if t0 < e < t1]
            cuts = np.unique(np.concatenate([cuts, inner]))
        return cuts

    yield times[0], rho
    for i in range(len(times) - 1):
        cuts = segments(times[i], times[i + 1])
        for a, b in zip(cuts[:-1], cuts[1:]):
            dt = b - a
            h = h_on if driven and drive.is_active(0.5 * (a + b)) else h_off
            k1 = ops.apply(rho, h)
            k2 = ops.apply(rho + 0.5 * dt * k1, h)
            k3 = ops.apply(rho + 0.5 * dt * k2, h)
            k4 = ops.apply(rho + dt * k3, h)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().transpose(0, 2, 1))
        if check_invariants:
            if not np.all(np.isfinite(rho)):
                raise IntegrationError(f"non-finite state at t = {times[i + 1]:.6g} ns")
            eigmin = float(np.linalg.eigvalsh(rho).min())
            if eigmin < ABORT_POSITIVITY:
                raise IntegrationError(
                    f"positivity lost at t = {times[i + 1]:.6g} ns "
                    f"(min eigenvalue {eigmin:.3e}); reduce dt_internal")
        yield times[i + 1], rho


def _observables(ops: LiouvillianOps, system: SystemModel):
    """Intensity operators and (for N = 2) collective projectors."""
    int_ops = {port: intensity_operator(system, port) for port in PORTS}
    proj = None
    if system.size == 2:
        s_sym, s_asym = collective_state_vectors()
        proj = {"p_sup": np.outer(s_sym, s_sym.conj()),
                "p_sub": np.outer(s_asym, s_asym.conj())}
    return int_ops, proj


def evolve_master(system: SystemModel, drive: DriveSpec, rho0: DensityMatrix,
                  grid: TimeGrid, keep_states: bool = False,
                  error_estimate: bool = False) -> Trajectory:
    """Integrate the full master equation and record port intensities.

    Populations of the collective states are recorded for two-emitter
    systems.  With ``error_estimate`` the run is repeated at half the step
    and the largest terminal-state difference is reported in ``meta``.
    """
    ops = LiouvillianOps(system)
    if rho0.dim != ops.dim:
        raise ConfigError(f"state dimension {rho0.dim} does not match system")
    rho0.validate()
    dt = grid.dt_internal or default_dt(system, grid, drive)

    int_ops, proj = _observables(ops, system)
    batch = rho0.data[None, :, :]

    def run(dt_run):
        intens = {port: np.empty(grid.n_points) for port in PORTS}
        pops = ({k: np.empty(grid.n_points) for k in
                 ("p_sup", "p_sub", "p_ee", "p_gg", "p_eg", "p_ge")}
                if proj is not None else None)
        states = np.empty((grid.n_points, ops.dim, ops.dim), complex) if keep_states else None
        norm = np.empty(grid.n_points)
        final = None
        for i, (t, rho) in enumerate(
                _rk4_run(ops, drive, batch, grid, dt_run, None)):
            r = rho[0]
            for port in PORTS:
                val = complex(np.einsum("ij,ji->", int_ops[port], r))
                intens[port][i] = val.real
            if pops is not None:
                pops["p_sup"][i] = np.einsum("ij,ji->", proj["p_sup"], r).real
                pops["p_sub"][i] = np.einsum("ij,ji->", proj["p_sub"], r).real
                pops["p_ee"][i] = r[3, 3].real
                pops["p_gg"][i] = r[0, 0].real
                pops["p_eg"][i] = r[2, 2].real
                pops["p_ge"][i] = r[1, 1].real
            norm[i] = r.trace().real
            if keep_states:
                states[i] = r
            final = r
        return intens, pops, states, norm, final

    intens, pops, states, norm, final = run(dt)
    meta = {"dt_internal": dt, "method": "rk4"}
    if error_estimate:
        _, _, _, _, final_half = run(0.5 * dt)
        meta["step_halving_error"] = float(np.abs(final - final_half).max())

    return Trajectory(times=grid.times, intensities=intens, populations=pops,
                      states=states, norm=norm, meta=meta)


def evolve_master_batch(system: SystemModel, drive: DriveSpec, rho0: DensityMatrix,
                        grid: TimeGrid, detuning_offsets: np.ndarray,
                        weights: np.ndarray) -> Trajectory:
    """Weighted-average trajectory over a stack of detuning offsets.

    All offset nodes are integrated together in one batched RK4 run; the
    returned intensities and populations are the weighted averages.  This is
    the fast path behind spectral-diffusion averaging.
    """
    ops = LiouvillianOps(system)
    rho0.validate()
    offsets = np.atleast_2d(np.asarray(detuning_offsets, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if offsets.shape[0] != weights.shape[0]:
        raise ConfigError("offsets and weights length mismatch")
    if offsets.shape[1] != system.size:
        raise ConfigError("offset vectors must have one entry per emitter")

    extra = float(np.abs(offsets).max()) if offsets.size else 0.0
    dt = grid.dt_internal or default_dt(system, grid, drive, extra)

    int_ops, proj = _observables(ops, system)
    batch = np.broadcast_to(rho0.data, (len(weights), ops.dim, ops.dim)).copy()

    intens = {port: np.empty(grid.n_points) for port in PORTS}
    pops = ({k: np.empty(grid.n_points) for k in
             ("p_sup", "p_sub", "p_ee", "p_gg", "p_eg", "p_ge")}
            if proj is not None else None)
    norm = np.empty(grid.n_points)
    for i, (t, rho) in enumerate(
            _rk4_run(ops, drive, batch, grid, dt, offsets)):
        avg = np.einsum("k,kij->ij", weights, rho)
        for port in PORTS:
            intens[port][i] = np.einsum("ij,ji->", int_ops[port], avg).real
        if pops is not None:
            pops["p_sup"][i] = np.einsum("ij,ji->", proj["p_sup"], avg).real
            pops["p_sub"][i] = np.einsum("ij,ji->", proj["p_sub"], avg).real
            pops["p_ee"][i] = avg[3, 3].real
            pops["p_gg"][i] = avg[0, 0].real
            pops["p_eg"][i] = avg[2, 2].real
            pops["p_ge"][i] = avg[1, 1].real
        norm[i] = avg.trace().real

    return Trajectory(times=grid.times, intensities=intens, populations=pops,
                      norm=norm, meta={"dt_internal": dt, "n_nodes": len(weights)})


def _single_excitation_weights(system: SystemModel, port: str) -> np.ndarray:
    from .liouvillian import _port_weights
    return _port_weights(system, port)


def evolve_single_excitation(system: SystemModel, c0: Sequence[complex],
                             grid: TimeGrid) -> Trajectory:
    """Exact no-jump propagation of single-excitation amplitudes.

    Valid contract: no drive during the evolution and zero pure dephasing
    (dephasing data on the system is ignored here; use the master equation
    when it matters).  Port intensities follow from the amplitudes as
    I_port = |sum_n w_n c_n|^2.
    """
    c0 = np.asarray(c0, dtype=complex)
    if c0.shape != (system.size,):
        raise ConfigError("amplitude vector length must equal emitter count")
    if np.sum(np.abs(c0)**2) > 1.0 + 1e-9:
        raise ConfigError("initial amplitudes exceed unit norm")
    h = effective_hamiltonian(system)
    times = grid.times
    used_expm = False

    evals, evecs = np.linalg.eig(h)
    cond = np.linalg.cond(evecs)
    if not np.isfinite(cond) or cond > 1e8:
        used_expm = True
        cs = np.empty((len(times), system.size), dtype=complex)
        step = scipy.linalg.expm(-1j * h * grid.sample_dt)
        cs[0] = scipy.linalg.expm(-1j * h * times[0]) @ c0
        for i in range(1, len(times)):
            cs[i] = step @ cs[i - 1]
    else:
        a = np.linalg.solve(evecs, c0)
        phases = np.exp(-1j * np.outer(times, evals))
        cs = (phases * a[None, :]) @ evecs.T

    intens = {}
    for port in PORTS:
        w = _single_excitation_weights(system, port)
        intens[port] = np.abs(cs @ w)**2

    pops = None
    if system.size == 2:
        sup = np.abs((cs[:, 0] + cs[:, 1]) / np.sqrt(2.0))**2
        sub = np.abs((cs[:, 0] - cs[:, 1]) / np.sqrt(2.0))**2
        pops = {"p_sup": sup, "p_sub": sub,
                "p_eg": np.abs(cs[:, 0])**2, "p_ge": np.abs(cs[:, 1])**2,
                "p_ee": np.zeros(len(times)),
                "p_gg": 1.0 - np.sum(np.abs(cs)**2, axis=1)}

    return Trajectory(times=times, intensities=intens, populations=pops,
                      states=cs, norm=np.sum(np.abs(cs)**2, axis=1),
                      meta={"method": "expm" if used_expm else "eig",
                            "expm_fallback": used_expm})
