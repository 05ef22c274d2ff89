"""Emitter and system parameter types and photon-mediated coupling matrices.

A system is a set of two-level emitters coupled through a single guided mode.
Each emitter m has a total decay rate Gamma_m split between the waveguide
(beta_m Gamma_m) and non-guided side modes ((1 - beta_m) Gamma_m).  The
propagation phase phi_mn = k |x_mn| between emitters m and n sets the mix of
dissipative coupling

    Gamma_mn = sqrt(beta_m beta_n Gamma_m Gamma_n) cos(phi_mn)

and dispersive coupling

    J_mn = (1/2) sqrt(beta_m beta_n Gamma_m Gamma_n) sin(phi_mn),

so (2 J_mn)^2 + Gamma_mn^2 = beta_m beta_n Gamma_m Gamma_n for every pair.
phi_mn = N pi gives purely dissipative coupling (super/subradiance),
phi_mn = (N + 1/2) pi purely dispersive (level shifts).  Couplings are real
and symmetric (non-chiral waveguide); chirality is out of scope.

All rates here are linear frequencies in GHz (see ``units``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DegenerateBranchError
from .units import BAND_EDGE_KA, MU_B_GHZ_PER_T, TWO_PI


@dataclass(frozen=True)
class ZeemanParams:
    """Magnetic tuning data for one emitter.

    nu0_thz is the zero-field transition frequency (only differences between
    emitters ever matter; it is a calibration input).  fss_ghz is the
    zero-field fine-structure splitting, g_factor the exciton g-factor along
    the field axis, dia_shift_ghz_per_t2 the diamagnetic coefficient.
    """

    fss_ghz: float
    g_factor: float
    dia_shift_ghz_per_t2: float
    nu0_thz: float = 0.0


@dataclass(frozen=True)
class EmitterParams:
    """Physical parameters of a single two-level emitter.

    gamma_total: total decay rate Gamma/2pi in GHz (> 0).
    beta: fraction of decay going into the waveguide, in [0, 1].
    detuning: detuning from the common drive frame, in GHz.
    sigma_sd: spectral-diffusion standard deviation, in GHz.
    gamma_dephase: pure dephasing rate, in GHz.

    The side-mode rate is derived, never stored: (1 - beta) * gamma_total.
    """

    gamma_total: float
    beta: float
    detuning: float = 0.0
    sigma_sd: float = 0.0
    gamma_dephase: float = 0.0
    zeeman: Optional[ZeemanParams] = None

    def __post_init__(self):
        if not self.gamma_total > 0:
            raise ConfigError(f"gamma_total must be > 0, got {self.gamma_total}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.sigma_sd < 0:
            raise ConfigError(f"sigma_sd must be >= 0, got {self.sigma_sd}")
        if self.gamma_dephase < 0:
            raise ConfigError(f"gamma_dephase must be >= 0, got {self.gamma_dephase}")

    @property
    def gamma_side(self) -> float:
        """Decay rate into non-guided side modes, GHz."""
        return (1.0 - self.beta) * self.gamma_total

    def with_detuning(self, detuning: float) -> "EmitterParams":
        return EmitterParams(self.gamma_total, self.beta, detuning,
                             self.sigma_sd, self.gamma_dephase, self.zeeman)


class PhaseLags:
    """Symmetric matrix of propagation phases phi_mn = k |x_mn| (radians).

    Emitters are indexed left to right along the waveguide, so row 0 holds the
    phases from the leftmost emitter and column N-1 those to the rightmost,
    which is what the two output ports use.  Cumulative consistency
    (phi_13 = phi_12 + phi_23) is guaranteed when built from positions via
    :meth:`from_separations`; raw matrices are taken as given.
    """

    def __init__(self, phi: np.ndarray):
        phi = np.array(phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise ConfigError(f"phase matrix must be square, got shape {phi.shape}")
        if not np.allclose(phi, phi.T, atol=1e-12):
            raise ConfigError("phase matrix must be symmetric")
        if not np.allclose(np.diag(phi), 0.0, atol=1e-12):
            raise ConfigError("phase matrix must have zero diagonal")
        phi = 0.5 * (phi + phi.T)
        np.fill_diagonal(phi, 0.0)
        phi.setflags(write=False)
        self.phi = phi

    @classmethod
    def from_separations(cls, separations_cells: Sequence[float],
                         k_a: float = BAND_EDGE_KA) -> "PhaseLags":
        """Build from adjacent emitter separations in lattice-cell units.

        Near the band edge k*a = pi, so a separation of N cells gives a phase
        lag of N pi.  ``separations_cells`` holds the N-1 gaps between
        neighbouring emitters ordered left to right.
        """
        seps = np.asarray(separations_cells, dtype=float)
        if np.any(seps < 0):
            raise ConfigError("separations must be >= 0")
        pos = np.concatenate([[0.0], np.cumsum(seps)])
        phi = k_a * np.abs(pos[:, None] - pos[None, :])
        return cls(phi)

    @property
    def size(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class SystemModel:
    """N emitters plus phase lags and the derived coupling matrices (GHz)."""

    emitters: tuple
    phases: PhaseLags
    gamma_mat: np.ndarray = field(repr=False)
    j_mat: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.emitters)

    @property
    def detunings(self) -> np.ndarray:
        return np.array([e.detuning for e in self.emitters])

    def with_detunings(self, detunings: Sequence[float]) -> "SystemModel":
        """Copy of the system with replaced per-emitter detunings."""
        if len(detunings) != self.size:
            raise ConfigError("detuning vector length mismatch")
        emitters = tuple(e.with_detuning(d) for e, d in zip(self.emitters, detunings))
        return SystemModel(emitters, self.phases, self.gamma_mat, self.j_mat)


def build_system(emitters: Sequence[EmitterParams], phases: PhaseLags) -> SystemModel:
    """Assemble the coupling matrices for a set of emitters.

    gamma_mat[m][n] = sqrt(beta_m beta_n Gamma_m Gamma_n) cos(phi_mn), whose
    diagonal is the waveguide rate beta_m Gamma_m, and
    j_mat[m][n] = (1/2) sqrt(...) sin(phi_mn), zero on the diagonal.
    """
    emitters = tuple(emitters)
    n = len(emitters)
    if n < 1:
        raise ConfigError("need at least one emitter")
    if phases.size != n:
        raise ConfigError(
            f"phase matrix is {phases.size}x{phases.size} but there are {n} emitters")
    g_wg = np.array([math.sqrt(e.beta * e.gamma_total) for e in emitters])
    strength = np.outer(g_wg, g_wg)
    gamma_mat = strength * np.cos(phases.phi)
    j_mat = 0.5 * strength * np.sin(phases.phi)
    np.fill_diagonal(j_mat, 0.0)
    gamma_mat.setflags(write=False)
    j_mat.setflags(write=False)
    return SystemModel(emitters, phases, gamma_mat, j_mat)


def effective_hamiltonian(system: SystemModel) -> np.ndarray:
    """Single-excitation non-Hermitian Hamiltonian, in angular units (rad/ns).

    H[n][n] = 2pi (Delta_n - i Gamma_n / 2): the diagonal combines the
    waveguide part (from the m = n coupling term) with the side-mode part,
    totalling the full decay rate.  H[n][m] = 2pi (J_mn - i Gamma_mn / 2).
    """
    n = system.size
    h = TWO_PI * (system.j_mat - 0.5j * system.gamma_mat).astype(complex)
    for m in range(n):
        e = system.emitters[m]
        h[m, m] = TWO_PI * (e.detuning - 0.5j * e.gamma_total)
    return h


def zeeman_transitions(zeeman: ZeemanParams, b_field: float):
    """Offsets of the two exciton branches from nu0 at field B, in GHz.

    nu_pm(B) = dia * B^2 +- (1/2) sqrt(FSS^2 + (g_z mu_B B / h)^2); the
    avoided-crossing hybridisation of the zero-field doublet with the linear
    Zeeman splitting is a modeling choice validated against the zero-field
    splitting and the quadratic diamagnetic shift.  Returns (high, low).
    Both branches are even in B (mirror symmetry around zero field).
    """
    if zeeman is None:
        raise ConfigError("emitter has no Zeeman data")
    shift = zeeman.dia_shift_ghz_per_t2 * b_field**2
    split = math.sqrt(zeeman.fss_ghz**2 + (zeeman.g_factor * MU_B_GHZ_PER_T * b_field)**2)
    return shift + 0.5 * split, shift - 0.5 * split


def _branch_frequency(emitter: EmitterParams, branch: str, b_field: float) -> float:
    hf, lf = zeeman_transitions(emitter.zeeman, b_field)
    if branch not in ("hf", "lf"):
        raise ConfigError(f"branch must be 'hf' or 'lf', got {branch!r}")
    offset = hf if branch == "hf" else lf
    return emitter.zeeman.nu0_thz * 1e3 + offset


def find_resonance_field(qd_i: EmitterParams, branch_i: str,
                         qd_j: EmitterParams, branch_j: str,
                         b_range: tuple, tol: float = 1e-4) -> Optional[float]:
    """Bisect for the field where two branch transition curves cross.

    Returns the crossing field in tesla to within ``tol``, or None when the
    frequency difference has no sign change on ``b_range``.  Identically zero
    difference raises :class:`DegenerateBranchError`.
    """
    b_lo, b_hi = b_range
    if not 0 <= b_lo < b_hi:
        raise ConfigError(f"invalid field range {b_range}")

    def diff(b):
        return (_branch_frequency(qd_i, branch_i, b)
                - _branch_frequency(qd_j, branch_j, b))

    probe = np.linspace(b_lo, b_hi, 101)
    values = np.array([diff(b) for b in probe])
    if np.all(np.abs(values) < 1e-12):
        raise DegenerateBranchError("branch curves are identical on the range")

    sign_change = np.nonzero(np.diff(np.sign(values)) != 0)[0]
    if len(sign_change) == 0:
        return None
    lo, hi = probe[sign_change[0]], probe[sign_change[0] + 1]
    f_lo = diff(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = diff(mid)
        if f_mid == 0.0:
            return mid
        if (f_lo < 0) != (f_mid < 0):
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)
