"""Master-equation generator and observables on the 2^N product space.

The full generator is

    drho/dt = -i[H, rho] + L_coup[rho] + L_decay[rho] + L_deph[rho]

with H = sum_m Delta_m sigma^z_m / 2 + Omega_m (e^{-i theta_m} sigma_m^+ +
e^{+i theta_m} sigma_m^-) / 2 plus the dispersive coupling
sum_{m!=n} J_mn sigma_n^+ sigma_m^-.  L_coup carries the waveguide-mediated
dissipation with the full rate matrix Gamma_mn, L_decay the per-emitter
side-mode decay (completed to full Lindblad form so the generator is
trace preserving), and L_deph standard pure dephasing
(gamma_d / 2) (sigma^z rho sigma^z - rho) per emitter.

Conventions: sigma^z = |e><e| - |g><g|; basis ordering is the tensor product
|g..g> .. |e..e> with emitter 1 in the most significant slot.  The sign of the
drive phase theta is a gauge choice (a phase rotation of sigma^-); it is fixed
here so that the tabulated two-emitter drive phase reproduces the observed
detuning asymmetry of the emission maps.

Port observables: with emitters ordered left to right, the left-going field
collects e^{i phi_1n} E_n and the right-going one e^{i phi_nN} E_n, where
E_n = -i sqrt(beta_n Gamma_n / 2) sigma_n^-.  Intensities are reported in
photons/ns (angular rates inside), so emission bookkeeping integrates to
photon numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, IntegrationError
from .model import SystemModel
from .units import to_angular

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
_SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)     # |e><e|-|g><g|
_EYE2 = np.eye(2, dtype=complex)


def _embed(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """Single-site operator -> full-space operator (site 0 most significant)."""
    out = np.array([[1.0 + 0.0j]])
    for k in range(n):
        out = np.kron(out, op if k == site else _EYE2)
    return out


def lowering_operators(n: int) -> list:
    return [_embed(_SIGMA_MINUS, m, n) for m in range(n)]


def sigma_z_operators(n: int) -> list:
    return [_embed(_SIGMA_Z, m, n) for m in range(n)]


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian positive state on the 2^N product space."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ConfigError(f"density matrix must be square, got {d.shape}")
        n = int(round(np.log2(d.shape[0])))
        if 2**n != d.shape[0]:
            raise ConfigError(f"dimension {d.shape[0]} is not a power of two")
        object.__setattr__(self, "data", d)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_emitters(self) -> int:
        return int(round(np.log2(self.dim)))

    @classmethod
    def ground(cls, n_emitters: int) -> "DensityMatrix":
        d = 2**n_emitters
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho)

    @classmethod
    def from_pure(cls, amplitudes) -> "DensityMatrix":
        psi = np.asarray(amplitudes, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def single_excited(cls, n_emitters: int, which: int) -> "DensityMatrix":
        """State |g..e..g> with emitter ``which`` excited (0-based)."""
        psi = np.zeros(2**n_emitters, dtype=complex)
        psi[1 << (n_emitters - 1 - which)] = 1.0
        return cls.from_pure(psi)

    def validate(self, positivity_tol: float = POSITIVITY_TOL) -> None:
        scale = max(1.0, float(np.abs(self.data).max()))
        herm = np.abs(self.data - self.data.conj().T).max()
        if herm > HERMITICITY_TOL * scale:
            raise IntegrationError(f"density matrix not Hermitian: deviation {herm:.2e}")
        tr = self.data.trace().real
        if not -1e-9 <= tr <= 1.0 + TRACE_TOL:
            raise IntegrationError(f"trace {tr} outside [0, 1]")
        eigmin = float(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T)).min())
        if eigmin < -positivity_tol:
            raise IntegrationError(f"negative eigenvalue {eigmin:.2e}")


@dataclass(frozen=True)
class DriveSpec:
    """Continuous drive: per-emitter Rabi rates (GHz), phases (rad), envelope.

    envelope None means the drive is off for all times; a (t_on, t_off) pair
    selects a square window.
    """

    rabi: tuple = ()
    phases: tuple = ()
    envelope: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "rabi", tuple(float(r) for r in self.rabi))
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        if any(r < 0 for r in self.rabi):
            raise ConfigError("Rabi rates must be >= 0")
        if len(self.rabi) != len(self.phases):
            raise ConfigError("rabi and phases must have equal length")
        if self.envelope is not None:
            t_on, t_off = self.envelope
            if not t_off > t_on:
                raise ConfigError("envelope times must be ordered")
            object.__setattr__(self, "envelope", (float(t_on), float(t_off)))

    @classmethod
    def off(cls) -> "DriveSpec":
        return cls()

    def is_active(self, t: float) -> bool:
        if self.envelope is None or not self.rabi:
            return False
        t_on, t_off = self.envelope
        return t_on <= t < t_off


@dataclass(frozen=True)
class CollectivePopulations:
    """Populations of the two-emitter collective and bare basis states."""

    p_sup: float
    p_sub: float
    p_ee: float
    p_gg: float
    p_eg: float
    p_ge: float


class LiouvillianOps:
    """Precomputed operator structure of the generator for one system.

    The generator is applied as structured operator sums on the dim x dim
    density matrix; the dim^2 x dim^2 superoperator is never materialised.
    The symmetric rate matrix (waveguide couplings plus side decay on the
    diagonal) is eigendecomposed once into independent jump channels, so the
    gain term costs N matrix products instead of N^2.

    All methods accept stacked density matrices of shape (..., dim, dim) and
    broadcast, which is what the diffusion-averaged propagation uses.
    """

    def __init__(self, system: SystemModel):
        self.system = system
        n = system.size
        self.n = n
        self.dim = 2**n
        self.s_minus = np.stack(lowering_operators(n))
        self.s_plus = self.s_minus.conj().transpose(0, 2, 1)
        self.s_z = np.stack(sigma_z_operators(n))

        gamma_ang = to_angular(np.array([e.gamma_total for e in system.emitters]))
        side_ang = to_angular(np.array([e.gamma_side for e in system.emitters]))
        self.gamma_deph_ang = to_angular(
            np.array([e.gamma_dephase for e in system.emitters]))
        rate_mat = to_angular(np.array(system.gamma_mat)) + np.diag(side_ang)

        # Independent decay channels: rate_mat = sum_k w_k v_k v_k^T.
        evals, evecs = np.linalg.eigh(rate_mat)
        keep = evals > 1e-12 * max(evals.max(), 1.0)
        self.jump_rates = evals[keep]
        self.jump_ops = np.einsum("mk,mij->kij", evecs[:, keep], self.s_minus)
        self.jump_ops_dag = self.jump_ops.conj().transpose(0, 2, 1)

        # Anticommutator partner: K = sum_mn rate_mat[m,n] s+_n s-_m.
        self.k_op = np.einsum("mn,nij,mjk->ik", rate_mat, self.s_plus, self.s_minus)

        # Static Hamiltonian pieces (angular): detuning + dispersive coupling.
        j_ang = to_angular(np.array(system.j_mat))
        h_disp = np.einsum("mn,nij,mjk->ik", j_ang, self.s_plus, self.s_minus)
        self.h_static = h_disp + 0.5 * np.einsum(
            "m,mij->ij", to_angular(system.detunings), self.s_z)
        # sigma_z/2 diagonals for per-node detuning offsets.
        self.detuning_generators = 0.5 * np.real(np.einsum("mii->mi", self.s_z))
        self.number_op = np.einsum("mij,mjk->ik", self.s_plus, self.s_minus)
        self.side_rates_ang = side_ang

    def hamiltonian(self, drive: DriveSpec, t: float,
                    detuning_offsets: Optional[np.ndarray] = None) -> np.ndarray:
        """Full Hamiltonian at time t, optionally stacked over offset nodes.

        detuning_offsets has shape (k, N) in GHz and yields a (k, dim, dim)
        stack; without it a single (dim, dim) matrix is returned.
        """
        h = self.h_static
        if drive.is_active(t):
            if len(drive.rabi) != self.n:
                raise ConfigError("drive vector length mismatch")
            hd = np.zeros_like(self.h_static)
            for m, (omega, theta) in enumerate(zip(drive.rabi, drive.phases)):
                if omega == 0.0:
                    continue
                hd += 0.5 * to_angular(omega) * (
                    np.exp(-1j * theta) * self.s_plus[m]
                    + np.exp(1j * theta) * self.s_minus[m])
            h = h + hd
        if detuning_offsets is None:
            return h
        diag = to_angular(detuning_offsets) @ self.detuning_generators
        h_batch = np.broadcast_to(h, (len(diag), self.dim, self.dim)).copy()
        idx = np.arange(self.dim)
        h_batch[:, idx, idx] += diag
        return h_batch

    def apply(self, rho: np.ndarray, h: np.ndarray) -> np.ndarray:
        """drho/dt for stacked rho given matching (stacked) Hamiltonian."""
        out = -1j * (h @ rho - rho @ h)
        out -= 0.5 * (self.k_op @ rho + rho @ self.k_op)
        for w, c, cd in zip(self.jump_rates, self.jump_ops, self.jump_ops_dag):
            out += w * (c @ rho @ cd)
        for m in range(self.n):
            gd = self.gamma_deph_ang[m]
            if gd > 0.0:
                out += 0.5 * gd * (self.s_z[m] @ rho @ self.s_z[m] - rho)
        return out


def generator_apply(system: SystemModel, drive: DriveSpec, t: float,
                    rho: DensityMatrix) -> np.ndarray:
    """Time derivative of the density matrix under the full generator."""
    ops = LiouvillianOps(system)
    if rho.dim != ops.dim:
        raise ConfigError(f"state dimension {rho.dim} does not match system {ops.dim}")
    rho.validate()
    out = ops.apply(rho.data, ops.hamiltonian(drive, t))
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite generator output")
    return out


def _port_weights(system: SystemModel, port: str) -> np.ndarray:
    """Complex field weights w_n with |w_n|^2 = beta_n Gamma_n^ang / 2."""
    phi = system.phases.phi
    n = system.size
    if port == "left":
        phases = phi[0, :]
    elif port == "right":
        phases = phi[:, n - 1]
    else:
        raise ConfigError(f"port must be 'left' or 'right', got {port!r}")
    amps = np.array([np.sqrt(0.5 * to_angular(e.beta * e.gamma_total))
                     for e in system.emitters])
    return np.exp(1j * phases) * amps


def intensity_operator(system: SystemModel, port: str) -> np.ndarray:
    """Hermitian operator whose expectation value is the port intensity."""
    w = _port_weights(system, port)
    ops = lowering_operators(system.size)
    out = np.zeros((2**system.size,) * 2, dtype=complex)
    for m in range(system.size):
        for n in range(system.size):
            out += np.conj(w[m]) * w[n] * (ops[m].conj().T @ ops[n])
    return out


def port_intensity(system: SystemModel, rho: DensityMatrix, port: str) -> float:
    """Outgoing intensity at one port, photons/ns.

    I = sum_mn conj(w_m) w_n <sigma_m^+ sigma_n^->; real up to 1e-12, the
    imaginary part is checked and discarded.
    """
    rho.validate()
    op = intensity_operator(system, port)
    val = complex(np.einsum("ij,ji->", op, rho.data))
    scale = max(abs(val), 1.0)
    if abs(val.imag) > 1e-12 * scale:
        raise IntegrationError(f"intensity has imaginary part {val.imag:.2e}")
    return val.real


def collective_state_vectors(dim: int = 4):
    """|S> and |s> for a two-emitter system, basis |gg>,|ge>,|eg>,|ee>."""
    s_sym = np.zeros(dim, dtype=complex)
    s_asym = np.zeros(dim, dtype=complex)
    s_sym[1] = s_sym[2] = 1.0 / np.sqrt(2.0)
    s_asym[2] = 1.0 / np.sqrt(2.0)
    s_asym[1] = -1.0 / np.sqrt(2.0)
    return s_sym, s_asym


def collective_populations(rho: DensityMatrix) -> CollectivePopulations:
    """Populations of |S>, |s> and the bare basis states (two emitters only)."""
    if rho.n_emitters != 2:
        raise ConfigError("collective populations are defined for exactly 2 emitters")
    s_sym, s_asym = collective_state_vectors()
    d = rho.data
    p_sup = float(np.real(s_sym.conj() @ d @ s_sym))
    p_sub = float(np.real(s_asym.conj() @ d @ s_asym))
    return CollectivePopulations(
        p_sup=p_sup,
        p_sub=p_sub,
        p_ee=float(d[3, 3].real),
        p_gg=float(d[0, 0].real),
        p_eg=float(d[2, 2].real),
        p_ge=float(d[1, 1].real),
    )
