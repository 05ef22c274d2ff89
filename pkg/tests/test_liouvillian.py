import numpy as np
import pytest

from wgcollective import (ConfigError, DensityMatrix, DriveSpec, EmitterParams,
                          PhaseLags, build_system, collective_populations,
                          effective_hamiltonian, generator_apply,
                          port_intensity)
from wgcollective.liouvillian import LiouvillianOps, collective_state_vectors

TWO_PI = 2 * np.pi


def pair(g1=0.79, g2=0.73, b1=0.8, b2=0.8, phi=0.05, d1=0.0, d2=0.0,
         gd1=0.0, gd2=0.0):
    emitters = [EmitterParams(g1, b1, detuning=d1, gamma_dephase=gd1),
                EmitterParams(g2, b2, detuning=d2, gamma_dephase=gd2)]
    return build_system(emitters, PhaseLags(np.array([[0.0, phi], [phi, 0.0]])))


def random_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return DensityMatrix(rho / rho.trace().real)


def random_pair(rng):
    return pair(g1=rng.uniform(0.3, 1.5), g2=rng.uniform(0.3, 1.5),
                b1=rng.uniform(0.3, 1.0), b2=rng.uniform(0.3, 1.0),
                phi=rng.uniform(0, 2 * np.pi),
                d1=rng.uniform(-4, 4), d2=rng.uniform(-4, 4),
                gd1=rng.uniform(0, 0.1), gd2=rng.uniform(0, 0.1))


class TestGenerator:
    def test_trace_preservation(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            system = random_pair(rng)
            rho = random_density(rng, 4)
            drive = DriveSpec(rabi=(0.5, 0.3), phases=(0.0, 1.0),
                              envelope=(0.0, 1.0))
            rdot = generator_apply(system, drive, 0.5, rho)
            assert abs(np.trace(rdot)) < 1e-12

    def test_single_emitter_decay_rate(self):
        system = build_system([EmitterParams(0.79, 0.8)], PhaseLags(np.zeros((1, 1))))
        rho = DensityMatrix(np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex))
        rdot = generator_apply(system, DriveSpec.off(), 0.0, rho)
        # total decay is side + waveguide = Gamma, regardless of beta
        assert rdot[1, 1].real == pytest.approx(-TWO_PI * 0.79, rel=1e-12)
        assert rdot[0, 0].real == pytest.approx(TWO_PI * 0.79, rel=1e-12)

    def test_superradiant_state_decay_rate(self):
        # d p_sup/dt = -2pi (Gamma_bar + Gamma_23) p_sup = -2pi * 1.3675 / ns,
        # computed from Table inputs (0.79 + 0.73)/2 + 0.6068 and verified
        # against this direct matrix evaluation of the full generator.
        system = pair()
        s_sym, _ = collective_state_vectors()
        rho = DensityMatrix(np.outer(s_sym, s_sym.conj()))
        rdot = generator_apply(system, DriveSpec.off(), 0.0, rho)
        rate = -float(np.real(s_sym.conj() @ rdot @ s_sym))
        expected = TWO_PI * (0.5 * (0.79 + 0.73) + system.gamma_mat[0, 1])
        assert rate == pytest.approx(expected, rel=1e-12)
        assert rate == pytest.approx(TWO_PI * 1.37, rel=5e-3)

    def test_hermiticity_preservation(self):
        rng = np.random.default_rng(9)
        system = random_pair(rng)
        rho = random_density(rng, 4)
        rdot = generator_apply(system, DriveSpec.off(), 0.0, rho)
        assert np.abs(rdot - rdot.conj().T).max() < 1e-12 * np.abs(rdot).max()

    def test_linearity(self):
        rng = np.random.default_rng(13)
        system = random_pair(rng)
        ops = LiouvillianOps(system)
        h = ops.hamiltonian(DriveSpec.off(), 0.0)
        r1 = random_density(rng, 4).data
        r2 = random_density(rng, 4).data
        a, b = 0.3, 0.7
        combined = ops.apply(a * r1 + b * r2, h)
        separate = a * ops.apply(r1, h) + b * ops.apply(r2, h)
        assert np.abs(combined - separate).max() < 1e-12

    def test_no_jump_block_matches_effective_hamiltonian(self):
        # Restricted to the single-excitation block (no drive, no dephasing)
        # the generator minus its feeding terms is the non-Hermitian evolution.
        rng = np.random.default_rng(21)
        for _ in range(10):
            system = pair(g1=rng.uniform(0.3, 1.5), g2=rng.uniform(0.3, 1.5),
                          b1=rng.uniform(0.3, 1.0), b2=rng.uniform(0.3, 1.0),
                          phi=rng.uniform(0, 2 * np.pi),
                          d1=rng.uniform(-4, 4), d2=rng.uniform(-4, 4))
            c = rng.normal(size=2) + 1j * rng.normal(size=2)
            c /= np.linalg.norm(c)
            psi = np.zeros(4, dtype=complex)
            psi[2], psi[1] = c  # |eg>, |ge>
            rho = DensityMatrix.from_pure(psi)
            rdot = generator_apply(system, DriveSpec.off(), 0.0, rho)
            block = rdot[1:3, 1:3][::-1, ::-1]  # reorder to amplitude basis
            h_eff = effective_hamiltonian(system)
            rho_amp = np.outer(c, c.conj())
            expected = -1j * (h_eff @ rho_amp - rho_amp @ h_eff.conj().T)
            assert np.abs(block - expected).max() < 1e-12 * max(
                1.0, np.abs(expected).max())

    def test_nan_rejected(self):
        system = pair()
        bad = np.zeros((4, 4), dtype=complex)
        bad[0, 0] = np.nan
        with pytest.raises(Exception):
            generator_apply(system, DriveSpec.off(), 0.0, DensityMatrix(bad))


class TestPortIntensity:
    def test_single_emitter_value(self):
        system = build_system([EmitterParams(0.79, 0.8)], PhaseLags(np.zeros((1, 1))))
        rho = DensityMatrix(np.diag([0.0, 1.0]).astype(complex))
        expected = 0.5 * 0.8 * TWO_PI * 0.79
        assert port_intensity(system, rho, "left") == pytest.approx(expected)
        assert port_intensity(system, rho, "right") == pytest.approx(expected)

    def test_ideal_interference(self):
        system = pair(g1=1.0, g2=1.0, b1=1.0, b2=1.0, phi=0.0)
        s_sym, s_asym = collective_state_vectors()
        sup = DensityMatrix(np.outer(s_sym, s_sym.conj()))
        sub = DensityMatrix(np.outer(s_asym, s_asym.conj()))
        assert port_intensity(system, sup, "right") == pytest.approx(TWO_PI * 1.0)
        assert port_intensity(system, sub, "right") == pytest.approx(0.0, abs=1e-14)

    def test_port_equality_at_multiples_of_pi(self):
        rng = np.random.default_rng(2)
        for n in (0, 1, 2):
            system = pair(phi=n * np.pi)
            for _ in range(5):
                rho = random_density(rng, 4)
                i_l = port_intensity(system, rho, "left")
                i_r = port_intensity(system, rho, "right")
                assert abs(i_l - i_r) < 1e-10 * max(1.0, abs(i_r))

    def test_photon_number_accounting(self):
        # I_L + I_R + side-mode flux equals -d/dt of the total excitation
        # for undriven, dephasing-free dynamics with consistent phases.
        rng = np.random.default_rng(31)
        for _ in range(10):
            system = pair(g1=rng.uniform(0.3, 1.5), g2=rng.uniform(0.3, 1.5),
                          b1=rng.uniform(0.3, 1.0), b2=rng.uniform(0.3, 1.0),
                          phi=rng.uniform(0, 2 * np.pi),
                          d1=rng.uniform(-3, 3), d2=rng.uniform(-3, 3))
            ops = LiouvillianOps(system)
            rho = random_density(rng, 4)
            rdot = generator_apply(system, DriveSpec.off(), 0.0, rho)
            n_dot = float(np.real(np.einsum("ij,ji->", ops.number_op, rdot)))
            side = sum(TWO_PI * e.gamma_side *
                       float(np.real(np.einsum("ij,ji->",
                                               ops.s_plus[m] @ ops.s_minus[m],
                                               rho.data)))
                       for m, e in enumerate(system.emitters))
            i_l = port_intensity(system, rho, "left")
            i_r = port_intensity(system, rho, "right")
            assert i_l + i_r + side == pytest.approx(-n_dot, rel=1e-10, abs=1e-12)

    def test_bad_port_name(self):
        system = pair()
        with pytest.raises(ConfigError):
            port_intensity(system, DensityMatrix.ground(2), "top")


class TestCollectivePopulations:
    def test_bare_excited_state(self):
        rho = DensityMatrix.single_excited(2, 0)  # |eg>
        pops = collective_populations(rho)
        assert pops.p_sup == pytest.approx(0.5)
        assert pops.p_sub == pytest.approx(0.5)
        assert pops.p_eg == pytest.approx(1.0)

    def test_pure_superradiant(self):
        s_sym, _ = collective_state_vectors()
        pops = collective_populations(DensityMatrix(np.outer(s_sym, s_sym.conj())))
        assert pops.p_sup == pytest.approx(1.0)
        assert pops.p_sub == pytest.approx(0.0, abs=1e-15)

    def test_quadrature_state_coherence(self):
        # (|ge> + i|eg>)/sqrt(2): equal populations, purely imaginary
        # S-s coherence of magnitude 1/2.
        psi = np.zeros(4, dtype=complex)
        psi[1] = 1 / np.sqrt(2)
        psi[2] = 1j / np.sqrt(2)
        rho = DensityMatrix.from_pure(psi)
        pops = collective_populations(rho)
        assert pops.p_sup == pytest.approx(0.5)
        assert pops.p_sub == pytest.approx(0.5)
        s_sym, s_asym = collective_state_vectors()
        coh = complex(s_sym.conj() @ rho.data @ s_asym)
        assert abs(coh.real) < 1e-15
        assert abs(coh.imag) == pytest.approx(0.5)

    def test_sum_rules(self):
        rng = np.random.default_rng(17)
        rho = random_density(rng, 4)
        pops = collective_populations(rho)
        assert pops.p_sup + pops.p_sub == pytest.approx(pops.p_eg + pops.p_ge)
        total = pops.p_gg + pops.p_eg + pops.p_ge + pops.p_ee
        assert total == pytest.approx(rho.data.trace().real)

    def test_requires_two_emitters(self):
        with pytest.raises(ConfigError):
            collective_populations(DensityMatrix.ground(1))


class TestIndependentOracles:
    def test_single_emitter_dephasing_coherence_rate(self):
        # Coherence decays at Gamma/2 + gamma_d (both angular); populations
        # are untouched by pure dephasing.
        from wgcollective import DensityMatrix, TimeGrid, evolve_master
        system = build_system([EmitterParams(0.8, 0.7, gamma_dephase=0.05)],
                              PhaseLags(np.zeros((1, 1))))
        psi = np.array([1.0, 1.0]) / np.sqrt(2.0)
        grid = TimeGrid(0.0, 1.0, 101)
        traj = evolve_master(system, DriveSpec.off(), DensityMatrix.from_pure(psi),
                             grid, keep_states=True)
        coh = np.abs(traj.states[:, 0, 1])
        expected = 0.5 * np.exp(-(0.5 * TWO_PI * 0.8 + TWO_PI * 0.05)
                                * traj.times)
        assert np.abs(coh - expected).max() < 1e-9

    def test_full_generator_against_solve_ivp(self):
        # Independent integrator oracle including drive window and dephasing.
        from scipy.integrate import solve_ivp
        from wgcollective import DensityMatrix, TimeGrid, evolve_master
        system = pair(g1=0.9, g2=0.6, b1=0.85, b2=0.7, phi=0.4,
                      d1=1.2, d2=-0.7, gd1=0.04, gd2=0.02)
        rho0 = DensityMatrix.single_excited(2, 0)
        grid = TimeGrid(0.0, 1.5, 61)
        t_on, t_off = float(grid.times[8]), float(grid.times[24])
        drive = DriveSpec(rabi=(0.8, 0.5), phases=(0.0, -1.1),
                          envelope=(t_on, t_off))
        traj = evolve_master(system, drive, rho0, grid, keep_states=True)

        ops = LiouvillianOps(system)

        def rhs(t, y):
            rho = y.reshape(4, 4)
            out = ops.apply(rho[None, :, :], ops.hamiltonian(drive, t))[0]
            return out.ravel()

        # integrate piecewise between the window edges so the reference does
        # not cross the Hamiltonian discontinuities inside a step
        bounds = [0, 8, 24, 60]
        y0 = rho0.data.ravel()
        ref_chunks = []
        for ia, ib in zip(bounds[:-1], bounds[1:]):
            t_eval = grid.times[ia:ib + 1]
            sol = solve_ivp(rhs, (t_eval[0], t_eval[-1]), y0, t_eval=t_eval,
                            rtol=1e-11, atol=1e-13)
            y0 = sol.y[:, -1]
            ref_chunks.append(sol.y.T.reshape(-1, 4, 4))
        ref = np.concatenate([ref_chunks[0], ref_chunks[1][1:],
                              ref_chunks[2][1:]])
        assert np.abs(ref - traj.states).max() < 1e-7
