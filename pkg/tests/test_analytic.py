import numpy as np
import pytest

from wgcollective import (EmitterParams, PhaseLags, TimeGrid, TwoEmitterParams,
                          approx_collective_rates, build_system,
                          closed_form_fields, closed_form_intensity,
                          damping_regime, effective_hamiltonian,
                          evolve_single_excitation, oscillation_frequency,
                          subradiant_rate_expansion)

TWO_PI = 2 * np.pi


def pair_system(p: TwoEmitterParams):
    emitters = [EmitterParams(p.gamma1, p.beta1, detuning=+0.5 * p.delta),
                EmitterParams(p.gamma2, p.beta2, detuning=-0.5 * p.delta)]
    phases = PhaseLags(np.array([[0.0, p.phi], [p.phi, 0.0]]))
    return build_system(emitters, phases)


class TestClosedFormFields:
    def test_ideal_dark_state(self):
        p = TwoEmitterParams(1.0, 1.0, 1.0, 1.0, delta=0.0, phi=0.0)
        for t in np.linspace(0.0, 5.0, 21):
            fp = closed_form_fields(p, "right", t)
            assert abs(fp.e_sub) < 1e-12
        fp = closed_form_fields(p, "right", 0.0)
        assert fp.rate_sup == pytest.approx(2.0, rel=1e-12)
        # superradiant intensity decays at twice the single-emitter rate
        i0 = abs(closed_form_fields(p, "right", 0.0).total)**2
        i1 = abs(closed_form_fields(p, "right", 1.0).total)**2
        assert i1 / i0 == pytest.approx(np.exp(-2 * TWO_PI), rel=1e-9)

    def test_phase_pi_swaps_roles(self):
        fast = TwoEmitterParams(1.0, 1.0, 1.0, 1.0, delta=0.0, phi=np.pi)
        fp = closed_form_fields(fast, "right", 0.3)
        # the slow branch now carries no field and decays at rate zero
        assert abs(fp.e_sub) < 1e-12 or fp.rate_sub == pytest.approx(0.0, abs=1e-9)
        assert max(fp.rate_sup, fp.rate_sub) == pytest.approx(2.0, rel=1e-9)

    def test_oracle_equivalence_random_draws(self):
        # The central cross-validation: formula vs numerical no-jump path.
        rng = np.random.default_rng(101)
        grid = TimeGrid(0.0, 3.0, 50)
        worst = 0.0
        for _ in range(200):
            p = TwoEmitterParams(
                gamma1=rng.uniform(0.3, 1.5), gamma2=rng.uniform(0.3, 1.5),
                beta1=rng.uniform(0.5, 1.0), beta2=rng.uniform(0.5, 1.0),
                delta=rng.uniform(-6.0, 6.0) * 0.5 * 1.0,
                phi=rng.uniform(0.0, np.pi))
            system = pair_system(p)
            traj = evolve_single_excitation(system, [1.0, 0.0], grid)
            for port in ("right", "left"):
                ana = closed_form_intensity(p, port, grid.times)
                worst = max(worst, float(np.abs(ana - traj.intensities[port]).max()))
        assert worst < 1e-8

    def test_table_parameters_with_detuning(self):
        p = TwoEmitterParams(0.79, 0.73, 0.8, 0.8, delta=2.0, phi=0.05)
        system = pair_system(p)
        grid = TimeGrid(0.0, 3.0, 80)
        traj = evolve_single_excitation(system, [1.0, 0.0], grid)
        ana = closed_form_intensity(p, "right", grid.times)
        assert np.abs(ana - traj.intensities["right"]).max() < 1e-8

    def test_completeness_at_t0(self):
        # e_sup(0) + e_sub(0) equals the t = 0 field of |eg>, whose
        # intensity is beta1 Gamma1 / 2 in angular units.
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = TwoEmitterParams(rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5),
                                 rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0),
                                 delta=rng.uniform(-3, 3),
                                 phi=rng.uniform(0, np.pi))
            total = closed_form_fields(p, "right", 0.0).total
            expected = 0.5 * p.beta1 * TWO_PI * p.gamma1
            assert abs(total)**2 == pytest.approx(expected, rel=1e-10)

    def test_port_asymmetry_off_multiples_of_pi(self):
        p = TwoEmitterParams(0.8, 0.8, 0.9, 0.9, delta=1.0, phi=0.7)
        ts = np.linspace(0, 2, 40)
        left = closed_form_intensity(p, "left", ts)
        right = closed_form_intensity(p, "right", ts)
        assert np.abs(left - right).max() > 1e-3
        for phi in (0.0, np.pi):
            q = TwoEmitterParams(0.8, 0.8, 0.9, 0.9, delta=1.0, phi=phi)
            left = closed_form_intensity(q, "left", ts)
            right = closed_form_intensity(q, "right", ts)
            assert np.abs(left - right).max() < 1e-12

    def test_rates_even_in_delta_at_dissipative_points(self):
        for phi in (0.0, np.pi, 2 * np.pi):
            for delta in (0.5, 1.7, 4.0):
                sys_p = pair_system(TwoEmitterParams(
                    0.9, 0.7, 0.8, 0.85, delta=delta, phi=phi))
                sys_m = pair_system(TwoEmitterParams(
                    0.9, 0.7, 0.8, 0.85, delta=-delta, phi=phi))
                r_p = np.sort(np.linalg.eigvals(effective_hamiltonian(sys_p)).imag)
                r_m = np.sort(np.linalg.eigvals(effective_hamiltonian(sys_m)).imag)
                assert np.allclose(r_p, r_m, atol=1e-12)

    def test_exceptional_point_flagged(self):
        # S = 0 at critical damping for matched emitters.
        gamma, beta = 1.0, 0.8
        p = TwoEmitterParams(gamma, gamma, beta, beta,
                             delta=beta * gamma, phi=0.0)
        fp = closed_form_fields(p, "right", 0.5)
        assert fp.degenerate
        # limit must agree with the numerical propagation
        system = pair_system(p)
        grid = TimeGrid(0.0, 2.0, 30)
        traj = evolve_single_excitation(system, [1.0, 0.0], grid)
        ana = closed_form_intensity(p, "right", grid.times)
        assert np.abs(ana - traj.intensities["right"]).max() < 1e-7


class TestOscillationFrequency:
    def test_overdamped_pure_imaginary(self):
        f, peak = oscillation_frequency(0.0, 0.0, 0.61)
        assert f == pytest.approx(1j * 0.61)
        assert peak is None

    def test_critical_damping(self):
        f, peak = oscillation_frequency(0.61, 0.0, 0.61)
        assert abs(f) < 1e-9
        assert peak is None

    def test_underdamped_peak_time(self):
        f, peak = oscillation_frequency(3.0, 0.0, 0.61)
        assert f.real == pytest.approx(np.sqrt(9.0 - 0.3721), rel=1e-12)
        assert f.real == pytest.approx(2.937, abs=5e-4)
        assert peak == pytest.approx(0.5 / 2.937, abs=1e-4)


class TestDampingRegime:
    def test_classification(self):
        assert damping_regime(1.22, 0.61) == "underdamped"
        assert damping_regime(0.0, 0.61) == "overdamped"
        assert damping_regime(0.61, 0.61) == "critical"
        assert damping_regime(-0.61 - 1e-12, 0.61) == "critical"


class TestApproxCollectiveRates:
    def test_qd23_anchor(self):
        sup, sub, enh, valid = approx_collective_rates(0.76, 0.8, 0.61, 0.38)
        assert sup == pytest.approx(1.25, abs=0.005)
        assert sub == pytest.approx(0.27, abs=0.005)
        assert valid

    def test_ideal_dicke_limit(self):
        sup, sub, _, _ = approx_collective_rates(1.0, 1.0, 1.0, 0.0)
        assert sup == pytest.approx(2.0)
        assert sub == pytest.approx(0.0, abs=1e-15)

    def test_qd12_values(self):
        sup, sub, enh, _ = approx_collective_rates(0.825, 0.8, 0.66, 0.18)
        assert sup == pytest.approx(1.46, abs=0.005)
        assert sub == pytest.approx(0.19, abs=0.005)

    def test_warns_outside_validity(self):
        with pytest.warns(UserWarning):
            approx_collective_rates(0.5, 0.8, 0.4, 0.6)

    def test_matches_exact_rates_to_first_order(self):
        # sigma = 0 rates against the eigenvalues for equal emitters.
        gamma, beta, phi = 0.8, 0.9, 0.04
        system = pair_system(TwoEmitterParams(gamma, gamma, beta, beta,
                                              delta=0.0, phi=phi))
        exact = np.sort(-2 * np.linalg.eigvals(
            effective_hamiltonian(system)).imag / TWO_PI)
        gamma_mn = beta * gamma * np.cos(phi)
        sup, sub, _, _ = approx_collective_rates(gamma, beta, gamma_mn, 0.0)
        assert abs(sup - exact[1]) / exact[1] < phi**2
        assert abs(sub - exact[1 - 1]) < phi**2 * gamma


class TestSubradiantExpansion:
    def test_perfect_dark_state(self):
        assert subradiant_rate_expansion(1.0, 1.0, 0.0, 0.0) == 0.0

    def test_side_leakage_only(self):
        assert subradiant_rate_expansion(0.9, 0.8, 0.0, 0.0) == pytest.approx(
            0.9 * 0.2)

    def test_against_eigenvalue_oracle(self):
        gamma, beta, phi, delta = 0.76, 0.8, 0.05, 0.2
        system = pair_system(TwoEmitterParams(gamma, gamma, beta, beta,
                                              delta=delta, phi=phi))
        exact_sub = np.sort(-2 * np.linalg.eigvals(
            effective_hamiltonian(system)).imag / TWO_PI)[0]
        approx = subradiant_rate_expansion(gamma, beta, phi, delta)
        bound = gamma * abs(phi)**3 + abs(delta)**3 / gamma**2
        assert abs(approx - exact_sub) < bound

    def test_warns_outside_window(self):
        with pytest.warns(UserWarning):
            subradiant_rate_expansion(1.0, 0.9, 0.8, 0.0)
