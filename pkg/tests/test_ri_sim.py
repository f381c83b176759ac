"""Tests for the repeated-interaction channel simulator."""

import dataclasses

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import erf

import kmslab.analysis as an
import kmslab.generators as gn
import kmslab.models as md
import kmslab.numlin as nl
import kmslab.ri_sim as ri
from kmslab.errors import (
    CPViolation,
    InvalidSpec,
    KappaBelowOne,
    NonUniqueFixedPoint,
    NotConverged,
    QuadratureNotConverged,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@pytest.fixture(scope="module")
def qubit():
    return md.single_qubit(1.0)


@pytest.fixture(scope="module")
def qubit_jumps():
    return md.pauli_jump_set(1)


@pytest.fixture(scope="module")
def dyson_k4(qubit, qubit_jumps):
    cfg = ri.RIConfig(alpha=0.05, kappa=4.0, beta=1.0)
    return ri.dyson2_components(qubit, qubit_jumps, cfg, n_time_nodes=192)


class TestConfig:
    def test_kappa_below_one(self):
        with pytest.raises(KappaBelowOne):
            ri.RIConfig(alpha=0.1, kappa=0.9, beta=1.0)

    def test_odd_steps_rejected(self):
        with pytest.raises(InvalidSpec):
            ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, n_steps=1001)

    def test_short_pulse_rejected(self):
        with pytest.raises(InvalidSpec):
            ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, t_pulse=5.0)

    def test_sampled_jumps_need_montecarlo(self):
        with pytest.raises(InvalidSpec):
            ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, jump_mode="sampled")

    def test_unknown_modes(self):
        with pytest.raises(InvalidSpec):
            ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, omega_mode="exact")
        with pytest.raises(InvalidSpec):
            ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, jump_mode="all")

    def test_negative_coupling_rejected(self):
        with pytest.raises(InvalidSpec):
            ri.RIConfig(alpha=-0.1, kappa=2.0, beta=1.0)

    def test_resolved_defaults(self):
        cfg = ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0)
        assert cfg.resolved_t_pulse == pytest.approx(12.0)
        assert cfg.resolved_n_steps % 2 == 0
        assert cfg.resolved_n_steps == 6000
        assert cfg.resolved_n_nodes == 128
        assert ri.RIConfig(alpha=0.1, kappa=1.0, beta=1.0).resolved_n_nodes == 64
        assert ri.RIConfig(alpha=0.1, kappa=4.0, beta=1.0).resolved_n_nodes == 512

    def test_to_dict_echoes_resolved(self):
        cfg = ri.RIConfig(alpha=0.1, kappa=2.0, beta=0.5)
        d = cfg.to_dict()
        assert d["t_pulse"] == pytest.approx(6.0)
        assert d["n_steps"] == cfg.resolved_n_steps
        assert d["n_nodes"] == cfg.resolved_n_nodes


class TestFrequencySampling:
    def test_moments(self):
        rng = np.random.default_rng(0)
        draws = ri.sample_frequency(2.0, 0.5, rng, size=200_000)
        assert np.mean(draws) == pytest.approx(-2.0, abs=0.02)
        assert np.std(draws) == pytest.approx(np.sqrt(1.75) / 0.5, rel=0.01)

    def test_deterministic_per_seed(self):
        a = ri.sample_frequency(2.0, 1.0, np.random.default_rng(7), size=10)
        b = ri.sample_frequency(2.0, 1.0, np.random.default_rng(7), size=10)
        assert np.array_equal(a, b)

    def test_kappa_domain(self):
        with pytest.raises(KappaBelowOne):
            ri.sample_frequency(0.5, 1.0, np.random.default_rng(0))


class TestBathCorrelation:
    def test_against_matrix_oracle(self):
        """Closed form vs literal Tr[rho_B X(t) X] with matrix exponentials."""
        beta, omega = 1.3, -0.7
        h_b = -(omega / 2.0) * SZ
        z = np.trace(expm(-beta * h_b))
        rho_b = expm(-beta * h_b) / z
        for t in np.linspace(-8.0, 8.0, 50):
            u = expm(1j * t * h_b)
            x_t = u @ SX @ u.conj().T
            oracle = np.trace(rho_b @ x_t @ SX)
            assert abs(ri.bath_correlation(omega, beta, t) - oracle) < 1e-12

    def test_normalization_and_conjugation(self):
        assert ri.bath_correlation(2.0, 0.7, 0.0) == pytest.approx(1.0)
        c_plus = ri.bath_correlation(2.0, 0.7, 1.3)
        c_minus = ri.bath_correlation(2.0, 0.7, -1.3)
        assert c_plus == pytest.approx(np.conj(c_minus))

    def test_populations_sum(self):
        p0, p1 = ri.ancilla_populations(2.0, -3.0)
        assert p0 + p1 == pytest.approx(1.0)
        assert p1 > p0  # negative frequency: excited state of -(omega/2)Z


class TestPulseTransforms:
    def test_erf_product_matches_direct(self):
        for x in (-3.0, -0.5, 0.0, 0.5, 3.0):
            for y in (-2.0, 0.0, 1.5):
                direct = np.exp(-y ** 2) * erf(x + 1j * y)
                assert abs(ri._erf_product(x, y) - direct) < 1e-13

    def test_erf_product_stable_at_extreme_arguments(self):
        # naive erf(6 + 60j) overflows; the product must stay finite
        val = ri._erf_product(6.0, 60.0)
        assert np.isfinite(val)
        assert abs(val) < 1.0

    @pytest.mark.filterwarnings(
        "ignore::scipy.integrate.IntegrationWarning")
    def test_window_against_quadrature(self):
        kappa, beta, t_pulse = 2.0, 1.0, 12.0
        for mu in (0.0, 1.0, 5.0, 14.0):
            oracle = quad(lambda s: gn.f_kappa(kappa, beta, s) * np.cos(mu * s),
                          -t_pulse, t_pulse, epsabs=1e-14, epsrel=1e-13,
                          limit=300)[0]
            val = ri._pulse_fourier_window(mu, kappa, beta, t_pulse)
            assert val == pytest.approx(oracle, abs=1e-12)

    def test_window_even(self):
        w1 = ri._pulse_fourier_window(2.3, 3.0, 0.7, 15.0)
        w2 = ri._pulse_fourier_window(-2.3, 3.0, 0.7, 15.0)
        assert w1 == pytest.approx(w2, rel=1e-14)

    def test_partial_reaches_window(self):
        kappa, beta, t_pulse, mu = 2.0, 1.0, 12.0, 1.7
        full = ri._pulse_fourier_partial(t_pulse, mu, kappa, beta, t_pulse)
        # the full-range partial integral is the (real) window transform
        win = ri._pulse_fourier_window(mu, kappa, beta, t_pulse)
        assert abs(full - win) < 1e-12

    def test_partial_against_quadrature(self):
        kappa, beta, t_pulse, mu, s_top = 1.5, 0.8, 9.0, 2.1, -1.3
        re = quad(lambda s: gn.f_kappa(kappa, beta, s) * np.cos(mu * s),
                  -t_pulse, s_top, epsabs=1e-14)[0]
        im = quad(lambda s: gn.f_kappa(kappa, beta, s) * np.sin(mu * s),
                  -t_pulse, s_top, epsabs=1e-14)[0]
        val = ri._pulse_fourier_partial(s_top, mu, kappa, beta, t_pulse)
        assert val == pytest.approx(re + 1j * im, abs=1e-12)


class TestPulsePropagator:
    def test_unitary(self, qubit):
        u = ri.pulse_propagator(qubit.matrix, SX, -1.0, 0.1, 2.0, 1.0, 12.0,
                                2000)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-10

    def test_step_halving_second_order(self, qubit):
        """The midpoint product converges at second order: halving
        2000 -> 4000 moves the result by ~7e-8 for this pulse, and the
        change shrinks ~16x per 4x step refinement."""
        us = {n: ri.pulse_propagator(qubit.matrix, SX, -1.0, 0.1, 2.0, 1.0,
                                     12.0, n)
              for n in (2000, 4000, 8000, 16000)}
        d1 = np.max(np.abs(us[2000] - us[4000]))
        d2 = np.max(np.abs(us[8000] - us[16000]))
        assert 3e-8 < d1 < 2e-7
        assert 8.0 < d1 / d2 < 32.0

    def test_auto_check_converges(self, qubit):
        u = ri.pulse_propagator(qubit.matrix, SX, -1.0, 0.1, 2.0, 1.0, 12.0,
                                2000, auto_check=True, tol=1e-6)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-10

    def test_auto_check_raises_at_cap(self, qubit):
        with pytest.raises(NotConverged):
            ri.pulse_propagator(qubit.matrix, SX, -1.0, 0.1, 2.0, 1.0, 12.0,
                                512, auto_check=True, tol=1e-14,
                                n_steps_max=1024)

    def test_sign_conjugation_identity(self, qubit):
        """(I (x) Z) U[+A] (I (x) Z) = U[-A] holds exactly per step, so the
        two sign branches coincide after ancilla conjugation."""
        u_plus = ri.pulse_propagator(qubit.matrix, SX, -0.8, 0.3, 2.0, 1.0,
                                     12.0, 500)
        u_minus = ri.pulse_propagator(qubit.matrix, -SX, -0.8, 0.3, 2.0, 1.0,
                                      12.0, 500)
        zz = np.kron(np.eye(2), SZ)
        assert np.max(np.abs(zz @ u_plus @ zz - u_minus)) < 1e-13

    def test_odd_steps_rejected(self, qubit):
        with pytest.raises(InvalidSpec):
            ri.pulse_propagator(qubit.matrix, SX, -1.0, 0.1, 2.0, 1.0, 12.0,
                                999)


class TestChannel:
    def test_zero_coupling_is_free_conjugation(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.0, kappa=2.0, beta=1.0, n_steps=2000,
                          n_nodes=64)
        ch = ri.ri_channel(qubit, qubit_jumps, cfg)
        free = nl.conj_by(expm(-2j * cfg.resolved_t_pulse * qubit.matrix))
        assert np.max(np.abs(ch.superop.matrix - free)) < 1e-12

    def test_cp_and_tp_residuals(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.3, kappa=2.0, beta=1.0, n_steps=2000,
                          n_nodes=64)
        ch = ri.ri_channel(qubit, qubit_jumps, cfg)
        assert ch.cp_residual > -1e-9
        assert ch.tp_residual < 1e-9

    def test_sign_average_shortcut_is_exact(self, qubit):
        """The channel built from +A equals the channel built from -A, so
        averaging the sign is redundant (and the code skips it)."""
        plus = md.JumpSet(ops=[SX], labels=[(0, "X")], norm_g=1.0)
        minus = md.JumpSet(ops=[-SX], labels=[(0, "X")], norm_g=1.0)
        cfg = ri.RIConfig(alpha=0.4, kappa=1.5, beta=1.0, n_steps=600,
                          n_nodes=32)
        ch_p = ri.ri_channel(qubit, plus, cfg)
        ch_m = ri.ri_channel(qubit, minus, cfg)
        assert np.max(np.abs(ch_p.superop.matrix - ch_m.superop.matrix)) < 1e-13

    def test_deterministic(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.2, kappa=1.5, beta=1.0, n_steps=400,
                          n_nodes=32)
        a = ri.ri_channel(qubit, qubit_jumps, cfg).superop.matrix
        b = ri.ri_channel(qubit, qubit_jumps, cfg).superop.matrix
        assert np.array_equal(a, b)

    def test_montecarlo_seeded(self, qubit, qubit_jumps):
        def mc(seed):
            cfg = ri.RIConfig(alpha=0.2, kappa=1.5, beta=1.0, n_steps=400,
                              omega_mode="montecarlo", jump_mode="sampled",
                              n_samples=50, seed=seed)
            return ri.ri_channel(qubit, qubit_jumps, cfg).superop.matrix
        assert np.array_equal(mc(3), mc(3))
        assert not np.array_equal(mc(3), mc(4))

    def test_cp_violation_guard(self, qubit, qubit_jumps, monkeypatch):
        monkeypatch.setattr(ri, "cp_residual", lambda sop: -1e-6)
        cfg = ri.RIConfig(alpha=0.1, kappa=1.5, beta=1.0, n_steps=400,
                          n_nodes=32)
        with pytest.raises(CPViolation):
            ri.ri_channel(qubit, qubit_jumps, cfg)

    def test_config_echo(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.1, kappa=1.5, beta=1.0, n_steps=400,
                          n_nodes=32)
        ch = ri.ri_channel(qubit, qubit_jumps, cfg)
        assert ch.config["kappa"] == 1.5
        assert ch.config["n_steps"] == 400


class TestDysonGenerator:
    def test_trace_preserving(self, dyson_k4):
        assert dyson_k4.tp_defect < 1e-12

    def test_table_matches_filtered_rate_route(self, dyson_k4):
        """The frequency-averaged sandwich coefficients equal the integral
        of the collision rate against the two shifted pulse filters."""
        kappa, beta = 4.0, 1.0
        tau = kappa * beta

        def f_hat(mu):
            return (2 * np.pi) ** 0.25 * np.sqrt(tau) * np.exp(
                -mu ** 2 * tau ** 2 / 4)

        lam = dyson_k4.lambda_tables[(0, "X")]
        nu = dyson_k4.freqs[(0, "X")]
        scale = np.max(np.abs(lam))
        for i in range(nu.size):
            for j in range(nu.size):
                oracle = quad(
                    lambda w: gn.gamma_ri(kappa, beta, w)
                    * f_hat(nu[i] - w) * f_hat(nu[j] - w),
                    -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12,
                    limit=400)[0]
                assert abs(lam[i, j] - oracle) / scale < 1e-6

    @staticmethod
    def _kms_table_deviation(comp, beta):
        """Worst entrywise defect of
        Lambda(nu1, nu2) = e^{-beta(nu1+nu2)/2} Lambda(-nu2, -nu1),
        relative to the largest table entry."""
        lam = comp.lambda_tables[(0, "X")]
        nu = comp.freqs[(0, "X")]
        scale = np.max(np.abs(lam))
        dev = 0.0
        for i in range(nu.size):
            for j in range(nu.size):
                ii = int(np.argmin(np.abs(nu + nu[j])))
                jj = int(np.argmin(np.abs(nu + nu[i])))
                rhs = np.exp(-beta * (nu[i] + nu[j]) / 2.0) * lam[ii, jj]
                dev = max(dev, abs(lam[i, j] - rhs) / scale)
        return dev

    def test_table_detailed_balance_sharpens_with_kappa(self, qubit,
                                                        qubit_jumps,
                                                        dyson_k4):
        """The coefficient table obeys the detailed-balance relation up to
        a filter-width correction that shrinks as the pulse lengthens
        (a few percent at kappa=4, at least halved by kappa=8)."""
        dev4 = self._kms_table_deviation(dyson_k4, 1.0)
        cfg8 = ri.RIConfig(alpha=0.05, kappa=8.0, beta=1.0, n_nodes=1024)
        comp8 = ri.dyson2_components(qubit, qubit_jumps, cfg8,
                                     n_time_nodes=192)
        dev8 = self._kms_table_deviation(comp8, 1.0)
        assert dev4 < 0.1
        assert dev8 < 0.5 * dev4

    def test_doubling_invariance_at_defaults(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.05, kappa=2.0, beta=1.0)
        sop = ri.dyson2_generator(qubit, qubit_jumps, cfg,
                                  check_convergence=True)
        assert sop.matrix.shape == (4, 4)

    def test_under_resolved_nodes_raise(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.05, kappa=4.0, beta=1.0, n_nodes=32)
        with pytest.raises(QuadratureNotConverged):
            ri.dyson2_generator(qubit, qubit_jumps, cfg,
                                check_convergence=True)

    def test_requires_exact_mode(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.05, kappa=2.0, beta=1.0,
                          omega_mode="montecarlo", n_samples=100)
        with pytest.raises(InvalidSpec):
            ri.dyson2_generator(qubit, qubit_jumps, cfg)

    def test_richardson_quotient_matches(self, qubit, qubit_jumps):
        """Channel difference quotients, Richardson-extrapolated over the
        coupling pair, land on the conjugated generator to < 1e-6."""
        cfg = ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, n_steps=8000,
                          n_nodes=64)
        dev = ri.richardson_check(qubit, qubit_jumps, cfg)
        assert dev < 1e-6

    def test_richardson_rejects_bad_pair(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, n_steps=400,
                          n_nodes=32)
        with pytest.raises(InvalidSpec):
            ri.richardson_check(qubit, qubit_jumps, cfg, alphas=(1e-2, 3e-3))


class TestCoherentExtraction:
    def test_recovers_synthetic_flow(self):
        rng = np.random.default_rng(5)
        c0 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        c0 = 0.5 * (c0 + c0.conj().T)
        c0 -= np.trace(c0) / 2 * np.eye(2)
        flow = nl.SuperOp(nl.ham_superop(c0), "schrodinger")
        assert np.max(np.abs(ri.extract_coherent(flow) - c0)) < 1e-14

    def test_ignores_dissipative_part(self, qubit, qubit_jumps):
        rng = np.random.default_rng(6)
        c0 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        c0 = 0.5 * (c0 + c0.conj().T)
        c0 -= np.trace(c0) / 2 * np.eye(2)
        diss = gn.build_gaussian_generator(qubit, qubit_jumps, kappa=2.0,
                                           beta=1.0, with_coherent=False)
        mixed = nl.SuperOp(diss.superop.matrix + nl.ham_superop(c0),
                           "schrodinger")
        assert np.max(np.abs(ri.extract_coherent(mixed) - c0)) < 1e-12
        assert np.max(np.abs(ri.extract_coherent(diss.superop))) < 1e-12

    def test_single_qubit_coherent_part_is_energy_diagonal(self, qubit,
                                                           dyson_k4):
        """For one qubit with Pauli jumps every frequency product is
        energy-diagonal, so the extracted operator commutes with the Gibbs
        state and the weighted commutator norm vanishes."""
        c_op = ri.extract_coherent(dyson_k4.superop)
        rho = md.gibbs_state(qubit, 1.0).rho
        assert np.linalg.norm(c_op, 2) > 1e-3   # a genuine level shift
        assert ri.weighted_commutator_norm(c_op, rho) < 1e-12

    def test_two_qubit_residuals_halve_in_kappa(self):
        """Removing the extracted coherent flow leaves a dissipative part
        whose detailed-balance residual falls by more than half from
        kappa=4 to kappa=8 (measured ratio ~0.25)."""
        ham = md.random_kl_local(2, 2, 3, 1.0, seed=7)
        jumps = md.pauli_jump_set(2)
        rho = md.gibbs_state(ham, 1.0).rho
        wcn, res = {}, {}
        for kappa, nodes in ((4.0, 512), (8.0, 1024)):
            cfg = ri.RIConfig(alpha=0.05, kappa=kappa, beta=1.0,
                              n_nodes=nodes)
            comp = ri.dyson2_components(ham, jumps, cfg, n_time_nodes=192)
            c_op = ri.extract_coherent(comp.superop)
            wcn[kappa] = ri.weighted_commutator_norm(c_op, rho)
            remainder = nl.SuperOp(
                comp.superop.matrix - nl.ham_superop(c_op), "schrodinger")
            res[kappa] = an.kms_symmetry_residual(remainder, rho)
        assert res[8.0] < 0.5 * res[4.0]
        assert wcn[8.0] <= max(0.5 * wcn[4.0], 1e-9)

    def test_effective_generator_substitution_decays(self, qubit,
                                                     qubit_jumps):
        """Swapping the Dyson generator for the filtered-jump effective
        generator plus the extracted coherent flow moves the semigroup by
        an amount that falls by more than half from kappa=4 to kappa=8."""
        alpha = 0.1
        probes = ri.probe_states(2)
        vals = {}
        for kappa in (4.0, 8.0):
            cfg = ri.RIConfig(alpha=alpha, kappa=kappa, beta=1.0)
            l2 = ri.dyson2_components(qubit, qubit_jumps, cfg,
                                      n_time_nodes=192).superop
            model = (gn.ri_effective_generator(qubit, qubit_jumps, kappa,
                                               1.0).superop.matrix
                     + nl.ham_superop(ri.extract_coherent(l2)))
            e1 = expm(alpha ** 2 * l2.matrix)
            e2 = expm(alpha ** 2 * model)
            vals[kappa] = max(
                nl.trace_norm(nl.unvec((e1 - e2) @ nl.vec(s)))
                for s in probes)
        assert vals[8.0] < 0.5 * vals[4.0]


class TestProbeStates:
    def test_family_composition(self):
        probes = ri.probe_states(2)
        assert len(probes) == 2 + 2 + 50
        for p in probes:
            assert np.trace(p).real == pytest.approx(1.0, abs=1e-12)
            assert np.min(np.linalg.eigvalsh(0.5 * (p + p.conj().T))) > -1e-12
        assert np.max(np.abs(probes[0] - np.diag([1.0, 0.0]))) < 1e-15

    def test_seeded(self):
        a = ri.probe_states(4, seed=11)
        b = ri.probe_states(4, seed=11)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))


class TestChannelVsSemigroup:
    def test_quartic_scaling(self, qubit, qubit_jumps):
        """Distance to the second-order semigroup model scales like the
        fourth power of the coupling (slope ~3.99 measured)."""
        cfg = ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, n_steps=2000,
                          n_nodes=64)
        rep = ri.channel_vs_semigroup(qubit, qubit_jumps, cfg,
                                      [0.02, 0.04, 0.08, 0.16])
        assert 3.5 < rep.slope < 4.5
        assert all(a < b for a, b in zip(rep.distances, rep.distances[1:]))
        assert rep.n_probes == 54

    def test_rejects_unsorted_grid(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, n_steps=400,
                          n_nodes=32)
        with pytest.raises(InvalidSpec):
            ri.channel_vs_semigroup(qubit, qubit_jumps, cfg, [0.1, 0.05])

    def test_rejects_short_window(self, qubit, qubit_jumps):
        # at T = 3 kappa beta the pulse-tail truncation is not negligible
        # against the quartic term for small couplings
        cfg = ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, t_pulse=6.0,
                          n_steps=400, n_nodes=32)
        with pytest.raises(InvalidSpec):
            ri.channel_vs_semigroup(qubit, qubit_jumps, cfg, [0.02, 0.04])


class TestFixedPoint:
    def test_fixed_point_and_therm_index(self, qubit, qubit_jumps):
        """Channel fixed point sits near the Gibbs state (measured 1.20e-2
        at kappa=4) and the collision count to reach it matches
        1/(alpha^2 gap) log(2 ||rho_beta^{-1}|| / eps) within a factor 2."""
        cfg = ri.RIConfig(alpha=0.05, kappa=4.0, beta=1.0, n_nodes=256,
                          n_steps=4000)
        rep = ri.fixed_point_and_therm_index(qubit, qubit_jumps, cfg,
                                             epsilon=1e-3)
        assert rep.fp_error == pytest.approx(1.204e-2, abs=2e-4)
        assert np.trace(rep.rho_fix).real == pytest.approx(1.0, abs=1e-10)
        gap = an.spectral_gap(
            gn.ri_effective_generator(qubit, qubit_jumps, 4.0, 1.0)).gap
        gs = md.gibbs_state(qubit, 1.0)
        predicted = (np.log(2 * np.exp(gs.log_inv_norm) / 1e-3)
                     / (0.05 ** 2 * gap))
        assert predicted / 2 < rep.t_therm < predicted * 2

    def test_zero_coupling_has_no_unique_fixed_point(self, qubit,
                                                     qubit_jumps):
        cfg = ri.RIConfig(alpha=0.0, kappa=2.0, beta=1.0, n_steps=400,
                          n_nodes=32)
        with pytest.raises(NonUniqueFixedPoint):
            ri.fixed_point_and_therm_index(qubit, qubit_jumps, cfg,
                                           epsilon=1e-3)

    def test_epsilon_domain(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.1, kappa=2.0, beta=1.0, n_steps=400,
                          n_nodes=32)
        with pytest.raises(InvalidSpec):
            ri.fixed_point_and_therm_index(qubit, qubit_jumps, cfg,
                                           epsilon=0.0)

    def test_iteration_cap(self, qubit, qubit_jumps):
        cfg = ri.RIConfig(alpha=0.05, kappa=2.0, beta=1.0, n_steps=400,
                          n_nodes=32)
        with pytest.raises(NotConverged):
            ri.fixed_point_and_therm_index(qubit, qubit_jumps, cfg,
                                           epsilon=1e-6, max_iterations=3)


class TestMonteCarloConvergence:
    def test_inverse_sqrt_scaling(self, qubit, qubit_jumps):
        """Sampled-frequency channels approach the quadrature channel at
        the Monte Carlo rate (log-log slope ~ -0.44 measured, -0.5
        expected)."""
        base = dict(alpha=0.4, kappa=1.0, beta=1.0, t_pulse=3.0, n_steps=300)
        ref = ri.ri_channel(qubit, qubit_jumps,
                            ri.RIConfig(n_nodes=64, **base), _chunk=128)
        ns = [100, 1000, 10000]
        dists = []
        for n in ns:
            mc = ri.ri_channel(
                qubit, qubit_jumps,
                ri.RIConfig(omega_mode="montecarlo", jump_mode="sampled",
                            n_samples=n, seed=0, **base), _chunk=128)
            dists.append(np.linalg.norm(mc.superop.matrix
                                        - ref.superop.matrix))
        assert all(a > b for a, b in zip(dists, dists[1:]))
        slope = np.polyfit(np.log(ns), np.log(dists), 1)[0]
        assert -0.65 < slope < -0.35
