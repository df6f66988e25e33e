import math

import numpy as np
import pytest

from lazygap.activation import profile_for
from lazygap.datagen import sample_batch
from lazygap.oracle import (OracleError, QuadModel, bayes_risk_mg,
                            kernel_approx_error, nn_opt_quadmodel,
                            nt_exact_risk_mg, nt_exact_risk_qf,
                            quad_population_risk, rf_exact_risk,
                            rf_kernel_linearization,
                            rf_kernel_moments_quadratic, rf_mc_moments)
from lazygap.spectra import (make_gamma, make_mg_instance, make_qf_target,
                             sample_features)

QUAD = lambda u: u * u - 1.0


def qp_rf_oracle(W, measure):
    """Independent check on the RF optimum: minimize the population risk of
    f(x) = sum_i a_i (<w_i, x>^2 - 1) as an explicit quadratic program in a,
    with the quadratic form recovered by polarization."""
    N = W.shape[1]

    def q(a):
        G = (W * a) @ W.T
        return quad_population_risk(QuadModel(Gamma_eff=G, c=-float(np.sum(a))),
                                    measure)

    e = np.eye(N)
    q0 = q(np.zeros(N))
    g = np.array([(q(e[i]) - q(-e[i])) / 2 for i in range(N)])
    H = np.empty((N, N))
    for i in range(N):
        H[i, i] = q(e[i]) + q(-e[i]) - 2 * q0
        for j in range(i + 1, N):
            H[i, j] = H[j, i] = q(e[i] + e[j]) - q(e[i]) - q(e[j]) + q0
    a_star = np.linalg.solve(H, -g)
    return q0 + g @ a_star + 0.5 * a_star @ H @ a_star


class TestQuadPopulationRisk:
    def test_perfect_fit_qf(self):
        t = make_qf_target(5, "exp1_diag", seed=0)
        m = QuadModel(Gamma_eff=t.B, c=t.b0)
        assert quad_population_risk(m, t) == pytest.approx(0.0, abs=1e-12)

    def test_trivial_model_mg(self):
        mix = make_mg_instance(6, "uniform3_diag", seed=0)
        m = QuadModel(Gamma_eff=np.zeros((6, 6)), c=0.0)
        assert quad_population_risk(m, mix) == pytest.approx(1.0)

    def test_zero_model_qf(self):
        t = make_qf_target(4, "exp1_diag", seed=1)
        m = QuadModel(Gamma_eff=np.zeros((4, 4)), c=t.b0)
        expect = 2 * np.sum(t.B**2) + np.trace(t.B) ** 2
        assert quad_population_risk(m, t) == pytest.approx(expect, rel=1e-12)

    @pytest.mark.parametrize("measure_kind", ["qf", "mg"])
    def test_matches_monte_carlo(self, measure_kind):
        """Closed form within 3 standard errors of sampling on 5 random
        instances per measure."""
        rng = np.random.default_rng(2)
        d = 8
        if measure_kind == "qf":
            measure = make_qf_target(d, "exp1_diag", seed=2, b0=0.3)
        else:
            measure = make_mg_instance(d, "uniform3_diag", seed=2)
        for trial in range(5):
            A = rng.standard_normal((d, d)) * 0.3
            m = QuadModel(Gamma_eff=A + A.T, c=float(rng.standard_normal()))
            closed = quad_population_risk(m, measure)
            batch = sample_batch(measure, 400_000, seed=trial)
            errs = (batch.y - m.predict(batch.X)) ** 2
            se = errs.std(ddof=1) / np.sqrt(errs.size)
            assert abs(closed - errs.mean()) < 3 * se


class TestKernelMoments:
    def test_one_dimensional_case(self):
        t = make_qf_target(1, "custom", B=np.array([[1.0]]))
        m = rf_kernel_moments_quadratic(np.array([[1.0]]), t)
        assert m.U[0, 0] == pytest.approx(2.0)
        assert m.V[0] == pytest.approx(2.0)
        assert m.baseline == pytest.approx(2.0)
        assert rf_exact_risk(m) == pytest.approx(0.0, abs=1e-8)

    def test_mg_symmetric_classes_zero_signal(self):
        mix = make_mg_instance(5, "custom", Delta=np.zeros((5, 5)))
        W = sample_features(np.eye(5) / 5, 4, seed=1).W
        m = rf_kernel_moments_quadratic(W, mix)
        np.testing.assert_allclose(m.V, 0.0, atol=1e-14)

    @pytest.mark.parametrize("measure_kind", ["qf", "mg"])
    def test_matches_monte_carlo(self, measure_kind):
        d, N = 30, 20
        if measure_kind == "qf":
            measure = make_qf_target(d, "exp1_diag", seed=3)
        else:
            measure = make_mg_instance(d, "uniform3_diag", seed=3)
        W = sample_features(np.eye(d) / d, N, seed=3).W
        closed = rf_kernel_moments_quadratic(W, measure)
        mc = rf_mc_moments(W, QUAD, measure, n=1_000_000, seed=4)
        assert np.all(np.abs(closed.U - mc.U) <= 4 * np.maximum(mc.U_se, 1e-12))
        assert np.all(np.abs(closed.V - mc.V) <= 4 * np.maximum(mc.V_se, 1e-12))
        assert abs(closed.baseline - mc.baseline) <= 4 * max(mc.baseline_se, 1e-12)


class TestRfExactRisk:
    def test_orthogonal_features_learn_nothing(self):
        B = np.zeros((3, 3))
        B[0, 0] = 1.0
        t = make_qf_target(3, "custom", B=B)
        W = np.array([[0.0, 0.0], [1.0, 0.3], [0.2, -1.0]])
        m = rf_kernel_moments_quadratic(W, t)
        assert rf_exact_risk(m) == pytest.approx(2.0, rel=1e-9)

    @pytest.mark.parametrize("measure_kind", ["qf", "mg"])
    def test_matches_quadratic_program(self, measure_kind):
        d, N = 12, 7
        if measure_kind == "qf":
            measure = make_qf_target(d, "exp1_diag", seed=5)
        else:
            measure = make_mg_instance(d, "uniform3_diag", seed=5)
        W = sample_features(np.eye(d) / d, N, seed=5).W
        risk = rf_exact_risk(rf_kernel_moments_quadratic(W, measure))
        assert risk == pytest.approx(qp_rf_oracle(W, measure), rel=1e-6)

    def test_projection_residual_bounds(self):
        for seed in range(5):
            d = 20
            t = make_qf_target(d, "exp1_diag", seed=seed)
            for N in (5, 40):
                W = sample_features(np.eye(d) / d, N, seed=seed).W
                m = rf_kernel_moments_quadratic(W, t)
                risk = rf_exact_risk(m)
                assert -1e-8 * m.baseline <= risk <= m.baseline * (1 + 1e-8)

    def test_adding_neuron_never_hurts(self):
        d = 15
        t = make_qf_target(d, "exp1_diag", seed=6)
        rng = np.random.default_rng(6)
        for _ in range(20):
            N = int(rng.integers(2, 12))
            W = rng.standard_normal((d, N)) / np.sqrt(d)
            extra = rng.standard_normal((d, 1)) / np.sqrt(d)
            risk_small = rf_exact_risk(rf_kernel_moments_quadratic(W, t))
            risk_big = rf_exact_risk(
                rf_kernel_moments_quadratic(np.hstack([W, extra]), t))
            assert risk_big <= risk_small + 1e-7 * risk_small


class TestRfMcMoments:
    def test_se_scales_with_sqrt_n(self):
        d, N = 10, 5
        t = make_qf_target(d, "exp1_diag", seed=7)
        W = sample_features(np.eye(d) / d, N, seed=7).W
        a = rf_mc_moments(W, QUAD, t, n=20_000, seed=8)
        b = rf_mc_moments(W, QUAD, t, n=80_000, seed=8)
        ratio = np.median(a.U_se / np.maximum(b.U_se, 1e-15))
        assert ratio == pytest.approx(2.0, rel=0.2)

    def test_centered_activation_zero_signal(self):
        mix = make_mg_instance(8, "custom", Delta=np.zeros((8, 8)))
        W = sample_features(np.eye(8) / 8, 4, seed=9).W
        mc = rf_mc_moments(W, np.tanh, mix, n=50_000, seed=9)
        assert np.all(np.abs(mc.V) <= 4 * np.maximum(mc.V_se, 1e-12))

    def test_rejects_tiny_sample(self):
        t = make_qf_target(2, "identity")
        with pytest.raises(OracleError):
            rf_mc_moments(np.eye(2), QUAD, t, n=10)


class TestKernelLinearization:
    def test_single_feature_entry(self):
        d = 50
        t = make_qf_target(d, "exp1_diag", seed=10)
        G = make_gamma(d, "isotropic", "qf")
        profile = profile_for("quadratic")
        W = sample_features(G, 1, seed=10).W
        U0 = rf_kernel_linearization(W, G, profile, t)
        w2 = float(np.sum(W * W))
        mu = profile.lambda2 * (w2 - 1.0) / 2.0
        kappa = d * profile.lambda2**2 * np.sum(G * G) / 2.0
        assert kappa == pytest.approx(2.0)  # d l2^2 Tr(Gamma^2)/2 with Gamma = I/d
        expect = profile.lambda_tilde + profile.lambda1**2 * w2 + kappa / d + mu * mu
        assert U0[0, 0] == pytest.approx(expect, rel=1e-12)

    def test_error_decays_with_dimension(self):
        profile = profile_for("quadratic")
        medians = {}
        for d in (60, 240):
            t = make_qf_target(d, "exp1_diag", seed=0)
            G = make_gamma(d, "isotropic", "qf")
            errs = [kernel_approx_error(sample_features(G, d, seed=s).W, G,
                                        profile, t) for s in range(3)]
            medians[d] = np.median(errs)
        assert medians[240] < medians[60]

    def test_non_quadratic_needs_moments(self):
        t = make_qf_target(4, "identity")
        with pytest.raises(OracleError):
            kernel_approx_error(np.eye(4), np.eye(4) / 4, profile_for("relu"), t)


class TestNtExactQf:
    def test_overparametrized_zero(self):
        t = make_qf_target(6, "exp1_diag", seed=11)
        W = sample_features(np.eye(6) / 6, 9, seed=11).W
        assert nt_exact_risk_qf(W, t.B) == 0.0

    def test_coordinate_case(self):
        B = np.diag([3.0, 2.0, 1.0])
        W = np.eye(3)[:, :2]
        assert nt_exact_risk_qf(W, B) == pytest.approx(2.0)

    def test_depends_only_on_column_span(self):
        rng = np.random.default_rng(12)
        t = make_qf_target(10, "exp1_diag", seed=12)
        W = rng.standard_normal((10, 4))
        Q = np.linalg.qr(rng.standard_normal((4, 4)))[0]
        a = nt_exact_risk_qf(W, t.B)
        b = nt_exact_risk_qf(W @ Q, t.B)
        assert a == pytest.approx(b, rel=1e-10)

    def test_adding_neuron_never_hurts(self):
        rng = np.random.default_rng(13)
        t = make_qf_target(12, "exp1_diag", seed=13)
        W = rng.standard_normal((12, 3))
        risk = nt_exact_risk_qf(W, t.B)
        for _ in range(20):
            W2 = np.hstack([W, rng.standard_normal((12, 1))])
            risk2 = nt_exact_risk_qf(W2, t.B)
            assert risk2 <= risk + 1e-10
            W, risk = W2, risk2

    def test_rank_deficient_rejected(self):
        t = make_qf_target(4, "identity")
        W = np.ones((4, 2))
        with pytest.raises(OracleError):
            nt_exact_risk_qf(W, t.B)

    def test_mean_matches_theory(self):
        from lazygap.theory import nt_qf_risk

        d, N = 100, 50
        t = make_qf_target(d, "exp1_diag", seed=14)
        pred = nt_qf_risk(t, N / d).normalized
        risks = [nt_exact_risk_qf(sample_features(np.eye(d) / d, N, seed=s).W, t.B)
                 / t.second_moment() for s in range(20)]
        assert abs(np.mean(risks) - pred) < 0.05


class TestNtExactMg:
    def test_overparametrized(self):
        mix = make_mg_instance(8, "uniform3_diag", seed=15)
        W = sample_features(np.eye(8) / 8, 12, seed=15).W
        dd = float(np.sum(mix.Delta**2))
        assert nt_exact_risk_mg(W, mix) == pytest.approx(2.0 / (2.0 + dd), rel=1e-10)

    def test_zero_delta(self):
        mix = make_mg_instance(5, "custom", Delta=np.zeros((5, 5)))
        W = sample_features(np.eye(5) / 5, 3, seed=16).W
        assert nt_exact_risk_mg(W, mix) == pytest.approx(1.0)

    def test_mean_matches_theory(self):
        from lazygap.theory import nt_mg_risk_isotropic

        d, N = 100, 50
        mix = make_mg_instance(d, "uniform3_diag", seed=17)
        pred = nt_mg_risk_isotropic(mix, N / d).value
        risks = [nt_exact_risk_mg(sample_features(np.eye(d) / d, N, seed=s).W, mix)
                 for s in range(20)]
        assert abs(np.mean(risks) - pred) < 0.05


class TestNnOpt:
    def test_qf_truncation(self):
        t = make_qf_target(3, "custom", B=np.diag([3.0, 2.0, 1.0]))
        model, risk = nn_opt_quadmodel(t, 2)
        assert risk == pytest.approx(2.0, abs=1e-10)
        np.testing.assert_allclose(model.Gamma_eff, np.diag([3.0, 2.0, 0.0]),
                                   atol=1e-12)
        model, risk = nn_opt_quadmodel(t, 5)
        assert risk == pytest.approx(0.0, abs=1e-12)

    def test_qf_monotone_and_exact_at_rank(self):
        t = make_qf_target(8, "spiked", rank=3, scale=2.0)
        risks = [nn_opt_quadmodel(t, N)[1] for N in range(0, 6)]
        assert all(a >= b - 1e-12 for a, b in zip(risks, risks[1:]))
        assert risks[3] == pytest.approx(0.0, abs=1e-12)

    def test_qf_indefinite_rejected(self):
        t = make_qf_target(2, "custom", B=np.diag([1.0, -1.0]))
        with pytest.raises(OracleError):
            nn_opt_quadmodel(t, 1)

    def test_mg_beats_random_same_rank_models(self):
        d, N = 10, 3
        mix = make_mg_instance(d, "uniform3_diag", seed=18)
        _, best = nn_opt_quadmodel(mix, N)
        rng = np.random.default_rng(18)
        for _ in range(100):
            M = rng.standard_normal((d, N))
            Q = np.linalg.qr(M)[0]
            s = rng.standard_normal(N)
            G = (Q * s) @ Q.T
            # give the random candidate its own optimal scale and offset
            q = float(np.sum(G * mix.Delta))
            SG = mix.Sigma @ G
            DG = mix.Delta @ G
            energy = q * q + 2 * np.trace(SG @ SG) + 2 * np.trace(DG @ DG)
            a = 0.0 if energy == 0 else -q / energy
            model = QuadModel(Gamma_eff=a * G, c=-a * float(np.sum(G * mix.Sigma)))
            assert best <= quad_population_risk(model, mix) + 1e-12

    def test_mg_close_to_asymptotic_formula(self):
        from lazygap.theory import nn_mg_risk

        d = 120
        mix = make_mg_instance(d, "uniform3_diag", seed=19)
        for N in (30, 120):
            exact = nn_opt_quadmodel(mix, N)[1]
            assert abs(exact - nn_mg_risk(mix, N).value) < 0.02


class TestBayesRisk:
    def test_zero_delta_is_pure_noise(self):
        mix = make_mg_instance(4, "custom", Delta=np.zeros((4, 4)))
        est = bayes_risk_mg(mix, n=20_000, seed=20)
        assert est.value == pytest.approx(1.0, abs=1e-12)

    def test_one_dimensional_quadrature_oracle(self):
        mix = make_mg_instance(1, "custom", Sigma=np.array([[1.0]]),
                               Delta=np.array([[0.5]]), c_bound=0.5)
        est = bayes_risk_mg(mix, n=400_000, seed=21)
        x = np.linspace(-12, 12, 200_001)
        var1, var2 = 0.5, 1.5
        p1 = np.exp(-x**2 / (2 * var1)) / np.sqrt(2 * np.pi * var1)
        p2 = np.exp(-x**2 / (2 * var2)) / np.sqrt(2 * np.pi * var2)
        eta2 = ((p1 - p2) / (p1 + p2)) ** 2
        expect = 1.0 - np.trapezoid(eta2 * 0.5 * (p1 + p2), x)
        assert abs(est.value - expect) < 3 * est.stderr

    def test_lower_bounds_network_risk(self):
        from lazygap.theory import nn_mg_risk

        d = 60
        mix = make_mg_instance(d, "uniform3_diag", seed=22)
        est = bayes_risk_mg(mix, n=100_000, seed=22)
        assert est.value <= nn_mg_risk(mix, d).value + 3 * est.stderr
