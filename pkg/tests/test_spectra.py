import numpy as np
import pytest

from lazygap.spectra import (MixtureMg, SpectraError, SpectrumSpec, TargetQf,
                             empirical_spectrum, make_gamma, make_mg_instance,
                             make_qf_target, sample_features)


class TestQfTarget:
    def test_identity(self):
        t = make_qf_target(3, "identity")
        np.testing.assert_allclose(t.B, np.eye(3))
        assert t.b0 == -3.0
        assert t.is_centered()

    def test_exp1_trace_scale(self):
        """Tr(B) concentrates on d for iid Exp(1) diagonal entries."""
        d = 450
        t = make_qf_target(d, "exp1_diag", seed=0)
        assert abs(np.trace(t.B) - d) < 3 * np.sqrt(d)
        assert t.b0 == -float(np.trace(t.B))

    def test_spiked(self):
        t = make_qf_target(2, "spiked", rank=1, scale=5.0)
        eigs = np.sort(np.linalg.eigvalsh(t.B))
        np.testing.assert_allclose(eigs, [0.0, 5.0])
        tau = np.trace(t.B) ** 2 / (2 * np.sum(t.B**2))
        assert tau == pytest.approx(0.5)

    def test_b0_override(self):
        t = make_qf_target(4, "identity", b0=0.0)
        assert t.b0 == 0.0 and not t.is_centered()

    def test_asymmetric_rejected(self):
        with pytest.raises(SpectraError):
            TargetQf(B=np.array([[0.0, 1.0], [0.0, 0.0]]), b0=0.0)

    def test_second_moment(self):
        t = make_qf_target(3, "identity")
        assert t.second_moment() == pytest.approx(2.0 * 3)  # centered: Var only


class TestMixture:
    def test_uniform3_operator_bound(self):
        for d in (4, 100):
            m = make_mg_instance(d, "uniform3_diag", seed=1)
            assert np.linalg.norm(m.Delta, 2) <= 2.0 / np.sqrt(d) + 1e-12

    def test_uniform3_trace_scale(self):
        """E[Tr Delta] = d * 1.5/sqrt(d); check across seeds within 3 sd."""
        d = 100
        traces = [np.trace(make_mg_instance(d, "uniform3_diag", seed=s).Delta)
                  for s in range(50)]
        expect = d * 1.5 / np.sqrt(d)
        sd_single = np.sqrt(d * np.var([2.0, 1.5, 1.0]) / d)  # per-entry levels
        assert abs(np.mean(traces) - expect) < 3 * sd_single / np.sqrt(50) * np.sqrt(d)

    def test_zero_delta_valid(self):
        m = make_mg_instance(5, "custom", Delta=np.zeros((5, 5)))
        s1, s2 = m.class_covariances()
        np.testing.assert_allclose(s1, s2)

    def test_indefinite_class_covariance_rejected(self):
        with pytest.raises(SpectraError):
            make_mg_instance(2, "custom", Sigma=np.eye(2),
                             Delta=np.diag([2.0, 0.0]), c_bound=4.0)

    def test_operator_bound_enforced(self):
        with pytest.raises(SpectraError):
            MixtureMg(Sigma=np.eye(4), Delta=np.diag([0.9, 0, 0, 0]), c_bound=1.0)


class TestGamma:
    def test_isotropic_qf(self):
        G = make_gamma(4, "isotropic", "qf")
        np.testing.assert_allclose(G, np.eye(4) / 4)
        assert np.trace(G) == pytest.approx(1.0, abs=1e-10)

    def test_aligned_normalization(self):
        B = np.diag([3.0, 1.0])
        G = make_gamma(2, "aligned", "qf", target=B)
        np.testing.assert_allclose(G, np.diag([0.75, 0.25]))

    def test_mg_normalization(self):
        G = make_gamma(2, "isotropic", "mg", Sigma=2 * np.eye(2))
        np.testing.assert_allclose(G, np.eye(2) / 4)
        assert np.sum(G * (2 * np.eye(2))) == pytest.approx(1.0, abs=1e-10)

    def test_traceless_target_rejected(self):
        with pytest.raises(SpectraError):
            make_gamma(2, "aligned", "qf", target=np.zeros((2, 2)))


class TestEmpiricalSpectrum:
    def test_identity_merges_to_one_atom(self):
        spec = empirical_spectrum(np.eye(6))
        assert spec.atoms.shape == (1,)
        assert spec.atoms[0] == pytest.approx(1.0)
        assert spec.weights[0] == pytest.approx(1.0)

    def test_two_atoms(self):
        spec = empirical_spectrum(np.diag([1.0, 2.0]))
        np.testing.assert_allclose(spec.atoms, [1.0, 2.0])
        np.testing.assert_allclose(spec.weights, [0.5, 0.5])

    def test_trace_identity_exp1(self):
        d = 200
        t = make_qf_target(d, "exp1_diag", seed=3)
        G = make_gamma(d, "aligned", "qf", target=t.B)
        spec = empirical_spectrum(d * G)
        assert np.all(spec.atoms >= 0)
        assert spec.mean() == pytest.approx(1.0, abs=1e-10)  # Tr(d Gamma)/d

    def test_mean_bounded_by_op_norm(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((8, 8))
        M = A @ A.T
        spec = empirical_spectrum(M)
        assert spec.atoms.max() <= np.linalg.norm(M, 2) + 1e-8

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(SpectraError):
            empirical_spectrum(np.diag([1.0, -0.5]))

    def test_weights_validation(self):
        with pytest.raises(SpectraError):
            SpectrumSpec(atoms=np.array([1.0]), weights=np.array([0.5]))


class TestSampleFeatures:
    def test_zero_covariance(self):
        W = sample_features(np.zeros((3, 3)), N=5, seed=0).W
        np.testing.assert_allclose(W, 0.0)

    def test_norm_concentration(self):
        """E||w_i||^2 = Tr(Gamma) = 1; mean over N columns within 3 sd."""
        d, N = 200, 400
        W = sample_features(np.eye(d) / d, N=N, seed=1).W
        sq = np.sum(W * W, axis=0)
        # ||w||^2 is chi^2_d / d: variance 2/d per column
        assert abs(sq.mean() - 1.0) < 3 * np.sqrt(2.0 / d / N)

    def test_deterministic(self):
        G = np.eye(4) / 4
        W1 = sample_features(G, 7, seed=42).W
        W2 = sample_features(G, 7, seed=42).W
        assert np.array_equal(W1, W2)

    def test_anisotropic_covariance(self):
        """Sample covariance of many draws matches Gamma."""
        d, N = 3, 200_000
        G = np.diag([0.5, 0.3, 0.2])
        W = sample_features(G, N, seed=5).W
        emp = W @ W.T / N
        assert np.abs(emp - G).max() < 4 * np.sqrt(2 * 0.5**2 / N) + 0.002
