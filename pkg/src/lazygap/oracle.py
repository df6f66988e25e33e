"""Exact finite-size risk computations at fixed (d, N, W).

Every predictor studied here, trained to optimality, is a quadratic model

    f(x) = <Gamma_eff, x x^T> + c,

whose population risk has a closed Gaussian-moment form
(``quad_population_risk``).  On top of that representation:

* RF risk is the L^2 projection residual baseline - V^T U^{-1} V, with the
  kernel moments U, V available in closed form for the quadratic activation
  and by Monte Carlo otherwise;
* NT risk reduces to projections onto the column span of the frozen
  first-layer weights;
* NN risk is a rank-constrained spectral truncation.

All routines are deterministic given their inputs/seeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .activation import ActivationProfile
from .datagen import batch_at
from .spectra import MixtureMg, TargetQf
from .theory import whitened_delta


class OracleError(ValueError):
    """Raised when a finite-size computation's assumptions fail."""


@dataclass(frozen=True, eq=False)
class QuadModel:
    """Quadratic predictor f(x) = <Gamma_eff, x x^T> + c."""

    Gamma_eff: np.ndarray
    c: float

    def __post_init__(self):
        G = np.asarray(self.Gamma_eff, dtype=float)
        scale = max(1.0, float(np.abs(G).max(initial=0.0)))
        if np.abs(G - G.T).max(initial=0.0) > 1e-12 * scale:
            raise OracleError("Gamma_eff must be symmetric to 1e-12")
        object.__setattr__(self, "Gamma_eff", 0.5 * (G + G.T))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("ij,jk,ik->i", X, self.Gamma_eff, X) + self.c


@dataclass(frozen=True, eq=False)
class KernelMoments:
    """Second moments of the feature map in L^2 of the data measure.

    U_ij = E[sigma(<w_i, x>) sigma(<w_j, x>)], V_i = E[target * sigma(<w_i, x>)],
    baseline = E[target^2].  Standard errors are populated by the Monte Carlo
    path only.
    """

    U: np.ndarray
    V: np.ndarray
    baseline: float
    U_se: Optional[np.ndarray] = None
    V_se: Optional[np.ndarray] = None
    baseline_se: Optional[float] = None

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if np.abs(U - U.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(U).max(initial=0.0)):
            raise OracleError("kernel matrix U must be symmetric")
        eig_min = float(np.linalg.eigvalsh(U).min())
        if eig_min < -1e-8 * max(1.0, float(np.abs(U).max())):
            raise OracleError(f"kernel matrix U has eigenvalue {eig_min:.3g} < 0")


def quad_population_risk(m: QuadModel, measure) -> float:
    """Exact population risk of a quadratic model under either data measure.

    qf: 2 ||B - G||_F^2 + (Tr(B - G) - (c - b0))^2.
    mg: 1 + 2<G, Delta> + c^2 + 2c<G, Sigma> + <G, Sigma>^2 + <G, Delta>^2
        + 2 Tr(Sigma G Sigma G) + 2 Tr(Delta G Delta G).
    """
    G = m.Gamma_eff
    if isinstance(measure, TargetQf):
        if G.shape != measure.B.shape:
            raise OracleError("model/target dimension mismatch")
        Dm = measure.B - G
        mis = float(np.trace(Dm)) - (m.c - measure.b0)
        return 2.0 * float(np.sum(Dm * Dm)) + mis * mis
    if isinstance(measure, MixtureMg):
        S, D = measure.Sigma, measure.Delta
        if G.shape != S.shape:
            raise OracleError("model/mixture dimension mismatch")
        gs = float(np.sum(G * S))
        gd = float(np.sum(G * D))
        SG = S @ G
        DG = D @ G
        return (1.0 + 2.0 * gd + m.c**2 + 2.0 * m.c * gs + gs * gs + gd * gd
                + 2.0 * float(np.trace(SG @ SG)) + 2.0 * float(np.trace(DG @ DG)))
    raise TypeError(f"unknown measure type {type(measure).__name__}")


def quad_risk_gradient(m: QuadModel, measure) -> tuple[np.ndarray, float]:
    """Gradient of the closed-form population risk in (Gamma_eff, c).

    Parameterized predictors (W W^T for the trained network, W A^T + A W^T
    for the linearized one) obtain their gradients from this by the chain
    rule.
    """
    G = m.Gamma_eff
    if isinstance(measure, TargetQf):
        Dm = measure.B - G
        mis = float(np.trace(Dm)) - (m.c - measure.b0)
        return -4.0 * Dm - 2.0 * mis * np.eye(G.shape[0]), 2.0 * (-mis)
    if isinstance(measure, MixtureMg):
        S, D = measure.Sigma, measure.Delta
        gs = float(np.sum(G * S))
        gd = float(np.sum(G * D))
        grad = (2.0 * D + 2.0 * m.c * S + 2.0 * gs * S + 2.0 * gd * D
                + 4.0 * S @ G @ S + 4.0 * D @ G @ D)
        return grad, 2.0 * m.c + 2.0 * gs
    raise TypeError(f"unknown measure type {type(measure).__name__}")


def rf_kernel_moments_quadratic(W: np.ndarray, measure) -> KernelMoments:
    """Closed-form kernel moments for the centered quadratic activation u^2 - 1.

    qf: U_ij = 2 <w_i, w_j>^2 + (||w_i||^2 - 1)(||w_j||^2 - 1),
        V_i = 2 <w_i, B w_i>.
    mg: U_ij averages the same identity over the two class covariances,
        V_i = -<w_i, Delta w_i>.
    """
    W = np.asarray(W, dtype=float)
    if isinstance(measure, TargetQf):
        if not measure.is_centered():
            raise OracleError("qf kernel moments assume E[f*] = 0 (b0 = -Tr B)")
        G = W.T @ W
        q = np.diag(G)
        U = 2.0 * G * G + np.outer(q - 1.0, q - 1.0)
        V = 2.0 * np.einsum("ji,jk,ki->i", W, measure.B, W)
        return KernelMoments(U=U, V=V, baseline=2.0 * float(np.sum(measure.B**2)))
    if isinstance(measure, MixtureMg):
        U = np.zeros((W.shape[1], W.shape[1]))
        for S in measure.class_covariances():
            Gs = W.T @ S @ W
            qs = np.diag(Gs)
            U += 0.5 * (2.0 * Gs * Gs + np.outer(qs - 1.0, qs - 1.0))
        V = -np.einsum("ji,jk,ki->i", W, measure.Delta, W)
        return KernelMoments(U=U, V=V, baseline=1.0)
    raise TypeError(f"unknown measure type {type(measure).__name__}")


def rf_exact_risk(moments: KernelMoments, ridge: Optional[float] = None) -> float:
    """baseline - V^T (U + ridge I)^{-1} V via a positive-definite solve.

    The default ridge 1e-10 Tr(U)/N keeps the solve stable when the feature
    space saturates (N > d(d+3)/2 makes U singular); it is escalated a few
    times before giving up.
    """
    U, V = moments.U, moments.V
    N = U.shape[0]
    if ridge is None:
        ridge = 1e-10 * float(np.trace(U)) / N
    last_exc = None
    for _ in range(4):
        try:
            cf = cho_factor(U + ridge * np.eye(N), lower=True)
            a = cho_solve(cf, V)
            return float(moments.baseline - V @ a)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
            last_exc = exc
            ridge = max(ridge, 1e-14 * float(np.trace(U))) * 100.0
    raise OracleError(f"kernel solve failed after ridge escalation: {last_exc}")


def rf_mc_moments(W: np.ndarray, sigma: Callable, measure, n: int,
                  seed: int = 0, chunk: int = 100_000) -> KernelMoments:
    """Monte Carlo kernel moments for an arbitrary activation.

    Streams n samples in chunks, accumulating first and second moments of
    the per-sample products so that entrywise standard errors come for free.
    """
    if n < 1000:
        raise OracleError("rf_mc_moments needs at least 1e3 samples")
    W = np.asarray(W, dtype=float)
    N = W.shape[1]
    sum_u = np.zeros((N, N))
    sum_u2 = np.zeros((N, N))
    sum_v = np.zeros(N)
    sum_v2 = np.zeros(N)
    sum_b = 0.0
    sum_b2 = 0.0
    done = 0
    step = 0
    while done < n:
        m = min(chunk, n - done)
        batch = batch_at(measure, m, seed, step)
        target = batch.y
        S = np.asarray(sigma(batch.X @ W), dtype=float)
        S2 = S * S
        sum_u += S.T @ S
        sum_u2 += S2.T @ S2
        tv = S * target[:, None]
        sum_v += tv.sum(axis=0)
        sum_v2 += (tv * tv).sum(axis=0)
        sum_b += float(np.sum(target**2))
        sum_b2 += float(np.sum(target**4))
        done += m
        step += 1
    U = sum_u / n
    V = sum_v / n
    baseline = sum_b / n
    U_se = np.sqrt(np.maximum(sum_u2 / n - U * U, 0.0) / n)
    V_se = np.sqrt(np.maximum(sum_v2 / n - V * V, 0.0) / n)
    baseline_se = float(np.sqrt(max(sum_b2 / n - baseline**2, 0.0) / n))
    U = 0.5 * (U + U.T)
    return KernelMoments(U=U, V=V, baseline=baseline,
                         U_se=U_se, V_se=V_se, baseline_se=baseline_se)


def _whitened(W, Gamma, mix: MixtureMg):
    eigs, vecs = np.linalg.eigh(mix.Sigma)
    if eigs.min() <= 0:
        raise OracleError("Sigma must be positive definite")
    root = (vecs * np.sqrt(eigs)) @ vecs.T
    return root @ W, root @ Gamma @ root, whitened_delta(mix)


def rf_kernel_linearization(W, Gamma, profile: ActivationProfile, measure) -> np.ndarray:
    """The rank-one-plus-linear surrogate U0 of the kernel matrix U.

    (U0)_ij = lt d_ij + l1^2 <w_i, w_j> + kappa/d + mu_i mu_j with
    mu_i = l2 (||w_i||^2 - 1)/2 and kappa = d l2^2 Tr(Gamma^2)/2 for qf,
    plus d l2^2 Tr(Delta Gamma)^2 / 4 for mg (computed after whitening by
    Sigma, under which the mixture normalization Tr(Gamma Sigma) = 1 turns
    into Tr(Gamma) = 1).
    """
    W = np.asarray(W, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    d, N = W.shape
    l1, l2, lt = profile.lambda1, profile.lambda2, profile.lambda_tilde
    if isinstance(measure, TargetQf):
        kappa = d * l2**2 * float(np.sum(Gamma * Gamma)) / 2.0
    elif isinstance(measure, MixtureMg):
        W, Gamma, Delta = _whitened(W, Gamma, measure)
        kappa = d * l2**2 * (float(np.sum(Gamma * Gamma)) / 2.0
                             + float(np.sum(Delta * Gamma)) ** 2 / 4.0)
    else:
        raise TypeError(f"unknown measure type {type(measure).__name__}")
    G = W.T @ W
    mu = l2 * (np.diag(G) - 1.0) / 2.0
    return lt * np.eye(N) + l1**2 * G + kappa / d + np.outer(mu, mu)


def kernel_approx_error(W, Gamma, profile: ActivationProfile, measure,
                        moments: Optional[KernelMoments] = None) -> float:
    """Operator-norm distance between the exact kernel U and its surrogate U0."""
    if moments is None:
        if profile.name != "quadratic":
            raise OracleError(
                "exact U is only closed-form for the quadratic activation; "
                "pass Monte Carlo moments for other activations"
            )
        moments = rf_kernel_moments_quadratic(W, measure)
    U0 = rf_kernel_linearization(W, Gamma, profile, measure)
    return float(np.linalg.norm(moments.U - U0, 2))


def _orth_complement(W: np.ndarray) -> np.ndarray:
    d, N = W.shape
    r = min(d, N)
    u, s, _ = np.linalg.svd(W, full_matrices=True)
    if s[r - 1] <= 1e-10 * s[0]:
        raise OracleError("W is rank deficient; the projection formula needs generic W")
    return u[:, r:]


def nt_exact_risk_qf(W: np.ndarray, B: np.ndarray) -> float:
    """Exact NT risk for fixed W: 2 ||P2^T B P2||_F^2, zero when N >= d.

    P2 spans the orthogonal complement of col(W); the NT class fits the
    target exactly on col(W) and misses only the block outside it.
    """
    W = np.asarray(W, dtype=float)
    d, N = W.shape
    if N >= d:
        _orth_complement(W)  # still reject rank-deficient W
        return 0.0
    P2 = _orth_complement(W)
    R = P2.T @ B @ P2
    return 2.0 * float(np.sum(R * R))


def nt_exact_risk_mg(W: np.ndarray, mix: MixtureMg) -> float:
    """Exact NT risk on the mixture for fixed W.

    2 / (2 + ||Dt||_F^2 - ||P_perp Dt P_perp||_F^2) with
    Dt = Sigma^{-1/2} Delta Sigma^{-1/2} and P_perp the projection
    orthogonal to span(Sigma^{1/2} W).
    """
    W = np.asarray(W, dtype=float)
    Dt = whitened_delta(mix)
    eigs, vecs = np.linalg.eigh(mix.Sigma)
    root = (vecs * np.sqrt(eigs)) @ vecs.T
    SW = root @ W
    r = min(W.shape)
    u, s, _ = np.linalg.svd(SW, full_matrices=False)
    if s[r - 1] <= 1e-10 * s[0]:
        raise OracleError("Sigma^{1/2} W is rank deficient; need generic W")
    basis = u[:, :r]
    P_perp = np.eye(mix.d) - basis @ basis.T
    R = P_perp @ Dt @ P_perp
    captured = float(np.sum(Dt * Dt)) - float(np.sum(R * R))
    return 2.0 / (2.0 + captured)


def nn_opt_quadmodel(measure, N: int) -> tuple[QuadModel, float]:
    """Optimal rank-N quadratic model and its exact finite-d risk.

    qf: spectral truncation of B to its top N eigendirections with the
    offset matched, achieving 2 sum_{i>N} eig_i(B)^2.
    mg: top-N singular directions of the whitened difference, mapped back
    through Sigma^{-1/2} and given their optimal scale and offset.
    """
    if isinstance(measure, TargetQf):
        eigs, vecs = np.linalg.eigh(measure.B)
        if eigs.min(initial=0.0) < -1e-10 * max(1.0, abs(eigs).max(initial=0.0)):
            raise OracleError("qf optimum requires B positive semidefinite")
        order = np.argsort(-eigs, kind="stable")
        keep = order[: min(N, measure.d)]
        G = (vecs[:, keep] * np.clip(eigs[keep], 0.0, None)) @ vecs[:, keep].T
        c = measure.b0 + float(np.trace(measure.B - G))
        model = QuadModel(Gamma_eff=G, c=c)
        return model, quad_population_risk(model, measure)
    if isinstance(measure, MixtureMg):
        Dt = whitened_delta(measure)
        eigs, vecs = np.linalg.eigh(Dt)
        order = np.argsort(-np.abs(eigs), kind="stable")
        keep = order[: min(N, measure.d)]
        Gt = (vecs[:, keep] * eigs[keep]) @ vecs[:, keep].T
        seigs, svecs = np.linalg.eigh(measure.Sigma)
        inv_root = (svecs / np.sqrt(seigs)) @ svecs.T
        G = inv_root @ Gt @ inv_root
        q = float(np.sum(G * measure.Delta))
        SG = measure.Sigma @ G
        DG = measure.Delta @ G
        energy = q * q + 2.0 * float(np.trace(SG @ SG)) + 2.0 * float(np.trace(DG @ DG))
        a = 0.0 if energy == 0.0 else -q / energy
        G = a * G
        model = QuadModel(Gamma_eff=G, c=-float(np.sum(G * measure.Sigma)))
        return model, quad_population_risk(model, measure)
    raise TypeError(f"unknown measure type {type(measure).__name__}")


@dataclass(frozen=True)
class BayesEstimate:
    value: float
    stderr: float
    n: int


def bayes_risk_mg(mix: MixtureMg, n: int = 200_000, seed: int = 0) -> BayesEstimate:
    """Monte Carlo Bayes risk E[(y - E[y|x])^2] = 1 - E[eta(x)^2].

    eta(x) = tanh((log p1(x) - log p2(x)) / 2) from the class log densities,
    evaluated with precomputed Cholesky factors.
    """
    S1, S2 = mix.class_covariances()
    L1 = np.linalg.cholesky(S1)
    L2 = np.linalg.cholesky(S2)
    logdet1 = 2.0 * float(np.sum(np.log(np.diag(L1))))
    logdet2 = 2.0 * float(np.sum(np.log(np.diag(L2))))
    batch = batch_at(mix, n, seed)
    X = batch.X
    q1 = solve_triangular(L1, X.T, lower=True)
    q2 = solve_triangular(L2, X.T, lower=True)
    log_ratio = -0.5 * (np.sum(q1 * q1, axis=0) - np.sum(q2 * q2, axis=0)) \
        - 0.5 * (logdet1 - logdet2)
    eta2 = np.tanh(0.5 * log_ratio) ** 2
    value = 1.0 - float(eta2.mean())
    stderr = float(eta2.std(ddof=1) / np.sqrt(n))
    return BayesEstimate(value=value, stderr=stderr, n=n)
