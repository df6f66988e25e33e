"""One-pass SGD, gradient flow, and landscape probes for the trained network.

The trained model is f(x; W, c) = sum_i <w_i, x>^2 + c on the quadratic
target, whose population risk has the closed form

    L(W, c) = 2 ||B - W W^T||_F^2 + (Tr(B - W W^T) - (c - b0))^2.

Gradients below are obtained by differentiating this expression directly
(and, for the stochastic version, the squared per-sample residual); they are
validated against finite differences in the test suite.  SGD draws a fresh
batch every step, so iteration count times batch size equals the number of
samples consumed and the logged risk is a true test risk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import BatchStream
from .oracle import QuadModel, nn_opt_quadmodel, quad_population_risk
from .spectra import MixtureMg, TargetQf

GRAD_TOL = 1e-8          # criticality threshold, relative to problem scale
DIVERGENCE_FACTOR = 1e6

# The quadratic form returned by hessian_quadratic_form equals this constant
# times the reference expression
#   Tr(W Z^T)^2 + ||W Z^T||_F^2 + Tr(W Z^T W Z^T) + <W W^T - B, Z Z^T>
# (per unit of 4): second derivatives of L carry twice those coefficients.
HESSIAN_NORMALIZATION = 2.0


class DynamicsError(ValueError):
    """Raised for invalid dynamics inputs."""


class DivergenceError(ArithmeticError):
    """Raised when an SGD or flow run blows past its stability cap."""


@dataclass(frozen=True, eq=False)
class NnState:
    W: np.ndarray  # d x N
    c: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.W)) or not np.isfinite(self.c):
            raise DynamicsError("state entries must be finite")

    def model(self) -> QuadModel:
        return QuadModel(Gamma_eff=self.W @ self.W.T, c=self.c)


@dataclass(frozen=True, eq=False)
class NtState:
    W_frozen: np.ndarray  # d x N, never updated
    A: np.ndarray         # d x N
    c: float

    def model(self) -> QuadModel:
        G = self.W_frozen @ self.A.T
        return QuadModel(Gamma_eff=G + G.T, c=self.c)


@dataclass(frozen=True)
class SgdConfig:
    step_size: float
    n_steps: int
    batch: int = 100
    log_every: int = 100
    seed: int = 0
    decay: float = 1.0  # per-step multiplicative step-size decay

    def __post_init__(self):
        if self.step_size < 0 or self.batch < 1 or self.n_steps < 0 \
                or self.log_every < 1:
            raise DynamicsError("invalid SGD configuration")
        if not 0.0 < self.decay <= 1.0:
            raise DynamicsError("decay must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class SgdTrace:
    steps: np.ndarray
    samples: np.ndarray
    risks: np.ndarray

    def final_risk(self) -> float:
        return float(self.risks[-1])


def init_nn_state(d: int, N: int, seed: int = 0) -> NnState:
    """Absolutely continuous initialization: W_ij ~ N(0, 1/d), c = 0."""
    rng = np.random.default_rng(seed)
    return NnState(W=rng.standard_normal((d, N)) / np.sqrt(d), c=0.0)


def nn_population_gradient(s: NnState, t: TargetQf):
    """Gradient of L(W, c): (8 M W + 4 D W, 2 D) with M = W W^T - B and
    D = Tr(M) + (c - b0)."""
    W = s.W
    if W.shape[0] != t.d:
        raise DynamicsError("state/target dimension mismatch")
    M = W @ W.T - t.B
    D = float(np.trace(M)) + (s.c - t.b0)
    return 8.0 * (M @ W) + 4.0 * D * W, 2.0 * D


def _problem_scale(t: TargetQf) -> float:
    return max(1.0, float(np.linalg.norm(t.B)), abs(t.b0))


def _run_sgd(state_arrays, grad_fn, risk_fn, cfg: SgdConfig, stream: BatchStream):
    """Shared driver: per-step fresh batch, averaged gradient, risk logging."""
    logged_steps = [0]
    logged_risks = [risk_fn(state_arrays)]
    initial = max(logged_risks[0], 1e-12)
    eps = cfg.step_size
    # Overflow inside a diverging run is expected and surfaced as a
    # DivergenceError at the next log point; keep numpy quiet about it.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, cfg.n_steps + 1):
            batch = stream.at(k - 1)
            grad_fn(state_arrays, batch, eps)
            eps *= cfg.decay
            if k % cfg.log_every == 0 or k == cfg.n_steps:
                risk = risk_fn(state_arrays)
                logged_steps.append(k)
                logged_risks.append(risk)
                if not np.isfinite(risk) or risk > DIVERGENCE_FACTOR * initial:
                    raise DivergenceError(
                        f"risk {risk:.3g} exceeded {DIVERGENCE_FACTOR:.0e} x initial "
                        f"at step {k}; reduce the step size"
                    )
    steps = np.array(logged_steps)
    return SgdTrace(steps=steps, samples=steps * cfg.batch,
                    risks=np.array(logged_risks))


def nn_sgd_run(s0: NnState, t: TargetQf, cfg: SgdConfig) -> SgdTrace:
    """One-pass SGD on (W, c) for the fully trained network.

    Per-sample loss (f*(x) - f(x))^2 has stochastic gradients
    -4 r x x^T W and -2 r with r the residual; batches are averaged.
    """
    eigs = np.linalg.eigvalsh(t.B)
    if eigs.min() < -1e-10 * max(1.0, abs(eigs).max()):
        raise DynamicsError("nn_sgd_run requires B positive semidefinite")
    stream = BatchStream(t, cfg.batch, cfg.seed)
    state = {"W": s0.W.copy(), "c": s0.c}

    def grad_step(st, batch, eps):
        P = batch.X @ st["W"]                      # n x N
        pred = np.einsum("ij,ij->i", P, P) + st["c"]
        r = batch.y - pred
        gW = (-4.0 / batch.X.shape[0]) * (batch.X.T @ (r[:, None] * P))
        st["W"] -= eps * gW
        st["c"] -= eps * (-2.0 * float(r.mean()))

    def risk(st):
        return quad_population_risk(QuadModel(st["W"] @ st["W"].T, st["c"]), t)

    return _run_sgd(state, grad_step, risk, cfg, stream)


def nt_sgd_run(s0: NtState, measure, cfg: SgdConfig) -> SgdTrace:
    """One-pass SGD on (A, c) of the linearized model, W frozen.

    The predictor is <W A^T + A W^T, x x^T> + c; gradients in A mirror the
    NN case with W replaced by the frozen weights.
    """
    if not isinstance(measure, (TargetQf, MixtureMg)):
        raise TypeError(f"unknown measure type {type(measure).__name__}")
    W = s0.W_frozen
    stream = BatchStream(measure, cfg.batch, cfg.seed)
    state = {"A": s0.A.copy(), "c": s0.c}

    def grad_step(st, batch, eps):
        PW = batch.X @ W
        pred = np.einsum("ij,ij->i", PW, batch.X @ st["A"]) * 2.0 + st["c"]
        r = batch.y - pred
        gA = (-4.0 / batch.X.shape[0]) * (batch.X.T @ (r[:, None] * PW))
        st["A"] -= eps * gA
        st["c"] -= eps * (-2.0 * float(r.mean()))

    def risk(st):
        G = W @ st["A"].T
        return quad_population_risk(QuadModel(G + G.T, st["c"]), measure)

    return _run_sgd(state, grad_step, risk, cfg, stream)


def gradient_flow_run(s0: NnState, t: TargetQf, dt: float, T: float,
                      log_every: int = 100) -> SgdTrace:
    """Explicit Euler integration of the population gradient flow.

    The trace's samples column holds the step index; time is step * dt.
    """
    if dt <= 0 or T <= 0:
        raise DynamicsError("dt and T must be positive")
    n_steps = int(round(T / dt))
    W = s0.W.copy()
    c = s0.c
    steps = [0]
    risks = [quad_population_risk(QuadModel(W @ W.T, c), t)]
    initial = max(risks[0], 1e-12)
    for k in range(1, n_steps + 1):
        gW, gc = nn_population_gradient(NnState(W=W, c=c), t)
        W -= dt * gW
        c -= dt * gc
        if k % log_every == 0 or k == n_steps:
            risk = quad_population_risk(QuadModel(W @ W.T, c), t)
            steps.append(k)
            risks.append(risk)
            if not np.isfinite(risk) or risk > DIVERGENCE_FACTOR * initial:
                raise DivergenceError(f"gradient flow diverged at step {k}")
    steps = np.array(steps)
    return SgdTrace(steps=steps, samples=steps.copy(), risks=np.array(risks))


def _check_diagonal_psd(B: np.ndarray):
    off = B - np.diag(np.diag(B))
    if np.abs(off).max(initial=0.0) > 1e-12 * max(1.0, np.abs(B).max()):
        raise DynamicsError("critical-point construction requires diagonal B")
    if np.diag(B).min() < -1e-12:
        raise DynamicsError("critical-point construction requires B >= 0")


def critical_points_qf(t: TargetQf, N: int, subset, seed: int = 0) -> NnState:
    """Critical point of L selecting the eigendirections in ``subset``.

    W0 W0^T = sum_{i in S} B_ii e_i e_i^T with c0 = b0 + Tr(B - W0 W0^T);
    the factor W0 is the canonical slot assignment right-multiplied by a
    seeded orthogonal matrix, which leaves W0 W0^T unchanged.
    """
    _check_diagonal_psd(t.B)
    S = sorted(set(int(i) for i in subset))
    if len(S) > min(N, t.d):
        raise DynamicsError(f"subset size {len(S)} exceeds min(N, d) = {min(N, t.d)}")
    if S and (S[0] < 0 or S[-1] >= t.d):
        raise DynamicsError("subset indices out of range")
    diag = np.diag(t.B)
    W = np.zeros((t.d, N))
    for slot, i in enumerate(S):
        W[i, slot] = np.sqrt(max(diag[i], 0.0))
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((N, N)))
    Q = Q * np.sign(np.diag(R))
    W = W @ Q
    gamma0_trace = float(sum(diag[i] for i in S))
    c0 = t.b0 + float(np.trace(t.B)) - gamma0_trace
    return NnState(W=W, c=c0)


def _require_critical(s: NnState, t: TargetQf):
    gW, gc = nn_population_gradient(s, t)
    scale = _problem_scale(t)
    norm = np.sqrt(float(np.sum(gW * gW)) + gc * gc)
    if norm > GRAD_TOL * scale:
        raise DynamicsError(
            f"state is not critical: gradient norm {norm:.3g} > {GRAD_TOL:g} * scale"
        )


def hessian_quadratic_form(s: NnState, t: TargetQf, Z: np.ndarray) -> float:
    """Second directional derivative of L in W at a critical point.

    With c held at its conditionally optimal value (which makes the trace
    mismatch vanish at criticality), the form along Z is

        8 [Tr(W Z^T)^2 + ||W Z^T||_F^2 + Tr(W Z^T W Z^T) + <W W^T - B, Z Z^T>].

    The bracket matches the reference Hessian expression, so the global
    normalization constant is HESSIAN_NORMALIZATION = 2 per unit of 4.
    """
    _require_critical(s, t)
    W = s.W
    Z = np.asarray(Z, dtype=float)
    if Z.shape != W.shape:
        raise DynamicsError(f"direction shape {Z.shape} != state shape {W.shape}")
    WZ = W @ Z.T
    M = W @ W.T - t.B
    return 8.0 * (float(np.trace(WZ)) ** 2
                  + float(np.sum(WZ * WZ))
                  + float(np.trace(WZ @ WZ))
                  + float(np.sum(M * (Z @ Z.T))))


def strict_saddle_certificate(s: NnState, t: TargetQf):
    """Escape direction Z (unit Frobenius norm) and its Hessian value.

    At a non-global critical point either some positive eigendirection of B
    is entirely missed while a weight column is free (value <= -8 dl_eig) or
    a selected direction has a strictly larger missed competitor
    (value <= -8 dl_sep).  Raises if the point is the global optimum.
    """
    _check_diagonal_psd(t.B)
    _require_critical(s, t)
    W = s.W
    d, N = W.shape
    diag = np.diag(t.B)
    gamma_diag = np.einsum("ij,ij->i", W, W)
    sel_tol = 1e-8 * max(1.0, float(diag.max(initial=0.0)))
    selected = np.flatnonzero(gamma_diag > sel_tol)
    missed = np.array([i for i in range(d) if i not in set(selected)
                       and diag[i] > sel_tol])

    risk = quad_population_risk(s.model(), t)
    opt_risk = nn_opt_quadmodel(t, N)[1]
    if risk <= opt_risk + 1e-8 * _problem_scale(t) ** 2:
        raise DynamicsError("state is a global minimizer; no escape direction exists")

    if len(selected) < N and missed.size:
        # A spare column exists: point it at the largest missed direction.
        i = int(missed[np.argmax(diag[missed])])
        vt = np.linalg.svd(W, full_matrices=True)[2]
        v = vt[-1]  # kernel vector of W: the trailing singular value is zero
        Z = np.zeros_like(W)
        Z[i, :] = v
    else:
        # All columns busy: rotate the weakest selected column toward the
        # strongest missed direction.
        if not missed.size:
            raise DynamicsError("no missed direction; state should be global")
        i = int(missed[np.argmax(diag[missed])])
        j = int(selected[np.argmin(diag[selected])])
        if diag[i] <= diag[j]:
            raise DynamicsError("no eigenvalue gap to exploit; state should be global")
        u = W[j, :] / np.sqrt(gamma_diag[j])
        Z = np.zeros_like(W)
        Z[i, :] = u
    Z /= np.linalg.norm(Z)
    return Z, hessian_quadratic_form(s, t, Z)
