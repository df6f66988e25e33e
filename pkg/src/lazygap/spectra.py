"""Data-model and feature-covariance constructions.

Two data models are supported:

* quadratic target: y = b0 + <x, B x> with x ~ N(0, I_d);
* Gaussian mixture: y = +/-1 fair coin, x | y ~ N(0, Sigma -/+ Delta).

First-layer features are drawn w_i ~ N(0, Gamma).  The covariance Gamma is
normalized so that Tr(Gamma) = 1 for the quadratic model and
Tr(Gamma Sigma) = 1 for the mixture, and it enters the asymptotics only
through the empirical spectral distribution of the rescaled matrix
d*Gamma (resp. d*Gamma^{1/2} Sigma Gamma^{1/2}).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYM_TOL = 1e-12


class SpectraError(ValueError):
    """Raised for invalid model or covariance constructions."""


def _check_symmetric(M: np.ndarray, what: str, tol: float = SYM_TOL):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SpectraError(f"{what} must be a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.T).max(initial=0.0) > tol * scale:
        raise SpectraError(f"{what} is not symmetric to {tol:g}")
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class TargetQf:
    """Quadratic target f*(x) = b0 + <x, B x>."""

    B: np.ndarray
    b0: float

    def __post_init__(self):
        object.__setattr__(self, "B", _check_symmetric(self.B, "B"))

    @property
    def d(self) -> int:
        return self.B.shape[0]

    def second_moment(self) -> float:
        """E[f*(x)^2] = 2||B||_F^2 + (b0 + Tr B)^2 under x ~ N(0, I)."""
        mean = self.b0 + float(np.trace(self.B))
        return 2.0 * float(np.sum(self.B * self.B)) + mean * mean

    def is_centered(self, tol: float = 1e-8) -> bool:
        scale = max(1.0, abs(float(np.trace(self.B))))
        return abs(self.b0 + float(np.trace(self.B))) <= tol * scale


@dataclass(frozen=True, eq=False)
class MixtureMg:
    """Balanced two-class Gaussian mixture with covariances Sigma -/+ Delta."""

    Sigma: np.ndarray
    Delta: np.ndarray
    c_bound: float = 2.0

    def __post_init__(self):
        Sigma = _check_symmetric(self.Sigma, "Sigma")
        Delta = _check_symmetric(self.Delta, "Delta")
        if Sigma.shape != Delta.shape:
            raise SpectraError("Sigma and Delta must share a shape")
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "Delta", Delta)
        d = Sigma.shape[0]
        for sign in (-1.0, 1.0):
            try:
                np.linalg.cholesky(Sigma + sign * Delta)
            except np.linalg.LinAlgError:
                raise SpectraError(
                    "class covariance Sigma %s Delta is not positive definite"
                    % ("+" if sign > 0 else "-")
                ) from None
        op = float(np.linalg.norm(Delta, 2))
        if op > self.c_bound / np.sqrt(d) + 1e-12:
            raise SpectraError(
                f"||Delta||_op = {op:.4g} exceeds c_bound/sqrt(d) = "
                f"{self.c_bound / np.sqrt(d):.4g}"
            )

    @property
    def d(self) -> int:
        return self.Sigma.shape[0]

    def class_covariances(self) -> tuple[np.ndarray, np.ndarray]:
        """(Sigma^(1), Sigma^(2)) for labels +1 and -1."""
        return self.Sigma - self.Delta, self.Sigma + self.Delta


@dataclass(frozen=True, eq=False)
class FeatureEnsemble:
    """Sampled first-layer weights W (columns w_i) with their covariance."""

    W: np.ndarray
    Gamma: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectrumSpec:
    """Discrete spectral distribution: atoms with positive weights summing to 1."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.shape != weights.shape or atoms.ndim != 1 or atoms.size == 0:
            raise SpectraError("atoms and weights must be matching nonempty vectors")
        if not np.all(np.isfinite(atoms)) or np.any(atoms < 0):
            raise SpectraError("atoms must be finite and nonnegative")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise SpectraError("weights must be positive and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def mean(self) -> float:
        return float(self.atoms @ self.weights)


def make_qf_target(d, kind="exp1_diag", seed=0, rank=None, scale=None, B=None, b0=None):
    """Build a quadratic target.

    Kinds: ``exp1_diag`` (diagonal iid Exp(1) entries), ``identity``,
    ``spiked`` (rank-``rank`` diagonal spike of height ``scale``), ``custom``
    (explicit ``B``).  Unless overridden, b0 = -Tr(B) so that E[f*] = 0.
    """
    if d < 1:
        raise SpectraError("d must be >= 1")
    if kind == "exp1_diag":
        rng = np.random.default_rng(seed)
        Bm = np.diag(rng.exponential(1.0, size=d))
    elif kind == "identity":
        Bm = np.eye(d)
    elif kind == "spiked":
        if rank is None or scale is None:
            raise SpectraError("spiked target needs rank and scale")
        if not (1 <= rank <= d):
            raise SpectraError(f"spiked rank must be in [1, {d}]")
        diag = np.zeros(d)
        diag[:rank] = float(scale)
        Bm = np.diag(diag)
    elif kind == "custom":
        if B is None:
            raise SpectraError("custom target needs an explicit B")
        Bm = np.asarray(B, dtype=float)
    else:
        raise SpectraError(f"unknown qf target kind {kind!r}")
    if b0 is None:
        b0 = -float(np.trace(Bm))
    return TargetQf(B=Bm, b0=float(b0))


def make_mg_instance(d, kind="uniform3_diag", seed=0, Sigma=None, Delta=None,
                     c_bound=None):
    """Build a mixture instance.

    ``uniform3_diag``: Sigma = I and Delta diagonal with entries drawn iid
    uniformly from {2, 1.5, 1}/sqrt(d).  ``custom``: explicit matrices.
    """
    if d < 1:
        raise SpectraError("d must be >= 1")
    if kind == "uniform3_diag":
        rng = np.random.default_rng(seed)
        levels = np.array([2.0, 1.5, 1.0]) / np.sqrt(d)
        Dm = np.diag(rng.choice(levels, size=d))
        Sm = np.eye(d)
        cb = 2.0
    elif kind == "custom":
        if Delta is None:
            raise SpectraError("custom mixture needs an explicit Delta")
        Dm = np.asarray(Delta, dtype=float)
        Sm = np.eye(d) if Sigma is None else np.asarray(Sigma, dtype=float)
        cb = c_bound if c_bound is not None else float(
            np.linalg.norm(Dm, 2) * np.sqrt(d) + 1e-9
        )
    else:
        raise SpectraError(f"unknown mixture kind {kind!r}")
    return MixtureMg(Sigma=Sm, Delta=Dm, c_bound=float(cb))


def make_gamma(d, kind="isotropic", normalize_for="qf", target=None, Sigma=None,
               custom=None):
    """Feature covariance Gamma, normalized for the requested data model.

    ``isotropic`` gives Gamma = I/d; ``aligned`` gives Gamma proportional to
    ``target`` (the matrix whose directions the features should prefer);
    ``custom`` rescales a given matrix.  Normalization: Tr(Gamma) = 1 for
    ``qf``; Tr(Gamma Sigma) = 1 for ``mg``.
    """
    if kind == "isotropic":
        G = np.eye(d) / d
    elif kind == "aligned":
        if target is None:
            raise SpectraError("aligned Gamma needs a target matrix")
        T = _check_symmetric(target, "alignment target")
        if np.linalg.eigvalsh(T).min() < -1e-10 * max(1.0, np.abs(T).max()):
            raise SpectraError("alignment target must be positive semidefinite")
        tr = float(np.trace(T))
        if tr <= 0:
            raise SpectraError("alignment target must have positive trace")
        G = T / tr
    elif kind == "custom":
        if custom is None:
            raise SpectraError("custom Gamma needs an explicit matrix")
        G = _check_symmetric(custom, "Gamma")
    else:
        raise SpectraError(f"unknown Gamma kind {kind!r}")

    if normalize_for == "qf":
        denom = float(np.trace(G))
    elif normalize_for == "mg":
        if Sigma is None:
            raise SpectraError("mg normalization needs Sigma")
        denom = float(np.sum(G * np.asarray(Sigma, dtype=float)))
    else:
        raise SpectraError(f"unknown normalization mode {normalize_for!r}")
    if denom <= 0:
        raise SpectraError("Gamma normalization denominator must be positive")
    return G / denom


def empirical_spectrum(M, merge_tol=1e-10) -> SpectrumSpec:
    """Eigenvalues of a symmetric PSD matrix as a spectral distribution.

    The caller passes the rescaled matrix (d*Gamma or
    d*Gamma^{1/2} Sigma Gamma^{1/2}).  Nearby eigenvalues are merged.
    """
    M = _check_symmetric(M, "spectrum input", tol=1e-10)
    try:
        eigs = np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as exc:
        raise SpectraError(f"eigensolver failed: {exc}") from exc
    scale = max(1.0, float(np.abs(eigs).max(initial=0.0)))
    if eigs.min(initial=0.0) < -1e-10 * scale:
        raise SpectraError(f"matrix has negative eigenvalue {eigs.min():.3g}")
    eigs = np.clip(eigs, 0.0, None)
    d = eigs.size
    atoms, weights = [], []
    for v in eigs:  # eigs ascending; merge runs of near-equal values
        if atoms and abs(v - atoms[-1]) <= merge_tol * scale:
            total = weights[-1] + 1.0 / d
            atoms[-1] = (atoms[-1] * weights[-1] + v / d) / total
            weights[-1] = total
        else:
            atoms.append(float(v))
            weights.append(1.0 / d)
    w = np.array(weights)
    return SpectrumSpec(atoms=np.array(atoms), weights=w / w.sum())


def sample_features(Gamma, N, seed=0) -> FeatureEnsemble:
    """Draw N columns w_i ~ N(0, Gamma), deterministically per seed."""
    G = _check_symmetric(Gamma, "Gamma")
    eigs, vecs = np.linalg.eigh(G)
    scale = max(1.0, float(np.abs(eigs).max(initial=0.0)))
    if eigs.min(initial=0.0) < -1e-10 * scale:
        raise SpectraError("Gamma must be positive semidefinite")
    root = (vecs * np.sqrt(np.clip(eigs, 0.0, None))) @ vecs.T
    rng = np.random.default_rng(seed)
    W = root @ rng.standard_normal((G.shape[0], N))
    return FeatureEnsemble(W=W, Gamma=G)
