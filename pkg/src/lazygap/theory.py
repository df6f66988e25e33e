"""Closed-form asymptotic risk predictions.

Six predictors cover the (regime x data model) grid:

==========  ==============================  =================================
regime      quadratic target (qf)           Gaussian mixture (mg)
==========  ==============================  =================================
RF          rf_qf_risk / rf_qf_risk_quad..  rf_mg_risk
NT          nt_qf_risk                      nt_mg_risk_isotropic
NN          nn_qf_risk                      nn_mg_risk
==========  ==============================  =================================

All formulas are large-(N, d) limits at fixed rho = N/d, evaluated with the
finite-d spectra the caller supplies; o(1) corrections are dropped.  Risks
are reported both in absolute terms and normalized by the trivial
predictor's risk (E[f*^2] for qf with E f* = 0, E[y^2] = 1 for mg).
rho = math.inf selects the wide-network limit where one exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .activation import ActivationProfile
from .spectra import MixtureMg, TargetQf, empirical_spectrum
from .stieltjes import solve_psi


class TheoryError(ValueError):
    """Raised when a predictor's assumptions are violated."""


@dataclass(frozen=True)
class RiskPrediction:
    regime: str          # "RF" | "NT" | "NN"
    model: str           # "qf" | "mg"
    value: float
    normalized: float
    inputs_digest: dict

    def __post_init__(self):
        if self.value < -1e-10:
            raise TheoryError(f"negative predicted risk {self.value}")
        if self.model == "qf" and self.regime in ("RF", "NT"):
            if not -1e-10 <= self.normalized <= 1.0 + 1e-8:
                raise TheoryError(
                    f"{self.regime} qf normalized risk {self.normalized} out of [0, 1]"
                )


def _prediction(regime, model, value, baseline, digest) -> RiskPrediction:
    value = max(float(value), 0.0)
    return RiskPrediction(
        regime=regime,
        model=model,
        value=value,
        normalized=value / baseline,
        inputs_digest=digest,
    )


def _require_centered(target: TargetQf):
    if not target.is_centered():
        raise TheoryError(
            "RF/NT qf formulas assume E[f*] = 0, i.e. b0 = -Tr(B); "
            f"got b0 = {target.b0}, Tr(B) = {float(np.trace(target.B))}"
        )


def _gamma_stats(B, Gamma):
    d = B.shape[0]
    return d, float(np.sum(B * Gamma)), float(np.sum(Gamma * Gamma)), float(np.sum(B * B))


def rf_qf_risk(target: TargetQf, Gamma, rho, profile: ActivationProfile) -> RiskPrediction:
    """RF risk on a quadratic target for a general centered activation.

    psi solves the Silverstein fixed point for the spectrum of d*Gamma, and

        risk = ||f*||^2 (1 - psi l2^2 d <Gamma, B>^2
                             / (||B||_F^2 (2 + psi l2^2 d ||Gamma||_F^2))).
    """
    profile.require_usable()
    _require_centered(target)
    B = target.B
    Gamma = np.asarray(Gamma, dtype=float)
    d, gb, gg, bb = _gamma_stats(B, Gamma)
    if abs(np.trace(Gamma) - 1.0) > 1e-8:
        raise TheoryError("qf features require Tr(Gamma) = 1")
    baseline = 2.0 * bb
    digest = {"d": d, "rho": rho, "gamma_dot_b": gb, "gamma_fro2": gg,
              "activation": profile.name}
    if math.isinf(rho):
        normalized = 1.0 - gb * gb / (gg * bb)
        return _prediction("RF", "qf", baseline * normalized, baseline, digest)
    psi = solve_psi(rho, profile.lambda1, profile.lambda_tilde,
                    empirical_spectrum(d * Gamma)).psi
    l2sq = profile.lambda2**2
    normalized = 1.0 - psi * l2sq * d * gb * gb / (bb * (2.0 + psi * l2sq * d * gg))
    digest["psi"] = psi
    return _prediction("RF", "qf", baseline * normalized, baseline, digest)


def rf_qf_risk_quadratic(target: TargetQf, Gamma, rho) -> RiskPrediction:
    """RF risk specialized to sigma(x) = x^2 - 1, in closed form."""
    _require_centered(target)
    B = target.B
    Gamma = np.asarray(Gamma, dtype=float)
    d, gb, gg, bb = _gamma_stats(B, Gamma)
    baseline = 2.0 * bb
    digest = {"d": d, "rho": rho, "gamma_dot_b": gb, "gamma_fro2": gg}
    if math.isinf(rho):
        normalized = 1.0 - gb * gb / (gg * bb)
    else:
        normalized = 1.0 - rho * d * gb * gb / (bb * (1.0 + rho * d * gg))
    return _prediction("RF", "qf", baseline * normalized, baseline, digest)


def nt_qf_risk(target: TargetQf, rho) -> RiskPrediction:
    """Expected NT risk on a quadratic target, isotropic weights w_i ~ N(0, I/d).

    With tau = Tr(B)^2 / (d ||B||_F^2):

        E[risk] / ||f*||^2 = (1 - rho)_+^2 (1 - tau) + (1 - rho)_+ tau,

    which vanishes for rho >= 1.
    """
    _require_centered(target)
    B = target.B
    d = B.shape[0]
    bb = float(np.sum(B * B))
    tau = float(np.trace(B)) ** 2 / (d * bb)
    slack = max(1.0 - rho, 0.0)
    normalized = slack * slack * (1.0 - tau) + slack * tau
    baseline = 2.0 * bb
    return _prediction("NT", "qf", baseline * normalized, baseline,
                       {"d": d, "rho": rho, "tau": tau})


def nn_qf_risk(B_eigenvalues, N: int) -> RiskPrediction:
    """Risk of the best N-neuron quadratic network, 2 * sum_{i > N} eig_i(B)^2."""
    eigs = np.sort(np.asarray(B_eigenvalues, dtype=float))[::-1]
    if eigs.size and eigs.min() < -1e-10:
        raise TheoryError(f"B must be positive semidefinite, got eigenvalue {eigs.min()}")
    eigs = np.clip(eigs, 0.0, None)
    value = 2.0 * float(np.sum(eigs[N:] ** 2))
    baseline = 2.0 * float(np.sum(eigs**2))
    if baseline == 0.0:
        raise TheoryError("B = 0 has no normalizable risk")
    return _prediction("NN", "qf", value, baseline,
                       {"d": eigs.size, "N": N})


def _mg_zetas(mix: MixtureMg, Gamma):
    d = mix.d
    Gamma = np.asarray(Gamma, dtype=float)
    SG = mix.Sigma @ Gamma
    zeta1 = d * float(np.trace(SG @ SG)) / 2.0
    zeta2 = d * float(np.sum(mix.Delta * Gamma)) ** 2 / 4.0
    return d, Gamma, zeta1, zeta2


def rf_mg_risk(mix: MixtureMg, Gamma, rho, profile: ActivationProfile) -> RiskPrediction:
    """RF risk on the mixture for a general centered activation.

    With zeta1 = d Tr(Sigma Gamma Sigma Gamma)/2 and
    zeta2 = d Tr(Delta Gamma)^2 / 4, and psi solved on the spectrum of
    d * Gamma^{1/2} Sigma Gamma^{1/2}:

        risk = (1 + zeta1 l2^2 psi) / (1 + (zeta1 + zeta2) l2^2 psi),

    tending to zeta1 / (zeta1 + zeta2) as rho -> inf.
    """
    profile.require_usable()
    d, Gamma, zeta1, zeta2 = _mg_zetas(mix, Gamma)
    if abs(np.sum(Gamma * mix.Sigma) - 1.0) > 1e-8:
        raise TheoryError("mg features require Tr(Gamma Sigma) = 1")
    digest = {"d": d, "rho": rho, "zeta1": zeta1, "zeta2": zeta2,
              "activation": profile.name}
    if math.isinf(rho):
        value = zeta1 / (zeta1 + zeta2)
        return _prediction("RF", "mg", value, 1.0, digest)
    eigs, vecs = np.linalg.eigh(Gamma)
    root = (vecs * np.sqrt(np.clip(eigs, 0.0, None))) @ vecs.T
    spec = empirical_spectrum(d * (root @ mix.Sigma @ root))
    psi = solve_psi(rho, profile.lambda1, profile.lambda_tilde, spec).psi
    l2sq = profile.lambda2**2
    value = (1.0 + zeta1 * l2sq * psi) / (1.0 + (zeta1 + zeta2) * l2sq * psi)
    digest["psi"] = psi
    return _prediction("RF", "mg", value, 1.0, digest)


def nt_mg_risk_isotropic(mix: MixtureMg, rho) -> RiskPrediction:
    """NT risk on the mixture with Sigma = I and isotropic weights.

    kappa(rho, Delta) interpolates between 0 (no neurons) and 1 (rho >= 1):

        risk = 2 / (2 + kappa ||Delta||_F^2).
    """
    if np.abs(mix.Sigma - np.eye(mix.d)).max() > 1e-8:
        raise TheoryError("nt_mg_risk_isotropic requires Sigma = I")
    Delta = mix.Delta
    dd = float(np.sum(Delta * Delta))
    tau = float(np.trace(Delta)) ** 2 / (mix.d * dd)
    slack = max(1.0 - rho, 0.0)
    kappa = 1.0 - slack * slack * (1.0 - tau) - slack * tau
    value = 2.0 / (2.0 + kappa * dd)
    return _prediction("NT", "mg", value, 1.0,
                       {"d": mix.d, "rho": rho, "kappa": kappa, "delta_fro2": dd})


def whitened_delta(mix: MixtureMg) -> np.ndarray:
    """Delta_tilde = Sigma^{-1/2} Delta Sigma^{-1/2}."""
    eigs, vecs = np.linalg.eigh(mix.Sigma)
    if eigs.min() <= 0:
        raise TheoryError("Sigma must be positive definite")
    inv_root = (vecs / np.sqrt(eigs)) @ vecs.T
    return inv_root @ mix.Delta @ inv_root


def nn_mg_risk(mix: MixtureMg, N: int) -> RiskPrediction:
    """Best N-neuron network risk on the mixture.

    2 / (2 + sum_{i <= N ^ d} s_i^2) with s_i the descending singular values
    of the whitened difference Sigma^{-1/2} Delta Sigma^{-1/2}.
    """
    s = np.sort(np.abs(np.linalg.eigvalsh(whitened_delta(mix))))[::-1]
    r = min(N, mix.d)
    value = 2.0 / (2.0 + float(np.sum(s[:r] ** 2)))
    return _prediction("NN", "mg", value, 1.0, {"d": mix.d, "N": N})
