"""Experiment orchestration over the theory / oracle / SGD layers.

Each experiment expands a validated config into deterministic work cells
(regime x rho x seed), evaluates them, and returns rows sorted by a fixed
key so that identical configs always serialize to identical CSV bytes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .. import dynamics, oracle, spectra, theory
from ..activation import profile_for
from .config import ConfigError, ExperimentConfig
from .records import RiskRecord, sort_records


def _qf_target(cfg: ExperimentConfig) -> spectra.TargetQf:
    return spectra.make_qf_target(
        cfg.d, cfg.target_kind, seed=cfg.seeds[0],
        rank=cfg.target_rank, scale=cfg.target_scale,
    )


def _mg_instance(cfg: ExperimentConfig) -> spectra.MixtureMg:
    return spectra.make_mg_instance(cfg.d, cfg.delta_kind, seed=cfg.seeds[0])


def _gammas(cfg: ExperimentConfig, align_to, Sigma=None) -> dict[str, np.ndarray]:
    mode = "qf" if Sigma is None else "mg"
    out = {}
    for kind in cfg.gamma_kinds:
        label = f"rf_{'iso' if kind == 'isotropic' else 'aligned'}"
        out[label] = spectra.make_gamma(
            cfg.d, kind, normalize_for=mode,
            target=align_to if kind == "aligned" else None, Sigma=Sigma,
        )
    return out


def _record(cfg, regime, source, N, rho, seed, risk, normalized,
            steps=0, samples=0) -> RiskRecord:
    return RiskRecord(
        experiment=cfg.experiment, model=cfg.model, regime=regime, source=source,
        d=cfg.d, N=N, rho=rho, seed=seed, steps=steps, samples=samples,
        risk=risk, risk_normalized=normalized, config_hash=cfg.config_hash(),
    )


def run_sweep(cfg: ExperimentConfig, theory_only: bool = False):
    """Theory and finite-size oracle rows over the rho grid.

    Returns (records, diagnostics); each oracle row's diagnostic pairs it
    with the matching theory value.
    """
    records: list[RiskRecord] = []
    theory_by_key: dict[tuple, float] = {}

    if cfg.model == "qf":
        target = _qf_target(cfg)
        profile = profile_for(cfg.activation)
        gammas = _gammas(cfg, target.B)
        baseline = target.second_moment()
        eigs = np.linalg.eigvalsh(target.B)[::-1]
        gamma_nt = spectra.make_gamma(cfg.d, "isotropic", "qf")
        for rho in cfg.rho_grid:
            N = max(1, round(rho * cfg.d))
            rho_eff = N / cfg.d
            for label, G in gammas.items():
                pred = theory.rf_qf_risk(target, G, rho_eff, profile)
                theory_by_key[(label, rho_eff)] = pred.normalized
                records.append(_record(cfg, label, "theory", N, rho_eff,
                                       cfg.seeds[0], pred.value, pred.normalized))
            nt_pred = theory.nt_qf_risk(target, rho_eff)
            nn_pred = theory.nn_qf_risk(eigs, N)
            theory_by_key[("nt", rho_eff)] = nt_pred.normalized
            theory_by_key[("nn", rho_eff)] = nn_pred.normalized
            records.append(_record(cfg, "nt", "theory", N, rho_eff, cfg.seeds[0],
                                   nt_pred.value, nt_pred.normalized))
            records.append(_record(cfg, "nn", "theory", N, rho_eff, cfg.seeds[0],
                                   nn_pred.value, nn_pred.normalized))
            if theory_only:
                continue

            for seed in cfg.seeds:
                for label, G in gammas.items():
                    W = spectra.sample_features(G, N, seed=seed).W
                    moments = oracle.rf_kernel_moments_quadratic(W, target) \
                        if cfg.activation == "quadratic" else \
                        oracle.rf_mc_moments(
                            W, _activation_fn(cfg.activation), target,
                            n=200_000, seed=seed)
                    risk = oracle.rf_exact_risk(moments)
                    records.append(_record(cfg, label, "oracle", N, rho_eff, seed,
                                           risk, risk / baseline))
                W = spectra.sample_features(gamma_nt, N, seed=seed + 100_000).W
                risk = oracle.nt_exact_risk_qf(W, target.B)
                records.append(_record(cfg, "nt", "oracle", N, rho_eff, seed,
                                       risk, risk / baseline))
            _, opt_risk = oracle.nn_opt_quadmodel(target, N)
            records.append(_record(cfg, "nn", "oracle", N, rho_eff, cfg.seeds[0],
                                   opt_risk, opt_risk / baseline))
    else:
        mix = _mg_instance(cfg)
        profile = profile_for(cfg.activation)
        gammas = _gammas(cfg, mix.Delta, Sigma=mix.Sigma)
        gamma_nt = spectra.make_gamma(cfg.d, "isotropic", "mg", Sigma=mix.Sigma)
        isotropic_sigma = np.abs(mix.Sigma - np.eye(cfg.d)).max() < 1e-10
        bayes = None if theory_only else oracle.bayes_risk_mg(mix, seed=cfg.seeds[0])
        for rho in cfg.rho_grid:
            N = max(1, round(rho * cfg.d))
            rho_eff = N / cfg.d
            for label, G in gammas.items():
                pred = theory.rf_mg_risk(mix, G, rho_eff, profile)
                theory_by_key[(label, rho_eff)] = pred.normalized
                records.append(_record(cfg, label, "theory", N, rho_eff,
                                       cfg.seeds[0], pred.value, pred.normalized))
            if isotropic_sigma:
                nt_pred = theory.nt_mg_risk_isotropic(mix, rho_eff)
                theory_by_key[("nt", rho_eff)] = nt_pred.normalized
                records.append(_record(cfg, "nt", "theory", N, rho_eff,
                                       cfg.seeds[0], nt_pred.value, nt_pred.normalized))
            nn_pred = theory.nn_mg_risk(mix, N)
            theory_by_key[("nn", rho_eff)] = nn_pred.normalized
            records.append(_record(cfg, "nn", "theory", N, rho_eff, cfg.seeds[0],
                                   nn_pred.value, nn_pred.normalized))
            if theory_only:
                continue

            for seed in cfg.seeds:
                for label, G in gammas.items():
                    W = spectra.sample_features(G, N, seed=seed).W
                    moments = oracle.rf_kernel_moments_quadratic(W, mix) \
                        if cfg.activation == "quadratic" else \
                        oracle.rf_mc_moments(
                            W, _activation_fn(cfg.activation), mix,
                            n=200_000, seed=seed)
                    risk = oracle.rf_exact_risk(moments)
                    records.append(_record(cfg, label, "oracle", N, rho_eff, seed,
                                           risk, risk))
                W = spectra.sample_features(gamma_nt, N, seed=seed + 100_000).W
                risk = oracle.nt_exact_risk_mg(W, mix)
                records.append(_record(cfg, "nt", "oracle", N, rho_eff, seed,
                                       risk, risk))
            _, opt_risk = oracle.nn_opt_quadmodel(mix, N)
            records.append(_record(cfg, "nn", "oracle", N, rho_eff, cfg.seeds[0],
                                   opt_risk, opt_risk))
            records.append(_record(cfg, "bayes", "oracle", N, rho_eff, cfg.seeds[0],
                                   bayes.value, bayes.value))

    records = sort_records(records)
    diagnostics = []
    for rec in records:
        if rec.source == "theory":
            continue
        ref = theory_by_key.get((rec.regime, rec.rho))
        if ref is None:
            continue
        diagnostics.append({
            "model": rec.model, "regime": rec.regime, "rho": rec.rho,
            "source": rec.source, "risk_normalized": rec.risk_normalized,
            "theory_normalized": ref,
            "abs_difference": abs(rec.risk_normalized - ref),
            "config_hash": rec.config_hash,
        })
    return records, diagnostics


def _activation_fn(name):
    from ..activation import activation_function

    fn = activation_function(name)
    profile = profile_for(name)

    def centered(x):
        return fn(x) - profile.lambda0

    return centered


def pilot_step_size(target, d, N, sgd, seed) -> float:
    """Short pilot runs across the step-size grid; lowest final risk wins."""
    best_eps, best_risk = None, math.inf
    for eps in sgd.step_grid:
        cfg_try = dynamics.SgdConfig(
            step_size=eps, n_steps=sgd.pilot_steps, batch=sgd.batch,
            log_every=max(1, sgd.pilot_steps // 10), seed=seed, decay=sgd.decay,
        )
        try:
            trace = dynamics.nn_sgd_run(dynamics.init_nn_state(d, N, seed), target,
                                        cfg_try)
            risk = trace.final_risk()
        except dynamics.DivergenceError:
            continue
        if risk < best_risk:
            best_eps, best_risk = eps, risk
    if best_eps is None:
        raise ConfigError("sgd.step_grid: every pilot step size diverged")
    return best_eps


def run_sgd_evolution(cfg: ExperimentConfig):
    """Risk-vs-samples traces for the trained and linearized networks.

    Emits sgd rows at every log point and theory rows for the large-sample
    asymptotes.  A diverging run is surfaced as a row with infinite risk.
    """
    rho = cfg.rho_grid[0]
    N = max(1, round(rho * cfg.d))
    rho_eff = N / cfg.d
    records: list[RiskRecord] = []

    if cfg.model == "qf":
        target = _qf_target(cfg)
        baseline = target.second_moment()
        eps = cfg.sgd.step_size or pilot_step_size(target, cfg.d, N, cfg.sgd,
                                                   cfg.seeds[0])
        run_cfg = dynamics.SgdConfig(
            step_size=eps, n_steps=cfg.sgd.n_steps, batch=cfg.sgd.batch,
            log_every=cfg.sgd.log_every, seed=cfg.seeds[0], decay=cfg.sgd.decay,
        )
        eigs = np.linalg.eigvalsh(target.B)[::-1]
        nn_pred = theory.nn_qf_risk(eigs, N)
        nt_pred = theory.nt_qf_risk(target, rho_eff)
        records.append(_record(cfg, "nn", "theory", N, rho_eff, cfg.seeds[0],
                               nn_pred.value, nn_pred.normalized))
        records.append(_record(cfg, "nt", "theory", N, rho_eff, cfg.seeds[0],
                               nt_pred.value, nt_pred.normalized))

        records.extend(_trace_records(
            cfg, "nn", N, rho_eff, baseline,
            lambda: dynamics.nn_sgd_run(
                dynamics.init_nn_state(cfg.d, N, cfg.seeds[0]), target, run_cfg),
            run_cfg))
        W = spectra.sample_features(np.eye(cfg.d) / cfg.d, N,
                                    seed=cfg.seeds[0] + 100_000).W
        nt_state = dynamics.NtState(W_frozen=W, A=np.zeros_like(W), c=0.0)
        records.extend(_trace_records(
            cfg, "nt", N, rho_eff, baseline,
            lambda: dynamics.nt_sgd_run(nt_state, target, run_cfg), run_cfg))
    else:
        mix = _mg_instance(cfg)
        if cfg.sgd.step_size <= 0:
            raise ConfigError("sgd.step_size: required for mixture evolution runs")
        run_cfg = dynamics.SgdConfig(
            step_size=cfg.sgd.step_size, n_steps=cfg.sgd.n_steps,
            batch=cfg.sgd.batch, log_every=cfg.sgd.log_every,
            seed=cfg.seeds[0], decay=cfg.sgd.decay,
        )
        nt_pred = theory.nt_mg_risk_isotropic(mix, rho_eff)
        nn_pred = theory.nn_mg_risk(mix, N)
        records.append(_record(cfg, "nt", "theory", N, rho_eff, cfg.seeds[0],
                               nt_pred.value, nt_pred.normalized))
        records.append(_record(cfg, "nn", "theory", N, rho_eff, cfg.seeds[0],
                               nn_pred.value, nn_pred.normalized))
        W = spectra.sample_features(np.eye(cfg.d) / cfg.d, N,
                                    seed=cfg.seeds[0] + 100_000).W
        nt_state = dynamics.NtState(W_frozen=W, A=np.zeros_like(W), c=0.0)
        records.extend(_trace_records(
            cfg, "nt", N, rho_eff, 1.0,
            lambda: dynamics.nt_sgd_run(nt_state, mix, run_cfg), run_cfg))
    return sort_records(records)


def _trace_records(cfg, regime, N, rho, baseline, runner, run_cfg):
    try:
        trace = runner()
    except dynamics.DivergenceError:
        return [_record(cfg, regime, "sgd", N, rho, run_cfg.seed,
                        math.inf, math.inf,
                        steps=run_cfg.n_steps,
                        samples=run_cfg.n_steps * run_cfg.batch)]
    return [
        _record(cfg, regime, "sgd", N, rho, run_cfg.seed, float(r), float(r) / baseline,
                steps=int(s), samples=int(m))
        for s, m, r in zip(trace.steps, trace.samples, trace.risks)
    ]


@dataclass(frozen=True)
class LandscapeRow:
    subset: tuple
    size: int
    grad_norm: float
    risk: float
    is_global: bool
    certificate: float


def run_landscape(cfg: ExperimentConfig) -> list[LandscapeRow]:
    """Enumerate all critical points of the small-d landscape.

    Requires d <= 12.  Every index subset S with |S| <= min(N, d) yields a
    critical point; non-global points get their strict-saddle certificate.
    """
    if cfg.d > 12:
        raise ConfigError("d: landscape enumeration requires d <= 12")
    d = cfg.d
    N = max(1, round(cfg.rho_grid[0] * d))
    target = spectra.make_qf_target(d, "custom",
                                    B=np.diag(np.arange(d, 0, -1, dtype=float)),
                                    b0=0.0)
    diag = np.diag(target.B)
    positive = np.sort(diag[diag > 0])
    delta_eig = float(positive[0])
    distinct = np.unique(diag)
    delta_sep = float(np.diff(distinct).min()) if distinct.size > 1 else delta_eig
    bound = (-4.0 * min(delta_eig, delta_sep) * dynamics.HESSIAN_NORMALIZATION
             + 1e-8)
    _, opt_risk = oracle.nn_opt_quadmodel(target, N)
    rows = []
    for size in range(0, min(N, d) + 1):
        for S in itertools.combinations(range(d), size):
            state = dynamics.critical_points_qf(target, N, S, seed=cfg.seeds[0])
            gW, gc = dynamics.nn_population_gradient(state, target)
            grad_norm = float(np.sqrt(np.sum(gW * gW) + gc * gc))
            risk = oracle.quad_population_risk(state.model(), target)
            is_global = risk <= opt_risk + 1e-8 * max(1.0, opt_risk)
            cert = math.nan
            if not is_global:
                _, cert = dynamics.strict_saddle_certificate(state, target)
                if cert > bound:
                    raise ArithmeticError(
                        f"critical point {S} has certificate {cert:.6g} above "
                        f"the strict-saddle bound {bound:.6g}"
                    )
            rows.append(LandscapeRow(subset=S, size=size, grad_norm=grad_norm,
                                     risk=risk, is_global=is_global,
                                     certificate=cert))
    return rows


def run_theory_table(cfg: ExperimentConfig) -> list[RiskRecord]:
    """Theory rows only, over the rho grid."""
    records, _ = run_sweep(cfg, theory_only=True)
    return records
