"""Experiment configuration: JSON schema, validation, hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Validation failure; the message carries the offending field path."""


EXPERIMENTS = ("sweep", "sgd_evolution", "landscape", "accept", "theory_table")
MODELS = ("qf", "mg")
TARGET_KINDS = ("exp1_diag", "identity", "spiked", "custom")
DELTA_KINDS = ("uniform3_diag", "custom")
GAMMA_KINDS = ("isotropic", "aligned")


@dataclass(frozen=True)
class SgdSettings:
    step_size: float = 0.0          # 0 means "pick from the pilot grid"
    n_steps: int = 20_000
    batch: int = 100
    log_every: int = 200
    decay: float = 1.0
    step_grid: tuple = (0.001, 0.003, 0.01, 0.03)
    pilot_steps: int = 5000


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: str = "qf"
    d: int = 100
    rho_grid: tuple = (0.5, 1.0, 2.0)
    activation: str = "quadratic"
    target_kind: str = "exp1_diag"
    target_rank: int | None = None
    target_scale: float | None = None
    delta_kind: str = "uniform3_diag"
    gamma_kinds: tuple = ("isotropic", "aligned")
    sgd: SgdSettings = field(default_factory=SgdSettings)
    seeds: tuple = tuple(range(10))
    output_path: str = "results.csv"
    paper_scale: bool = False

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": self.model,
            "d": self.d,
            "rho_grid": list(self.rho_grid),
            "activation": self.activation,
            "target": {"kind": self.target_kind, "rank": self.target_rank,
                       "scale": self.target_scale},
            "delta": {"kind": self.delta_kind},
            "gamma": list(self.gamma_kinds),
            "sgd": {
                "step_size": self.sgd.step_size,
                "n_steps": self.sgd.n_steps,
                "batch": self.sgd.batch,
                "log_every": self.sgd.log_every,
                "decay": self.sgd.decay,
                "step_grid": list(self.sgd.step_grid),
                "pilot_steps": self.sgd.pilot_steps,
            },
            "seeds": list(self.seeds),
            "output_path": self.output_path,
            "paper_scale": self.paper_scale,
        }


def _expect(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def config_from_dict(raw: dict, experiment: str | None = None,
                     paper_scale: bool = False) -> ExperimentConfig:
    """Parse and validate a config mapping, reporting errors by field path."""
    _expect(isinstance(raw, dict), "<root>", "config must be a JSON object")
    exp = experiment or raw.get("experiment")
    _expect(exp in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}, got {exp!r}")
    model = raw.get("model", "qf")
    _expect(model in MODELS, "model", f"must be one of {MODELS}, got {model!r}")

    d = int(raw.get("d", 100))
    if exp in ("sweep", "theory_table"):
        _expect(d >= 2, "d", "must be >= 2 for sweeps")
    else:
        _expect(d >= 1, "d", "must be >= 1")

    rho_grid = tuple(float(r) for r in raw.get("rho_grid", (0.5, 1.0, 2.0)))
    _expect(len(rho_grid) > 0, "rho_grid", "must be nonempty")
    _expect(all(r > 0 for r in rho_grid), "rho_grid", "entries must be positive")

    activation = raw.get("activation", "quadratic")
    _expect(isinstance(activation, str), "activation", "must be a string")

    target = raw.get("target", {"kind": "exp1_diag"})
    _expect(isinstance(target, dict), "target", "must be an object")
    target_kind = target.get("kind", "exp1_diag")
    _expect(target_kind in TARGET_KINDS, "target.kind",
            f"must be one of {TARGET_KINDS}, got {target_kind!r}")
    rank = target.get("rank")
    scale = target.get("scale")
    if target_kind == "spiked":
        _expect(rank is not None and scale is not None, "target",
                "spiked target needs rank and scale")

    delta = raw.get("delta", {"kind": "uniform3_diag"})
    delta_kind = delta.get("kind", "uniform3_diag") if isinstance(delta, dict) else delta
    _expect(delta_kind in DELTA_KINDS, "delta.kind",
            f"must be one of {DELTA_KINDS}, got {delta_kind!r}")

    gamma_kinds = tuple(raw.get("gamma", ["isotropic", "aligned"]))
    for g in gamma_kinds:
        _expect(g in GAMMA_KINDS, "gamma", f"unknown Gamma kind {g!r}")
    _expect(len(gamma_kinds) > 0, "gamma", "must name at least one Gamma kind")

    sgd_raw = raw.get("sgd", {})
    _expect(isinstance(sgd_raw, dict), "sgd", "must be an object")
    sgd = SgdSettings(
        step_size=float(sgd_raw.get("step_size", 0.0)),
        n_steps=int(sgd_raw.get("n_steps", 20_000)),
        batch=int(sgd_raw.get("batch", 100)),
        log_every=int(sgd_raw.get("log_every", 200)),
        decay=float(sgd_raw.get("decay", 1.0)),
        step_grid=tuple(float(s) for s in sgd_raw.get("step_grid",
                                                      (0.001, 0.003, 0.01, 0.03))),
        pilot_steps=int(sgd_raw.get("pilot_steps", 5000)),
    )
    _expect(sgd.batch >= 1, "sgd.batch", "must be >= 1")
    _expect(sgd.n_steps >= 1, "sgd.n_steps", "must be >= 1")
    _expect(sgd.log_every >= 1, "sgd.log_every", "must be >= 1")
    _expect(sgd.step_size >= 0, "sgd.step_size", "must be >= 0")

    seeds = tuple(int(s) for s in raw.get("seeds", range(10)))
    _expect(len(seeds) > 0, "seeds", "must be nonempty")

    cfg = ExperimentConfig(
        experiment=exp,
        model=model,
        d=d,
        rho_grid=rho_grid,
        activation=activation,
        target_kind=target_kind,
        target_rank=None if rank is None else int(rank),
        target_scale=None if scale is None else float(scale),
        delta_kind=delta_kind,
        gamma_kinds=gamma_kinds,
        sgd=sgd,
        seeds=seeds,
        output_path=str(raw.get("output_path", "results.csv")),
        paper_scale=bool(paper_scale or raw.get("paper_scale", False)),
    )
    if cfg.paper_scale:
        cfg = apply_paper_scale(cfg)
    return cfg


def apply_paper_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    """Scale the run up to the published experiment sizes.

    d = 450 with N between 45 and 4500, and long SGD runs (2e5 steps for the
    quadratic model, 1.4e5 for the mixture) at batch 100.
    """
    rho_grid = tuple(n / 450 for n in
                     (45, 90, 180, 360, 450, 900, 1800, 2700, 3600, 4500))
    n_steps = 200_000 if cfg.model == "qf" else 140_000
    sgd = SgdSettings(
        step_size=cfg.sgd.step_size,
        n_steps=n_steps,
        batch=100,
        log_every=max(1, n_steps // 200),
        decay=cfg.sgd.decay,
        step_grid=cfg.sgd.step_grid,
        pilot_steps=cfg.sgd.pilot_steps,
    )
    return ExperimentConfig(
        experiment=cfg.experiment,
        model=cfg.model,
        d=450,
        rho_grid=rho_grid,
        activation=cfg.activation,
        target_kind=cfg.target_kind,
        target_rank=cfg.target_rank,
        target_scale=cfg.target_scale,
        delta_kind=cfg.delta_kind,
        gamma_kinds=cfg.gamma_kinds,
        sgd=sgd,
        seeds=cfg.seeds,
        output_path=cfg.output_path,
        paper_scale=True,
    )
