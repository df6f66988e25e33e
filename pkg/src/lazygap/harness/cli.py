"""Command-line entry point.

    lazygap theory|sweep|sgd|landscape|accept --config cfg.json
            [--out results.csv] [--seed 7] [--paper-scale]

Exit code 0 on success; on failure a machine-readable JSON error object is
written to stderr and the exit code is nonzero (2 for validation problems,
3 for numeric failures).
"""

from __future__ import annotations

import argparse
import json
import sys

from ..activation import ActivationError
from ..dynamics import DivergenceError, DynamicsError
from ..oracle import OracleError
from ..spectra import SpectraError
from ..stieltjes import StieltjesError
from ..theory import TheoryError
from . import acceptance
from .config import ConfigError, config_from_dict
from .experiments import (run_landscape, run_sgd_evolution, run_sweep,
                          run_theory_table)
from .records import write_diagnostics, write_records

_COMMAND_TO_EXPERIMENT = {
    "theory": "theory_table",
    "sweep": "sweep",
    "sgd": "sgd_evolution",
    "landscape": "landscape",
    "accept": "accept",
}

_VALIDATION_ERRORS = (ConfigError, SpectraError, TheoryError, ActivationError,
                      DynamicsError, OracleError, ValueError)
_NUMERIC_ERRORS = (StieltjesError, DivergenceError, ArithmeticError,
                   FloatingPointError)


def _fail(kind: str, message: str, code: int):
    json.dump({"error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")
    return code


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    with open(args.config) as fh:
        return json.load(fh)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lazygap", description=__doc__)
    parser.add_argument("command", choices=sorted(_COMMAND_TO_EXPERIMENT))
    parser.add_argument("--config", help="path to an experiment config JSON")
    parser.add_argument("--out", help="output CSV path (overrides config)")
    parser.add_argument("--seed", type=int, help="replaces the config seed list")
    parser.add_argument("--paper-scale", action="store_true",
                        help="run at the published experiment sizes")
    args = parser.parse_args(argv)

    try:
        raw = _load_config(args)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("config_io", str(exc), 2)

    if args.seed is not None:
        raw["seeds"] = [args.seed]
    if args.out is not None:
        raw["output_path"] = args.out

    try:
        if args.command == "accept":
            results = acceptance.run_all()
            return 0 if all(r.passed for r in results) else 1

        cfg = config_from_dict(raw, experiment=_COMMAND_TO_EXPERIMENT[args.command],
                               paper_scale=args.paper_scale)
        if args.command == "sweep":
            records, diagnostics = run_sweep(cfg)
            write_records(cfg.output_path, records)
            write_diagnostics(cfg.output_path + ".diag.csv", diagnostics)
            print(f"wrote {len(records)} rows to {cfg.output_path}")
        elif args.command == "theory":
            records = run_theory_table(cfg)
            write_records(cfg.output_path, records)
            print(f"wrote {len(records)} rows to {cfg.output_path}")
        elif args.command == "sgd":
            records = run_sgd_evolution(cfg)
            write_records(cfg.output_path, records)
            print(f"wrote {len(records)} rows to {cfg.output_path}")
        elif args.command == "landscape":
            rows = run_landscape(cfg)
            with open(cfg.output_path, "w") as fh:
                fh.write("subset,size,grad_norm,risk,is_global,certificate\n")
                for r in rows:
                    fh.write(f"\"{' '.join(map(str, r.subset))}\",{r.size},"
                             f"{r.grad_norm:.6e},{r.risk:.12g},"
                             f"{int(r.is_global)},{r.certificate:.12g}\n")
            print(f"wrote {len(rows)} rows to {cfg.output_path}")
        return 0
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    except _NUMERIC_ERRORS as exc:
        return _fail("numeric", str(exc), 3)
    except _VALIDATION_ERRORS as exc:
        return _fail("validation", str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
