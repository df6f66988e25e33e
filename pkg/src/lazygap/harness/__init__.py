from .config import ConfigError, ExperimentConfig, SgdSettings, config_from_dict
from .records import CSV_COLUMNS, RiskRecord, records_to_csv, write_records
from .experiments import (LandscapeRow, pilot_step_size, run_landscape,
                          run_sgd_evolution, run_sweep, run_theory_table)

__all__ = [
    "CSV_COLUMNS",
    "ConfigError",
    "ExperimentConfig",
    "LandscapeRow",
    "RiskRecord",
    "SgdSettings",
    "config_from_dict",
    "pilot_step_size",
    "records_to_csv",
    "run_landscape",
    "run_sgd_evolution",
    "run_sweep",
    "run_theory_table",
    "write_records",
]
