"""Config-driven experiment runners and the ``subrad`` command line."""
from .config import ConfigError, ExperimentConfig, from_dict, load_config
from .runners import (ExperimentResult, run, run_decay_scaling, run_disorder_ensemble,
                      run_fisher_sweep, run_fom_sweep, run_resolve_dd, run_shift_experiment,
                      run_spectrum)
from .table import ResultTable

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentResult", "ResultTable", "from_dict",
           "load_config", "run", "run_decay_scaling", "run_disorder_ensemble", "run_fisher_sweep",
           "run_fom_sweep", "run_resolve_dd", "run_shift_experiment", "run_spectrum"]
