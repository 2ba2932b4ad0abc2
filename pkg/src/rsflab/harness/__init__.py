"""Environment generators, verification checks, sweeps and reports."""

from .checks import CHECK_IDS, CheckParams, ConfigurationError, ReportRow, verify
from .envs import DEFAULT_ENVIRONMENTS, EnvironmentSpec, generate_environment
from .report import emit_report, load_report
from .suite import SuiteConfig, run_suite, sweep_features

__all__ = ["CHECK_IDS", "CheckParams", "ConfigurationError", "DEFAULT_ENVIRONMENTS",
           "EnvironmentSpec", "ReportRow", "SuiteConfig", "emit_report", "generate_environment",
           "load_report", "run_suite", "sweep_features", "verify"]
