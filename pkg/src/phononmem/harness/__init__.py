"""Configuration, experiment orchestration, file formats and the CLI."""

from .config import ExperimentConfig, load_config
from .countsio import export_counts, ingest_counts
from .experiments import (RunReport, run, run_analysis, run_entangled_experiment, run_fit,
                          run_prediction, run_qubit_experiment)
from .report import emit_report

__all__ = [
    "ExperimentConfig", "load_config", "export_counts", "ingest_counts", "RunReport", "run",
    "run_analysis", "run_entangled_experiment", "run_fit", "run_prediction", "run_qubit_experiment",
    "emit_report",
]
