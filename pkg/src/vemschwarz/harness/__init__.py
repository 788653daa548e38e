"""Experiment runner, coefficient sampling, VTK output and the ``solve`` command."""

from .experiment import CSV_HEADER, ExperimentConfig, ResultRow, csv_text, format_table, run_experiment, run_point
from .rho import sample_rho
from .vtk import export_vtk

__all__ = [
    "CSV_HEADER",
    "ExperimentConfig",
    "ResultRow",
    "csv_text",
    "export_vtk",
    "format_table",
    "run_experiment",
    "run_point",
    "sample_rho",
]
