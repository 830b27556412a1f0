"""Plotting companion for the shks simulator: reads its CSV and manifest
outputs and renders trajectory, survival-scan, convergence, and moment-check
figures. No simulator quantity is ever recomputed here."""

__version__ = "0.1.0"

from .plots import PlotJob, PlotResult, plot_convergence, plot_gbm, plot_survival_scan, plot_trajectory, render
from .schemas import SchemaError

__all__ = [
    "PlotJob",
    "PlotResult",
    "SchemaError",
    "plot_convergence",
    "plot_gbm",
    "plot_survival_scan",
    "plot_trajectory",
    "render",
]
