"""Multivariate Bayesian structural time-series models for causal effects
of a single persistent intervention on groups of interfering units."""

__version__ = "0.1.0"

from .components import LocalLevelTrend, Regression, Seasonal, assemble_system, simulate_from_system
from .diagnostics import PpcReport, bayesian_p_value, geweke_diagnostic, ppc_report
from .dtw import dtw_distance, dtw_preselect_controls
from .effects import (EffectDraws, EffectSummary, TreatmentAssignment, conditional_effect,
                      effect_draws, general_effect, marginal_effects, meta_analysis_summary)
from .estimator import MBSTS
from .exceptions import DimensionError, MBSTSError, NumericalError, ValidationError
from .forecast import analytic_forecast_error, forecast_counterfactual, replicate_insample
from .gibbs import MCMCConfig, McmcDraws, run_gibbs
from .panel import PanelSchema, TimeSeriesPanel, load_panel_csv
from .pipeline import RunConfig, run_pipeline, sensitivity_sweep
from .priors import PriorConfig, default_priors
from .simulation import CoverageReport, SimulationDesign, generate_synthetic_panel, run_coverage_study
from .statespace import (StateSpaceSystem, joint_gaussian_smoother_oracle, kalman_filter,
                         kalman_smoother, simulation_smoother)

__all__ = [
    "MBSTS", "LocalLevelTrend", "Seasonal", "Regression", "assemble_system", "simulate_from_system",
    "StateSpaceSystem", "kalman_filter", "kalman_smoother", "simulation_smoother",
    "joint_gaussian_smoother_oracle", "PriorConfig", "default_priors", "MCMCConfig", "McmcDraws",
    "run_gibbs", "forecast_counterfactual", "replicate_insample", "analytic_forecast_error",
    "EffectDraws", "EffectSummary", "TreatmentAssignment", "effect_draws", "general_effect",
    "marginal_effects", "conditional_effect", "meta_analysis_summary", "PpcReport",
    "bayesian_p_value", "ppc_report", "geweke_diagnostic", "dtw_distance", "dtw_preselect_controls",
    "TimeSeriesPanel", "PanelSchema", "load_panel_csv", "RunConfig", "run_pipeline",
    "sensitivity_sweep", "SimulationDesign", "generate_synthetic_panel", "run_coverage_study",
    "CoverageReport", "MBSTSError", "ValidationError", "DimensionError", "NumericalError",
]
