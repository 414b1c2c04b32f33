"""Multiplicative error models for realized volatility with policy effects.

A library and CLI for filtering, Gamma quasi-maximum-likelihood
estimation, diagnostics, model comparison via the model confidence set,
multi-step forecasting, impulse responses and marginal effects across five
related volatility specifications (AMEM, XMAP, MAP, LMAP, PMAP).
"""

from .errors import (ConfigError, DataError, EstimationError, EvaluationError,
                     ForecastError, MapvolError, ModelError, NumericalError,
                     SimulationError)
from .estimation import (EstimationResult, FitOptions, aic_bic, fit,
                         gamma_loglik, gamma_loglik_terms, ljung_box,
                         robust_se, sandwich_covariance)
from .evaluation import (LossMatrix, McsResult, OosRun, losses,
                         model_confidence_set, oos_forecast_run,
                         stationary_bootstrap_indices)
from .forecasting import (ForecastPath, ForecastRules, ForecastState, IrfPath,
                          MarginalEffect, convergence_horizon,
                          impulse_response, marginal_effects,
                          multi_step_forecast)
from .models import (FilterOutput, ModelKind, ParamSet, filter_panel,
                     policy_share, unconditional_mean)
from .panel import (AnnouncementWindowStats, CenteredCovariates, PanelSeries,
                    announcement_window_stats, center_covariates, load_panel,
                    sign_dummy)
from .simulation import (SimResult, SimScenario, default_params, gamma_draw,
                         simulate_panel)

__version__ = "0.1.0"

__all__ = [
    "AnnouncementWindowStats", "CenteredCovariates", "ConfigError", "DataError",
    "EstimationError", "EstimationResult", "EvaluationError", "FilterOutput",
    "FitOptions", "ForecastError", "ForecastPath", "ForecastRules",
    "ForecastState", "IrfPath", "LossMatrix", "MapvolError", "MarginalEffect",
    "McsResult", "ModelError", "ModelKind", "NumericalError", "OosRun",
    "PanelSeries", "ParamSet", "SimResult", "SimScenario", "SimulationError",
    "aic_bic", "announcement_window_stats", "center_covariates",
    "convergence_horizon", "default_params", "filter_panel", "fit",
    "gamma_draw", "gamma_loglik", "gamma_loglik_terms", "impulse_response",
    "ljung_box", "load_panel", "losses", "marginal_effects",
    "model_confidence_set", "multi_step_forecast", "oos_forecast_run",
    "policy_share", "robust_se", "sandwich_covariance", "sign_dummy",
    "simulate_panel", "stationary_bootstrap_indices", "unconditional_mean",
]
