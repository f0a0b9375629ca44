"""Feedback stabilization of two-qubit Bell states under continuous-time
measurement: trajectory integration, Monte Carlo campaigns, Lyapunov and
Bures diagnostics, and verification suites."""

from .control import Controller, control_signal, fidelity, smoothing_f, theta_u
from .ensemble import (CampaignConfig, CampaignError, EnsembleSummary,
                       reference_curve, run_campaign, write_outputs)
from .config import parse_config, preset_config
from .metrics import (ExponentFit, ScalarSeries, bures_distance, bures_to_set,
                      classify_limit, coordinates, first_hit_time,
                      fit_sample_exponent, generator_apply, lyapunov_feedback,
                      lyapunov_qsr, noise_gain)
from .model import (BellState, ModelParams, OperatorSet, bell, bell_states,
                    operators, pauli, random_density)
from .sde import (SdeConfig, TrajectoryRecord, em_step, integrate_support_ode,
                  integrate_trajectory, project_to_physical,
                  run_reachability_demo, wiener_increments)

__version__ = "0.1.0"

__all__ = [
    "BellState", "CampaignConfig", "CampaignError", "Controller",
    "EnsembleSummary", "ExponentFit", "ModelParams", "OperatorSet",
    "ScalarSeries", "SdeConfig", "TrajectoryRecord", "bell", "bell_states",
    "bures_distance", "bures_to_set", "classify_limit", "control_signal",
    "coordinates", "em_step", "fidelity", "first_hit_time",
    "fit_sample_exponent", "generator_apply", "integrate_support_ode",
    "integrate_trajectory", "lyapunov_feedback", "lyapunov_qsr", "noise_gain",
    "operators", "parse_config", "pauli", "preset_config",
    "project_to_physical", "random_density", "reference_curve",
    "run_campaign", "run_reachability_demo", "smoothing_f", "theta_u",
    "wiener_increments", "write_outputs",
]
