"""Finite-time thermodynamics of an autonomous demon/tape information machine."""

__version__ = "0.1.0"

from .cycle import (Mode, Observables, classify_mode, demon_update_map, observables,
                    observables_curve, periodic_steady_state, relaxation_decay)
from .estimator import DemonTapeMachine
from .markov import (build_rate_matrix, eigen_spectrum, propagate,
                     stationary_distribution)
from .params import ParameterError, Params
from .performance import (efficiency_bounds, emp_curve, onset_time, optimal_time,
                          peak_criterion, perf_metrics, theta_series, tradeoff_bound)

__all__ = [
    "DemonTapeMachine", "Mode", "Observables", "ParameterError", "Params",
    "build_rate_matrix", "classify_mode", "demon_update_map", "efficiency_bounds",
    "eigen_spectrum", "emp_curve", "observables", "observables_curve", "onset_time",
    "optimal_time", "peak_criterion", "perf_metrics", "periodic_steady_state",
    "propagate", "relaxation_decay", "stationary_distribution", "theta_series",
    "tradeoff_bound",
]
