"""scikit-learn style front end.

The machine is configured by its constructor arguments; ``fit`` resolves and
validates them and caches the generator.  ``transform`` maps a column of
interaction times to the per-interval observables and ``predict`` to the
operating mode, so the model can sit inside pipelines and parameter grids.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import cycle, markov, performance
from .params import Params

OBSERVABLE_COLUMNS = ("delta_prime", "theta", "dQ", "dSB", "sigma_tau",
                      "dkl_inst", "dkl_asymp")


def check_durations(X) -> np.ndarray:
    """Validate a column (or flat array) of interaction times."""
    X = np.asarray(X)
    if X.ndim == 2 and X.shape[1] != 1:
        raise ValueError(f"expected a single column of durations, got shape {X.shape}")
    taus = check_array(X.reshape(-1, 1), dtype=np.float64).ravel()
    if np.any(taus <= 0):
        raise ValueError("interaction times must be positive")
    return taus


class DemonTapeMachine(TransformerMixin, BaseEstimator):
    """Demon/tape machine in its periodic steady state.

    Parameters
    ----------
    omega : float, default=0.5
        Cold-bath bias.
    sigma, epsilon : float, optional
        Hot-bath bias or thermal bias; give exactly one.
    gamma : float, default=1.0
        Demon intrinsic rate.
    delta, p0 : float, optional
        Incoming bit bias or probability of a 0; at most one (default delta=0).

    Attributes
    ----------
    params_ : Params
    rate_matrix_ : ndarray of shape (4, 4)
    spectrum_ : Spectrum
    stationary_ : ndarray of shape (4,)
    n_features_in_ : int
    """

    def __init__(self, omega=0.5, sigma=None, epsilon=None, gamma=1.0, delta=None, p0=None):
        self.omega = omega
        self.sigma = sigma
        self.epsilon = epsilon
        self.gamma = gamma
        self.delta = delta
        self.p0 = p0

    def fit(self, X=None, y=None):
        self.params_ = Params.resolve(omega=self.omega, sigma=self.sigma,
                                      epsilon=self.epsilon, gamma=self.gamma,
                                      delta=self.delta, p0=self.p0)
        self.rate_matrix_ = markov.build_rate_matrix(self.params_)
        self.spectrum_ = markov.eigen_spectrum(self.rate_matrix_)
        self.stationary_ = markov.stationary_distribution(self.rate_matrix_)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self)
        c = cycle.curve_arrays(self.params_, check_durations(X))
        return np.column_stack([c[k] for k in OBSERVABLE_COLUMNS])

    def predict(self, X):
        """Operating mode at each interaction time."""
        check_is_fitted(self)
        c = cycle.curve_arrays(self.params_, check_durations(X))
        return np.array([m.value for m in cycle.modes(c["dQ"], c["dSB"])], dtype=object)

    def get_feature_names_out(self, input_features=None):
        return np.array(OBSERVABLE_COLUMNS, dtype=object)

    def observables(self, X) -> list:
        check_is_fitted(self)
        return cycle.observables_curve(self.params_, check_durations(X))

    def optimal_time(self):
        check_is_fitted(self)
        return performance.optimal_time(self.params_)
