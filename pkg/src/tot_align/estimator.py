"""scikit-learn compatible wrapper around the temporal OT aligner."""

import warnings

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from ._validation import check_sequence
from .sinkhorn import SinkhornConfig, sinkhorn, tot_cost
from .transfer import alignment_loss, project


class TemporalOTAligner(TransformerMixin, BaseEstimator):
    """Align an acoustic sequence to a linguistic one with temporal-order-preserving OT.

    ``fit(X, Z)`` solves for the coupling between the rows of ``X`` (acoustic
    frames) and ``Z`` (linguistic tokens); ``transform(X)`` maps ``X`` into
    the linguistic space by barycentric projection.

    Parameters
    ----------
    beta : float, default=0.5
        Weight of the squared temporal distance added to the cosine cost.
    epsilon : float, default=0.5
        Entropic regularisation temperature.
    max_iter : int, default=10000
    tol : float, default=1e-9
        Stopping threshold on the L1 marginal violation.
    stabilized : bool or None, default=None
        Force (True) or forbid (False) the log-domain solver; None chooses by ``epsilon``.

    Attributes
    ----------
    coupling_ : Coupling
    cost_ : ndarray, shape (l_a, l_t)
    n_iter_ : int
    """

    def __init__(self, beta=0.5, epsilon=0.5, max_iter=10_000, tol=1e-9, stabilized=None):
        self.beta = beta
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.tol = tol
        self.stabilized = stabilized

    def _config(self):
        return SinkhornConfig(epsilon=self.epsilon, max_iterations=self.max_iter,
                              tolerance=self.tol, stabilized=self.stabilized)

    def fit(self, X, Z):
        X = check_sequence(X, "X")
        Z = check_sequence(Z, "Z")
        self.cost_ = tot_cost(X, Z, self.beta)
        self.coupling_ = sinkhorn(self.cost_, config=self._config())
        self.n_iter_ = self.coupling_.n_iter
        self.n_features_in_ = X.shape[1]
        if not self.coupling_.converged:
            warnings.warn(
                f"Sinkhorn stopped after {self.n_iter_} iterations with marginal "
                f"violation {self.coupling_.violation:.3g}",
                ConvergenceWarning,
            )
        return self

    def transform(self, X):
        check_is_fitted(self, "coupling_")
        return project(self.coupling_, X)

    def fit_transform(self, X, Z=None, **fit_params):
        return self.fit(X, Z).transform(X)

    def score(self, X, Z):
        """Negative alignment loss of the projected ``X`` against ``Z`` (higher is better)."""
        return -alignment_loss(self.transform(X), Z)
