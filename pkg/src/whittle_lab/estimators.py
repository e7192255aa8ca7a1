"""scikit-learn style wrappers.

``WhittleIndex`` fits one arm and transforms states into index values. The
policy estimators fit a list of arms and predict feasible action vectors from
joint states, so they plug straight into :func:`whittle_lab.simulate.run_mc`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import is_restart
from .exceptions import NonIndexableError
from .monotone import whittle_threshold
from .restart import compute_whittle_restart
from .simulate import DEFAULT_BUDGET, myp_action, opt_policy, wip_action
from .validation import check_model, check_multi, check_states
from .whittle import compute_whittle, table_from_indices, whittle_oracle_all

METHODS = ("auto", "general", "restart", "threshold", "oracle")


def whittle_table(model, method: str = "auto", tol: float = 1e-6):
    """Dispatch to one of the index algorithms and return a ``WhittleTable``.

    ``auto`` takes the restart path when every active row is the same
    distribution and falls back to the general path if that path degenerates
    (for instance when some states cannot be reached from the restart
    distribution).
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if method == "auto":
        if is_restart(model) is not None:
            try:
                return compute_whittle_restart(model)
            except NonIndexableError:
                pass
        return compute_whittle(model)
    if method == "general":
        return compute_whittle(model)
    if method == "restart":
        return compute_whittle_restart(model)
    if method == "oracle":
        idx = whittle_oracle_all(model, tol=tol)
        return table_from_indices(idx, method="oracle", tol=2 * tol)
    table, report = whittle_threshold(model)
    if not report.certified:
        raise NonIndexableError("threshold formula not certified for this model",
                                witness=report.to_dict())
    return table


class WhittleIndex(TransformerMixin, BaseEstimator):
    """Whittle index of a single arm.

    Parameters
    ----------
    method : {"auto", "general", "restart", "threshold", "oracle"}
    tol : float
        Bisection width for the ``oracle`` method.

    Attributes
    ----------
    table_ : WhittleTable
    index_ : ndarray of shape (K,)
    """

    def __init__(self, method="auto", tol=1e-6):
        self.method = method
        self.tol = tol

    def fit(self, model, y=None):
        model = check_model(model)
        self.table_ = whittle_table(model, self.method, self.tol)
        self.index_ = self.table_.index
        self.n_states_ = model.num_states
        return self

    def transform(self, X):
        check_is_fitted(self, "index_")
        X = np.asarray(X)
        if np.any(X < 0) or np.any(X >= self.n_states_):
            raise ValueError("state out of range")
        return self.index_[X.astype(np.int64)]


class _ArmPolicy(BaseEstimator):
    def _fit_arms(self, arms):
        multi = check_multi(arms, self.m)
        if multi.budget != self.m:
            raise ValueError(f"estimator has m={self.m} but the model budget is {multi.budget}")
        self.multi_ = multi
        self.sizes_ = multi.sizes
        return multi

    def __call__(self, states):
        return self.predict(states)


class WhittleIndexPolicy(_ArmPolicy):
    """Activate the ``m`` arms whose current states have the largest Whittle index."""

    def __init__(self, m=1, method="auto"):
        self.m = m
        self.method = method

    def fit(self, arms, y=None):
        multi = self._fit_arms(arms)
        self.tables_ = [whittle_table(arm, self.method) for arm in multi.arms]
        self.indices_ = [t.index for t in self.tables_]
        return self

    def predict(self, states):
        check_is_fitted(self, "indices_")
        return wip_action(self.indices_, check_states(states, self.sizes_), self.m)


class MyopicPolicy(_ArmPolicy):
    """Activate the ``m`` arms with the smallest immediate cost increase."""

    def __init__(self, m=1):
        self.m = m

    def fit(self, arms, y=None):
        self._fit_arms(arms)
        return self

    def predict(self, states):
        check_is_fitted(self, "multi_")
        return myp_action(self.multi_.arms, check_states(states, self.sizes_), self.m)


class OptimalJointPolicy(_ArmPolicy):
    """Exact optimum of the joint problem by value iteration (small instances only)."""

    def __init__(self, m=1, budget=DEFAULT_BUDGET, tol=1e-10):
        self.m = m
        self.budget = budget
        self.tol = tol

    def fit(self, arms, y=None):
        multi = self._fit_arms(arms)
        self.policy_ = opt_policy(multi, self.budget, self.tol)
        return self

    def predict(self, states):
        check_is_fitted(self, "policy_")
        return self.policy_(check_states(states, self.sizes_))
