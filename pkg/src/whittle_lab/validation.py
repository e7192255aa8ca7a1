"""Input validation helpers used at public entry points."""

from __future__ import annotations

import numpy as np

from .core import BanditModel, MultiArmModel, validate
from .exceptions import ModelValidationError


def check_model(model) -> BanditModel:
    """Coerce ``model`` to a :class:`BanditModel` and raise if it is invalid."""
    if isinstance(model, dict):
        model = BanditModel.from_dict(model)
    if not isinstance(model, BanditModel):
        raise TypeError(f"expected a BanditModel, got {type(model).__name__}")
    problems = validate(model)
    if problems:
        raise ModelValidationError(problems)
    return model


def check_multi(multi, budget=None) -> MultiArmModel:
    if isinstance(multi, MultiArmModel):
        for arm in multi.arms:
            check_model(arm)
        return multi
    arms = [check_model(a) for a in multi]
    if budget is None:
        raise ValueError("budget m is required when passing a list of arms")
    return MultiArmModel(tuple(arms), int(budget))


def check_policy(g, num_states: int) -> np.ndarray:
    """Return ``g`` as an int8 0/1 vector of length ``num_states``."""
    arr = np.asarray(g)
    if arr.shape != (num_states,):
        raise ValueError(f"policy has shape {arr.shape}, expected ({num_states},)")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("policy entries must be 0 (passive) or 1 (active)")
    return arr.astype(np.int8)


def check_distribution(pi, num_states: int, tol: float = 1e-9) -> np.ndarray:
    arr = np.asarray(pi, dtype=float)
    if arr.shape != (num_states,):
        raise ValueError(f"distribution has shape {arr.shape}, expected ({num_states},)")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > tol:
        raise ValueError("distribution must be non-negative and sum to 1")
    return arr


def check_states(states, sizes) -> np.ndarray:
    """Validate a ``(S, n)`` or ``(n,)`` array of 0-based arm states; always returns 2-D."""
    arr = np.atleast_2d(np.asarray(states))
    if arr.shape[1] != len(sizes):
        raise ValueError(f"expected {len(sizes)} arm states per row, got {arr.shape[1]}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ValueError("states must be integers")
        arr = arr.astype(np.int64)
    if np.any(arr < 0) or np.any(arr >= np.asarray(sizes)):
        raise ValueError("state out of range")
    return arr
