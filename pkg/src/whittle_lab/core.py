"""Domain types for a single restless arm and for a multi-armed instance.

States are 0-based everywhere inside the library. Files and reports written
for humans use 1-based labels; the conversion happens at the I/O boundary
(:func:`load_model`, :func:`save_model` and the CLI writers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ModelValidationError

ROW_SUM_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BanditModel:
    """One restless arm.

    Parameters
    ----------
    p_passive, p_active : (K, K) array_like
        Row-stochastic transition matrices under the passive (0) and
        active (1) action.
    cost_passive, cost_active : (K,) array_like
        Per-step costs ``c(x, 0)`` and ``c(x, 1)``.
    discount : float
        Discount factor, strictly inside (0, 1).

    Construction never raises on bad numbers so that :func:`validate` can
    report every problem at once; use :func:`whittle_lab.validation.check_model`
    to get an exception instead.
    """

    p_passive: np.ndarray
    p_active: np.ndarray
    cost_passive: np.ndarray
    cost_active: np.ndarray
    discount: float

    def __post_init__(self):
        for name in ("p_passive", "p_active", "cost_passive", "cost_active"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def num_states(self) -> int:
        return int(self.cost_passive.shape[0])

    @property
    def transitions(self) -> np.ndarray:
        """Stacked ``(2, K, K)`` array indexed by action."""
        return np.stack([self.p_passive, self.p_active])

    @property
    def costs(self) -> np.ndarray:
        """``(K, 2)`` cost table with columns for the passive and active action."""
        return np.column_stack([self.cost_passive, self.cost_active])

    @property
    def max_abs_cost(self) -> float:
        return float(np.max(np.abs(self.costs))) if self.num_states else 0.0

    def penalized_costs(self, lam: float) -> np.ndarray:
        """Cost table with ``lam`` added to every active entry."""
        c = self.costs.copy()
        c[:, 1] += lam
        return c

    def scaled(self, factor: float) -> "BanditModel":
        return BanditModel(self.p_passive, self.p_active, factor * self.cost_passive,
                           factor * self.cost_active, self.discount)

    def to_dict(self) -> dict:
        return {
            "beta": self.discount,
            "P0": self.p_passive.tolist(),
            "P1": self.p_active.tolist(),
            "cost_passive": self.cost_passive.tolist(),
            "cost_active": self.cost_active.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BanditModel":
        missing = [k for k in ("beta", "P0", "P1", "cost_passive", "cost_active") if k not in data]
        if missing:
            raise ModelValidationError([f"missing field {k!r}" for k in missing])
        return cls(data["P0"], data["P1"], data["cost_passive"], data["cost_active"], data["beta"])


@dataclass(frozen=True, eq=False)
class MultiArmModel:
    """``n`` independent arms sharing a discount factor, ``m`` of which are activated per step."""

    arms: tuple
    budget: int
    discount: float = field(init=False)

    def __post_init__(self):
        arms = tuple(self.arms)
        object.__setattr__(self, "arms", arms)
        problems = []
        if not arms:
            problems.append("a multi-armed model needs at least one arm")
        else:
            betas = {a.discount for a in arms}
            if len(betas) > 1:
                problems.append(f"arms use different discount factors {sorted(betas)}")
        if not 1 <= self.budget < len(arms):
            problems.append(f"budget m={self.budget} must satisfy 1 <= m < n={len(arms)}")
        if problems:
            raise ModelValidationError(problems)
        object.__setattr__(self, "discount", arms[0].discount)

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def sizes(self) -> tuple:
        return tuple(a.num_states for a in self.arms)


def validate(model: BanditModel, tol: float = ROW_SUM_TOL) -> list[str]:
    """Return the list of violated invariants; an empty list means the model is valid."""
    problems = []
    k = model.cost_passive.shape[0] if model.cost_passive.ndim == 1 else -1
    if k <= 0:
        problems.append("cost_passive must be a non-empty vector")
    if model.cost_active.shape != model.cost_passive.shape:
        problems.append(
            f"cost_active has shape {model.cost_active.shape}, expected {model.cost_passive.shape}")
    for name, label in (("cost_passive", "c(.,0)"), ("cost_active", "c(.,1)")):
        c = getattr(model, name)
        bad = np.flatnonzero(~np.isfinite(c)) if c.ndim == 1 else []
        for x in bad:
            problems.append(f"non-finite cost {label} at state {x + 1}")
    for name, label in (("p_passive", "P0"), ("p_active", "P1")):
        p = getattr(model, name)
        if k > 0 and p.shape != (k, k):
            problems.append(f"{label} has shape {p.shape}, expected ({k}, {k})")
            continue
        if not np.all(np.isfinite(p)):
            problems.append(f"{label} contains non-finite entries")
            continue
        for x in range(p.shape[0]):
            if np.any(p[x] < 0):
                problems.append(f"{label} row {x + 1} has negative entries")
            s = p[x].sum()
            if abs(s - 1.0) > tol:
                problems.append(f"{label} row {x + 1} sums to {s:.12g}, not 1")
    if not (0.0 < model.discount < 1.0):
        problems.append(f"discount out of range: beta={model.discount} must lie in (0, 1)")
    return problems


def is_restart(model: BanditModel, tol: float = 1e-9) -> np.ndarray | None:
    """Return the common active row ``Q`` if every active row agrees with the first within ``tol``."""
    p1 = model.p_active
    if np.all(np.abs(p1 - p1[0]) <= tol):
        return p1[0].copy()
    return None


def load_model(path) -> BanditModel:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelValidationError([f"{path}: invalid JSON ({exc})"]) from exc
    return BanditModel.from_dict(data)


def save_model(model: BanditModel, path, **extra) -> None:
    data = model.to_dict()
    data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
