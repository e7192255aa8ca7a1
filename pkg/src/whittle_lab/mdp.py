"""Exact solver for the penalized single-arm MDP and exact policy evaluation.

All value-like quantities carry the ``(1 - beta)`` normalization, so the
activation measure ``N`` of any policy lies in ``[0, 1]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import BanditModel


@dataclass(frozen=True, eq=False)
class PolicyEval:
    """Discounted cost ``d`` and activation measure ``n`` of a fixed policy, per start state."""

    d: np.ndarray
    n: np.ndarray


@dataclass(frozen=True, eq=False)
class LambdaSolution:
    value: np.ndarray
    policy: np.ndarray
    penalty: float
    q_values: np.ndarray  # (K, 2): H(x, 0), H(x, 1)
    iterations: int


def passive_policy(num_states: int, passive) -> np.ndarray:
    """Policy that is passive on ``passive`` and active elsewhere."""
    g = np.ones(num_states, dtype=np.int8)
    g[list(passive)] = 0
    return g


def all_policies(num_states: int) -> np.ndarray:
    """Every deterministic policy as rows of a ``(2**K, K)`` array, in binary counting order."""
    return np.array(list(itertools.product((0, 1), repeat=num_states)), dtype=np.int8)


def _policy_system(model: BanditModel, g: np.ndarray):
    P = np.where(g[:, None] == 1, model.p_active, model.p_passive)
    c = np.where(g == 1, model.cost_active, model.cost_passive)
    return np.eye(model.num_states) - model.discount * P, c


def policy_eval(model: BanditModel, g) -> PolicyEval:
    """Solve ``(I - beta P_g) [d n] = (1 - beta) [c_g g]`` for one policy."""
    g = np.asarray(g, dtype=np.int8)
    if g.shape != (model.num_states,):
        raise ValueError(f"policy has shape {g.shape}, expected ({model.num_states},)")
    A, c = _policy_system(model, g)
    rhs = (1.0 - model.discount) * np.column_stack([c, g.astype(float)])
    sol = np.linalg.solve(A, rhs)
    return PolicyEval(d=sol[:, 0], n=sol[:, 1])


def policy_eval_batch(model: BanditModel, policies) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a stack of policies at once; returns ``(D, N)`` each of shape ``(len(policies), K)``."""
    G = np.asarray(policies, dtype=np.int8)
    k = model.num_states
    P = np.where(G[:, :, None] == 1, model.p_active[None], model.p_passive[None])
    A = np.eye(k)[None] - model.discount * P
    c = np.where(G == 1, model.cost_active[None], model.cost_passive[None])
    rhs = (1.0 - model.discount) * np.stack([c, G.astype(float)], axis=-1)
    sol = np.linalg.solve(A, rhs)
    return sol[..., 0], sol[..., 1]


def j_value(ev: PolicyEval, lam: float) -> np.ndarray:
    return ev.d + lam * ev.n


def tie_tolerance(model: BanditModel, lam: float) -> float:
    return 1e-9 * (1.0 + abs(lam)) * (1.0 + model.max_abs_cost)


def q_values(model: BanditModel, value: np.ndarray, lam: float) -> np.ndarray:
    """``H(x, a) = (1 - beta) c_lam(x, a) + beta P(a)_x . V`` as a ``(K, 2)`` array."""
    beta = model.discount
    cont = np.column_stack([model.p_passive @ value, model.p_active @ value])
    return (1.0 - beta) * model.penalized_costs(lam) + beta * cont


def greedy_policy(H: np.ndarray, eps: float) -> np.ndarray:
    """Active wherever ``H(x, 1) <= H(x, 0) + eps``; ties go to the active action."""
    return (H[:, 1] <= H[:, 0] + eps).astype(np.int8)


def solve_lambda(model: BanditModel, lam: float, max_iter: int | None = None) -> LambdaSolution:
    """Policy iteration for the arm with activation penalty ``lam``.

    Starts from the all-active policy. Each sweep evaluates the current policy
    exactly and improves greedily with the active-on-tie rule, stopping once the
    policy is unchanged.
    """
    k = model.num_states
    eps = tie_tolerance(model, lam)
    if max_iter is None:
        max_iter = 10 * k + 100
    g = np.ones(k, dtype=np.int8)
    for it in range(1, max_iter + 1):
        ev = policy_eval(model, g)
        value = j_value(ev, lam)
        H = q_values(model, value, lam)
        g_new = greedy_policy(H, eps)
        if np.array_equal(g_new, g):
            break
        g = g_new
    return LambdaSolution(value=value, policy=g, penalty=float(lam), q_values=H, iterations=it)
