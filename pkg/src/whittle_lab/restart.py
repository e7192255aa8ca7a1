"""Fast aggregated cost/activation evaluation for arms whose active action restarts the chain.

When every active row equals the same distribution ``Q``, the process
regenerates at each activation. The ``Q``-averaged discounted cost and
activation measure of a policy then follow from quantities of one renewal
cycle. Those quantities only need a linear solve on the passive block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BanditModel, is_restart
from .exceptions import NonIndexableError
from .whittle import Candidate, WhittleTable, greedy_loop
from .mdp import passive_policy


@dataclass(frozen=True)
class RenewalEval:
    l: float  # discounted cost until (and including) the first activation, start ~ Q
    m: float  # discounted time until the first activation, in [1, 1/(1-beta)]
    d_agg: float
    n_agg: float


def _restart_row(model: BanditModel, q):
    if q is not None:
        return np.asarray(q, dtype=float)
    q = is_restart(model)
    if q is None:
        raise ValueError("model is not a controlled-restart arm: active rows differ")
    return q


def hitting_lm(model: BanditModel, g, q=None) -> tuple[float, float]:
    """Discounted cost and discounted time up to hitting the active set of ``g``."""
    q = _restart_row(model, q)
    g = np.asarray(g)
    beta = model.discount
    pas = np.flatnonzero(g == 0)
    act = np.flatnonzero(g == 1)
    c1 = model.cost_active[act]
    l = float(q[act] @ c1)
    m = float(q[act].sum())
    if pas.size:
        P = model.p_passive
        A = np.eye(pas.size) - beta * P[np.ix_(pas, pas)]
        exit_ = beta * P[np.ix_(pas, act)]
        rhs = np.column_stack([model.cost_passive[pas] + exit_ @ c1,
                               1.0 + exit_.sum(axis=1)])
        sol = np.linalg.solve(A, rhs)
        l += float(q[pas] @ sol[:, 0])
        m += float(q[pas] @ sol[:, 1])
    return l, m


def restart_dn(model: BanditModel, g, q=None) -> RenewalEval:
    beta = model.discount
    l, m = hitting_lm(model, g, q)
    return RenewalEval(l=l, m=m, d_agg=l / m, n_agg=1.0 / (beta * m) - (1.0 - beta) / beta)


def _restart_evaluator(model: BanditModel, q):
    k = model.num_states
    cache = {}

    def evaluate_set(s):
        if s not in cache:
            g = passive_policy(k, s)
            ev = restart_dn(model, g, q)
            cache[s] = (g, ev.d_agg, ev.n_agg)
        return cache[s]

    def evaluate(passive, y):
        g0, d0, n0 = evaluate_set(passive)
        if y is None:
            return Candidate(-1, g0, np.array([d0]), np.array([n0]), (), np.full(1, np.nan), None)
        g1, d1, n1 = evaluate_set(passive | {y})
        den = n0 - n1
        mu = np.full(1, np.nan)
        mu_star = None
        if den > 1e-9 * (1.0 + max(abs(n0), abs(n1))):
            mu_star = (d1 - d0) / den
            mu[0] = mu_star
        return Candidate(y, g1, np.array([d1]), np.array([n1]), (), mu, mu_star)

    return evaluate


def compute_whittle_restart(model: BanditModel, q=None) -> WhittleTable:
    """Greedy index construction using the scalar ``Q``-aggregated ratio per candidate.

    Raises :class:`NonIndexableError` when no remaining candidate changes the
    aggregated activation measure, e.g. when states are unreachable from ``Q``.
    """
    q = _restart_row(model, q)
    try:
        return greedy_loop(model.num_states, _restart_evaluator(model, q), method="restart")
    except NonIndexableError as exc:
        raise NonIndexableError(f"restart path degenerate: {exc}", exc.witness) from exc
