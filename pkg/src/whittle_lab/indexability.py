"""Passive sets, direct indexability verification and sufficient-condition checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BanditModel
from .mdp import all_policies, policy_eval_batch, solve_lambda

K_CAP = 10
HOLDS, FAILS, SKIPPED = "holds", "fails", "skipped"


@dataclass(frozen=True)
class PassiveSnapshot:
    penalty: float
    passive: frozenset


def passive_set(model: BanditModel, lam: float) -> PassiveSnapshot:
    g = solve_lambda(model, lam).policy
    return PassiveSnapshot(float(lam), frozenset(int(x) for x in np.flatnonzero(g == 0)))


@dataclass(frozen=True)
class NestingViolation:
    lam_low: float
    lam_high: float
    state: int  # 0-based

    def to_dict(self) -> dict:
        return {"lambda_low": self.lam_low, "lambda_high": self.lam_high, "state": self.state + 1}


def verify_nesting(model: BanditModel, grid) -> NestingViolation | None:
    """Return ``None`` if passive sets grow along ``grid``, else the first state that leaves."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("penalty grid must be sorted ascending")
    prev = None
    for lam in grid:
        snap = passive_set(model, lam)
        if prev is not None:
            lost = prev.passive - snap.passive
            if lost:
                return NestingViolation(prev.penalty, snap.penalty, min(lost))
        prev = snap
    return None


def default_grid(model: BanditModel, points: int = 1001) -> np.ndarray:
    from .whittle import index_bounds
    lo, hi = index_bounds(model)
    return np.linspace(lo, hi, points)


@dataclass
class ConditionResult:
    status: str
    lhs: float | None = None
    bound: float | None = None
    witness: dict | None = None
    conservative: bool = False

    def to_dict(self) -> dict:
        return {"status": self.status, "lhs": self.lhs, "bound": self.bound,
                "witness": self.witness, "conservative": self.conservative}


@dataclass
class ConditionReport:
    thm1a: ConditionResult | None = None
    thm1b: ConditionResult | None = None
    props: dict = field(default_factory=dict)  # "a".."d" -> ConditionResult

    def to_dict(self) -> dict:
        out = {}
        if self.thm1a is not None:
            out["thm1a"] = self.thm1a.to_dict()
        if self.thm1b is not None:
            out["thm1b"] = self.thm1b.to_dict()
        for key, res in sorted(self.props.items()):
            out[f"prop_{key}"] = res.to_dict()
        return out

    def any_holds(self) -> bool:
        parts = [self.thm1a, self.thm1b, *self.props.values()]
        return any(p is not None and p.status == HOLDS for p in parts)


def _pos(a):
    return np.maximum(a, 0.0)


def _pairwise_max(A: np.ndarray, B: np.ndarray, N: np.ndarray):
    """``max_{(g,h) in H} A[g] - B[h]`` per column, with ``H`` the pointwise N-dominance pairs.

    Returns the maximizing values and, per column, the arg (g, h) rows.
    """
    best = np.full(A.shape[1], -np.inf)
    arg_g = np.zeros(A.shape[1], dtype=int)
    arg_h = np.zeros(A.shape[1], dtype=int)
    tol = 1e-12
    for gi in range(N.shape[0]):
        dominated = np.all(N <= N[gi] + tol, axis=1)
        idx = np.flatnonzero(dominated)
        sub = B[idx]
        hmin = sub.argmin(axis=0)
        val = A[gi] - sub[hmin, np.arange(A.shape[1])]
        better = val > best
        best[better] = val[better]
        arg_g[better] = gi
        arg_h[better] = idx[hmin[better]]
    return best, arg_g, arg_h


def check_thm1(model: BanditModel, k_cap: int = K_CAP, conservative: bool = True) -> ConditionReport:
    """Check both pairwise sufficient conditions.

    For ``K <= k_cap`` every policy is enumerated and the quantifier over
    N-dominance pairs is applied literally. Above the cap the pair is replaced
    by the per-state extremes ``N_max`` and ``N_min`` when ``conservative`` is
    set. That test is stronger than the original, so its "fails" is not
    conclusive. With ``conservative=False`` the check is skipped.
    """
    k, beta = model.num_states, model.discount
    P0, P1 = model.p_passive, model.p_active
    # rows indexed by (x, z) pairs, flattened as x * K + z
    a_terms = _pos(beta * P1[None, :, :] - P1[:, None, :]).reshape(k * k, k)
    b_terms = _pos(P1[:, None, :] - beta * P1[None, :, :]).reshape(k * k, k)
    c_terms = _pos(P0 - P1)
    d_terms = _pos(P1 - P0)
    bound_a = (1 - beta) ** 2 / beta
    bound_b = (1 - beta) / beta
    report = ConditionReport()
    if k <= k_cap:
        pols = all_policies(k)
        _, N = policy_eval_batch(model, pols)
        va, ga, ha = _pairwise_max(N @ a_terms.T, N @ b_terms.T, N)
        vb, gb, hb = _pairwise_max(N @ c_terms.T, N @ d_terms.T, N)
        ja, jb = int(np.argmax(va)), int(np.argmax(vb))
        wa = {"x": ja // k + 1, "z": ja % k + 1, "g": pols[ga[ja]].tolist(),
              "h": pols[ha[ja]].tolist()}
        wb = {"x": jb + 1, "g": pols[gb[jb]].tolist(), "h": pols[hb[jb]].tolist()}
        report.thm1a = _verdict(float(va[ja]), bound_a, wa, False)
        report.thm1b = _verdict(float(vb[jb]), bound_b, wb, False)
    elif conservative:
        n_max, n_min = _extreme_n(model)
        va = a_terms @ n_max - b_terms @ n_min
        vb = c_terms @ n_max - d_terms @ n_min
        ja, jb = int(np.argmax(va)), int(np.argmax(vb))
        report.thm1a = _verdict(float(va[ja]), bound_a, {"x": ja // k + 1, "z": ja % k + 1}, True)
        report.thm1b = _verdict(float(vb[jb]), bound_b, {"x": jb + 1}, True)
    else:
        report.thm1a = ConditionResult(SKIPPED, bound=bound_a)
        report.thm1b = ConditionResult(SKIPPED, bound=bound_b)
    return report


def _verdict(lhs, bound, witness, conservative):
    holds = lhs <= bound + 1e-12
    return ConditionResult(HOLDS if holds else FAILS, lhs, bound,
                           None if holds else witness, conservative)


def _extreme_n(model: BanditModel):
    """Per-state max and min of N over all policies.

    The all-active policy attains the upper bound 1 and the all-passive policy
    the lower bound 0, so the conservative test coincides with the closed-form
    refinements.
    """
    k = model.num_states
    return np.ones(k), np.zeros(k)


def check_prop_refinements(model: BanditModel, restart_tol: float = 1e-9) -> ConditionReport:
    """The four closed-form refinements, each with its computed left-hand side."""
    k, beta = model.num_states, model.discount
    P0, P1 = model.p_passive, model.p_active
    report = ConditionReport()

    a_mat = _pos(beta * P1[None, :, :] - P1[:, None, :]).sum(axis=2)  # [x, z]
    x, z = np.unravel_index(int(np.argmax(a_mat)), a_mat.shape)
    report.props["a"] = _verdict(float(a_mat[x, z]), (1 - beta) ** 2 / beta,
                                 {"x": int(x) + 1, "z": int(z) + 1}, False)

    spread = np.abs(P1 - P1[0]).max(axis=1)
    worst = int(np.argmax(spread))
    b_lhs = float(spread[worst])
    holds_b = b_lhs <= restart_tol
    report.props["b"] = ConditionResult(HOLDS if holds_b else FAILS, b_lhs, 0.0,
                                        None if holds_b else {"row": worst + 1})

    c_rows = _pos(P0 - P1).sum(axis=1)
    xc = int(np.argmax(c_rows))
    report.props["c"] = _verdict(float(c_rows[xc]), (1 - beta) / beta, {"x": xc + 1}, False)

    report.props["d"] = _verdict(beta, 0.5, {"beta": beta}, False)
    return report


def full_report(model: BanditModel, k_cap: int = K_CAP, conservative: bool = True) -> ConditionReport:
    rep = check_thm1(model, k_cap, conservative)
    rep.props = check_prop_refinements(model).props
    return rep
