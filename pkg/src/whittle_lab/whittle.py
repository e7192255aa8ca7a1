"""Whittle index computation.

:func:`compute_whittle` builds the nested passive sets from the empty set up.
At every step it tries adding each remaining state to the current passive set,
and it measures the activation penalty at which the enlarged set becomes as
good as the current one. The smallest such penalty is the next index value.
Every state that attains it joins the passive set together.

:func:`adaptive_greedy_pcl` is the classical one-state-at-a-time variant that
aggregates over a start distribution; it is only guaranteed correct for
PCL-indexable arms. :func:`whittle_oracle` is the slow bisection reference.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import BanditModel
from .exceptions import NonIndexableError
from .mdp import passive_policy, policy_eval, policy_eval_batch, solve_lambda

MAX_DOUBLINGS = 60


def n_tolerance(*n_vectors) -> float:
    return 1e-9 * (1.0 + max(float(np.max(np.abs(v))) for v in n_vectors))


def mu_tolerance(lam: float) -> float:
    return 1e-8 * (1.0 + abs(lam))


@dataclass
class Candidate:
    """Evaluation of one augmented passive set ``P_d + {y}``."""

    state: int
    policy: np.ndarray
    d: np.ndarray
    n: np.ndarray
    support: tuple  # states where N changes (Lambda_{d,y}); empty for scalar variants
    mu: np.ndarray  # per-state ratio, nan off the support; 1-element for scalar variants
    mu_star: float | None

    @property
    def spread(self) -> float:
        finite = self.mu[np.isfinite(self.mu)]
        return float(finite.max() - finite.min()) if finite.size else 0.0


@dataclass
class GreedyStep:
    d: int
    passive_before: tuple
    base_policy: np.ndarray
    base_d: np.ndarray
    base_n: np.ndarray
    candidates: dict
    chosen: tuple
    lambda_next: float

    @property
    def spread(self) -> float:
        return max(self.candidates[y].spread for y in self.chosen)


@dataclass
class WhittleTable:
    """Per-state index ``index``, the sorted distinct values, and the nested passive sets."""

    index: np.ndarray
    distinct: np.ndarray
    sets: list
    method: str = "general"
    steps: list = field(default_factory=list, repr=False)

    @property
    def group(self) -> np.ndarray:
        """1-based step at which each state entered the passive set."""
        grp = np.zeros(len(self.index), dtype=int)
        prev = set()
        for d, s in enumerate(self.sets, start=1):
            for x in set(s) - prev:
                grp[x] = d
            prev = set(s)
        return grp

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "index": [float(v) for v in self.index],
            "distinct": [float(v) for v in self.distinct],
            "sets": [[x + 1 for x in sorted(s)] for s in self.sets],
            "group": self.group.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state", "index", "group"])
        for x, (v, g) in enumerate(zip(self.index, self.group), start=1):
            w.writerow([x, repr(float(v)), int(g)])
        return buf.getvalue()


def index_bounds(model: BanditModel) -> tuple[float, float]:
    """Penalties at which the optimal policy is all-active and all-passive respectively."""
    k = model.num_states
    start = (1.0 + model.max_abs_cost) / (1.0 - model.discount)
    lo, hi = -start, start
    for _ in range(MAX_DOUBLINGS):
        if solve_lambda(model, lo).policy.sum() == k:
            break
        lo *= 2.0
    else:
        raise NonIndexableError(f"no all-active penalty found down to {lo:g}; model malformed?")
    for _ in range(MAX_DOUBLINGS):
        if solve_lambda(model, hi).policy.sum() == 0:
            break
        hi *= 2.0
    else:
        raise NonIndexableError(f"no all-passive penalty found up to {hi:g}; model malformed?")
    return lo, hi


def greedy_loop(num_states, evaluate, method="general"):
    """Shared driver for the set-growing index algorithms.

    ``evaluate(passive, y)`` returns a :class:`Candidate` for ``passive + {y}``
    and is also called with ``y=None`` to evaluate the base policy.
    """
    passive: set = set()
    index = np.full(num_states, np.nan)
    distinct, sets, steps = [], [], []
    d = 0
    while len(passive) < num_states:
        base = evaluate(frozenset(passive), None)
        cands = {y: evaluate(frozenset(passive), y) for y in range(num_states) if y not in passive}
        valid = {y: c.mu_star for y, c in cands.items() if c.mu_star is not None}
        if not valid:
            raise NonIndexableError(
                f"step {d}: no candidate changes the activation measure; "
                "the arm is non-indexable or degenerate",
                witness={"step": d, "passive": sorted(passive)})
        lam = min(valid.values())
        chosen = tuple(sorted(y for y, v in valid.items() if v <= lam + mu_tolerance(lam)))
        if distinct and lam <= distinct[-1]:
            if lam < distinct[-1] - mu_tolerance(distinct[-1]):
                raise NonIndexableError(
                    f"step {d}: index {lam:.10g} is below the previous value {distinct[-1]:.10g}; "
                    "indexability violated",
                    witness={"step": d, "states": list(chosen), "lambda": lam,
                             "previous": distinct[-1]})
            # numerically equal to the previous value: same group
            lam = distinct[-1]
            distinct.pop()
            sets.pop()
        steps.append(GreedyStep(d=d, passive_before=tuple(sorted(passive)), base_policy=base.policy,
                                base_d=base.d, base_n=base.n, candidates=cands, chosen=chosen,
                                lambda_next=lam))
        passive.update(chosen)
        index[list(chosen)] = lam
        distinct.append(lam)
        sets.append(frozenset(passive))
        d += 1
    for s_idx, s in enumerate(sets):
        for x in s:
            if s_idx == 0 or x not in sets[s_idx - 1]:
                index[x] = distinct[s_idx]
    return WhittleTable(index=index, distinct=np.array(distinct), sets=sets, method=method,
                        steps=steps)


def _general_evaluator(model: BanditModel):
    k = model.num_states
    cache = {}

    def evaluate_set(s):
        if s not in cache:
            g = passive_policy(k, s)
            ev = policy_eval(model, g)
            cache[s] = (g, ev.d, ev.n)
        return cache[s]

    def evaluate(passive, y):
        g0, d0, n0 = evaluate_set(passive)
        if y is None:
            return Candidate(-1, g0, d0, n0, (), np.full(k, np.nan), None)
        g1, d1, n1 = evaluate_set(passive | {y})
        dn = n0 - n1
        support = np.abs(dn) > n_tolerance(n0, n1)
        mu = np.full(k, np.nan)
        mu[support] = (d1[support] - d0[support]) / dn[support]
        mu_star = float(mu[support].min()) if support.any() else None
        return Candidate(y, g1, d1, n1, tuple(np.flatnonzero(support)), mu, mu_star)

    return evaluate


def compute_whittle(model: BanditModel) -> WhittleTable:
    """Whittle indices of every state of an indexable arm.

    Raises :class:`NonIndexableError` when the construction breaks down, which
    cannot happen for an indexable arm.
    """
    return greedy_loop(model.num_states, _general_evaluator(model), method="general")


def _bisect_flip(model, x, grid, col, tol):
    changes = np.flatnonzero(np.diff(col) != 0)
    if len(changes) != 1 or col[0] != 1:
        raise NonIndexableError(
            f"state {x + 1}: optimal action changes {len(changes) + (col[0] != 1)} times "
            "on the pre-scan grid",
            witness={"state": x, "lambdas": grid[changes + 1].tolist()})
    a, b = grid[changes[0]], grid[changes[0] + 1]
    while b - a > tol:
        mid = 0.5 * (a + b)
        # exact sign of the Q-gap: the tie tolerance would shift the flip by eps / slope
        H = solve_lambda(model, mid).q_values
        if H[x, 1] <= H[x, 0]:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def whittle_oracle_all(model: BanditModel, tol: float = 1e-6, bounds=None,
                       prescan: int = 128) -> np.ndarray:
    """Bisection reference for every state, sharing one pre-scan of the penalty window."""
    lo, hi = index_bounds(model) if bounds is None else bounds
    grid = np.linspace(lo, hi, prescan)
    G = np.array([solve_lambda(model, lam).policy for lam in grid])
    return np.array([_bisect_flip(model, x, grid, G[:, x], tol)
                     for x in range(model.num_states)])


def whittle_oracle(model: BanditModel, x: int, tol: float = 1e-6, bounds=None) -> float:
    """Bisection on the penalty for the point where state ``x`` turns passive.

    A 128-point pre-scan must show exactly one active-to-passive switch,
    otherwise the state violates indexability.
    """
    lo, hi = index_bounds(model) if bounds is None else bounds
    grid = np.linspace(lo, hi, 128)
    col = np.array([solve_lambda(model, lam).policy[x] for lam in grid])
    return _bisect_flip(model, x, grid, col, tol)


# -- classical adaptive greedy (PCL) -------------------------------------------------


@dataclass
class PCLStep:
    k: int
    passive_before: tuple
    mu: dict  # y -> aggregated ratio
    picked: int
    value: float


@dataclass
class PCLResult:
    index: np.ndarray
    order: list
    steps: list
    monotone: bool
    failure: dict | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None and self.monotone


def _mask_policies(k):
    masks = np.arange(2 ** k)
    bits = (masks[:, None] >> np.arange(k)[None, :]) & 1
    return (1 - bits).astype(np.int8)  # bit x set means x is passive


def _aggregate(model, pi0, policies):
    D, N = policy_eval_batch(model, policies)
    return D @ pi0, N @ pi0, N


def adaptive_greedy_pcl(model: BanditModel, pi0=None) -> PCLResult:
    """One state per step, aggregated over ``pi0``; lowest state index wins argmin ties.

    A non-positive aggregated activation difference stops the run and is
    reported as a failure of the first PCL condition.
    """
    k = model.num_states
    pi0 = np.full(k, 1.0 / k) if pi0 is None else np.asarray(pi0, dtype=float)
    passive: list = []
    index = np.full(k, np.nan)
    steps = []
    cache = {}

    def agg(s):
        key = frozenset(s)
        if key not in cache:
            g = passive_policy(k, key)
            ev = policy_eval(model, g)
            cache[key] = (g, float(ev.d @ pi0), float(ev.n @ pi0))
        return cache[key]

    for step in range(k):
        g0, D0, N0 = agg(passive)
        mu = {}
        for y in range(k):
            if y in passive:
                continue
            g1, D1, N1 = agg(passive + [y])
            den = N0 - N1
            if den <= 1e-9 * (1.0 + max(abs(N0), abs(N1))):
                failure = {"passive": [x + 1 for x in sorted(passive)], "y": y + 1,
                           "g": g0.tolist(), "h": g1.tolist(), "N_g": N0, "N_h": N1}
                return PCLResult(index, passive, steps, _nondecreasing(index[passive]), failure)
            mu[y] = (D1 - D0) / den
        value = min(mu.values())
        picked = min(y for y, v in mu.items() if v == value)
        steps.append(PCLStep(step, tuple(passive), mu, picked, value))
        index[picked] = value
        passive.append(picked)
    return PCLResult(index, passive, steps, _nondecreasing(index[passive]))


def _nondecreasing(seq) -> bool:
    seq = np.asarray(seq)
    return bool(np.all(np.diff(seq) >= -mu_tolerance(float(np.max(np.abs(seq), initial=0.0)))))


@dataclass
class PCLCheck:
    ok: bool
    condition1: bool
    condition2: bool
    scope: str  # "exact" or "partial"
    witnesses: list
    greedy: PCLResult

    @property
    def witness(self):
        return self.witnesses[0] if self.witnesses else None

    def to_dict(self) -> dict:
        return {"pcl_indexable": self.ok, "condition1": self.condition1,
                "condition2": self.condition2, "scope": self.scope,
                "witness": self.witness, "n_violations": len(self.witnesses)}


def check_pcl(model: BanditModel, pi0=None, k_cap: int = 10) -> PCLCheck:
    """Check both PCL conditions.

    Condition 1 quantifies over every subset, so it is checked exhaustively only
    when ``K <= k_cap``; otherwise only along the adaptive-greedy trajectory and
    the result is labelled ``partial``. Witnesses are listed by subset size, then
    lexicographically, with 1-based state labels.
    """
    k = model.num_states
    pi0 = np.full(k, 1.0 / k) if pi0 is None else np.asarray(pi0, dtype=float)
    greedy = adaptive_greedy_pcl(model, pi0)
    witnesses = []
    if k <= k_cap:
        scope = "exact"
        pols = _mask_policies(k)
        _, Nagg, _ = _aggregate(model, pi0, pols)
        masks = sorted(range(2 ** k), key=lambda m: (bin(m).count("1"),
                                                      [x for x in range(k) if m >> x & 1]))
        for m in masks:
            for y in range(k):
                if m >> y & 1:
                    continue
                m2 = m | (1 << y)
                den = Nagg[m] - Nagg[m2]
                if den <= 1e-9 * (1.0 + max(abs(Nagg[m]), abs(Nagg[m2]))):
                    witnesses.append({
                        "passive": [x + 1 for x in range(k) if m >> x & 1], "y": y + 1,
                        "g": pols[m].tolist(), "h": pols[m2].tolist(),
                        "N_g": float(Nagg[m]), "N_h": float(Nagg[m2])})
    else:
        scope = "partial"
        if greedy.failure is not None:
            witnesses.append(greedy.failure)
    cond1 = not witnesses
    cond2 = greedy.failure is None and greedy.monotone
    return PCLCheck(ok=cond1 and cond2, condition1=cond1, condition2=cond2, scope=scope,
                    witnesses=witnesses, greedy=greedy)


def table_from_indices(index, method="oracle", tol=0.0) -> WhittleTable:
    """Group a plain index vector into a :class:`WhittleTable` (values within ``tol`` merge)."""
    index = np.asarray(index, dtype=float)
    order = np.argsort(index, kind="stable")
    distinct, sets, current = [], [], set()
    for x in order:
        v = index[x]
        if distinct and v - distinct[-1] <= tol:
            current.add(int(x))
            sets[-1] = frozenset(current)
            continue
        distinct.append(float(v))
        current.add(int(x))
        sets.append(frozenset(current))
    out = index.copy()
    for i, s in enumerate(sets):
        for x in s - (sets[i - 1] if i else frozenset()):
            out[x] = distinct[i]
    return WhittleTable(index=out, distinct=np.array(distinct), sets=sets, method=method)

