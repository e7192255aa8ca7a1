"""Multi-armed policy execution and Monte-Carlo comparison.

Randomness: trajectory ``s`` draws a ``(T, n)`` block of uniforms from a
Philox4x64 counter-based generator keyed by
``SeedSequence(seed, spawn_key=(s,))``. Entry ``[t, i]`` drives arm ``i`` at
step ``t`` by inverse-CDF sampling of its transition row. Every policy sees the
same block, so comparisons use common random numbers. Estimates do not depend
on how trajectories are chunked or spread over threads.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import MultiArmModel
from .exceptions import BudgetExceededError

RNG_NAME = "numpy Philox4x64-10, SeedSequence(seed, spawn_key=(trajectory,)), u[t, arm]"
POLICY_NAMES = ("wip", "myp", "opt")
DEFAULT_BUDGET = 200_000
WIP_TIE_TOL = 1e-9  # relative; index values this close count as tied


def top_m(scores: np.ndarray, m: int, largest: bool = True) -> np.ndarray:
    """0/1 matrix selecting ``m`` entries per row; ties go to the lower column."""
    scores = np.atleast_2d(scores)
    order = np.argsort(-scores if largest else scores, axis=1, kind="stable")
    act = np.zeros(scores.shape, dtype=np.int8)
    np.put_along_axis(act, order[:, :m], 1, axis=1)
    return act


def _pad(arrays, fill=np.nan):
    kmax = max(len(a) for a in arrays)
    out = np.full((len(arrays), kmax), fill)
    for i, a in enumerate(arrays):
        out[i, : len(a)] = a
    return out


def tie_keys(W: np.ndarray) -> np.ndarray:
    """Snap index values to a grid of ``WIP_TIE_TOL * (1 + max|W|)``.

    Index tables from different evaluation paths carry round-off of order 1e-14,
    which would otherwise decide ties that the lower-arm rule should decide.
    """
    tol = WIP_TIE_TOL * (1.0 + np.nanmax(np.abs(W)))
    return np.round(W / tol)


def wip_action(indices, states, m: int) -> np.ndarray:
    """Activate the ``m`` arms whose current states carry the largest Whittle index."""
    W = tie_keys(_pad([np.asarray(w, dtype=float) for w in indices]))
    states = np.atleast_2d(states)
    vals = W[np.arange(W.shape[0])[None, :], states]
    return top_m(vals, m, largest=True)


def myp_action(models, states, m: int) -> np.ndarray:
    """Activate the ``m`` arms with the smallest one-step cost increase ``c(x,1) - c(x,0)``."""
    delta = _pad([a.cost_active - a.cost_passive for a in models])
    states = np.atleast_2d(states)
    vals = delta[np.arange(delta.shape[0])[None, :], states]
    return top_m(vals, m, largest=False)


@dataclass
class OptimalPolicy:
    """Greedy joint policy of the product MDP, as a lookup over joint states."""

    sizes: tuple
    actions: np.ndarray  # (A, n) feasible action vectors
    choice: np.ndarray  # flat joint state -> row of ``actions``
    value: np.ndarray  # optimal value, shape ``sizes``
    iterations: int

    def __call__(self, states) -> np.ndarray:
        states = np.atleast_2d(states)
        flat = np.ravel_multi_index(tuple(states.T), self.sizes)
        return self.actions[self.choice[flat]]


def feasible_actions(n: int, m: int) -> np.ndarray:
    rows = []
    for active in itertools.combinations(range(n), m):
        a = np.zeros(n, dtype=np.int8)
        a[list(active)] = 1
        rows.append(a)
    return np.array(rows)


def opt_policy(multi: MultiArmModel, budget: int = DEFAULT_BUDGET, tol: float = 1e-10,
               max_iter: int = 100_000) -> OptimalPolicy:
    """Value iteration on the joint MDP with exactly ``m`` active arms per step."""
    sizes = multi.sizes
    n, m, beta = multi.n_arms, multi.budget, multi.discount
    pairs = math.prod(sizes) * math.comb(n, m)
    if pairs > budget:
        raise BudgetExceededError(f"product MDP has {pairs} state-action pairs > budget {budget}")
    actions = feasible_actions(n, m)
    costs = []
    for a in actions:
        c = np.zeros(sizes)
        for i, arm in enumerate(multi.arms):
            col = arm.cost_active if a[i] else arm.cost_passive
            shape = [1] * n
            shape[i] = sizes[i]
            c = c + col.reshape(shape)
        costs.append((1.0 - beta) * c)
    costs = np.array(costs)
    kernels = [[arm.p_passive, arm.p_active] for arm in multi.arms]
    V = np.zeros(sizes)
    for it in range(1, max_iter + 1):
        H = np.empty((len(actions),) + sizes)
        for j, a in enumerate(actions):
            ev = V
            for i in range(n):
                ev = np.moveaxis(np.tensordot(kernels[i][a[i]], ev, axes=([1], [i])), 0, i)
            H[j] = costs[j] + beta * ev
        V_new = H.min(axis=0)
        delta = float(np.max(np.abs(V_new - V)))
        V = V_new
        if delta < tol:
            break
    choice = H.reshape(len(actions), -1).argmin(axis=0)
    return OptimalPolicy(sizes, actions, choice, V, it)


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 250
    trajectories: int = 2500
    seed: int = 0
    policies: tuple = POLICY_NAMES
    initial_state: tuple | None = None
    chunk: int = 256

    def __post_init__(self):
        if self.horizon < 1 or self.trajectories < 1:
            raise ValueError("horizon T and trajectories S must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        bad = set(self.policies) - set(POLICY_NAMES)
        if bad:
            raise ValueError(f"unknown policies {sorted(bad)}; choose from {POLICY_NAMES}")


def trajectory_uniforms(seed: int, s: int, horizon: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(s,))
    return np.random.Generator(np.random.Philox(ss)).random((horizon, n))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("WHITTLE_LAB_THREADS", "1")))
    except ValueError:
        return 1


def simulate_costs(multi: MultiArmModel, policy, cfg: SimConfig) -> np.ndarray:
    """Per-trajectory normalized discounted cost ``(1 - beta) sum_{t<T} beta^t c(X_t, A_t)``."""
    n, beta = multi.n_arms, multi.discount
    kmax = max(multi.sizes)
    cdf = np.ones((n, 2, kmax, kmax))
    cost = np.zeros((n, kmax, 2))
    for i, arm in enumerate(multi.arms):
        k = arm.num_states
        for a, P in enumerate((arm.p_passive, arm.p_active)):
            cdf[i, a, :k, :k] = np.cumsum(P, axis=1)
        cost[i, :k] = arm.costs
    cdf[..., -1] = np.inf  # guard against round-off in the last cumulative entry
    limits = np.array(multi.sizes) - 1
    x0 = np.zeros(n, dtype=np.int64) if cfg.initial_state is None else np.asarray(cfg.initial_state)
    arms = np.arange(n)
    discounts = beta ** np.arange(cfg.horizon)

    def run_chunk(lo, hi):
        U = np.stack([trajectory_uniforms(cfg.seed, s, cfg.horizon, n) for s in range(lo, hi)])
        x = np.tile(x0, (hi - lo, 1))
        total = np.zeros(hi - lo)
        for t in range(cfg.horizon):
            a = np.asarray(policy(x), dtype=np.int64)
            if np.any(a.sum(axis=1) != multi.budget):
                raise RuntimeError("policy emitted an infeasible action vector")
            total += discounts[t] * cost[arms, x, a].sum(axis=1)
            rows = cdf[arms, a, x]  # (s, n, kmax)
            x = np.minimum((U[:, t, :, None] >= rows).sum(axis=2), limits)
        return (1.0 - beta) * total

    bounds = [(lo, min(lo + cfg.chunk, cfg.trajectories))
              for lo in range(0, cfg.trajectories, cfg.chunk)]
    workers = _threads()
    if workers == 1 or len(bounds) == 1:
        parts = [run_chunk(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda b: run_chunk(*b), bounds))
    return np.concatenate(parts)


def run_mc(multi: MultiArmModel, policy, cfg: SimConfig) -> tuple[float, float]:
    """Mean and standard error of the discounted cost of ``policy`` over ``cfg.trajectories`` runs."""
    costs = simulate_costs(multi, policy, cfg)
    se = float(costs.std(ddof=1) / math.sqrt(len(costs))) if len(costs) > 1 else 0.0
    return float(costs.mean()), se


@dataclass
class SimReport:
    cost: dict  # policy -> (mean, stderr)
    config: SimConfig
    truncation_bound: float
    alpha_opt: float | None = None
    eps_myp: float | None = None
    paired_stderr: dict = field(default_factory=dict)  # "a-b" -> stderr of per-trajectory a - b
    samples: dict = field(default_factory=dict, repr=False)

    def combined_stderr(self, a: str, b: str) -> float:
        return math.hypot(self.cost[a][1], self.cost[b][1])

    def to_dict(self) -> dict:
        return {
            "cost": {k: {"mean": v[0], "stderr": v[1]} for k, v in self.cost.items()},
            "alpha_opt": self.alpha_opt,
            "eps_myp": self.eps_myp,
            "paired_stderr": self.paired_stderr,
            "truncation_bound": self.truncation_bound,
            "S": self.config.trajectories,
            "T": self.config.horizon,
            "seed": self.config.seed,
            "rng": RNG_NAME,
        }

    def csv_rows(self):
        for name, (mean, se) in self.cost.items():
            yield [name, repr(mean), repr(se), self.config.trajectories, self.config.horizon,
                   self.config.seed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["policy", "mean_cost", "stderr", "S", "T", "seed"])
        w.writerows(self.csv_rows())
        return buf.getvalue()


def compare_policies(multi: MultiArmModel, cfg: SimConfig, tables=None, opt=None,
                     budget: int = DEFAULT_BUDGET) -> SimReport:
    """Simulate the requested policies on common random numbers and derive the ratios.

    ``tables`` are per-arm Whittle index vectors (computed if omitted). The
    optimal policy is solved on demand unless passed in as ``opt``.
    """
    policies = {}
    if "wip" in cfg.policies:
        if tables is None:
            from .whittle import compute_whittle
            tables = [compute_whittle(arm).index for arm in multi.arms]
        policies["wip"] = lambda x, W=tables: wip_action(W, x, multi.budget)
    if "myp" in cfg.policies:
        policies["myp"] = lambda x: myp_action(multi.arms, x, multi.budget)
    if "opt" in cfg.policies:
        policies["opt"] = opt if opt is not None else opt_policy(multi, budget)
    samples = {name: simulate_costs(multi, pol, cfg) for name, pol in policies.items()}
    cost = {}
    for name, arr in samples.items():
        se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        cost[name] = (float(arr.mean()), se)
    cbar_max = sum(arm.max_abs_cost for arm in multi.arms)
    report = SimReport(cost=cost, config=cfg,
                       truncation_bound=multi.discount ** cfg.horizon * cbar_max, samples=samples)
    for a, b in itertools.combinations(samples, 2):
        diff = samples[a] - samples[b]
        se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0
        report.paired_stderr[f"{a}-{b}"] = se
    if "opt" in cost and "wip" in cost:
        report.alpha_opt = cost["opt"][0] / cost["wip"][0]
    if "myp" in cost and "wip" in cost:
        report.eps_myp = (cost["myp"][0] - cost["wip"][0]) / cost["myp"][0]
    return report
