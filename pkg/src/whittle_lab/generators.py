"""Transition-matrix generators and the benchmark model family.

Structured families ``P1``..``P4`` are banded (or flat) matrices with diagonal
mass ``p``. ``RandMonotone`` draws a stochastically monotone matrix column by
column under the tail-sum constraints. ``LevyRandom`` normalizes rows of
heavy-tailed Levy samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BanditModel

STRUCTURED = ("P1", "P2", "P3", "P4")
KINDS = STRUCTURED + ("RandMonotone", "LevyRandom")

# (q1, q2) as fractions of 1 - p: weight one and two steps away on each side.
_BAND_WEIGHTS = {
    "P1": (1 / 2, 0.0),
    "P2": (1 / 4, 1 / 4),
    "P3": (1 / 3, 1 / 6),
}


def monotone_range(kind: str, size: int) -> tuple[float, float]:
    """Parameter range over which the structured family is claimed stochastically monotone."""
    lower = {"P1": 1 / 3, "P2": 1 / 4, "P3": 1 / 5}.get(kind)
    if kind == "P4":
        lower = 1 / size
    if lower is None:
        raise ValueError(f"no monotone range for kind {kind!r}")
    return lower, 1.0


@dataclass(frozen=True)
class GenSpec:
    kind: str
    size: int
    param: float
    seed: int | None = None
    require_monotone: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.size < 1:
            raise ValueError("size must be positive")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "size": self.size, "param": self.param, "seed": self.seed}


def gen_structured(kind: str, size: int, p: float, require_monotone: bool = False) -> np.ndarray:
    """Structured ``P1``-``P4`` matrix; out-of-range band mass folds onto the boundary state."""
    if kind not in STRUCTURED:
        raise ValueError(f"kind must be one of {STRUCTURED}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if require_monotone:
        lo, hi = monotone_range(kind, size)
        if not lo - 1e-12 <= p <= hi:
            raise ValueError(f"{kind} is stochastically monotone only for p in [{lo:.4g}, {hi}]")
    if kind == "P4":
        if size == 1:
            return np.ones((1, 1))
        q = (1.0 - p) / (size - 1)
        P = np.full((size, size), q)
        np.fill_diagonal(P, p)
        return P
    if size < 3:
        raise ValueError("banded families need at least 3 states")
    f1, f2 = _BAND_WEIGHTS[kind]
    q1, q2 = f1 * (1.0 - p), f2 * (1.0 - p)
    offsets = {-2: q2, -1: q1, 0: p, 1: q1, 2: q2}
    P = np.zeros((size, size))
    for x in range(size):
        for off, w in offsets.items():
            P[x, min(max(x + off, 0), size - 1)] += w
    return P


def gen_rand_monotone(size: int, d: float, seed=None) -> np.ndarray:
    """Random stochastically monotone matrix; ``d`` caps the per-entry spread between rows.

    The first row is drawn left to right with the leftover mass placed in the
    last column. The last column is then drawn top-down as a non-decreasing
    sequence. The remaining entries of each later row are filled right to left
    between the tail-sum lower bound and the mass still available, and the
    first column takes what is left.
    """
    if not 0.0 <= d <= 1.0:
        raise ValueError("d must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = size
    P = np.zeros((n, n))
    P[0, 0] = rng.uniform(1.0 - d, 1.0)
    for j in range(1, n - 1):
        P[0, j] = rng.uniform(0.0, max(1.0 - P[0, :j].sum(), 0.0))
    if n > 1:
        P[0, n - 1] = max(1.0 - P[0, : n - 1].sum(), 0.0)
    else:
        P[0, 0] = 1.0
        return P
    for i in range(1, n):
        prev = P[i - 1, n - 1]
        P[i, n - 1] = rng.uniform(prev, min(1.0, prev + d))
    F_prev = np.cumsum(P[0, ::-1])[::-1]  # F_prev[j] = sum_{y >= j} P[0, y]
    for i in range(1, n):
        tail = P[i, n - 1]
        for j in range(n - 2, 0, -1):
            lb = max(F_prev[j] - tail, 0.0)
            ub = min(lb + d, 1.0 - tail)
            if ub < lb - 1e-12:
                raise RuntimeError(f"empty interval at ({i}, {j}): [{lb}, {ub}]")
            P[i, j] = rng.uniform(lb, max(ub, lb))
            tail += P[i, j]
        P[i, 0] = max(1.0 - tail, 0.0)
        F_prev = np.cumsum(P[i, ::-1])[::-1]
    return P


def levy_samples(rng, size, c: float = 1.0) -> np.ndarray:
    """Levy(0, c) draws as ``c / Z**2`` with ``Z`` standard normal (zeros redrawn)."""
    z = rng.standard_normal(size)
    while np.any(z == 0.0):
        bad = z == 0.0
        z[bad] = rng.standard_normal(int(bad.sum()))
    return c / z ** 2


def gen_levy_row(size: int, rng, c: float = 1.0) -> np.ndarray:
    x = levy_samples(rng, size, c)
    return x / x.sum()


def gen_levy_matrix(size: int, seed=None, c: float = 1.0) -> np.ndarray:
    if c <= 0:
        raise ValueError("Levy scale must be positive")
    rng = np.random.default_rng(seed)
    return np.array([gen_levy_row(size, rng, c) for _ in range(size)])


def generate(spec: GenSpec) -> np.ndarray:
    if spec.kind in STRUCTURED:
        return gen_structured(spec.kind, spec.size, spec.param, spec.require_monotone)
    if spec.kind == "RandMonotone":
        return gen_rand_monotone(spec.size, spec.param, spec.seed)
    return gen_levy_matrix(spec.size, spec.seed, spec.param)


def benchmark_costs(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Passive cost ``(x - 1)**2`` (1-based ``x``) and flat active cost ``0.5 (K - 1)**2``."""
    x = np.arange(size, dtype=float)
    return x ** 2, np.full(size, 0.5 * (size - 1) ** 2)


def restart_matrix(size: int, q=None) -> np.ndarray:
    """Active kernel whose every row is ``q`` (default: unit mass on the first state)."""
    if q is None:
        q = np.zeros(size)
        q[0] = 1.0
    return np.tile(np.asarray(q, dtype=float), (size, 1))


def benchmark_model(p_passive, discount: float = 0.95, p_active=None) -> BanditModel:
    """Restart arm with the benchmark cost family around a given passive kernel."""
    p_passive = np.asarray(p_passive, dtype=float)
    k = p_passive.shape[0]
    c0, c1 = benchmark_costs(k)
    if p_active is None:
        p_active = restart_matrix(k)
    return BanditModel(p_passive, p_active, c0, c1, discount)
