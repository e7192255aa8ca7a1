"""Acceptance criteria, each run at its stated tolerance.

Every test prints one PASS/FAIL line and records it for the end-of-run
summary printed by ``conftest.pytest_terminal_summary``.
"""

import json
import time

import numpy as np
import pytest

from whittle_lab import (BanditModel, check_pcl, check_prop_refinements, compute_whittle,
                         policy_eval, restart_dn, solve_lambda, validate, verify_nesting,
                         whittle_oracle_all)
from whittle_lab.cli import ExperimentSpec, main, run_experiment
from whittle_lab.generators import (benchmark_model, gen_levy_matrix, gen_rand_monotone,
                                    gen_structured, monotone_range, restart_matrix)
from whittle_lab.indexability import HOLDS, default_grid
from whittle_lab.monotone import is_stochastically_monotone
from whittle_lab.whittle import index_bounds

from conftest import MODEL_E, record
from oracles import random_model

PUBLISHED_INDEX = [0.18, 0.80, 0.57]
PUBLISHED_MU = {((), 1): 0.18, ((), 2): 0.95, ((), 3): 0.64,
                ((1,), 2): 0.91, ((1,), 3): 0.57, ((1, 3), 2): 0.80}
# activation vectors as printed (unnormalized, i.e. divided by 1 - beta)
PUBLISHED_N = {
    (1, 1, 1): [10, 10, 10],
    (0, 1, 1): [7.88, 9.29, 9.13],
    (1, 0, 1): [4.58, 2.93, 4.10],
    (1, 1, 0): [5.66, 8.24, 4.23],
    (0, 0, 1): [1.48, 1.52, 2.57],
    (0, 1, 0): [6.65, 8.59, 4.88],
    (0, 0, 0): [0, 0, 0],
}


def check(name, ok, detail=""):
    record(name, ok, detail)
    assert ok, f"{name}: {detail}"


# 1 ----------------------------------------------------------------------------


def test_c1a_indices(tmp_path):
    p = tmp_path / "model_e.json"
    p.write_text(json.dumps(MODEL_E))
    t0 = time.perf_counter()
    code = main(["index", "--model", str(p), "--out", str(tmp_path / "out")])
    elapsed = time.perf_counter() - t0
    rows = (tmp_path / "out" / "index.csv").read_text().splitlines()[1:]
    w = np.array([float(r.split(",")[1]) for r in rows])
    err = np.abs(w - PUBLISHED_INDEX).max()
    check("1a worked-example indices", code == 0 and err <= 0.005 and elapsed < 1.0,
          f"w={np.round(w, 5).tolist()} max err={err:.2e} runtime={elapsed:.3f}s")


def test_c1b_step_minima():
    m = BanditModel.from_dict(MODEL_E)
    seen = {}
    for step in compute_whittle(m).steps:
        before = tuple(sorted(x + 1 for x in step.passive_before))
        for y, cand in step.candidates.items():
            seen[(before, y + 1)] = cand.mu_star
    errs = {k: abs(seen.get(k, np.inf) - v) for k, v in PUBLISHED_MU.items()}
    worst = max(errs.values())
    check("1b worked-example step minima", set(seen) == set(PUBLISHED_MU) and worst <= 0.005,
          f"max err={worst:.2e}")


def test_c1c_activation_vectors():
    m = BanditModel.from_dict(MODEL_E)
    bad = []
    for g, printed in PUBLISHED_N.items():
        n = policy_eval(m, g).n
        target = 0.1 * np.asarray(printed, dtype=float)
        err = np.abs(n - target)
        for x in np.flatnonzero(err > 5e-4):
            bad.append(f"g={list(g)} x={x + 1}: computed {n[x]:.5f} vs printed {target[x]:.4f}")
    check("1c worked-example activation vectors (x0.1, +-0.0005)", not bad, "; ".join(bad))


# 2 ----------------------------------------------------------------------------


def test_c2_pcl_counterexample():
    m = BanditModel.from_dict(MODEL_E)
    res = check_pcl(m)
    pairs = [(w["g"], w["h"]) for w in res.witnesses]
    ng, nh = policy_eval(m, [1, 1, 0]).n, policy_eval(m, [0, 1, 0]).n
    ok = (not res.ok and ([1, 1, 0], [0, 1, 0]) in pairs and bool(np.all(ng < nh))
          and set(compute_whittle(m).sets[-1]) == {0, 1, 2})
    check("2 PCL counterexample", ok, f"witnesses={pairs}")


# 3 ----------------------------------------------------------------------------


def _oracle_models():
    rng = np.random.default_rng(2023)
    models = []
    for i in range(15):
        k = 5 if i % 2 else 8
        if i % 3 == 0:
            models.append(benchmark_model(gen_levy_matrix(k, seed=int(rng.integers(2 ** 32)))))
        else:
            models.append(random_model(rng, k, 0.9, restart=True))
    kinds = ("P1", "P2", "P3", "P4")
    for i in range(20):
        k = 5 if i % 2 else 10
        kind = kinds[i % 4]
        lo, _ = monotone_range(kind, k)
        p = float(rng.uniform(lo, 1.0))
        models.append(benchmark_model(gen_structured(kind, k, p, require_monotone=True), 0.95))
    for i in range(15):
        models.append(random_model(rng, int(rng.integers(3, 7)), 0.45))
    return models


def test_c3_oracle_equivalence():
    models = _oracle_models()
    t0 = time.perf_counter()
    worst, not_covered = 0.0, 0
    for m in models:
        props = check_prop_refinements(m).props
        if props["b"].status != HOLDS and props["d"].status != HOLDS:
            not_covered += 1
        w = compute_whittle(m).index
        worst = max(worst, float(np.abs(w - whittle_oracle_all(m, tol=1e-7)).max()))
    elapsed = time.perf_counter() - t0
    check("3 oracle equivalence (50 models, 1e-5)",
          len(models) == 50 and not_covered == 0 and worst <= 1e-5 and elapsed < 60,
          f"max diff={worst:.2e} runtime={elapsed:.1f}s")


# 4 ----------------------------------------------------------------------------


def test_c4_renewal_consistency():
    rng = np.random.default_rng(404)
    worst, extreme = 0.0, 0.0
    for _ in range(50):
        k = int(rng.integers(3, 9))
        m = random_model(rng, k, float(rng.uniform(0.5, 0.99)), restart=True)
        q = m.p_active[0]
        for _ in range(20):
            g = rng.integers(0, 2, k)
            ev, direct = restart_dn(m, g), policy_eval(m, g)
            worst = max(worst, abs(ev.d_agg - q @ direct.d), abs(ev.n_agg - q @ direct.n))
        extreme = max(extreme, abs(restart_dn(m, np.ones(k)).n_agg - 1.0),
                      abs(restart_dn(m, np.zeros(k)).n_agg))
    check("4 renewal consistency", worst <= 1e-8 and extreme <= 1e-12,
          f"max diff={worst:.2e} extreme-policy err={extreme:.2e}")


# 5 ----------------------------------------------------------------------------


def test_c5_value_function_properties():
    rng = np.random.default_rng(505)
    failures = []
    for i in range(20):
        m = random_model(rng, int(rng.integers(3, 7)), float(rng.uniform(0.3, 0.97)))
        lo, hi = index_bounds(m)
        grid = np.linspace(lo, hi, 41)
        sols = [solve_lambda(m, lam) for lam in grid]
        V = np.array([s.value for s in sols])
        N = np.array([policy_eval(m, s.policy).n for s in sols])
        dV, dl = np.diff(V, axis=0), np.diff(grid)[:, None]
        if np.any(dV < -1e-9):
            failures.append(f"model {i}: V decreases")
        if np.any(V[1:-1] < 0.5 * (V[:-2] + V[2:]) - 1e-9):
            failures.append(f"model {i}: midpoint concavity")
        if np.any(np.diff(N, axis=0) > 1e-9):
            failures.append(f"model {i}: N increases")
        if np.any(dl * N[1:] > dV + 1e-9) or np.any(dV > dl * N[:-1] + 1e-9):
            failures.append(f"model {i}: sandwich")
    check("5 value-function properties (20 models, 41-point sweep)", not failures, "; ".join(failures))


# 6 ----------------------------------------------------------------------------


def _refinement_models():
    rng = np.random.default_rng(606)
    out = []
    for i in range(10):
        out.append(random_model(rng, 4, 0.95, restart=True))
        out.append(random_model(rng, 4, 0.45))
        # active kernel close to the passive one: refinement (c) at beta = 0.9
        base = random_model(rng, 4, 0.9)
        P1 = 0.9 * base.p_passive + 0.1 * rng.dirichlet(np.ones(4), 4)
        out.append(BanditModel(base.p_passive, P1, base.cost_passive, base.cost_active, 0.9))
    return out


def test_c6_condition_soundness():
    failures, covered = [], 0
    for i, m in enumerate(_refinement_models()):
        props = check_prop_refinements(m).props
        if not any(p.status == HOLDS for p in props.values()):
            failures.append(f"model {i}: no refinement holds")
            continue
        covered += 1
        v = verify_nesting(m, default_grid(m, 1001))
        if v is not None:
            failures.append(f"model {i}: {v.to_dict()}")
    check("6 condition soundness (30 models, 1001-point grid)", covered == 30 and not failures,
          "; ".join(failures))


# 7 ----------------------------------------------------------------------------


def test_c7_experiment_one():
    t0 = time.perf_counter()
    lines, ok = [], True
    for m in (1, 2):
        for kind in ("P1", "P2", "P3", "P4"):
            spec = ExperimentSpec.for_experiment(1, family=kind, m=m, S=500, T=250, seed=1)
            (rep,), dropped = run_experiment(spec)
            J = {k: v[0] for k, v in rep.cost.items()}
            se_ow = rep.combined_stderr("opt", "wip")
            se_wm = rep.combined_stderr("wip", "myp")
            cell = (not dropped and rep.alpha_opt >= 0.99
                    and J["opt"] <= J["wip"] + 3 * se_ow and J["wip"] <= J["myp"] + 3 * se_wm)
            ok &= cell
            lines.append(f"{kind}/m={m}: alpha={rep.alpha_opt:.5f}{'' if cell else ' FAIL'}")
    elapsed = time.perf_counter() - t0
    check("7 experiment 1 desk scale", ok and elapsed < 300,
          f"{', '.join(lines)}; runtime={elapsed:.1f}s")


# 8 ----------------------------------------------------------------------------


@pytest.mark.parametrize("label,exp", [("structured P4", 3), ("Levy restart", 5)])
def test_c8_myopic_direction(label, exp):
    spec = ExperimentSpec.for_experiment(exp, K=25, n=25, m=1, S=500, seed=0)
    (rep,), _ = run_experiment(spec)
    (again,), _ = run_experiment(spec)
    diff = rep.cost["myp"][0] - rep.cost["wip"][0]
    se = rep.combined_stderr("wip", "myp")
    ok = rep.eps_myp > 0 and diff > 3 * se and rep.to_csv() == again.to_csv()
    check(f"8 myopic gap, {label}", ok,
          f"eps_myp={rep.eps_myp:.4f} gap={diff:.2f} 3se={3 * se:.2f} "
          f"paired se={rep.paired_stderr['wip-myp']:.2f}")


# 9 ----------------------------------------------------------------------------


def _valid(P):
    k = P.shape[0]
    return validate(BanditModel(P, P, np.zeros(k), np.zeros(k), 0.5)) == []


def test_c9_generator_properties():
    failures = []
    for kind in ("P1", "P2", "P3", "P4"):
        for k in (5, 25):
            lo, hi = monotone_range(kind, k)
            for p in np.linspace(lo, hi, 10):
                P = gen_structured(kind, k, float(p))
                if not (_valid(P) and is_stochastically_monotone(P)):
                    failures.append(f"{kind} K={k} p={p:.4f}")
    for k in (5, 25):
        for seed in range(100):
            P = gen_rand_monotone(k, min(5 / k, 1.0), seed)
            F = np.cumsum(P[:, ::-1], axis=1)[:, ::-1]
            if not (_valid(P) and np.all(np.diff(F, axis=0) >= -1e-12)):
                failures.append(f"RandMonotone K={k} seed={seed}")
    for seed in range(20):
        if not _valid(gen_levy_matrix(25, seed)):
            failures.append(f"Levy seed={seed}")
    if not _valid(restart_matrix(6)):
        failures.append("restart matrix")
    check("9 generator properties", not failures, "; ".join(failures))


# 10 ---------------------------------------------------------------------------


def test_c10_determinism(tmp_path):
    model = tmp_path / "m.json"
    model.write_text(json.dumps(MODEL_E))
    runs = {
        "experiment": ["experiment", "1", "--family", "P3", "--S", "60", "--T", "80",
                       "--seed", "77"],
        "experiment-random": ["experiment", "4", "--K", "10", "--n", "6", "--S", "40",
                              "--T", "50", "--seed", "5"],
        "index": ["index", "--model", str(model)],
        "check": ["check", "--model", str(model), "--grid", "101"],
        "generate": ["generate", "--kind", "LevyRandom", "--K", "5", "--n", "3", "--seed", "8"],
    }
    mismatched = []
    for name, args in runs.items():
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{name}_{rep}"
            assert main(args + ["--out", str(out)]) == 0
            outs.append({f.relative_to(out): f.read_bytes()
                         for f in sorted(out.rglob("*")) if f.is_file()})
        if outs[0] != outs[1]:
            mismatched.append(name)
    # replaying an experiment from its recorded metadata
    src = tmp_path / "experiment_a"
    main(["experiment", "--spec", str(src / "metadata.json"), "--out", str(tmp_path / "replay")])
    for f in src.rglob("*.csv"):
        if f.read_bytes() != (tmp_path / "replay" / f.relative_to(src)).read_bytes():
            mismatched.append(f"replay:{f.name}")
    check("10 byte-identical replay", not mismatched, ", ".join(mismatched))
