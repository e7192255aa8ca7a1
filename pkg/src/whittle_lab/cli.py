"""Command-line front end: ``whittle-lab {index,check,simulate,experiment,generate}``.

Exit codes: 0 success, 2 invalid input, 3 indexability or certification
failure, 4 product-MDP budget exceeded (partial output is still written).

Every command that writes to ``--out`` also writes ``metadata.json`` holding
the seed, generator parameters, tolerances and package version. No clock or
path information is recorded, so a replay produces identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import BanditModel, MultiArmModel, load_model, save_model
from .estimators import METHODS, whittle_table
from .exceptions import BudgetExceededError, ModelValidationError, NonIndexableError
from .generators import KINDS, STRUCTURED, GenSpec, benchmark_costs, generate, restart_matrix
from .indexability import default_grid, full_report, verify_nesting
from .monotone import check_monotone, whittle_threshold
from .simulate import DEFAULT_BUDGET, POLICY_NAMES, RNG_NAME, SimConfig, compare_policies, opt_policy
from .validation import check_model
from .whittle import check_pcl

EXIT_OK, EXIT_INVALID, EXIT_INDEX, EXIT_BUDGET = 0, 2, 3, 4

TOLERANCES = {
    "row_sum": 1e-9,
    "tie_break": "1e-9 (1 + |lambda|)(1 + max|c|)",
    "support_N": "1e-9 (1 + max|N|)",
    "lambda_merge": "1e-8 (1 + |lambda|)",
    "value_iteration": 1e-10,
    "oracle_bisection": 1e-6,
    "monotone": 1e-12,
}

_GEN_TAG = 0x67656E  # keeps generator streams apart from trajectory streams


class CLIError(Exception):
    def __init__(self, code, message, detail=None):
        super().__init__(message)
        self.code = code
        self.detail = detail


def derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(_GEN_TAG, *keys))
    return int(ss.generate_state(1, np.uint64)[0])


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _metadata(command: str, **fields) -> dict:
    meta = {"tool": "whittle-lab", "version": __version__, "command": command,
            "rng": RNG_NAME, "tolerances": TOLERANCES}
    meta.update(fields)
    return meta


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


# ---------------------------------------------------------------- experiments

EXPERIMENT_DEFAULTS = {
    1: {"K": 5, "n": 5, "family": "P1", "policies": ("wip", "myp", "opt")},
    2: {"K": 5, "n": 5, "family": "RandMonotone", "policies": ("wip", "myp", "opt")},
    3: {"K": 25, "n": 25, "family": "P4", "policies": ("wip", "myp")},
    4: {"K": 25, "n": 25, "family": "RandMonotone", "policies": ("wip", "myp")},
    5: {"K": 25, "n": 25, "family": "LevyRandom", "policies": ("wip", "myp")},
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One batch of multi-armed comparisons on restart arms with the benchmark costs.

    Structured families spread the arm parameters ``p_i`` evenly over
    ``p_range``. ``RandMonotone`` uses ``d = 5 / K`` unless ``param`` is set, and
    ``LevyRandom`` uses scale ``param`` (default 1). Random arms draw their
    generator seeds from ``seed``, ``instance`` and arm number.
    """

    experiment: int | None = 1
    K: int = 5
    n: int = 5
    m: int = 1
    beta: float = 0.95
    family: str = "P1"
    param: float | None = None
    p_range: tuple = (0.35, 1.0)
    instances: int = 1
    S: int = 2500
    T: int = 250
    seed: int = 0
    policies: tuple = ("wip", "myp", "opt")
    method: str = "auto"
    budget: int = DEFAULT_BUDGET

    @classmethod
    def for_experiment(cls, experiment: int, **overrides) -> "ExperimentSpec":
        if experiment not in EXPERIMENT_DEFAULTS:
            raise ValueError(f"experiment id must be 1..5, got {experiment}")
        base = dict(EXPERIMENT_DEFAULTS[experiment], experiment=experiment)
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data.get("spec", data))
        for key in ("p_range", "policies"):
            if key in data:
                data[key] = tuple(data[key])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment fields {sorted(unknown)}")
        return cls(**data)

    def __post_init__(self):
        if self.family not in KINDS:
            raise ValueError(f"family must be one of {KINDS}")
        if self.instances < 1:
            raise ValueError("instances must be at least 1")
        bad = set(self.policies) - set(POLICY_NAMES)
        if bad:
            raise ValueError(f"unknown policies {sorted(bad)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_range"] = list(self.p_range)
        d["policies"] = list(self.policies)
        return d

    def arm_specs(self, instance: int) -> list[GenSpec]:
        if self.family in STRUCTURED:
            if self.param is not None:
                ps = [float(self.param)] * self.n
            else:
                ps = [float(p) for p in np.linspace(*self.p_range, self.n)]
            return [GenSpec(self.family, self.K, p) for p in ps]
        if self.family == "RandMonotone":
            param = 5.0 / self.K if self.param is None else float(self.param)
            param = min(param, 1.0)
        else:
            param = 1.0 if self.param is None else float(self.param)
        return [GenSpec(self.family, self.K, param, derive_seed(self.seed, instance, i))
                for i in range(self.n)]


def build_arms(specs, beta: float) -> list[BanditModel]:
    arms = []
    for spec in specs:
        c0, c1 = benchmark_costs(spec.size)
        arms.append(BanditModel(generate(spec), restart_matrix(spec.size), c0, c1, beta))
    return arms


def run_experiment(spec: ExperimentSpec, out: Path | None = None) -> tuple[list, bool]:
    """Run every instance; return the per-instance reports and whether opt was dropped."""
    cfg = SimConfig(horizon=spec.T, trajectories=spec.S, seed=spec.seed, policies=spec.policies)
    reports, dropped, generators = [], False, []
    summary = io.StringIO()
    w = csv.writer(summary, lineterminator="\n")
    w.writerow(["instance", "alpha_opt", "eps_myp", "stderr_wip_myp", "stderr_opt_wip",
                "opt_omitted"])
    for r in range(spec.instances):
        gspecs = spec.arm_specs(r)
        generators.append([g.to_dict() for g in gspecs])
        multi = MultiArmModel(tuple(check_model(a) for a in build_arms(gspecs, spec.beta)), spec.m)
        tables = [whittle_table(arm, spec.method) for arm in multi.arms]
        run_cfg, opt, omitted = cfg, None, False
        if "opt" in cfg.policies:
            try:
                opt = opt_policy(multi, spec.budget)
            except BudgetExceededError:
                omitted = dropped = True
                run_cfg = replace(cfg, policies=tuple(p for p in cfg.policies if p != "opt"))
        report = compare_policies(multi, run_cfg, tables=[t.index for t in tables], opt=opt)
        reports.append(report)
        ps = report.paired_stderr
        w.writerow([r, _opt_repr(report.alpha_opt), _opt_repr(report.eps_myp),
                    _opt_repr(ps.get("wip-myp")), _opt_repr(ps.get("wip-opt")), int(omitted)])
        if out is not None:
            sub = out / f"instance_{r:03d}"
            _write(sub, "report.csv", report.to_csv())
            _write(sub, "report.json", _dumps(report.to_dict()))
            for i, t in enumerate(tables, start=1):
                _write(sub, f"arm_{i:02d}_index.csv", t.to_csv())
    if out is not None:
        _write(out, "summary.csv", summary.getvalue())
        _write(out, "metadata.json", _dumps(_metadata(
            "experiment", seed=spec.seed, spec=spec.to_dict(), generators=generators,
            opt_omitted=dropped)))
    return reports, dropped


def _opt_repr(v):
    return "" if v is None else repr(float(v))


# ---------------------------------------------------------------- commands

def cmd_index(args) -> int:
    model = check_model(load_model(args.model))
    try:
        table = whittle_table(model, args.method)
    except NonIndexableError as exc:
        raise CLIError(EXIT_INDEX, str(exc), exc.witness) from exc
    if args.out is None:
        sys.stdout.write(table.to_csv())
        return EXIT_OK
    out = Path(args.out)
    _write(out, "index.csv", table.to_csv())
    _write(out, "index.json", _dumps(table.to_dict()))
    _write(out, "metadata.json", _dumps(_metadata("index", seed=None, method=args.method,
                                                  model=model.to_dict())))
    return EXIT_OK


def cmd_check(args) -> int:
    model = check_model(load_model(args.model))
    report = full_report(model).to_dict()
    grid = default_grid(model, args.grid)
    violation = verify_nesting(model, grid)
    _, thr = whittle_threshold(model)
    result = {
        "conditions": report,
        "monotone": check_monotone(model).to_dict(),
        "nesting": {"ok": violation is None, "grid_points": len(grid),
                    "violation": None if violation is None else violation.to_dict()},
        "pcl": check_pcl(model).to_dict(),
        "threshold": thr.to_dict(),
    }
    text = _dumps(result)
    if args.out is None:
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        _write(out, "check.json", text)
        _write(out, "metadata.json", _dumps(_metadata("check", seed=None, grid=args.grid,
                                                      model=model.to_dict())))
    return EXIT_OK if violation is None else EXIT_INDEX


def _load_arms(paths):
    arms = []
    for p in paths:
        data = json.loads(Path(p).read_text())
        items = data["arms"] if isinstance(data, dict) and "arms" in data else [data]
        arms.extend(check_model(BanditModel.from_dict(a)) for a in items)
    return arms


def cmd_simulate(args) -> int:
    arms = _load_arms(args.model)
    multi = MultiArmModel(tuple(arms), args.m)
    policies = tuple(p for p in args.policies.split(",") if p)
    cfg = SimConfig(horizon=args.T, trajectories=args.S, seed=args.seed, policies=policies)
    code, opt = EXIT_OK, None
    if "opt" in policies:
        try:
            opt = opt_policy(multi, args.budget)
        except BudgetExceededError as exc:
            print(f"warning: {exc}; opt omitted", file=sys.stderr)
            code = EXIT_BUDGET
            cfg = replace(cfg, policies=tuple(p for p in policies if p != "opt"))
    try:
        tables = [whittle_table(a, args.method).index for a in arms] if "wip" in cfg.policies else None
    except NonIndexableError as exc:
        raise CLIError(EXIT_INDEX, str(exc), exc.witness) from exc
    report = compare_policies(multi, cfg, tables=tables, opt=opt)
    if args.out is None:
        sys.stdout.write(report.to_csv())
    else:
        out = Path(args.out)
        _write(out, "report.csv", report.to_csv())
        _write(out, "report.json", _dumps(report.to_dict()))
        _write(out, "metadata.json", _dumps(_metadata(
            "simulate", seed=args.seed, m=args.m, S=args.S, T=args.T, policies=list(policies),
            method=args.method, opt_omitted=code == EXIT_BUDGET,
            arms=[a.to_dict() for a in arms])))
    return code


def cmd_experiment(args) -> int:
    if args.spec is not None:
        spec = ExperimentSpec.from_dict(json.loads(Path(args.spec).read_text()))
    elif args.id is not None:
        spec = ExperimentSpec.for_experiment(
            args.id, K=args.K, n=args.n, m=args.m, beta=args.beta, family=args.family,
            param=args.param, instances=args.instances, S=args.S, T=args.T, seed=args.seed)
    else:
        raise ValueError("give an experiment id (1-5) or --spec FILE")
    out = Path(args.out) if args.out is not None else None
    try:
        reports, dropped = run_experiment(spec, out)
    except NonIndexableError as exc:
        raise CLIError(EXIT_INDEX, str(exc), exc.witness) from exc
    if out is None:
        for r in reports:
            sys.stdout.write(r.to_csv())
    if dropped:
        print("warning: product MDP over budget; opt omitted", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_generate(args) -> int:
    seed = args.seed
    if args.kind in STRUCTURED:
        if args.param is not None:
            params = [args.param] * args.n
        else:
            params = [float(p) for p in np.linspace(0.35, 1.0, args.n)]
        specs = [GenSpec(args.kind, args.K, p, require_monotone=args.require_monotone)
                 for p in params]
    else:
        default = min(5.0 / args.K, 1.0) if args.kind == "RandMonotone" else 1.0
        param = default if args.param is None else args.param
        specs = [GenSpec(args.kind, args.K, param, derive_seed(seed, 0, i)) for i in range(args.n)]
    out = Path(args.out)
    c0, c1 = benchmark_costs(args.K)
    for i, spec in enumerate(specs, start=1):
        p0 = generate(spec)
        if args.active == "restart":
            p1 = restart_matrix(args.K)
        else:
            p1 = generate(replace(spec, seed=None if spec.seed is None
                                  else derive_seed(seed, 1, i - 1)))
        model = check_model(BanditModel(p0, p1, c0, c1, args.beta))
        out.mkdir(parents=True, exist_ok=True)
        save_model(model, out / f"arm_{i:02d}.json")
    _write(out, "metadata.json", _dumps(_metadata(
        "generate", seed=seed, kind=args.kind, K=args.K, n=args.n, beta=args.beta,
        active=args.active, generators=[s.to_dict() for s in specs])))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="whittle-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="compute the Whittle index table of one arm")
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("check", help="indexability conditions, structure and nesting")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=int, default=1001, help="penalty grid points for nesting")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="Monte-Carlo comparison of policies")
    p.add_argument("--model", required=True, action="append",
                   help="arm model JSON (repeatable) or a file with an 'arms' list")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--S", type=int, default=2500)
    p.add_argument("--T", type=int, default=250)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policies", default="wip,myp")
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run a benchmark experiment (1-5) or a spec file")
    p.add_argument("id", type=int, nargs="?")
    p.add_argument("--spec")
    p.add_argument("--K", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--family", choices=KINDS)
    p.add_argument("--param", type=float)
    p.add_argument("--instances", type=int)
    p.add_argument("--S", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("generate", help="write benchmark arm models")
    p.add_argument("--kind", choices=KINDS, default="P1")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--param", type=float)
    p.add_argument("--beta", type=float, default=0.95)
    p.add_argument("--active", choices=("restart", "same"), default="restart")
    p.add_argument("--require-monotone", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.detail is not None:
            sys.stderr.write(_dumps({"witness": exc.detail}))
        return exc.code
    except ModelValidationError as exc:
        print("error: invalid model", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_INVALID
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NonIndexableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INDEX
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
