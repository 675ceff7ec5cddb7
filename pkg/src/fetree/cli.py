"""Command-line front end: ``fetree solve|transform|limits-check|sample-bound``.

Exit codes: 0 success, 1 I/O or JSON syntax error, 2 validation or domain
error. Diagnostics go to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Callable

import numpy as np

from . import classic
from .fixtures import layered, random_limit_beta, random_tree, to_typed
from .free_energy import transform_tree, utilities_from_rewards
from .sampling import SampleModel, check_bound, max_of_alpha_distribution, monte_carlo_max, total_variation
from .solver import max_scaled_magnitude, solve
from .tree import NEG_INF, POS_INF, ZERO, InverseTemperature, SchemaError, build_tree

DEFAULT_SEED = 0xF3EE
LIMIT_TOL = 1e-12
MAGNITUDE_WARN = 1e4


class InputError(Exception):
    """Unreadable file or malformed JSON (exit 1)."""


class DomainError(Exception):
    """Well-formed input that violates a model constraint (exit 2)."""


def _diag(kind: str, message: str, **extra):
    print(json.dumps({"level": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _read_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc


def _load_tree(path: str):
    spec = _read_json(path)
    try:
        return build_tree(spec)
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from exc


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc.strerror}") from exc


def _csv(rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    tree = _load_tree(args.tree)
    result = solve(tree)
    magnitude = max_scaled_magnitude(tree, result)
    if magnitude > MAGNITUDE_WARN:
        _diag("warning", "large |beta*(R+V)| before shifting; results may lose precision", magnitude=magnitude)
    if args.format == "json":
        nodes = {}
        for k, n in tree.nodes.items():
            entry: dict[str, Any] = {
                "beta": n.beta.to_json(),
                "value": result.value[k],
                "log_partition": result.log_partition.get(k),
            }
            if k in result.policy:
                entry["policy"] = result.policy[k].as_dict()
            nodes[k] = entry
        text = json.dumps({"root": tree.root, "value": result.value[tree.root], "nodes": nodes}, indent=2) + "\n"
    else:
        rows = [["node", "depth", "beta", "value", "log_partition", "label", "policy"]]
        for k, n in tree.nodes.items():
            lz = result.log_partition.get(k)
            base = [k, tree.depth[k], n.beta.to_json(), _fmt(result.value[k]), "" if lz is None else _fmt(lz)]
            if n.is_leaf:
                rows.append(base + ["", ""])
            else:
                for label, p in result.policy[k].as_dict().items():
                    rows.append(base + [label, _fmt(p)])
        text = _csv(rows)
    _emit(text, args.out)
    return 0


def cmd_transform(args) -> int:
    tree = _load_tree(args.tree)
    raw_betas = _read_json(args.betas)
    try:
        alpha = InverseTemperature.of(args.alpha)
        if not alpha.is_finite:
            raise ValueError("--alpha must be finite and nonzero")
        if not isinstance(raw_betas, dict):
            raise SchemaError("betas file must be an object mapping node id to beta")
        unknown = sorted(set(raw_betas) - set(tree.nodes))
        if unknown:
            raise SchemaError(f"betas file names unknown nodes {unknown[:5]}")
        targets = {k: InverseTemperature.from_json(v) for k, v in raw_betas.items()}
        utilities = utilities_from_rewards(tree)
        source = tree.with_betas({k: alpha for k in tree.internal_nodes()})
        out = transform_tree(source, utilities, targets)
    except ValueError as exc:
        raise DomainError(str(exc)) from exc
    _emit(json.dumps(out.to_json(), indent=2) + "\n", args.out)
    return 0


def limits_report(seed: int, num_trees: int) -> list[tuple[str, float, int]]:
    """Max |solver - oracle| per classic rule over seeded random trees."""
    rng = np.random.default_rng(seed)
    rules: list[tuple[str, Callable, Callable]] = [
        ("expectimax", classic.expectimax, lambda d: layered(POS_INF, ZERO)),
        ("minimax", classic.minimax, lambda d: layered(POS_INF, NEG_INF)),
        ("expectiminimax", classic.expectiminimax, lambda d: layered(POS_INF, ZERO, NEG_INF, ZERO)),
        ("expectiminimax_mixed", classic.expectiminimax, lambda d: random_limit_beta),
        ("bellman", classic.bellman, lambda d: layered(POS_INF, ZERO)),
    ]
    report = []
    for name, oracle, rule in rules:
        worst = 0.0
        for _ in range(num_trees):
            depth = int(rng.integers(1, 6))
            if name == "bellman":
                depth = 2 * int(rng.integers(1, 3))
            tree = random_tree(rng, depth, (2, 4), rule(depth))
            got = solve(tree).value[tree.root]
            want = oracle(to_typed(tree))
            worst = max(worst, abs(got - want))
        report.append((name, worst, num_trees))
    return report


def cmd_limits_check(args) -> int:
    if args.num_trees < 1:
        raise DomainError("--num-trees must be at least 1")
    report = limits_report(args.seed, args.num_trees)
    rows = [["rule", "trees", "max_abs_discrepancy", "pass"]]
    ok = True
    for name, worst, n in report:
        passed = worst < LIMIT_TOL
        ok &= passed
        rows.append([name, n, _fmt(worst), "true" if passed else "false"])
    _emit(_csv(rows), args.out)
    return 0 if ok else 2


def cmd_sample_bound(args) -> int:
    spec = _read_json(args.model)
    if args.alpha_max < 1:
        raise DomainError("--alpha-max must be at least 1")
    if args.trials < 0:
        raise DomainError("--trials must be nonnegative")
    try:
        model = SampleModel.from_json(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"{args.model}: invalid model: {exc}") from exc
    reports = check_bound(model, list(range(1, args.alpha_max + 1)))
    header = [
        "alpha", "sup_gap", "delta", "xi", "stated_bound", "bound_satisfied",
        "delta_max", "stated_bound_max", "bound_satisfied_max", "mc_trials", "mc_tv",
    ]
    rows = [header]
    for rep in reports:
        mc = ["", ""]
        if args.trials:
            empirical = monte_carlo_max(model, rep.alpha, args.trials, args.seed)
            analytic = max_of_alpha_distribution(model.m, model.u, rep.alpha)
            mc = [args.trials, _fmt(total_variation(empirical, analytic))]
        rows.append(
            [
                rep.alpha, _fmt(rep.sup_gap), _fmt(rep.delta), _fmt(rep.xi), _fmt(rep.stated_bound),
                "true" if rep.bound_satisfied else "false",
                _fmt(rep.delta_max), _fmt(rep.stated_bound_max),
                "true" if rep.bound_satisfied_max else "false",
                *mc,
            ]
        )
    _emit(_csv(rows), args.out)
    return 0


# ---------------------------------------------------------------------------


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _real(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise argparse.ArgumentTypeError("NaN is not allowed")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output to PATH instead of stdout")
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="unsigned 64-bit seed (default 0xF3EE)")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    parser = argparse.ArgumentParser(prog="fetree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve a decision tree")
    p.add_argument("tree")
    p.set_defaults(func=cmd_solve, default_format="json")

    p = sub.add_parser("transform", parents=[common], help="re-express a uniform-alpha tree under per-node betas")
    p.add_argument("tree")
    p.add_argument("--alpha", type=_real, required=True, help="source inverse temperature (finite, nonzero)")
    p.add_argument("--betas", required=True, help="JSON object: node id -> target beta")
    p.set_defaults(func=cmd_transform, default_format="json")

    p = sub.add_parser("limits-check", parents=[common], help="solver vs classic oracles on random trees")
    p.add_argument("--num-trees", type=int, default=200)
    p.set_defaults(func=cmd_limits_check, default_format="csv")

    p = sub.add_parser("sample-bound", parents=[common], help="Boltzmann vs max-of-alpha sweep")
    p.add_argument("model")
    p.add_argument("--alpha-max", type=int, default=64)
    p.add_argument("--trials", type=int, default=10000, help="Monte Carlo trials per alpha; 0 disables")
    p.set_defaults(func=cmd_sample_bound, default_format="csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.format is None:
        args.format = args.default_format
    elif args.func is not cmd_solve and args.format != args.default_format:
        _diag("error", f"{args.command} only writes {args.default_format}")
        return 2
    try:
        return args.func(args)
    except InputError as exc:
        _diag("error", str(exc), exit=1)
        return 1
    except (DomainError, ValueError, KeyError, TypeError) as exc:
        _diag("error", str(exc), exit=2)
        return 2


if __name__ == "__main__":
    sys.exit(main())
