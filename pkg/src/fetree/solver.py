"""Backward recursion for generalized optimality equations.

Each internal node combines the continuation values ``R + V(child)`` of its
edges with an operator chosen by its inverse temperature:

* finite beta -- ``(1/beta) log sum q exp(beta (R + V))`` (soft max/min),
* zero        -- expectation under ``q``,
* +inf / -inf -- max / min.

Leaves start the recursion at ``V = leaf_value``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .free_energy import TIE_TOL, Distribution
from .tree import DecisionTree, InverseTemperature, Kind, Node, TreeError, Trajectory, enumerate_trajectories


@dataclass(frozen=True)
class SolveResult:
    """Per-node value, log-partition (finite-beta nodes and leaves) and policy rows."""

    value: Mapping[str, float]
    log_partition: Mapping[str, float]
    policy: Mapping[str, Distribution]

    @property
    def nodes(self) -> set[str]:
        return set(self.value)


def _backup(node: Node, values: Mapping[str, float], tie_tol: float):
    """Value, log Z (or None) and policy probabilities for one internal node."""
    q = np.fromiter((e.q for e in node.edges), float, len(node.edges))
    cont = np.fromiter((e.r + values[e.child] for e in node.edges), float, len(node.edges))
    kind = node.beta.kind
    if kind is Kind.FINITE:
        beta = node.beta.value
        a = beta * cont + np.log(q)
        shift = a.max()
        w = np.exp(a - shift)
        total = math.fsum(w)
        log_z = shift + math.log(total)
        probs = w / total
        return log_z / beta, log_z, probs / math.fsum(probs)
    if kind is Kind.ZERO:
        return math.fsum(q * cont), None, q
    if kind is Kind.POS_INF:
        best = cont.max()
        mask = cont >= best - tie_tol
    else:
        best = cont.min()
        mask = cont <= best + tie_tol
    w = np.where(mask, q, 0.0)
    w = w / w.sum()
    return float(best), None, w / math.fsum(w)


def _solve_from(tree: DecisionTree, start: str, tie_tol: float, out_v, out_logz, out_pol):
    stack = [(start, False)]
    while stack:
        node_id, expanded = stack.pop()
        node = tree[node_id]
        if node.is_leaf:
            out_v[node_id] = node.leaf_value
            out_logz[node_id] = 0.0
            continue
        if not expanded:
            stack.append((node_id, True))
            for e in reversed(node.edges):
                stack.append((e.child, False))
            continue
        v, log_z, probs = _backup(node, out_v, tie_tol)
        out_v[node_id] = float(v)
        if log_z is not None:
            out_logz[node_id] = float(log_z)
        out_pol[node_id] = Distribution(node.labels, probs)


def solve(tree: DecisionTree, tie_tol: float = TIE_TOL, workers: int | None = None) -> SolveResult:
    """Solve ``tree`` leaves-to-root.

    With ``workers > 1`` the root's subtrees are solved on a thread pool. Each
    node's backup only reads its own children in edge order, so the result is
    bitwise identical to the sequential run.
    """
    value: dict[str, float] = {}
    log_partition: dict[str, float] = {}
    policy: dict[str, Distribution] = {}
    root = tree[tree.root]
    if workers and workers > 1 and not root.is_leaf:
        parts = [({}, {}, {}) for _ in root.edges]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_solve_from, tree, e.child, tie_tol, *part) for e, part in zip(root.edges, parts)
            ]
            for f in futures:
                f.result()
        for v, lz, pol in parts:
            value.update(v)
            log_partition.update(lz)
            policy.update(pol)
        v, log_z, probs = _backup(root, value, tie_tol)
        value[tree.root] = float(v)
        if log_z is not None:
            log_partition[tree.root] = float(log_z)
        policy[tree.root] = Distribution(root.labels, probs)
    else:
        _solve_from(tree, tree.root, tie_tol, value, log_partition, policy)
    order = list(tree.nodes)
    return SolveResult(
        {k: value[k] for k in order},
        {k: log_partition[k] for k in order if k in log_partition},
        {k: policy[k] for k in order if k in policy},
    )


def equilibrium_trajectory_distribution(tree: DecisionTree, result: SolveResult) -> list[Trajectory]:
    """Chain the solved policy rows into a distribution over whole trajectories."""
    if set(result.value) != set(tree.nodes) or set(result.policy) != set(tree.internal_nodes()):
        raise TreeError("solve result does not belong to this tree")
    return enumerate_trajectories(tree, result.policy)


def value_curve(
    tree: DecisionTree, node: str, betas: Iterable[InverseTemperature], tie_tol: float = TIE_TOL
) -> list[tuple[InverseTemperature, float]]:
    """Root value as the inverse temperature of one internal node is swept."""
    if node not in tree.nodes:
        raise TreeError(f"unknown node {node!r}")
    if tree[node].is_leaf:
        raise TreeError(f"node {node!r} is a leaf; only internal nodes have an operator to sweep")
    out = []
    for beta in betas:
        beta = InverseTemperature.of(beta)
        result = solve(tree.with_betas({node: beta}), tie_tol=tie_tol)
        out.append((beta, result.value[tree.root]))
    return out


def max_scaled_magnitude(tree: DecisionTree, result: SolveResult) -> float:
    """Largest |beta (R + V(child))| over finite-beta edges, before any shift."""
    worst = 0.0
    for k in tree.internal_nodes():
        node = tree[k]
        if node.beta.is_finite:
            for e in node.edges:
                worst = max(worst, abs(node.beta.value * (e.r + result.value[e.child])))
    return worst
