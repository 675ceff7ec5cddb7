"""Seeded random trees, named example trees, and the beta <-> node-kind mapping."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import classic
from .tree import NEG_INF, POS_INF, ZERO, DecisionTree, Edge, InverseTemperature, Kind, Node

BetaRule = Callable[[int, np.random.Generator], InverseTemperature]

KIND_OF_BETA = {Kind.POS_INF: classic.MAX, Kind.NEG_INF: classic.MIN, Kind.ZERO: classic.CHANCE}
BETA_OF_KIND = {classic.MAX: POS_INF, classic.MIN: NEG_INF, classic.CHANCE: ZERO}


def layered(*betas: InverseTemperature) -> BetaRule:
    """Cycle through ``betas`` by depth."""
    return lambda depth, rng: betas[depth % len(betas)]


def uniform_beta(beta: InverseTemperature) -> BetaRule:
    return lambda depth, rng: beta


def random_limit_beta(depth: int, rng: np.random.Generator) -> InverseTemperature:
    return (POS_INF, ZERO, NEG_INF)[rng.integers(3)]


def random_finite_beta(depth: int, rng: np.random.Generator, low: float = 0.2, high: float = 3.0) -> InverseTemperature:
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return InverseTemperature.finite(sign * rng.uniform(low, high))


def random_tree(
    rng: np.random.Generator,
    depth: int,
    branching: tuple[int, int] = (2, 4),
    beta_rule: BetaRule = layered(POS_INF, ZERO),
    reward_range: tuple[float, float] = (-1.0, 1.0),
    leaf_range: tuple[float, float] | None = None,
) -> DecisionTree:
    """Full tree of the given depth with random branching, q-rows and rewards.

    q-rows are Dirichlet(1) draws floored away from zero and renormalized.
    """
    nodes: dict[str, Node] = {}
    counter = 0

    def grow(d):
        nonlocal counter
        node_id = f"n{counter}"
        counter += 1
        if d == depth:
            leaf = rng.uniform(*leaf_range) if leaf_range else 0.0
            nodes[node_id] = Node(node_id, ZERO, (), float(leaf))
            return node_id
        k = int(rng.integers(branching[0], branching[1] + 1))
        beta = beta_rule(d, rng)
        q = rng.dirichlet(np.ones(k)) + 0.01
        q = q / q.sum()
        q[-1] = 1.0 - q[:-1].sum()
        nodes[node_id] = None  # reserve insertion order: parent before children
        edges = []
        for i in range(k):
            child = grow(d + 1)
            edges.append(Edge(str(i), float(q[i]), float(rng.uniform(*reward_range)), child))
        nodes[node_id] = Node(node_id, beta, tuple(edges), 0.0)
        return node_id

    root = grow(0)
    return DecisionTree(nodes, root, depth)


def full_tree(depth: int, branching: int, beta: InverseTemperature, seed: int = 0) -> DecisionTree:
    """Complete ``branching``-ary tree with one beta everywhere and seeded q-rows and rewards."""
    rng = np.random.default_rng(seed)
    return random_tree(rng, depth, (branching, branching), uniform_beta(beta))


def to_typed(tree: DecisionTree, node_id: str | None = None) -> classic.TypedTree:
    """Re-express a limit-temperature tree as a typed game tree."""
    node = tree[tree.root if node_id is None else node_id]
    if node.is_leaf:
        return classic.TypedTree(None, [], node.leaf_value)
    if node.beta.kind not in KIND_OF_BETA:
        raise ValueError(f"node {node.id!r} has finite beta {node.beta!r}; no classic node kind matches")
    return classic.TypedTree(
        KIND_OF_BETA[node.beta.kind],
        [(e.label, e.q, e.r, to_typed(tree, e.child)) for e in node.edges],
    )


def from_typed(t: classic.TypedTree) -> DecisionTree:
    """Re-express a typed game tree as a decision tree with limit temperatures."""
    nodes: dict[str, Node] = {}
    counter = 0
    depths = set()

    def walk(sub, d):
        nonlocal counter
        node_id = f"n{counter}"
        counter += 1
        if sub.is_leaf:
            depths.add(d)
            nodes[node_id] = Node(node_id, ZERO, (), sub.leaf_value)
            return node_id
        nodes[node_id] = None
        edges = tuple(Edge(lab, q, r, walk(child, d + 1)) for lab, q, r, child in sub.children)
        nodes[node_id] = Node(node_id, BETA_OF_KIND[sub.kind], edges, 0.0)
        return node_id

    root = walk(t, 0)
    return DecisionTree(nodes, root, max(depths))


def mixed_game_tree() -> dict:
    """Max / chance / min / leaves: the mixed game tree shape, as JSON."""
    leaves = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]
    nodes: dict[str, dict] = {}
    nodes["root"] = {"beta": "inf", "edges": []}
    k = 0
    for a in range(2):
        chance = f"c{a}"
        nodes["root"]["edges"].append({"label": f"a{a}", "q": 0.5, "r": 0.0, "child": chance})
        nodes[chance] = {"beta": 0, "edges": []}
        for s, q in enumerate((0.25, 0.75)):
            mn = f"m{a}{s}"
            nodes[chance]["edges"].append({"label": f"s{s}", "q": q, "r": 0.0, "child": mn})
            nodes[mn] = {"beta": "-inf", "edges": []}
            for b in range(2):
                leaf = f"l{a}{s}{b}"
                nodes[mn]["edges"].append({"label": f"b{b}", "q": 0.5, "r": 0.0, "child": leaf})
                nodes[leaf] = {"beta": 0, "leaf_value": leaves[k]}
                k += 1
    return {"horizon": 3, "root": "root", "nodes": nodes}
