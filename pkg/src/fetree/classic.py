"""Reference Expectimax / Minimax / Expectiminimax evaluators.

These are deliberately plain recursive functions over a nested tree of
max, min and chance nodes. They share no numeric code with
:mod:`fetree.solver` and serve as oracles for its limit cases.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

MAX = "max"
MIN = "min"
CHANCE = "chance"
KINDS = (MAX, MIN, CHANCE)


class OracleError(ValueError):
    pass


@dataclass
class TypedTree:
    """A node of a typed game tree; ``children`` holds ``(label, q, r, subtree)``."""

    kind: str | None = None
    children: list[tuple[str, float, float, "TypedTree"]] = field(default_factory=list)
    leaf_value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def kinds(self) -> set[str]:
        if self.is_leaf:
            return set()
        out = {self.kind}
        for _, _, _, sub in self.children:
            out |= sub.kinds()
        return out

    def map_kinds(self, mapping: Mapping[str, str]) -> TypedTree:
        if self.is_leaf:
            return TypedTree(None, [], self.leaf_value)
        kind = mapping.get(self.kind, self.kind)
        return TypedTree(kind, [(lab, q, r, sub.map_kinds(mapping)) for lab, q, r, sub in self.children])


def typed_tree_from_json(spec: Mapping[str, Any]) -> TypedTree:
    """Parse the tree JSON schema with ``"kind"`` in place of ``"beta"``."""
    nodes = spec["nodes"]

    def build(node_id, seen):
        if node_id in seen:
            raise OracleError(f"node {node_id!r} reached twice")
        seen.add(node_id)
        raw = nodes[node_id]
        edges = raw.get("edges", [])
        if not edges:
            return TypedTree(None, [], float(raw.get("leaf_value", 0.0)))
        kind = raw["kind"]
        if kind not in KINDS:
            raise OracleError(f"unknown node kind {kind!r}")
        children = [(e["label"], float(e["q"]), float(e["r"]), build(e["child"], seen)) for e in edges]
        return TypedTree(kind, children)

    return build(spec["root"], set())


def load_typed_tree(path) -> TypedTree:
    with open(path) as fh:
        return typed_tree_from_json(json.load(fh))


def _require(t: TypedTree, allowed: tuple[str, ...], rule: str):
    bad = t.kinds() - set(allowed)
    if bad:
        raise OracleError(f"{rule} does not accept node kinds {sorted(bad)}")


def _value(t: TypedTree) -> float:
    if t.is_leaf:
        return t.leaf_value
    if t.kind == MAX:
        best = None
        for _, _, r, sub in t.children:
            v = r + _value(sub)
            if best is None or v > best:
                best = v
        return best
    if t.kind == MIN:
        worst = None
        for _, _, r, sub in t.children:
            v = r + _value(sub)
            if worst is None or v < worst:
                worst = v
        return worst
    acc = 0.0
    for _, q, r, sub in t.children:
        acc += q * (r + _value(sub))
    return acc


def expectimax(t: TypedTree) -> float:
    _require(t, (MAX, CHANCE), "expectimax")
    return _value(t)


def minimax(t: TypedTree) -> float:
    _require(t, (MAX, MIN), "minimax")
    return _value(t)


def expectiminimax(t: TypedTree) -> float:
    _require(t, KINDS, "expectiminimax")
    return _value(t)


def bellman(t: TypedTree) -> float:
    """Max-of-expectations over alternating decision and chance layers.

    Written directly as ``V(s) = max_a { r_a + E[r' + V(s')] }`` with the
    chance layer folded into the decision step.
    """
    if t.is_leaf:
        return t.leaf_value
    if t.kind != MAX:
        raise OracleError("bellman expects a decision node at every even layer")
    best = None
    for _, _, r, chance in t.children:
        if chance.is_leaf:
            raise OracleError("bellman expects decision layers to be followed by chance layers")
        if chance.kind != CHANCE:
            raise OracleError("bellman expects a chance node after every decision node")
        expected = 0.0
        for _, q, r2, nxt in chance.children:
            expected += q * (r2 + bellman(nxt))
        v = r + expected
        if best is None or v > best:
            best = v
    return best
