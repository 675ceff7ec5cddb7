"""Generalized decision trees with a per-node inverse temperature.

A tree is an arena of :class:`Node` objects keyed by id. Each internal node
owns an ordered list of :class:`Edge` objects carrying the base probability
``q`` and the immediate reward ``r`` of the transition. Trees are validated
on construction and immutable afterwards.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Any, Iterator, Mapping, Sequence

Q_SUM_TOL = 1e-12


class TreeError(ValueError):
    """A tree (or policy over a tree) violates a structural invariant."""


class SchemaError(TreeError):
    """The JSON description does not follow the tree schema."""


class Kind(enum.Enum):
    NEG_INF = "neg_inf"
    FINITE = "finite"
    ZERO = "zero"
    POS_INF = "pos_inf"


@functools.total_ordering
@dataclass(frozen=True)
class InverseTemperature:
    """Extended-real inverse temperature with exact zero and infinite variants.

    Use :meth:`finite` or the module constants ``ZERO``, ``POS_INF`` and
    ``NEG_INF`` rather than calling the constructor directly.
    """

    kind: Kind
    value: float = 0.0

    def __post_init__(self):
        if self.kind is Kind.FINITE:
            if not math.isfinite(self.value) or self.value == 0.0:
                raise ValueError(f"finite inverse temperature must be nonzero and finite, got {self.value!r}")
        elif self.value != 0.0:
            raise ValueError(f"{self.kind.name} carries no payload")

    @classmethod
    def finite(cls, value: float) -> InverseTemperature:
        return cls(Kind.FINITE, float(value))

    @classmethod
    def of(cls, x: float) -> InverseTemperature:
        """Map a float onto the matching variant (0 -> ZERO, +-inf -> POS_INF/NEG_INF)."""
        if isinstance(x, InverseTemperature):
            return x
        x = float(x)
        if math.isnan(x):
            raise ValueError("inverse temperature cannot be NaN")
        if x == 0.0:
            return ZERO
        if x == math.inf:
            return POS_INF
        if x == -math.inf:
            return NEG_INF
        return cls.finite(x)

    @classmethod
    def from_json(cls, raw: Any) -> InverseTemperature:
        if isinstance(raw, str):
            if raw == "inf":
                return POS_INF
            if raw == "-inf":
                return NEG_INF
            raise SchemaError(f"beta string must be 'inf' or '-inf', got {raw!r}")
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise SchemaError(f"beta must be a number or 'inf'/'-inf', got {raw!r}")
        if not math.isfinite(raw):
            raise SchemaError("infinite beta must be written as the string 'inf' or '-inf'")
        return cls.of(raw)

    def to_json(self) -> float | int | str:
        if self.kind is Kind.POS_INF:
            return "inf"
        if self.kind is Kind.NEG_INF:
            return "-inf"
        if self.kind is Kind.ZERO:
            return 0
        return self.value

    def __float__(self) -> float:
        if self.kind is Kind.POS_INF:
            return math.inf
        if self.kind is Kind.NEG_INF:
            return -math.inf
        return self.value

    def __lt__(self, other):
        if not isinstance(other, InverseTemperature):
            return NotImplemented
        return float(self) < float(other)

    @property
    def is_finite(self) -> bool:
        return self.kind is Kind.FINITE

    @property
    def is_infinite(self) -> bool:
        return self.kind in (Kind.POS_INF, Kind.NEG_INF)

    def reciprocal(self) -> float:
        """1/beta with the limit convention 1/(+-inf) = 0; undefined at zero."""
        if self.kind is Kind.ZERO:
            raise ZeroDivisionError("1/beta is undefined for a zero inverse temperature")
        if self.is_infinite:
            return 0.0
        return 1.0 / self.value

    def __repr__(self):
        if self.kind is Kind.FINITE:
            return f"Finite({self.value!r})"
        return {Kind.ZERO: "Zero", Kind.POS_INF: "PosInf", Kind.NEG_INF: "NegInf"}[self.kind]


ZERO = InverseTemperature(Kind.ZERO)
POS_INF = InverseTemperature(Kind.POS_INF)
NEG_INF = InverseTemperature(Kind.NEG_INF)


@dataclass(frozen=True)
class Edge:
    label: str
    q: float
    r: float
    child: str


@dataclass(frozen=True)
class Node:
    id: str
    beta: InverseTemperature
    edges: tuple[Edge, ...] = ()
    leaf_value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return not self.edges

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.edges)


@dataclass(frozen=True)
class DecisionTree:
    """Validated rooted tree of fixed horizon.

    Every leaf sits at depth exactly ``horizon``; every node in ``nodes`` is
    reachable from ``root`` through exactly one parent.
    """

    nodes: Mapping[str, Node]
    root: str
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", MappingProxyType(dict(self.nodes)))
        self._validate()

    def _validate(self):
        if isinstance(self.horizon, bool) or not isinstance(self.horizon, int) or self.horizon < 1:
            raise TreeError(f"horizon must be a positive integer, got {self.horizon!r}")
        if self.root not in self.nodes:
            raise TreeError(f"root {self.root!r} is not a node")
        for node_id, node in self.nodes.items():
            if node.id != node_id:
                raise TreeError(f"node keyed {node_id!r} carries id {node.id!r}")
            if not isinstance(node.beta, InverseTemperature):
                raise TreeError(f"node {node_id!r}: beta must be an InverseTemperature")
            if not math.isfinite(node.leaf_value):
                raise TreeError(f"node {node_id!r}: leaf_value must be finite")
            if node.is_leaf:
                continue
            if node.leaf_value != 0.0:
                raise TreeError(f"node {node_id!r}: nonzero leaf_value on an internal node")
            labels = node.labels
            if len(set(labels)) != len(labels):
                raise TreeError(f"node {node_id!r}: duplicate edge labels")
            for e in node.edges:
                if not (e.q > 0.0) or not math.isfinite(e.q) or e.q > 1.0:
                    raise TreeError(f"node {node_id!r}: edge {e.label!r} has q={e.q!r} outside (0, 1]")
                if not math.isfinite(e.r):
                    raise TreeError(f"node {node_id!r}: edge {e.label!r} has a non-finite reward")
            total = math.fsum(e.q for e in node.edges)
            if abs(total - 1.0) > Q_SUM_TOL:
                raise TreeError(f"node {node_id!r}: q-row sums to {total!r}, not 1")

        depth = {self.root: 0}
        stack = [self.root]
        while stack:
            node = self.nodes[stack.pop()]
            for e in node.edges:
                if e.child not in self.nodes:
                    raise TreeError(f"node {node.id!r}: edge {e.label!r} points to unknown node {e.child!r}")
                if e.child in depth:
                    raise TreeError(f"node {e.child!r} is reached twice (cycle or shared child)")
                depth[e.child] = depth[node.id] + 1
                stack.append(e.child)
        unreachable = [k for k in self.nodes if k not in depth]
        if unreachable:
            raise TreeError(f"nodes unreachable from root: {unreachable[:5]}")
        for node_id, node in self.nodes.items():
            if node.is_leaf and depth[node_id] != self.horizon:
                raise TreeError(
                    f"leaf {node_id!r} at depth {depth[node_id]} but horizon is {self.horizon} "
                    "(leaf depths must be uniform and equal to the horizon)"
                )
        object.__setattr__(self, "_depth", MappingProxyType(depth))

    @property
    def depth(self) -> Mapping[str, int]:
        return self._depth

    def __getitem__(self, node_id: str) -> Node:
        return self.nodes[node_id]

    @cached_property
    def parent(self) -> Mapping[str, tuple[str, Edge]]:
        out = {}
        for node in self.nodes.values():
            for e in node.edges:
                out[e.child] = (node.id, e)
        return MappingProxyType(out)

    def internal_nodes(self) -> list[str]:
        return [k for k, n in self.nodes.items() if not n.is_leaf]

    def postorder(self) -> list[str]:
        """Node ids children-first, siblings in edge order."""
        order = []
        stack = [(self.root, False)]
        while stack:
            node_id, expanded = stack.pop()
            if expanded:
                order.append(node_id)
                continue
            stack.append((node_id, True))
            for e in reversed(self.nodes[node_id].edges):
                stack.append((e.child, False))
        return order

    def with_betas(self, betas: Mapping[str, InverseTemperature]) -> DecisionTree:
        nodes = {k: (Node(k, betas[k], n.edges, n.leaf_value) if k in betas else n) for k, n in self.nodes.items()}
        return DecisionTree(nodes, self.root, self.horizon)

    def to_json(self) -> dict:
        out = {}
        for k, n in self.nodes.items():
            entry: dict[str, Any] = {"beta": n.beta.to_json()}
            if n.leaf_value != 0.0:
                entry["leaf_value"] = n.leaf_value
            entry["edges"] = [{"label": e.label, "q": e.q, "r": e.r, "child": e.child} for e in n.edges]
            out[k] = entry
        return {"horizon": self.horizon, "root": self.root, "nodes": out}


def _number(raw, what):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise SchemaError(f"{what} must be a number, got {raw!r}")
    if not math.isfinite(raw):
        raise SchemaError(f"{what} must be finite")
    return float(raw)


def build_tree(spec: Mapping[str, Any]) -> DecisionTree:
    """Build a validated :class:`DecisionTree` from its JSON description.

    ``beta`` may be omitted on leaves, where it defaults to zero; it is never
    read there.
    """
    if not isinstance(spec, Mapping):
        raise SchemaError("tree description must be a JSON object")
    for key in ("horizon", "root", "nodes"):
        if key not in spec:
            raise SchemaError(f"missing top-level key {key!r}")
    horizon = spec["horizon"]
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise SchemaError("horizon must be an integer")
    if not isinstance(spec["root"], str):
        raise SchemaError("root must be a node-id string")
    raw_nodes = spec["nodes"]
    if not isinstance(raw_nodes, Mapping):
        raise SchemaError("nodes must be an object keyed by node id")

    nodes = {}
    for node_id, raw in raw_nodes.items():
        if not isinstance(raw, Mapping):
            raise SchemaError(f"node {node_id!r} must be an object")
        raw_edges = raw.get("edges", [])
        if not isinstance(raw_edges, Sequence) or isinstance(raw_edges, str):
            raise SchemaError(f"node {node_id!r}: edges must be a list")
        edges = []
        for raw_edge in raw_edges:
            if not isinstance(raw_edge, Mapping):
                raise SchemaError(f"node {node_id!r}: each edge must be an object")
            missing = {"label", "q", "r", "child"} - set(raw_edge)
            if missing:
                raise SchemaError(f"node {node_id!r}: edge missing {sorted(missing)}")
            if not isinstance(raw_edge["label"], str) or not isinstance(raw_edge["child"], str):
                raise SchemaError(f"node {node_id!r}: edge label and child must be strings")
            edges.append(
                Edge(
                    raw_edge["label"],
                    _number(raw_edge["q"], "q"),
                    _number(raw_edge["r"], "r"),
                    raw_edge["child"],
                )
            )
        if "beta" in raw:
            beta = InverseTemperature.from_json(raw["beta"])
        elif not edges:
            beta = ZERO
        else:
            raise SchemaError(f"internal node {node_id!r} is missing beta")
        leaf_value = _number(raw.get("leaf_value", 0), "leaf_value")
        nodes[node_id] = Node(node_id, beta, tuple(edges), leaf_value)
    return DecisionTree(nodes, spec["root"], horizon)


@dataclass(frozen=True)
class Trajectory:
    labels: tuple[str, ...]
    nodes: tuple[str, ...]
    probability: float

    @property
    def leaf(self) -> str:
        return self.nodes[-1]


def policy_row(tree: DecisionTree, node_id: str, row) -> tuple[float, ...]:
    """Coerce one policy row to a tuple of edge-ordered probabilities.

    ``row`` may be a :class:`~fetree.free_energy.Distribution` (matched by
    label), a label->prob mapping, or a plain sequence in edge order.
    """
    node = tree[node_id]
    labels = node.labels
    support = getattr(row, "support", None)
    if support is not None:
        lookup = dict(zip(support, (float(p) for p in row.probs)))
        if set(lookup) != set(labels):
            raise TreeError(f"policy row at {node_id!r} has support {tuple(support)} but edges are {labels}")
        probs = tuple(lookup[lab] for lab in labels)
    elif isinstance(row, Mapping):
        if set(row) != set(labels):
            raise TreeError(f"policy row at {node_id!r} has labels {sorted(row)} but edges are {labels}")
        probs = tuple(float(row[lab]) for lab in labels)
    else:
        probs = tuple(float(p) for p in row)
        if len(probs) != len(labels):
            raise TreeError(f"policy row at {node_id!r} has {len(probs)} entries for {len(labels)} edges")
    if any(not (p >= 0.0) for p in probs):
        raise TreeError(f"policy row at {node_id!r} has a negative or NaN entry")
    total = math.fsum(probs)
    if abs(total - 1.0) > Q_SUM_TOL:
        raise TreeError(f"policy row at {node_id!r} sums to {total!r}, not 1")
    return probs


def base_policy(tree: DecisionTree) -> dict[str, tuple[float, ...]]:
    """The uncontrolled policy: every row is the node's q-row."""
    return {k: tuple(e.q for e in tree[k].edges) for k in tree.internal_nodes()}


def iter_trajectories(tree: DecisionTree, policy: Mapping[str, Any]) -> Iterator[Trajectory]:
    rows = {}
    for node_id in tree.internal_nodes():
        if node_id not in policy:
            raise TreeError(f"policy is missing node {node_id!r}")
        rows[node_id] = policy_row(tree, node_id, policy[node_id])

    def walk(node_id, labels, path, prob):
        node = tree[node_id]
        if node.is_leaf:
            yield Trajectory(labels, path, prob)
            return
        for e, p in zip(node.edges, rows[node_id]):
            yield from walk(e.child, labels + (e.label,), path + (e.child,), prob * p)

    yield from walk(tree.root, (), (tree.root,), 1.0)


def enumerate_trajectories(tree: DecisionTree, policy: Mapping[str, Any]) -> list[Trajectory]:
    """All root-to-leaf paths in edge order, with their probability under ``policy``."""
    trajectories = list(iter_trajectories(tree, policy))
    total = math.fsum(t.probability for t in trajectories)
    if abs(total - 1.0) > Q_SUM_TOL:
        raise TreeError(f"trajectory probabilities sum to {total!r}")
    return trajectories
