"""Single-variable free-energy machinery and its lift to trajectories.

All Boltzmann weights are evaluated as ``exp(alpha*u + log q - shift)`` with
``shift`` the largest exponent, so nothing overflows for any finite input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .tree import (
    NEG_INF,
    POS_INF,
    ZERO,
    DecisionTree,
    Edge,
    InverseTemperature,
    Kind,
    Node,
    TreeError,
    iter_trajectories,
    policy_row,
)

NORM_TOL = 1e-12
TIE_TOL = 1e-9


def _default_support(n: int) -> tuple[str, ...]:
    return tuple(str(i) for i in range(n))


@dataclass(frozen=True, eq=False)
class Distribution:
    """Finite probability vector over an ordered set of distinct labels."""

    support: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "support", tuple(self.support))
        if probs.ndim != 1 or len(probs) != len(self.support) or len(probs) == 0:
            raise ValueError("support and probs must be nonempty and of equal length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support labels must be distinct")
        if not np.all(probs >= 0.0):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def from_probs(cls, probs: Sequence[float], support: Sequence[str] | None = None) -> Distribution:
        probs = np.asarray(probs, dtype=float)
        return cls(_default_support(len(probs)) if support is None else tuple(support), probs)

    @classmethod
    def uniform(cls, support: Sequence[str] | int) -> Distribution:
        if isinstance(support, int):
            support = _default_support(support)
        n = len(support)
        return cls(tuple(support), np.full(n, 1.0 / n))

    def __len__(self):
        return len(self.support)

    def __getitem__(self, label: str) -> float:
        return float(self.probs[self.support.index(label)])

    def as_dict(self) -> dict[str, float]:
        return {k: float(p) for k, p in zip(self.support, self.probs)}

    def __repr__(self):
        return f"Distribution({self.as_dict()})"


@dataclass(frozen=True, eq=False)
class UtilityVector:
    support: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "support", tuple(self.support))
        if values.ndim != 1 or len(values) != len(self.support):
            raise ValueError("support and values must be of equal length")
        if not np.all(np.isfinite(values)):
            raise ValueError("utilities must be finite")

    def __len__(self):
        return len(self.support)


def as_distribution(p, support: Sequence[str] | None = None) -> Distribution:
    if isinstance(p, Distribution):
        return p
    return Distribution.from_probs(p, support)


def as_utility(u, support: Sequence[str]) -> UtilityVector:
    if isinstance(u, UtilityVector):
        if u.support != tuple(support):
            raise ValueError(f"utility support {u.support} does not match {tuple(support)}")
        return u
    return UtilityVector(tuple(support), np.asarray(u, dtype=float))


def _check_same_support(*dists):
    first = dists[0].support
    for d in dists[1:]:
        if d.support != first:
            raise ValueError(f"support mismatch: {first} vs {d.support}")


def _require_positive(d: Distribution, name: str):
    if not np.all(d.probs > 0.0):
        raise ValueError(f"{name} must be strictly positive")


def _arg_extremum_mask(values: np.ndarray, maximize: bool, tol: float) -> np.ndarray:
    if maximize:
        return values >= values.max() - tol
    return values <= values.min() + tol


def _renormalize(weights: np.ndarray) -> np.ndarray:
    out = weights / weights.sum()
    # one extra pass brings the sum within an ulp or two of 1
    return out / math.fsum(out)


def equilibrium_distribution(q, u, alpha: InverseTemperature, tie_tol: float = TIE_TOL) -> Distribution:
    """P(x) proportional to q(x) exp(alpha u(x)).

    At infinite ``alpha`` the result is ``q`` restricted to the arg-max
    (arg-min for ``NEG_INF``) of ``u`` and renormalized; ties are decided with
    the absolute tolerance ``tie_tol``.
    """
    q = as_distribution(q)
    u = as_utility(u, q.support)
    _require_positive(q, "q")
    alpha = InverseTemperature.of(alpha)
    if alpha.kind is Kind.ZERO:
        return q
    if alpha.is_infinite:
        mask = _arg_extremum_mask(u.values, alpha.kind is Kind.POS_INF, tie_tol)
        return Distribution(q.support, _renormalize(np.where(mask, q.probs, 0.0)))
    a = alpha.value * u.values + np.log(q.probs)
    w = np.exp(a - a.max())
    return Distribution(q.support, _renormalize(w))


def _log_partition(q: Distribution, u: UtilityVector, alpha: float) -> float:
    a = alpha * u.values + np.log(q.probs)
    shift = a.max()
    return shift + math.log(math.fsum(np.exp(a - shift)))


def extremum_value(q, u, alpha: InverseTemperature) -> float:
    """Certainty equivalent (1/alpha) log sum q exp(alpha u), with its three limits."""
    q = as_distribution(q)
    u = as_utility(u, q.support)
    alpha = InverseTemperature.of(alpha)
    if alpha.kind is Kind.POS_INF:
        return float(u.values.max())
    if alpha.kind is Kind.NEG_INF:
        return float(u.values.min())
    if alpha.kind is Kind.ZERO:
        return math.fsum(q.probs * u.values)
    _require_positive(q, "q")
    value = _log_partition(q, u, alpha.value) / alpha.value
    # rounding can push the result a hair outside the hull of u
    return min(max(value, float(u.values.min())), float(u.values.max()))


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats with 0 log 0 = 0."""
    p = as_distribution(p)
    q = as_distribution(q, p.support)
    _check_same_support(p, q)
    pos = p.probs > 0.0
    if np.any(q.probs[pos] <= 0.0):
        raise ValueError("p is not absolutely continuous with respect to q")
    return math.fsum(p.probs[pos] * np.log(p.probs[pos] / q.probs[pos]))


def free_energy_value(p, q, u, alpha: InverseTemperature) -> float:
    """Expected utility minus the (1/alpha)-weighted divergence from q to p.

    Infinite ``alpha`` drops the divergence term (1/alpha = 0). At zero
    ``alpha`` the functional is finite only when p = q.
    """
    p = as_distribution(p)
    q = as_distribution(q, p.support)
    _check_same_support(p, q)
    u = as_utility(u, p.support)
    alpha = InverseTemperature.of(alpha)
    expected = math.fsum(p.probs * u.values)
    kl = kl_divergence(p, q)
    if alpha.is_infinite:
        return expected
    if alpha.kind is Kind.ZERO:
        if kl > NORM_TOL:
            raise ValueError("free energy diverges at zero inverse temperature unless p equals q")
        return expected
    return expected - kl / alpha.value


def temperature_change_utility(u, p, q, alpha: InverseTemperature, beta: InverseTemperature) -> UtilityVector:
    """Utilities that keep ``p`` as the equilibrium when alpha is replaced by beta.

    Returns ``u - (1/alpha - 1/beta) log(p/q)``; infinite temperatures use
    1/inf = 0 and zero temperatures are rejected.
    """
    p = as_distribution(p)
    q = as_distribution(q, p.support)
    _check_same_support(p, q)
    u = as_utility(u, p.support)
    _require_positive(p, "p")
    _require_positive(q, "q")
    alpha, beta = InverseTemperature.of(alpha), InverseTemperature.of(beta)
    if ZERO in (alpha, beta):
        raise ValueError("temperature change to or from a zero inverse temperature is undefined")
    if alpha == beta:
        return u
    coeff = alpha.reciprocal() - beta.reciprocal()
    return UtilityVector(u.support, u.values - coeff * np.log(p.probs / q.probs))


# ---------------------------------------------------------------------------
# Trees


def utilities_from_rewards(tree: DecisionTree, root_utility: float = 0.0) -> dict[str, float]:
    """U at every node as the root utility plus accumulated rewards; leaves add leaf_value."""
    out = {tree.root: root_utility}
    stack = [tree.root]
    while stack:
        node = tree[stack.pop()]
        for e in node.edges:
            child = tree[e.child]
            out[e.child] = out[node.id] + e.r + (child.leaf_value if child.is_leaf else 0.0)
            stack.append(e.child)
    return {k: out[k] for k in tree.nodes}


def _check_utilities(tree: DecisionTree, utilities: Mapping[str, float]):
    missing = [k for k in tree.nodes if k not in utilities]
    if missing:
        raise TreeError(f"utilities missing for nodes {missing[:5]}")


def _uniform_alpha(tree: DecisionTree) -> InverseTemperature:
    betas = {tree[k].beta for k in tree.internal_nodes()}
    if len(betas) != 1:
        raise TreeError(f"source tree must carry one inverse temperature on every internal node, found {sorted(betas)}")
    (alpha,) = betas
    if not alpha.is_finite:
        raise TreeError(f"source inverse temperature must be finite and nonzero, got {alpha!r}")
    return alpha


def telescoped_tree(tree: DecisionTree, utilities: Mapping[str, float], beta: InverseTemperature) -> DecisionTree:
    """Same shape, every internal beta set to ``beta``, rewards U(child) - U(parent), leaf values 0."""
    _check_utilities(tree, utilities)
    nodes = {}
    for k, n in tree.nodes.items():
        edges = tuple(Edge(e.label, e.q, utilities[e.child] - utilities[k], e.child) for e in n.edges)
        nodes[k] = Node(k, beta if edges else n.beta, edges, 0.0)
    return DecisionTree(nodes, tree.root, tree.horizon)


def transform_rewards(
    tree: DecisionTree,
    utilities: Mapping[str, float],
    policy: Mapping[str, object],
    alpha: InverseTemperature,
    target_betas: Mapping[str, InverseTemperature],
) -> DecisionTree:
    """Re-express utilities at temperature ``alpha`` as rewards under per-node ``target_betas``.

    Each edge gets ``[U(child) - U(node)] - (1/alpha - 1/beta(node)) log(P/Q)``
    where P is ``policy``'s row at the node. Leaf values are zeroed. Nodes
    absent from ``target_betas`` keep ``alpha``.
    """
    _check_utilities(tree, utilities)
    alpha = InverseTemperature.of(alpha)
    if alpha.kind is Kind.ZERO:
        raise ValueError("source inverse temperature must be nonzero")
    nodes = {}
    for k, n in tree.nodes.items():
        if n.is_leaf:
            nodes[k] = Node(k, target_betas.get(k, n.beta), (), 0.0)
            continue
        beta = InverseTemperature.of(target_betas.get(k, alpha))
        if beta.kind is Kind.ZERO:
            raise ValueError(f"target inverse temperature at {k!r} is zero; the reward transform needs 1/beta")
        if k not in policy:
            raise TreeError(f"policy is missing node {k!r}")
        row = policy_row(tree, k, policy[k])
        coeff = alpha.reciprocal() - beta.reciprocal()
        edges = []
        for e, p in zip(n.edges, row):
            if p <= 0.0:
                raise ValueError(f"policy puts zero mass on edge {e.label!r} at {k!r}")
            r = utilities[e.child] - utilities[k]
            if coeff != 0.0:
                r -= coeff * math.log(p / e.q)
            edges.append(Edge(e.label, e.q, r, e.child))
        nodes[k] = Node(k, beta, tuple(edges), 0.0)
    return DecisionTree(nodes, tree.root, tree.horizon)


def transform_tree(
    tree: DecisionTree,
    utilities: Mapping[str, float],
    target_betas: Mapping[str, InverseTemperature],
) -> DecisionTree:
    """Translate a uniform-temperature tree into one with per-node temperatures.

    The equilibrium over whole trajectories at the source temperature is
    computed by solving the telescoped uniform tree; the rewards of the output
    tree are chosen so that this same equilibrium is recovered when the
    output tree is solved with ``target_betas``.
    """
    from .solver import solve

    alpha = _uniform_alpha(tree)
    result = solve(telescoped_tree(tree, utilities, alpha))
    return transform_rewards(tree, utilities, result.policy, alpha, target_betas)


def trajectory_free_energy(
    tree: DecisionTree,
    policy: Mapping[str, object],
    utilities: Mapping[str, float],
    alpha: InverseTemperature,
    mode: str = "global",
) -> float:
    """Free energy of the trajectory distribution generated by ``policy``.

    ``mode="global"`` sums ``U(leaf) - (1/alpha) log(P/Q)`` over whole
    trajectories. ``mode="telescoped"`` instead uses the tree's own rewards
    and per-node temperatures, ``U(root) + sum_t [R - (1/beta) log(P_t/Q_t)]``
    (plus the leaf value, if any).
    """
    if mode not in ("global", "telescoped"):
        raise ValueError(f"mode must be 'global' or 'telescoped', got {mode!r}")
    alpha = InverseTemperature.of(alpha)
    if not alpha.is_finite:
        raise ValueError("alpha must be finite and nonzero")
    _check_utilities(tree, utilities)
    rows = {}
    for k in tree.internal_nodes():
        if k not in policy:
            raise TreeError(f"policy is missing node {k!r}")
        row = policy_row(tree, k, policy[k])
        if min(row) <= 0.0:
            raise ValueError(f"policy row at {k!r} has a zero entry")
        rows[k] = row

    terms = []
    for traj in iter_trajectories(tree, rows):
        log_ratio = []
        rewards = []
        inv_betas = []
        for node_id, child_id in zip(traj.nodes[:-1], traj.nodes[1:]):
            node = tree[node_id]
            i = next(j for j, e in enumerate(node.edges) if e.child == child_id)
            edge = node.edges[i]
            log_ratio.append(math.log(rows[node_id][i] / edge.q))
            rewards.append(edge.r)
            inv_betas.append(node.beta.reciprocal() if node.beta.kind is not Kind.ZERO else None)
        if mode == "global":
            inner = utilities[traj.leaf] - math.fsum(log_ratio) / alpha.value
        else:
            if None in inv_betas:
                raise ValueError("telescoped free energy needs nonzero inverse temperatures on the path")
            inner = math.fsum(r - ib * lr for r, ib, lr in zip(rewards, inv_betas, log_ratio))
            inner += tree[traj.leaf].leaf_value
        terms.append(traj.probability * inner)
    total = math.fsum(terms)
    if mode == "telescoped":
        total += utilities[tree.root]
    return total


__all__ = [
    "Distribution",
    "UtilityVector",
    "equilibrium_distribution",
    "extremum_value",
    "free_energy_value",
    "kl_divergence",
    "temperature_change_utility",
    "telescoped_tree",
    "trajectory_free_energy",
    "transform_rewards",
    "transform_tree",
    "utilities_from_rewards",
    "POS_INF",
    "NEG_INF",
    "ZERO",
]
