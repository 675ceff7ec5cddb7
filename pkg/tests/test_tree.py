import copy
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fetree.fixtures import mixed_game_tree, random_tree, uniform_beta
from fetree.tree import (
    NEG_INF,
    POS_INF,
    ZERO,
    InverseTemperature,
    Kind,
    SchemaError,
    TreeError,
    build_tree,
    enumerate_trajectories,
)

from helpers import depth1


def binary(depth, beta=1):
    """Complete binary tree with uniform q; node ids are the label strings."""
    nodes = {}

    def grow(prefix):
        if len(prefix) == depth:
            nodes[prefix or "e"] = {"beta": 0}
            return
        nodes[prefix or "e"] = {
            "beta": beta,
            "edges": [{"label": b, "q": 0.5, "r": 0.0, "child": prefix + b} for b in "01"],
        }
        for b in "01":
            grow(prefix + b)

    grow("")
    return {"horizon": depth, "root": "e", "nodes": nodes}


class TestInverseTemperature:
    def test_total_order(self):
        ordered = [NEG_INF, InverseTemperature.finite(-3), InverseTemperature.finite(-0.1), ZERO,
                   InverseTemperature.finite(0.1), InverseTemperature.finite(7), POS_INF]
        assert sorted(reversed(ordered)) == ordered
        for a, b in zip(ordered, ordered[1:]):
            assert a < b and not b < a

    def test_finite_rejects_zero_and_inf(self):
        with pytest.raises(ValueError):
            InverseTemperature.finite(0.0)
        with pytest.raises(ValueError):
            InverseTemperature.finite(math.inf)
        with pytest.raises(ValueError):
            InverseTemperature(Kind.ZERO, 1.0)

    @pytest.mark.parametrize(
        "raw,expected",
        [(0, ZERO), (0.0, ZERO), ("inf", POS_INF), ("-inf", NEG_INF), (2.5, InverseTemperature.finite(2.5))],
    )
    def test_json_round_trip(self, raw, expected):
        beta = InverseTemperature.from_json(raw)
        assert beta == expected
        assert InverseTemperature.from_json(beta.to_json()) == beta

    @pytest.mark.parametrize("raw", [math.inf, -math.inf, "Infinity", True, None, [1]])
    def test_json_rejects(self, raw):
        with pytest.raises(SchemaError):
            InverseTemperature.from_json(raw)

    def test_reciprocal(self):
        assert POS_INF.reciprocal() == 0.0
        assert NEG_INF.reciprocal() == 0.0
        assert InverseTemperature.finite(4).reciprocal() == 0.25
        with pytest.raises(ZeroDivisionError):
            ZERO.reciprocal()


class TestBuildTree:
    def test_minimal_tree(self):
        tree = depth1()
        assert tree.horizon == 1
        assert tree.root == "s"
        assert [e.r for e in tree["s"].edges] == [0.0, 1.0]
        assert tree["x"].is_leaf

    def test_mixed_game_shape(self):
        tree = build_tree(mixed_game_tree())
        assert tree.horizon == 3
        kinds = {tree.depth[k]: tree[k].beta for k in tree.internal_nodes()}
        assert kinds == {0: POS_INF, 1: ZERO, 2: NEG_INF}

    def test_postorder_children_first(self):
        tree = build_tree(binary(2))
        order = tree.postorder()
        assert order == ["00", "01", "0", "10", "11", "1", "e"]

    def test_json_round_trip(self):
        spec = mixed_game_tree()
        tree = build_tree(spec)
        again = build_tree(json.loads(json.dumps(tree.to_json())))
        assert again.to_json() == tree.to_json()

    def test_q_row_not_normalized(self):
        spec = binary(1)
        spec["nodes"]["e"]["edges"][0]["q"] = 0.4
        with pytest.raises(TreeError, match="sums to"):
            build_tree(spec)

    def test_tolerance_is_1e12(self):
        spec = binary(1)
        spec["nodes"]["e"]["edges"][0]["q"] = 0.5 + 5e-13
        build_tree(spec)
        spec["nodes"]["e"]["edges"][0]["q"] = 0.5 + 5e-12
        with pytest.raises(TreeError):
            build_tree(spec)

    def test_duplicate_labels(self):
        spec = binary(1)
        spec["nodes"]["e"]["edges"][1]["label"] = "0"
        with pytest.raises(TreeError, match="duplicate"):
            build_tree(spec)

    @pytest.mark.parametrize("q", [0.0, -0.5])
    def test_nonpositive_q(self, q):
        spec = binary(1)
        spec["nodes"]["e"]["edges"][0]["q"] = q
        spec["nodes"]["e"]["edges"][1]["q"] = 1.0 - q
        with pytest.raises(TreeError):
            build_tree(spec)

    def test_cycle(self):
        spec = binary(2)
        spec["nodes"]["1"]["edges"][0]["child"] = "e"
        with pytest.raises(TreeError, match="reached twice"):
            build_tree(spec)

    def test_shared_child(self):
        spec = binary(2)
        spec["nodes"]["1"]["edges"][0]["child"] = "00"
        del spec["nodes"]["10"]
        with pytest.raises(TreeError, match="reached twice"):
            build_tree(spec)

    def test_ragged_depth(self):
        spec = binary(2)
        spec["nodes"]["1"] = {"beta": 0}
        for k in ("10", "11"):
            del spec["nodes"][k]
        with pytest.raises(TreeError, match="horizon"):
            build_tree(spec)

    def test_horizon_mismatch(self):
        spec = binary(2)
        spec["horizon"] = 3
        with pytest.raises(TreeError, match="horizon"):
            build_tree(spec)

    def test_leaf_value_on_internal_node(self):
        spec = binary(1)
        spec["nodes"]["e"]["leaf_value"] = 1.0
        with pytest.raises(TreeError, match="leaf_value"):
            build_tree(spec)

    def test_unknown_child_and_unreachable(self):
        spec = binary(1)
        spec["nodes"]["e"]["edges"][0]["child"] = "nope"
        with pytest.raises(TreeError, match="unknown"):
            build_tree(spec)
        spec = binary(1)
        spec["nodes"]["stray"] = {"beta": 0}
        with pytest.raises(TreeError, match="unreachable"):
            build_tree(spec)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda s: s.pop("root"),
            lambda s: s.update(horizon="2"),
            lambda s: s["nodes"]["e"].pop("beta"),
            lambda s: s["nodes"]["e"]["edges"][0].pop("q"),
            lambda s: s["nodes"]["e"]["edges"][0].update(q="0.5"),
            lambda s: s["nodes"]["e"].update(beta="hot"),
        ],
    )
    def test_schema_errors(self, mutate):
        spec = binary(1)
        mutate(spec)
        with pytest.raises(SchemaError):
            build_tree(spec)

    def test_tree_is_immutable(self):
        tree = depth1()
        with pytest.raises(TypeError):
            tree.nodes["z"] = tree["x"]


CORRUPTIONS = [
    ("q_scale", lambda s: s["nodes"]["e"]["edges"][0].update(q=s["nodes"]["e"]["edges"][0]["q"] * 0.9)),
    ("q_zero", lambda s: s["nodes"]["0"]["edges"][1].update(q=0.0)),
    ("dup_label", lambda s: s["nodes"]["1"]["edges"][1].update(label=s["nodes"]["1"]["edges"][0]["label"])),
    ("cycle", lambda s: s["nodes"]["1"]["edges"][0].update(child="e")),
    ("ragged", lambda s: (s["nodes"]["e"]["edges"][1].update(child="z"), s["nodes"].update(z={"beta": 0}))),
    ("leaf_value_internal", lambda s: s["nodes"]["1"].update(leaf_value=0.5)),
]


@settings(max_examples=60, deadline=None)
@given(
    depth=st.integers(2, 3),
    corruption=st.sampled_from(CORRUPTIONS),
    qs=st.lists(st.floats(0.05, 0.95), min_size=8, max_size=8),
)
def test_fuzzed_corruptions_rejected(depth, corruption, qs):
    spec = binary(depth)
    for i, node in enumerate(n for n in spec["nodes"].values() if n.get("edges")):
        q = qs[i % len(qs)]
        node["edges"][0]["q"], node["edges"][1]["q"] = q, 1.0 - q
    build_tree(copy.deepcopy(spec))
    _, mutate = corruption
    mutate(spec)
    with pytest.raises(TreeError):
        build_tree(spec)


class TestEnumerateTrajectories:
    def test_uniform_binary(self):
        tree = build_tree(binary(2))
        policy = {k: (0.5, 0.5) for k in tree.internal_nodes()}
        trajs = enumerate_trajectories(tree, policy)
        assert [t.labels for t in trajs] == [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]
        assert [t.probability for t in trajs] == [0.25] * 4
        assert trajs[1].nodes == ("e", "0", "01")

    def test_degenerate_policy(self):
        trajs = enumerate_trajectories(depth1(), {"s": {"a": 1.0, "b": 0.0}})
        assert [t.probability for t in trajs] == [1.0, 0.0]

    def test_branching3_depth3_random_policy(self, rng):
        tree = random_tree(rng, 3, (3, 3), uniform_beta(ZERO))
        policy = {k: rng.dirichlet(np.ones(3)) for k in tree.internal_nodes()}
        trajs = enumerate_trajectories(tree, policy)
        assert len(trajs) == 27
        # independent product-and-sum check
        for t in trajs:
            p = 1.0
            for parent, child in zip(t.nodes[:-1], t.nodes[1:]):
                i = [e.child for e in tree[parent].edges].index(child)
                p *= policy[parent][i]
            assert t.probability == p
        assert abs(math.fsum(t.probability for t in trajs) - 1.0) < 1e-12

    def test_missing_node(self):
        tree = build_tree(binary(2))
        with pytest.raises(TreeError, match="missing"):
            enumerate_trajectories(tree, {"e": (0.5, 0.5), "0": (0.5, 0.5)})

    def test_unnormalized_row(self):
        with pytest.raises(TreeError, match="sums to"):
            enumerate_trajectories(depth1(), {"s": (0.5, 0.6)})


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), depth=st.integers(1, 4))
def test_trajectory_probabilities_sum_to_one(seed, depth):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, depth, (1, 4), uniform_beta(ZERO))
    policy = {k: rng.dirichlet(np.ones(len(tree[k].edges))) for k in tree.internal_nodes()}
    trajs = enumerate_trajectories(tree, policy)
    assert abs(math.fsum(t.probability for t in trajs) - 1.0) < 1e-12
