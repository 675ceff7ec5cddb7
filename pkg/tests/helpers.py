from fetree.tree import build_tree


def depth1(q=(0.5, 0.5), r=(0.0, 1.0), beta=1.0, leaves=(0.0, 0.0)):
    """One decision node with two leaves labelled a and b."""
    return build_tree(
        {
            "horizon": 1,
            "root": "s",
            "nodes": {
                "s": {
                    "beta": beta,
                    "edges": [
                        {"label": "a", "q": q[0], "r": r[0], "child": "x"},
                        {"label": "b", "q": q[1], "r": r[1], "child": "y"},
                    ],
                },
                "x": {"beta": 0, "leaf_value": leaves[0]},
                "y": {"beta": 0, "leaf_value": leaves[1]},
            },
        }
    )
