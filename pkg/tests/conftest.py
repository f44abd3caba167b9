import numpy as np
import pytest

from rf2nn.data import FeatureStats, compute_feature_stats, make_synthetic
from rf2nn.forest import LEAF, DecisionTree, RandomForest, TreeTrainParams, train_forest


def stump(threshold=0.5, feature=0, left=(1.0, 0.0), right=(0.0, 1.0)):
    """Root split with two leaves, nodes in preorder (0 root, 1 left, 2 right)."""
    return DecisionTree(
        feature=[feature, LEAF, LEAF],
        threshold=[threshold, 0.0, 0.0],
        left=[1, -1, -1],
        right=[2, -1, -1],
        value=[[0.0] * len(left), list(left), list(right)],
    )


def leaf_tree(probs):
    return DecisionTree([LEAF], [0.0], [-1], [-1], [list(probs)])


def random_tree(rng, n_features=3, n_classes=3, max_depth=4, p_leaf=0.3):
    """Random valid tree with random leaf distributions."""
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(depth):
        k = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.zeros(n_classes))
        if depth == max_depth or (depth > 0 and rng.random() < p_leaf):
            value[k] = rng.dirichlet(np.ones(n_classes))
            return k
        feature[k] = int(rng.integers(n_features))
        threshold[k] = float(rng.normal())
        left[k] = grow(depth + 1)
        right[k] = grow(depth + 1)
        return k

    grow(0)
    return DecisionTree(feature, threshold, left, right, np.array(value))


def unit_stats(n_features, lo=-1.0, hi=1.0, std=0.5):
    n = n_features
    return FeatureStats(np.full(n, lo), np.full(n, hi), np.zeros(n), np.full(n, std),
                        np.full(n, max(abs(lo), abs(hi))))


@pytest.fixture(scope="session")
def blobs():
    return make_synthetic("blobs", 400, n_features=2, noise=0.5, seed=1)


@pytest.fixture(scope="session")
def blobs_forest(blobs):
    rf = train_forest(blobs, 25, TreeTrainParams(), seed=0)
    return rf, compute_feature_stats(blobs.features)


@pytest.fixture(scope="session")
def moons_forest():
    ds = make_synthetic("two_moons", 400, noise=0.3, seed=2)
    return train_forest(ds, 10, TreeTrainParams(max_depth=8), seed=0), compute_feature_stats(
        ds.features)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def forest_of(*trees, n_features=1):
    return RandomForest(list(trees), trees[0].n_classes, n_features)


# acceptance summary: one line per criterion with its measured values

_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1]
        _acceptance[name] = (report.outcome, dict(report.user_properties))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda n: int(n.split("_")[2])):
        outcome, props = _acceptance[name]
        number = name.split("_")[2]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        detail = "; ".join(f"{k}={v}" for k, v in props.items())
        tr.write_line(f"criterion {number}: {verdict}  {name[len('test_criterion_' + number) + 1:]}"
                      + (f"  [{detail}]" if detail else ""))
