"""Axis-aligned CART trees and random forests (the teacher model).

Routing rule everywhere: a sample goes left iff ``x[feature] < threshold``.
Trees are stored as flat node arrays; leaves have ``feature == -1`` and keep
a class probability vector in ``value``.
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _backend

LEAF = -1


@dataclass
class TreeTrainParams:
    max_depth: int = None
    min_samples_split: int = 2
    max_features: object = "sqrt"
    bootstrap: bool = True

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")

    def features_per_split(self, n_features):
        mf = self.max_features
        if mf is None or mf == "all":
            return n_features
        if mf == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        if isinstance(mf, str):
            raise ValueError(f"unknown max_features {mf!r}")
        if mf < 1:
            raise ValueError("max_features must be >= 1")
        return min(int(mf), n_features)


@dataclass
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    root: int = 0

    def __post_init__(self):
        self.feature = np.ascontiguousarray(self.feature, dtype=np.int64)
        self.threshold = np.ascontiguousarray(self.threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(self.left, dtype=np.int64)
        self.right = np.ascontiguousarray(self.right, dtype=np.int64)
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def n_classes(self):
        return self.value.shape[1]

    def is_leaf(self, n):
        return self.feature[n] == LEAF

    @property
    def split_nodes(self):
        return np.flatnonzero(self.feature != LEAF)

    @property
    def leaf_nodes(self):
        return np.flatnonzero(self.feature == LEAF)

    def node_depths(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        stack = [self.root]
        while stack:
            n = stack.pop()
            if not self.is_leaf(n):
                for child in (self.left[n], self.right[n]):
                    depth[child] = depth[n] + 1
                    stack.append(child)
        return depth

    def depth(self):
        """Longest root-to-leaf edge count (a stump has depth 1)."""
        return int(self.node_depths()[self.leaf_nodes].max())

    def leaf_paths(self):
        """Map leaf -> list of (split node, went_right) from the root down."""
        paths = {}
        stack = [(self.root, [])]
        while stack:
            n, path = stack.pop()
            if self.is_leaf(n):
                paths[int(n)] = path
            else:
                stack.append((self.right[n], path + [(int(n), True)]))
                stack.append((self.left[n], path + [(int(n), False)]))
        return paths

    def apply(self, X):
        """Leaf index reached by each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        rows = np.arange(X.shape[0])
        node = np.full(X.shape[0], self.root, dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            a = node[active]
            go_left = X[rows[active], self.feature[a]] < self.threshold[a]
            node[active] = np.where(go_left, self.left[a], self.right[a])
            active = self.feature[node] != LEAF
        return node

    def validate(self, n_features=None, n_classes=None):
        n = self.n_nodes
        if n == 0:
            raise ValueError("tree has no nodes")
        if not (0 <= self.root < n):
            raise ValueError(f"root {self.root} out of range")
        if n_classes is not None and self.n_classes != n_classes:
            raise ValueError(f"tree has {self.n_classes} classes, forest expects {n_classes}")
        seen = np.zeros(n, dtype=bool)
        stack = [self.root]
        while stack:
            k = stack.pop()
            if seen[k]:
                raise ValueError(f"node {k} reachable more than once")
            seen[k] = True
            if self.is_leaf(k):
                p = self.value[k]
                if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
                    raise ValueError(f"leaf {k} probabilities must be non-negative and sum to 1")
                continue
            f = self.feature[k]
            if f < 0 or (n_features is not None and f >= n_features):
                raise ValueError(f"split {k} uses invalid feature {f}")
            if not math.isfinite(self.threshold[k]):
                raise ValueError(f"split {k} has non-finite threshold")
            for child in (self.left[k], self.right[k]):
                if not (0 <= child < n):
                    raise ValueError(f"split {k} has child {child} out of range")
                stack.append(child)
        if not seen.all():
            raise ValueError(f"{int((~seen).sum())} nodes unreachable from the root")

    def to_dict(self):
        nodes = []
        for k in range(self.n_nodes):
            if self.is_leaf(k):
                nodes.append({"leaf": {"probs": self.value[k].tolist()}})
            else:
                nodes.append({"split": {
                    "feature": int(self.feature[k]),
                    "threshold": float(self.threshold[k]),
                    "left": int(self.left[k]),
                    "right": int(self.right[k]),
                }})
        return {"nodes": nodes, "root": int(self.root)}

    @classmethod
    def from_dict(cls, d, n_classes):
        nodes = d["nodes"]
        n = len(nodes)
        feature = np.full(n, LEAF, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        value = np.zeros((n, n_classes))
        for k, node in enumerate(nodes):
            if "split" in node:
                s = node["split"]
                feature[k] = int(s["feature"])
                threshold[k] = float(s["threshold"])
                left[k] = int(s["left"])
                right[k] = int(s["right"])
            elif "leaf" in node:
                probs = node["leaf"]["probs"]
                if len(probs) != n_classes:
                    raise ValueError(
                        f"leaf {k} has {len(probs)} class probabilities, expected {n_classes}"
                    )
                value[k] = probs
            else:
                raise ValueError(f"node {k} is neither split nor leaf")
        return cls(feature, threshold, left, right, value, int(d.get("root", 0)))


@dataclass
class RandomForest:
    trees: list
    n_classes: int
    n_features: int

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        for t in self.trees:
            if t.n_classes != self.n_classes:
                raise ValueError("trees disagree on the class count")

    @property
    def n_trees(self):
        return len(self.trees)

    @cached_property
    def packed(self):
        """All trees as one node table: (feature, threshold, left, right, value, roots)."""
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees[:-1]])
        feature = np.concatenate([t.feature for t in self.trees])
        threshold = np.concatenate([t.threshold for t in self.trees])
        left = np.concatenate([np.where(t.feature == LEAF, -1, t.left + o)
                               for t, o in zip(self.trees, offsets)])
        right = np.concatenate([np.where(t.feature == LEAF, -1, t.right + o)
                                for t, o in zip(self.trees, offsets)])
        value = np.concatenate([t.value for t in self.trees])
        roots = np.array([t.root + o for t, o in zip(self.trees, offsets)], dtype=np.int64)
        return tuple(np.ascontiguousarray(a) for a in (feature, threshold, left, right, value, roots))

    @cached_property
    def packed_class_weights(self):
        return np.ascontiguousarray(np.concatenate([compute_class_weights(t) for t in self.trees]))

    def validate(self):
        for t in self.trees:
            t.validate(self.n_features, self.n_classes)


def _tree_rng(seed, index):
    return np.random.default_rng([seed % 2**63, index])


def train_tree(ds, params=None, rng=None, rows=None, kernels=None):
    """Greedy Gini CART on ``ds`` (or on the row multiset ``rows``)."""
    params = params or TreeTrainParams()
    rng = rng if rng is not None else np.random.default_rng(0)
    kernels = kernels or _backend.kernels
    if len(ds) == 0:
        raise ValueError("cannot train a tree on an empty dataset")
    X = np.ascontiguousarray(ds.features)
    y = np.ascontiguousarray(ds.labels)
    C, N = ds.class_count, ds.feature_count
    k = params.features_per_split(N)
    rows = np.arange(len(ds)) if rows is None else np.asarray(rows, dtype=np.int64)

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.zeros(C))
        return len(feature) - 1

    def make_leaf(node, counts):
        value[node] = counts / counts.sum()

    def grow(idx, depth):
        node = new_node()
        counts = np.bincount(y[idx], minlength=C).astype(np.float64)
        if (np.count_nonzero(counts) <= 1 or idx.size < params.min_samples_split
                or (params.max_depth is not None and depth >= params.max_depth)):
            make_leaf(node, counts)
            return node
        if k < N:
            feats = np.sort(rng.choice(N, size=k, replace=False))
        else:
            feats = np.arange(N)
        f, th = kernels.best_split(X, y, idx, feats, C)
        if f < 0 and k < N:
            # drawn features are all constant here; widen to the rest
            rest = np.setdiff1d(np.arange(N), feats)
            f, th = kernels.best_split(X, y, idx, rest, C)
        if f < 0:
            make_leaf(node, counts)
            return node
        go_left = X[idx, f] < th
        feature[node], threshold[node] = f, th
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(rows, 0)
    return DecisionTree(np.array(feature), np.array(threshold), np.array(left),
                        np.array(right), np.array(value), 0)


def train_forest(ds, n_trees=100, params=None, seed=0, kernels=None):
    """Bagged forest; tree ``i`` draws from its own stream derived from (seed, i)."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    params = params or TreeTrainParams()
    trees = []
    for i in range(n_trees):
        rng = _tree_rng(seed, i)
        rows = rng.integers(0, len(ds), len(ds)) if params.bootstrap else None
        trees.append(train_tree(ds, params, rng, rows=rows, kernels=kernels))
    return RandomForest(trees, ds.class_count, ds.feature_count)


def predict_tree(tree, x):
    """Leaf distribution reached by ``x`` (a vector) or by each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    leaves = tree.apply(x)
    out = tree.value[leaves]
    return out[0].copy() if x.ndim == 1 else out


def predict_forest(rf, x, kernels=None):
    """Mean of the per-tree leaf distributions, accumulated in tree order."""
    kernels = kernels or _backend.kernels
    x = np.asarray(x, dtype=np.float64)
    X = np.atleast_2d(x)
    if X.shape[1] != rf.n_features:
        raise ValueError(f"expected {rf.n_features} features, got {X.shape[1]}")
    out = kernels.predict_batch(rf.packed, np.ascontiguousarray(X))
    return out[0] if x.ndim == 1 else out


def compute_class_weights(tree):
    """Per-node class mass: leaf distributions summed bottom-up (post-order)."""
    W = np.zeros((tree.n_nodes, tree.n_classes))
    stack = [(tree.root, False)]
    while stack:
        n, expanded = stack.pop()
        if tree.is_leaf(n):
            W[n] = tree.value[n]
        elif expanded:
            W[n] = W[tree.left[n]] + W[tree.right[n]]
        else:
            stack.append((n, True))
            stack.append((tree.right[n], False))
            stack.append((tree.left[n], False))
    return W


def forest_to_dict(rf):
    return {
        "n_features": rf.n_features,
        "n_classes": rf.n_classes,
        "trees": [t.to_dict() for t in rf.trees],
    }


def forest_from_dict(d):
    try:
        N, C = int(d["n_features"]), int(d["n_classes"])
        trees = [DecisionTree.from_dict(t, C) for t in d["trees"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed forest document: {exc}") from None
    rf = RandomForest(trees, C, N)
    rf.validate()
    return rf


def save_forest(rf, path, **meta):
    doc = forest_to_dict(rf)
    doc.update(meta)
    Path(path).write_text(json.dumps(doc))


def load_forest(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such forest file: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None
    return forest_from_dict(doc)
