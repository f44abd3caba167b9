"""Labelled data generation from a forest's decision boundaries.

A sample for target class ``t`` starts as a clipped Gaussian draw around the
feature means, then every selected tree walks it from root to leaf, steering
each split toward the child with more mass for ``t`` and rewriting the split
feature whenever the sample would be routed elsewhere. The forest's output on
the finished sample becomes its soft label.

Stream position ``k`` always yields the same sample: target ``k mod C`` and a
private random stream seeded by ``(seed, k)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, _pykernels
from .forest import compute_class_weights, predict_forest


@dataclass
class GenerationConfig:
    c_std: float = 3.0
    p_zero: float = 0.0
    # w_path = 1 + |Normal(0, w_path_sigma)|, drawn per sample
    w_path_sigma: float = 5.0
    # fixed subset fraction; None draws Uniform(0, 1) per sample
    p_forest: float = None
    use_pw: bool = True
    use_dts: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.c_std < 1.0:
            raise ValueError("c_std must be >= 1")
        if not 0.0 <= self.p_zero <= 1.0:
            raise ValueError("p_zero must lie in [0, 1]")
        if self.w_path_sigma < 0.0:
            raise ValueError("w_path_sigma must be >= 0")
        if self.p_forest is not None and not 0.0 <= self.p_forest <= 1.0:
            raise ValueError("p_forest must lie in [0, 1]")

    @property
    def label(self):
        """Strategy name: RDG, RDG+PW, RDG+DTS or RDG+PW+DTS."""
        return "RDG" + ("+PW" if self.use_pw else "") + ("+DTS" if self.use_dts else "")

    def kernel_params(self):
        p_fixed = math.nan if self.p_forest is None else float(self.p_forest)
        return (float(self.c_std), float(self.p_zero), float(self.w_path_sigma), p_fixed,
                bool(self.use_pw), bool(self.use_dts))


@dataclass
class GenerationState:
    x: np.ndarray
    target: int
    used_features: set = field(default_factory=set)


def init_sample(stats, cfg, rng):
    """Gaussian around the means (scaled std), clipped to range, randomly zeroed."""
    f_min, f_max, f_mean, f_std = (a.tolist() for a in stats.sampling_arrays())
    x = [0.0] * stats.n_features
    _pykernels.init_into(x, f_min, f_max, f_mean, f_std, cfg.c_std, cfg.p_zero, rng)
    return np.array(x)


def generate_from_tree(tree, weights, state, stats, w_path, cfg, rng):
    """One guided walk through ``tree``; updates ``state`` in place and returns it."""
    x = state.x.tolist()
    used = [False] * stats.n_features
    for f in state.used_features:
        used[f] = True
    _pykernels.walk_tree(
        tree.feature.tolist(), tree.threshold.tolist(), tree.left.tolist(), tree.right.tolist(),
        np.asarray(weights)[:, state.target].tolist(), int(tree.root), x, used,
        stats.f_min.tolist(), stats.f_max.tolist(), stats.f_std.tolist(),
        float(w_path), cfg.use_pw, rng,
    )
    state.x = np.array(x)
    state.used_features = {f for f, u in enumerate(used) if u}
    return state


def generate_from_forest(rf, t, stats, cfg, rng, weights=None):
    """One ``(x, y)`` pair for target ``t``; ``y`` is the full forest's output."""
    if not 0 <= t < rf.n_classes:
        raise ValueError(f"target class {t} outside [0, {rf.n_classes})")
    weights = weights if weights is not None else [compute_class_weights(tr) for tr in rf.trees]
    params = cfg.kernel_params()
    w_path, p_forest = _pykernels.draw_sample_params(rng, params[2], params[3])
    state = GenerationState(init_sample(stats, cfg, rng), t)
    n_sub = _pykernels.subset_size(rf.n_trees, p_forest, cfg.use_dts)
    for i in _pykernels.subset_order(rf.n_trees, n_sub, rng):
        generate_from_tree(rf.trees[i], weights[i], state, stats, w_path, cfg, rng)
    return state.x, predict_forest(rf, state.x)


class SampleStream:
    """Position-addressable, unbounded sequence of generated ``(x, y)`` pairs."""

    def __init__(self, rf, stats, cfg, kernels=None):
        if stats.n_features != rf.n_features:
            raise ValueError(
                f"stats cover {stats.n_features} features, forest expects {rf.n_features}"
            )
        self.rf = rf
        self.stats = stats
        self.cfg = cfg
        self.kernels = kernels or _backend.kernels
        self._stats_arrays = stats.sampling_arrays()

    def take(self, start, count):
        """Samples ``start .. start+count-1`` as ``(X, Y, targets)``."""
        return self.kernels.generate_batch(
            self.rf.packed, self.rf.packed_class_weights, self._stats_arrays,
            self.cfg.kernel_params(), self.cfg.seed, int(start), int(count),
        )

    def __iter__(self, chunk=1024):
        start = 0
        while True:
            X, Y, _ = self.take(start, chunk)
            yield from zip(X, Y)
            start += chunk


def sample_stream(rf, stats, cfg, kernels=None):
    return SampleStream(rf, stats, cfg, kernels)


def init_batch(stats, cfg, seed, start, count, kernels=None):
    """``count`` independent initial samples (no tree guidance)."""
    kernels = kernels or _backend.kernels
    return kernels.init_batch(stats.sampling_arrays(), float(cfg.c_std), float(cfg.p_zero),
                              seed, int(start), int(count))


@dataclass
class ConfidenceHistogram:
    counts: np.ndarray
    edges: np.ndarray
    mean: float
    std: float
    confidences: np.ndarray = field(repr=False)

    def to_rows(self):
        return [(float(lo), float(hi), int(c))
                for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def confidence_distribution(rf, stats, cfg, n_samples=1000, bins=20, kernels=None):
    """Histogram over [0, 1] of the forest's confidence in each sample's target."""
    if n_samples < 1 or bins < 2:
        raise ValueError("need n_samples >= 1 and bins >= 2")
    _, Y, t = sample_stream(rf, stats, cfg, kernels).take(0, n_samples)
    conf = Y[np.arange(n_samples), t]
    # a sum of n_T terms p/n_T can land one rounding step above 1
    counts, edges = np.histogram(np.clip(conf, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return ConfidenceHistogram(counts, edges, float(conf.mean()), float(conf.std()), conf)
