"""Datasets: CSV ingestion, stratified splits, synthetic generators, feature stats."""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SYNTHETIC_KINDS = ("blobs", "two_moons", "xor_grid")


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    class_names: list = field(default=None, repr=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.features.shape[1] < 1:
            raise ValueError("dataset needs at least one feature")
        if self.class_count < 2:
            raise ValueError(f"need at least 2 classes, got {self.class_count}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError("labels must lie in [0, class_count)")

    @property
    def feature_count(self):
        return self.features.shape[1]

    def __len__(self):
        return self.features.shape[0]

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.class_count, self.class_names)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.class_count)


def _label_sort_key(labels):
    try:
        values = {lab: int(lab) for lab in labels}
    except ValueError:
        return sorted(labels)
    return sorted(labels, key=values.__getitem__)


def load_csv(path, label_column=-1):
    """Read a headed CSV; ``label_column`` is a header name or a column index.

    Labels are re-encoded to ``0..C-1``: integer labels by numeric order,
    anything else lexicographically by the raw string.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        lab = header.index(label_column)
    else:
        lab = int(label_column) % len(header)
    feat_cols = [j for j in range(len(header)) if j != lab]

    X = np.empty((len(body), len(feat_cols)))
    raw_labels = []
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise ValueError(f"{path}: line {i + 2} has {len(row)} cells, expected {len(header)}")
        for k, j in enumerate(feat_cols):
            try:
                X[i, k] = float(row[j])
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric feature {row[j]!r} in column "
                    f"{header[j]!r}, line {i + 2}"
                ) from None
        raw_labels.append(row[lab].strip())

    names = _label_sort_key(set(raw_labels))
    if len(names) < 2:
        raise ValueError(f"{path}: need at least 2 classes, found {len(names)}")
    code = {name: c for c, name in enumerate(names)}
    y = np.array([code[v] for v in raw_labels], dtype=np.int64)
    return Dataset(X, y, len(names), names)


def save_csv(ds, path):
    """Write ``f0..f{N-1},label`` with integer labels."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{j}" for j in range(ds.feature_count)] + ["label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def _allocate(n, fractions):
    """Largest-remainder allocation of ``n`` items; train keeps at least one."""
    raw = [n * f for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    rest = n - sum(counts)
    by_frac = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in by_frac[:rest]:
        counts[i] += 1
    if n > 0 and counts[0] == 0:
        donor = max(range(1, len(counts)), key=lambda i: (counts[i], -i))
        counts[donor] -= 1
        counts[0] += 1
    return counts


def split_dataset(ds, fractions=(0.6, 0.2, 0.2), seed=0):
    """Stratified disjoint split into len(fractions) parts (train first)."""
    fractions = tuple(float(f) for f in fractions)
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be positive and sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    parts = [[] for _ in fractions]
    for c in range(ds.class_count):
        rows = np.flatnonzero(ds.labels == c)
        rows = rows[rng.permutation(rows.size)]
        start = 0
        for p, k in enumerate(_allocate(rows.size, fractions)):
            parts[p].extend(rows[start:start + k].tolist())
            start += k
    return tuple(ds.subset(sorted(p)) for p in parts)


def limit_per_class(ds, n_limit, seed=0):
    """Keep at most ``n_limit`` rows of every class (seeded choice)."""
    if n_limit < 1:
        raise ValueError("n_limit must be >= 1")
    rng = np.random.default_rng(seed)
    keep = []
    for c in range(ds.class_count):
        rows = np.flatnonzero(ds.labels == c)
        keep.extend(rows[rng.permutation(rows.size)][:n_limit].tolist())
    return ds.subset(sorted(keep))


def make_synthetic(kind, n_samples, n_features=2, noise=0.5, seed=0, n_classes=2):
    """Desk-scale tabular benchmark data.

    ``blobs`` supports any class count; ``two_moons`` and ``xor_grid`` are
    binary and need ``n_features >= 2`` (extra columns are pure noise).
    Labels are assigned round-robin, so class sizes differ by at most one.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    if kind != "blobs":
        n_classes = 2
        if n_features < 2:
            raise ValueError(f"{kind} needs n_features >= 2")
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    if n_samples < n_classes:
        raise ValueError("n_samples must be at least the class count")
    rng = np.random.default_rng(seed)
    y = np.arange(n_samples) % n_classes
    rng.shuffle(y)
    X = np.zeros((n_samples, n_features))

    if kind == "blobs":
        centers = rng.uniform(-1.0, 1.0, (n_classes, n_features))
        if n_features == 1:
            centers[:, 0] = np.linspace(-3.0, 3.0, n_classes)
        else:
            angle = 2.0 * np.pi * np.arange(n_classes) / n_classes
            centers[:, 0] = 3.0 * np.cos(angle)
            centers[:, 1] = 3.0 * np.sin(angle)
        X = centers[y] + noise * rng.standard_normal((n_samples, n_features))
    elif kind == "two_moons":
        t = rng.uniform(0.0, np.pi, n_samples)
        X[:, 0] = np.where(y == 0, np.cos(t), 1.0 - np.cos(t))
        X[:, 1] = np.where(y == 0, np.sin(t), 0.5 - np.sin(t))
        X += noise * rng.standard_normal((n_samples, n_features))
    else:
        mag = rng.uniform(0.0, 1.0, (n_samples, 2))
        s0 = rng.choice([-1.0, 1.0], n_samples)
        s1 = np.where(y == 0, s0, -s0)
        X[:, 0] = s0 * mag[:, 0]
        X[:, 1] = s1 * mag[:, 1]
        X += noise * rng.standard_normal((n_samples, n_features))
    return Dataset(X, y, n_classes)


@dataclass
class FeatureStats:
    f_min: np.ndarray
    f_max: np.ndarray
    f_mean: np.ndarray
    f_std: np.ndarray
    f_absmax: np.ndarray

    FIELDS = ("f_min", "f_max", "f_mean", "f_std", "f_absmax")

    def __post_init__(self):
        for name in self.FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if len({getattr(self, n).shape for n in self.FIELDS}) != 1:
            raise ValueError("feature stats vectors differ in length")

    @property
    def n_features(self):
        return self.f_min.shape[0]

    def sampling_arrays(self):
        """(f_min, f_max, f_mean, f_std) as contiguous arrays for the kernels."""
        return tuple(np.ascontiguousarray(a) for a in (self.f_min, self.f_max, self.f_mean, self.f_std))

    def to_dict(self):
        return {name: getattr(self, name).tolist() for name in self.FIELDS}

    @classmethod
    def from_dict(cls, d):
        missing = [n for n in cls.FIELDS if n not in d]
        if missing:
            raise ValueError(f"feature stats missing {missing}")
        return cls(**{n: d[n] for n in cls.FIELDS})

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def compute_feature_stats(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("feature stats need a non-empty 2-D matrix")
    lo, hi = X.min(axis=0), X.max(axis=0)
    return FeatureStats(
        f_min=lo,
        f_max=hi,
        # summation rounding can push the mean of a constant column past its max
        f_mean=np.clip(X.mean(axis=0), lo, hi),
        f_std=X.std(axis=0),
        f_absmax=np.abs(X).max(axis=0),
    )


def normalize(x, stats):
    """Center by the feature mean and scale by the feature absolute maximum."""
    scale = np.where(stats.f_absmax == 0.0, 1.0, stats.f_absmax)
    return (np.asarray(x, dtype=np.float64) - stats.f_mean) / scale


def zero_fraction(X):
    """Fraction of exactly-zero entries; the default zeroing probability."""
    X = np.asarray(X)
    return float(np.count_nonzero(X == 0.0)) / X.size if X.size else 0.0
