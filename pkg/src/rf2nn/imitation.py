"""Train a compact network to imitate a forest on generated data."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import normalize
from .datagen import GenerationConfig, SampleStream, init_batch
from .forest import RandomForest, predict_forest
from .mapping import MappedNetwork
from .neuralnet import (Mlp, TrainConfig, cross_entropy, forward, init_optimizer, mlp_new,
                        train_step)

POOL_SIZE = 2000
PROBE_SIZE = 2000
# probe inputs come from a stream family disjoint from the training stream
PROBE_SALT = 0x5EED_F1DE_11_7E


@dataclass
class ImitationReport:
    arch: list
    generation: str
    train_loss: list = field(default_factory=list)
    pool_loss: list = field(default_factory=list)
    selected_epoch: int = None
    student_parameters: int = 0
    samples_used: int = 0
    teacher_accuracy: float = None
    student_accuracy: float = None
    fidelity: float = None

    def to_dict(self):
        return asdict(self)

    def history_rows(self):
        """``(epoch, train_loss, pool_loss)`` rows, epochs counted from 1."""
        return [(e + 1, tl, pl) for e, (tl, pl) in enumerate(zip(self.train_loss, self.pool_loss))]


def _targets(Y, hard):
    if not hard:
        return Y
    out = np.zeros_like(Y)
    out[np.arange(len(Y)), Y.argmax(axis=1)] = 1.0
    return out


def predict_proba(model, X, stats=None):
    """Class probabilities of a forest, mapped network or student on raw inputs ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if isinstance(model, RandomForest):
        return predict_forest(model, X)
    if isinstance(model, MappedNetwork):
        return model.forward(X)
    if isinstance(model, Mlp):
        if stats is None:
            raise ValueError("a student network needs the feature stats it was trained with")
        return forward(model, normalize(X, stats))
    raise TypeError(f"cannot predict with {type(model).__name__}")


def evaluate_accuracy(model, ds, stats=None):
    """Fraction of rows whose argmax prediction equals the label."""
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    n_in = model.n_features if isinstance(model, RandomForest) else (
        model.layer_sizes[0])
    if ds.feature_count != n_in:
        raise ValueError(f"model expects {n_in} features, dataset has {ds.feature_count}")
    pred = predict_proba(model, ds.features, stats).argmax(axis=1)
    return float(np.mean(pred == ds.labels))


def evaluate_fidelity(student, teacher, probe, stats=None):
    """Argmax agreement of student and teacher on the raw probe inputs."""
    probe = np.atleast_2d(np.asarray(probe, dtype=np.float64))
    if probe.shape[0] == 0:
        raise ValueError("empty probe set")
    s = predict_proba(student, probe, stats).argmax(axis=1)
    t = predict_forest(teacher, probe).argmax(axis=1)
    return float(np.mean(s == t))


def probe_inputs(stats, gen_cfg, test=None, n=PROBE_SIZE):
    """Fresh initial-distribution draws, plus the real test inputs when given."""
    X = init_batch(stats, gen_cfg, gen_cfg.seed ^ PROBE_SALT, 0, n)
    if test is not None and len(test):
        X = np.vstack([X, test.features])
    return X


def imitate(rf, stats, arch=(32, 32), gen_cfg=None, train_cfg=None, test=None, probe=None,
            pool_size=POOL_SIZE, kernels=None):
    """Fit a ReLU/softmax student to generated ``(x, RF(x))`` pairs.

    Stream positions ``[0, pool_size)`` form a fixed selection pool; every
    training batch after that is fresh. The returned network is the epoch
    snapshot with the lowest pool loss.
    """
    gen_cfg = gen_cfg or GenerationConfig()
    train_cfg = train_cfg or TrainConfig()
    stream = SampleStream(rf, stats, gen_cfg, kernels)
    mlp = mlp_new([rf.n_features, *arch, rf.n_classes], seed=train_cfg.seed)
    opt = init_optimizer(mlp)
    report = ImitationReport(list(arch), gen_cfg.label, student_parameters=mlp.n_parameters)

    pool_X, pool_Y, _ = stream.take(0, pool_size)
    pool_X = normalize(pool_X, stats)
    pool_Y = _targets(pool_Y, train_cfg.hard_labels)

    best, best_loss = mlp.copy(), np.inf
    pos = pool_size
    per_epoch = train_cfg.steps_per_epoch * train_cfg.batch_size
    for epoch in range(train_cfg.epochs):
        X, Y, _ = stream.take(pos, per_epoch)
        pos += per_epoch
        X = normalize(X, stats)
        Y = _targets(Y, train_cfg.hard_labels)
        losses = []
        for lo in range(0, per_epoch, train_cfg.batch_size):
            hi = lo + train_cfg.batch_size
            losses.append(train_step(mlp, opt, X[lo:hi], Y[lo:hi], train_cfg))
        pool_loss = cross_entropy(forward(mlp, pool_X), pool_Y)
        report.train_loss.append(float(np.mean(losses)))
        report.pool_loss.append(pool_loss)
        if pool_loss < best_loss:
            best, best_loss = mlp.copy(), pool_loss
            report.selected_epoch = epoch + 1
    report.samples_used = pos

    if test is not None and len(test):
        report.teacher_accuracy = evaluate_accuracy(rf, test)
        report.student_accuracy = evaluate_accuracy(best, test, stats)
    if probe is None:
        probe = probe_inputs(stats, gen_cfg, test)
    report.fidelity = evaluate_fidelity(best, rf, probe, stats)
    return best, report
