import numpy as np
import pytest

from conftest import leaf_tree, unit_stats
from rf2nn.data import Dataset, compute_feature_stats, make_synthetic
from rf2nn.datagen import GenerationConfig
from rf2nn.forest import RandomForest, TreeTrainParams, predict_forest, train_tree
from rf2nn.imitation import (POOL_SIZE, evaluate_accuracy, evaluate_fidelity, imitate,
                             probe_inputs)
from rf2nn.mapping import map_direct
from rf2nn.neuralnet import TrainConfig, forward, mlp_new

SHORT = TrainConfig(epochs=4, steps_per_epoch=20)


def _constant_teacher_run():
    from rf2nn.datagen import sample_stream

    rf = RandomForest([leaf_tree([0.3, 0.7])], 2, 2)
    stats = unit_stats(2)
    mlp, _ = imitate(rf, stats, (32, 32), GenerationConfig(), TrainConfig(epochs=10))
    X, _, _ = sample_stream(rf, stats, GenerationConfig(seed=1)).take(0, 2000)
    # unit stats make normalization the identity
    return forward(mlp, X)


def test_constant_teacher_is_learned():
    P = _constant_teacher_run()
    assert np.abs(P.mean(0) - [0.3, 0.7]).max() < 0.01
    assert np.abs(P - [0.3, 0.7]).max(1).mean() < 0.01


@pytest.mark.xfail(strict=True, reason=(
    "after 10 epochs of momentum SGD the input-dependent part of the output has not "
    "fully decayed; the worst input is still a few hundredths off"))
def test_constant_teacher_is_learned_pointwise():
    P = _constant_teacher_run()
    assert np.abs(P - [0.3, 0.7]).max() < 0.01


def test_zero_epochs_returns_initial_network(blobs_forest):
    rf, stats = blobs_forest
    mlp, rep = imitate(rf, stats, (4, 4), GenerationConfig(), TrainConfig(epochs=0, seed=3))
    init = mlp_new([2, 4, 4, 2], seed=3)
    for a, b in zip(mlp.params(), init.params()):
        np.testing.assert_array_equal(a, b)
    assert rep.train_loss == [] and rep.pool_loss == [] and rep.selected_epoch is None


def test_selected_epoch_minimizes_pool_loss(blobs_forest):
    rf, stats = blobs_forest
    _, rep = imitate(rf, stats, (8, 8), GenerationConfig(), SHORT)
    assert len(rep.pool_loss) == 4
    assert rep.pool_loss[rep.selected_epoch - 1] == min(rep.pool_loss)
    assert 0.0 <= rep.fidelity <= 1.0


def test_returned_network_is_the_selected_snapshot(blobs_forest):
    from rf2nn.data import normalize
    from rf2nn.datagen import sample_stream
    from rf2nn.neuralnet import cross_entropy

    rf, stats = blobs_forest
    gen = GenerationConfig(seed=2)
    mlp, rep = imitate(rf, stats, (8, 8), gen, SHORT)
    X, Y, _ = sample_stream(rf, stats, gen).take(0, POOL_SIZE)
    assert cross_entropy(forward(mlp, normalize(X, stats)), Y) == min(rep.pool_loss)


def test_stream_positions_never_reused(blobs_forest):
    rf, stats = blobs_forest
    _, rep = imitate(rf, stats, (4,), GenerationConfig(), SHORT)
    assert rep.samples_used == POOL_SIZE + 4 * 20 * 32


def test_imitation_reproducible(blobs_forest):
    rf, stats = blobs_forest
    a = imitate(rf, stats, (8, 8), GenerationConfig(seed=5), SHORT)[1]
    b = imitate(rf, stats, (8, 8), GenerationConfig(seed=5), SHORT)[1]
    assert a.to_dict() == b.to_dict()


def test_hard_labels_mode(blobs_forest):
    rf, stats = blobs_forest
    cfg = TrainConfig(epochs=2, steps_per_epoch=10, hard_labels=True)
    _, rep = imitate(rf, stats, (8,), GenerationConfig(), cfg)
    assert len(rep.history_rows()) == 2


# accuracy and fidelity

def test_single_tree_fits_training_data():
    ds = make_synthetic("two_moons", 200, noise=0.3, seed=1)
    rf = RandomForest([train_tree(ds, TreeTrainParams(bootstrap=False))], 2, 2)
    assert evaluate_accuracy(rf, ds) == 1.0


def test_random_network_is_chance():
    ds = make_synthetic("blobs", 400, seed=0)
    stats = compute_feature_stats(ds.features)
    accs = [evaluate_accuracy(mlp_new([2, 16, 16, 2], seed=s), ds, stats) for s in range(40)]
    assert abs(np.mean(accs) - 0.5) <= 0.05


def test_accuracy_errors(blobs_forest):
    rf, stats = blobs_forest
    with pytest.raises(ValueError):
        evaluate_accuracy(rf, Dataset(np.zeros((0, 2)), np.zeros(0, int), 2))
    with pytest.raises(ValueError):
        evaluate_accuracy(rf, Dataset(np.zeros((3, 3)), np.zeros(3, int), 2))
    with pytest.raises(ValueError):
        evaluate_accuracy(mlp_new([2, 2]), Dataset(np.zeros((3, 2)), np.zeros(3, int), 2))


def test_fidelity_of_exact_mapping(blobs_forest):
    rf, stats = blobs_forest
    probe = probe_inputs(stats, GenerationConfig())
    assert evaluate_fidelity(map_direct(rf), rf, probe) == 1.0


def test_fidelity_of_constant_student(blobs_forest):
    rf, stats = blobs_forest
    student = mlp_new([2, 2])
    student.weights[0][:] = 0.0
    probe = probe_inputs(stats, GenerationConfig(), n=3000)
    teacher_first = (predict_forest(rf, probe).argmax(1) == 0).mean()
    assert evaluate_fidelity(student, rf, probe, stats) == teacher_first


def test_fidelity_single_point(blobs_forest):
    rf, stats = blobs_forest
    f = evaluate_fidelity(mlp_new([2, 3, 2], seed=1), rf, np.zeros((1, 2)), stats)
    assert f in (0.0, 1.0)
    with pytest.raises(ValueError):
        evaluate_fidelity(map_direct(rf), rf, np.zeros((0, 2)))


def test_probe_includes_test_inputs(blobs, blobs_forest):
    _, stats = blobs_forest
    probe = probe_inputs(stats, GenerationConfig(), blobs, n=100)
    assert probe.shape == (100 + len(blobs), 2)
    np.testing.assert_array_equal(probe[100:], blobs.features)
