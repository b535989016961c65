import numpy as np
import pytest

from martfl.model import (ConfusionMatrix, Dataset, LocalModel, SyntheticTask, cosine_score, evaluate,
                          flatten_diff, param_count, train_local)

from oracles import logistic_fit_accuracy


@pytest.fixture
def task():
    return SyntheticTask.make(3, 5, separation=2.0, seed=1)


def test_synthetic_sampling_is_reproducible(task):
    a, b = task.sample(50, seed=7), task.sample(50, seed=7)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.x, task.sample(50, seed=8).x)


def test_task_rejects_duplicate_means():
    with pytest.raises(ValueError):
        SyntheticTask(2, 2, np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError):
        SyntheticTask.make(1, 3)


def test_class_probs_skew_labels(task):
    d = task.sample(2000, seed=0, class_probs=[0.9, 0.05, 0.05])
    assert np.mean(d.y == 0) > 0.85


def test_param_count_matches_architecture():
    assert param_count("linear", 20, 4) == 84
    m = LocalModel.init("mlp", 6, 3, hidden=8)
    assert m.weights.size == param_count("mlp", 6, 3, hidden=8)
    with pytest.raises(ValueError):
        LocalModel(np.zeros(5), "linear", 6, 3)


def test_zero_steps_is_identity(task):
    m = LocalModel.init("linear", 5, 3, seed=2)
    out = train_local(m, task.sample(30, 0), steps=0, lr=0.1, seed=0)
    assert np.array_equal(out.weights, m.weights)
    assert not np.any(flatten_diff(out, m.weights))


def test_training_is_deterministic(task):
    m = LocalModel.init("mlp", 5, 3, seed=2)
    d = task.sample(100, 0)
    a = train_local(m, d, 15, 0.1, seed=4)
    b = train_local(m, d, 15, 0.1, seed=4)
    assert np.array_equal(a.weights, b.weights)


def test_training_rejects_bad_inputs(task):
    m = LocalModel.init("linear", 5, 3)
    with pytest.raises(ValueError):
        train_local(m, Dataset(np.zeros((0, 5)), np.zeros(0, dtype=int)), 1, 0.1, 0)
    with pytest.raises(ValueError):
        train_local(m, task.sample(10, 0), 1, 0.0, 0)


def test_separable_blobs_reach_oracle_accuracy():
    rng = np.random.default_rng(3)
    x = np.vstack([rng.normal(-2, 1, (100, 2)), rng.normal(2, 1, (100, 2))])
    y = np.repeat([0, 1], 100)
    oracle = logistic_fit_accuracy(x, y)
    m = train_local(LocalModel.init("linear", 2, 2), Dataset(x, y), steps=200, lr=0.1, seed=0)
    acc, _ = evaluate(m, Dataset(x, y))
    assert acc >= 0.95
    assert acc >= oracle - 0.02


def test_flatten_diff_examples():
    before = np.arange(6, dtype=float)
    assert not np.any(flatten_diff(before.copy(), before))
    e = np.zeros(6)
    e[4] = 1.0
    assert np.array_equal(flatten_diff(before + e, before), e)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=6), rng.normal(size=6)
    assert np.array_equal(flatten_diff(a, b), np.array([a[i] - b[i] for i in range(6)]))
    with pytest.raises(ValueError):
        flatten_diff(np.zeros(3), np.zeros(4))


def test_cosine_examples():
    u = np.array([0.3, -2.0, 5.0])
    assert cosine_score(u, u) == pytest.approx(1.0)
    assert cosine_score([1, 0], [0, 1]) == 0.0
    assert cosine_score([1, 0], [1, 1]) == pytest.approx(0.70711, abs=1e-5)
    assert cosine_score([0, 0], [1, 1]) == 0.0


def test_evaluate_examples():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    y = np.array([0, 1, 0, 1])
    perfect = LocalModel(np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]), "linear", 2, 2)
    acc, cm = evaluate(perfect, Dataset(x, y))
    assert acc == 1.0 and np.array_equal(cm.counts, np.diag([2, 2]))
    constant = LocalModel(np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]), "linear", 2, 2)
    assert evaluate(constant, Dataset(x, y))[0] == 0.5


def test_evaluate_matches_recount(task):
    m = LocalModel.init("linear", 5, 3, seed=9)
    d = task.sample(200, 3)
    acc, cm = evaluate(m, d)
    logits = d.x @ m.weights[:15].reshape(5, 3) + m.weights[15:]
    recount = sum(int(np.argmax(logits[i]) == d.y[i]) for i in range(len(d)))
    assert acc == recount / len(d)
    assert np.array_equal(cm.counts.sum(axis=1), np.bincount(d.y, minlength=3))
    with pytest.raises(ValueError):
        evaluate(m, Dataset(np.zeros((0, 5)), np.zeros(0, dtype=int)))


def test_confusion_matrix_rejects_negative():
    with pytest.raises(ValueError):
        ConfusionMatrix(np.array([[1, -1], [0, 2]]))
