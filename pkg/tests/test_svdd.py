import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nqsvdd.architectures import build_spec
from nqsvdd.data import make_task
from nqsvdd.errors import BoundError, DivergenceError, StateError
from nqsvdd.svdd import SvddModel, TrainConfig, auc, init_center, loss, score, snap_center, train


def brute_auc(t, o):
    total = 0.0
    for a in t:
        for b in o:
            total += 1.0 if a < b else 0.5 if a == b else 0.0
    return total / (len(t) * len(o))


def toy_model(seed=0, variant="nqsvdd"):
    return SvddModel(build_spec("toy", variant, embedding_reps=1), seed)


def test_auc_examples():
    assert auc([0.1, 0.2], [0.3, 0.4]) == 1.0
    assert auc([0.5] * 4, [0.5] * 3) == 0.5
    assert auc([0.3, 0.4], [0.1, 0.2]) == 0.0
    with pytest.raises(BoundError):
        auc([], [1.0])


def test_auc_matches_pair_count_with_ties():
    rng = np.random.default_rng(0)
    for k in range(100):
        nt, no = rng.integers(1, 60, 2)
        # coarse values force ties in most sets
        t = rng.integers(0, 10 if k % 2 else 1000, nt) / 10
        o = rng.integers(0, 10 if k % 2 else 1000, no) / 10
        assert auc(t, o) == brute_auc(t, o)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-500, 500), min_size=1, max_size=30), st.lists(st.integers(-500, 500), min_size=1, max_size=30))
def test_auc_monotone_invariance(t, o):
    # grid values, so the transforms cannot merge distinct scores through rounding
    t, o = np.array(t) / 100, np.array(o) / 100
    ref = auc(t, o)
    assert auc(np.exp(t), np.exp(o)) == pytest.approx(ref, abs=1e-12)
    assert auc(3 * t + 1, 3 * o + 1) == pytest.approx(ref, abs=1e-12)


def test_snap_center():
    assert np.array_equal(snap_center([0.03, -0.05, 0.0, 0.5, -0.2]), [0.1, -0.1, 0.1, 0.5, -0.2])


def test_init_center_constant_latents():
    m = toy_model()
    X = np.tile([[0.3, 0.7]], (5, 1))
    v = m.latent(X[:1])[0]
    c = init_center(m, X)
    assert np.allclose(c, snap_center(v), atol=1e-15)
    m2 = toy_model()
    assert np.array_equal(init_center(m2, X), c)
    with pytest.raises(BoundError):
        init_center(m, np.zeros((0, 2)))


def test_loss_examples():
    m = toy_model()
    X = np.array([[0.2, 0.4]])
    lat = m.latent(X)[0]
    m.center = lat.copy()
    assert loss(m, X) == pytest.approx(0.0, abs=1e-15)
    m.center = lat + np.array([2.0, 0.0, 0.0])
    assert loss(m, X) == pytest.approx(4.0, abs=1e-12)
    m.center = lat
    lam = 0.3
    assert loss(m, X, lam) == pytest.approx(0.5 * lam * m.net.frobenius_sq(), abs=1e-12)
    m.center = None
    with pytest.raises(StateError):
        loss(m, X)


def test_qsvdd_has_no_regularizer():
    m = toy_model(variant="qsvdd-zz")
    X = np.array([[0.2, 0.4]])
    m.center = m.latent(X)[0]
    assert loss(m, X, 10.0) == pytest.approx(0.0, abs=1e-15)


def test_zero_step_training_keeps_params():
    m = toy_model()
    X = make_task("toy", 0, 0).train_x
    before = m.params
    res = train(m, X, TrainConfig(steps=0))
    assert res.history == [] and all(np.array_equal(a, b) for a, b in zip(before, m.params))
    assert m.radius2 == pytest.approx(np.max(m.distances(X)))


def test_fixed_point_at_center():
    m = toy_model()
    X = np.array([[0.4, 0.6]])
    m.center = m.latent(X)[0]
    value, grads = m.loss_and_grads(X, 0.0)
    assert value == pytest.approx(0.0, abs=1e-15)
    assert all(np.max(np.abs(g)) < 1e-14 for g in grads)


def test_training_is_bitwise_reproducible():
    task = make_task("toy", 0, 1)
    runs = []
    for _ in range(2):
        m = toy_model(1)
        runs.append((train(m, task, TrainConfig(steps=20, batch_size=8, seed=1)).history, m.params))
    assert runs[0][0] == runs[1][0]
    assert all(np.array_equal(a, b) for a, b in zip(runs[0][1], runs[1][1]))


def test_divergence_is_reported():
    m = toy_model()
    X = make_task("toy", 0, 0).train_x.copy()
    X[0, 0] = np.nan
    with pytest.raises(DivergenceError):
        train(m, X, TrainConfig(steps=5, batch_size=len(X)))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_toy_task_separates(seed):
    task = make_task("toy", 0, seed)
    m = toy_model(seed)
    res = train(m, task, TrainConfig(steps=200, batch_size=16, seed=seed))
    st_, dt = score(m, task.test_target_x)
    so, _ = score(m, task.test_outlier_x)
    assert auc(st_, so) == 1.0
    # soft monotonicity: 100-step windows
    h = np.array(res.history)
    windows = [h[i + 100] <= h[i] for i in range(len(h) - 100)]
    assert np.mean(windows) >= 0.8


def test_score_definitions():
    task = make_task("toy", 0, 0)
    m = toy_model()
    with pytest.raises(StateError):
        score(m, task.test_x)
    train(m, task, TrainConfig(steps=10, batch_size=8))
    s, d = score(m, task.train_x)
    assert np.max(d) == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(d, s - m.radius2)
    perm = np.random.default_rng(0).permutation(len(task.test_x))
    s1, _ = score(m, task.test_x)
    s2, _ = score(m, task.test_x[perm])
    assert np.array_equal(s1[perm], s2)


@pytest.mark.parametrize("variant", ["nqsvdd", "qsvdd-zz", "qsvdd-amp"])
def test_quantum_scores_bounded(variant):
    task = make_task("toy", 0, 0)
    m = toy_model(variant=variant)
    train(m, task, TrainConfig(steps=5, batch_size=8))
    s, _ = score(m, task.test_x)
    assert np.all(s >= 0) and np.all(s <= np.sum((1 + np.abs(m.center)) ** 2) + 1e-12)
    assert np.all(np.abs(m.center) <= 1) and np.all(m.center != 0)


def test_train_config_validation():
    with pytest.raises(BoundError):
        TrainConfig(steps=-1)
    with pytest.raises(BoundError):
        TrainConfig(batch_size=0)
