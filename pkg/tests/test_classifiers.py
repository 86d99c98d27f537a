import numpy as np
import pytest
from hypothesis import given, strategies as st

from mammoseg.classifiers import (
    AcrLabel, MlpHyper, MlpModel, Normalizer, TrainingSet, evaluate, knn_classify, knn_predict,
    load_mlp, loss_and_grad, mlp_classify, mlp_predict, mlp_train, one_hot, save_mlp,
)
from mammoseg.errors import DegenerateInputError, ModelFormatError

A = AcrLabel


def gradient_check(model, Z, Y, h=1e-5):
    """Largest relative error between analytic and central-difference gradients."""
    _, grads = loss_and_grad(model, Z, Y)
    worst = 0.0
    for P, G in zip(model.params(), grads):
        for idx in np.ndindex(P.shape):
            old = P[idx]
            P[idx] = old + h
            up, _ = loss_and_grad(model, Z, Y)
            P[idx] = old - h
            down, _ = loss_and_grad(model, Z, Y)
            P[idx] = old
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - G[idx]) / max(abs(num), abs(G[idx]), 1e-8))
    return worst


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    model = MlpModel.init((6, 12, 5), seed=11)
    Z = rng.uniform(0, 1, (3, 6))
    Y = one_hot([A.ACR1, A.ACR3, A.ACR5])
    assert gradient_check(model, Z, Y) <= 1e-4


def _cloud(rng, n_per, centers, spread=0.05):
    X, y = [], []
    for lab, c in centers.items():
        X.append(rng.normal(c, spread, (n_per, len(c))))
        y += [lab] * n_per
    return np.vstack(X), y


def test_mlp_separable_two_class():
    rng = np.random.default_rng(0)
    X, y = _cloud(rng, 20, {A.ACR2: [0.2] * 6, A.ACR4: [0.8] * 6}, spread=0.1)
    train = TrainingSet.from_arrays(X, y)
    model, hist = mlp_train(train, MlpHyper(epochs=2000))
    acc = np.mean([p == t for p, t in zip(mlp_predict(model, X), y)])
    assert acc >= 0.95
    assert np.all(np.diff(hist) <= 1e-6)


def test_mlp_deterministic(tmp_path):
    rng = np.random.default_rng(1)
    X, y = _cloud(rng, 5, {lab: rng.uniform(0, 1, 6) for lab in A})
    train = TrainingSet.from_arrays(X, y)
    hyper = MlpHyper(epochs=200, seed=4)
    m1, h1 = mlp_train(train, hyper)
    m2, h2 = mlp_train(train, hyper)
    for p, q in zip(m1.params(), m2.params()):
        assert np.array_equal(p, q)
    assert np.array_equal(h1, h2)
    save_mlp(m1, tmp_path / "a.txt")
    save_mlp(m2, tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_model_round_trip(tmp_path):
    train = TrainingSet.from_arrays(np.random.default_rng(2).uniform(0, 9, (10, 6)), [A.ACR1] * 5 + [A.ACR2] * 5)
    model, _ = mlp_train(train, MlpHyper(epochs=20))
    save_mlp(model, tmp_path / "m.txt")
    back = load_mlp(tmp_path / "m.txt")
    for p, q in zip(model.params(), back.params()):
        assert np.array_equal(p, q)
    assert np.array_equal(back.normalizer.lo, model.normalizer.lo)
    assert back.sizes == (6, 12, 5)


@pytest.mark.parametrize("text", ["", "something else 1\n", "mammoseg-mlp 9\nlayers 6 12 5\n"])
def test_bad_model_file(tmp_path, text):
    (tmp_path / "bad.txt").write_text(text)
    with pytest.raises(ModelFormatError):
        load_mlp(tmp_path / "bad.txt")


def test_mlp_argmax_and_ties():
    z = np.zeros
    model = MlpModel(z((12, 6)), z(12), z((5, 12)), np.log([0.1, 0.6, 0.1, 0.1, 0.1]))
    assert mlp_classify(model, z(6), normalized=True) is A.ACR2
    model = MlpModel(z((12, 6)), z(12), z((5, 12)), np.array([0.0, 0.0, 1.0, 1.0, 0.0]))
    assert mlp_classify(model, z(6), normalized=True) is A.ACR3
    zero = MlpModel(z((12, 6)), z(12), z((5, 12)), z(5))
    assert np.allclose(zero.predict_proba(z((1, 6))), 0.2)
    assert mlp_classify(zero, z(6), normalized=True) is A.ACR1


def test_mlp_dimension_mismatch():
    model = MlpModel.init(seed=0)
    with pytest.raises(ValueError):
        mlp_classify(model, np.zeros(4), normalized=True)


# KNN

def test_knn_unanimous():
    X = np.vstack([np.ones((7, 6)), np.zeros((3, 6))])
    train = TrainingSet.from_arrays(X, [A.ACR2] * 7 + [A.ACR4] * 3)
    assert knn_classify(train, np.ones(6), 7) is A.ACR2


def test_knn_exact_match_k1():
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, (10, 6))
    y = [A(1 + i % 5) for i in range(10)]
    train = TrainingSet.from_arrays(X, y)
    for i in range(10):
        assert knn_classify(train, X[i], 1) is y[i]


def test_knn_majority():
    X = np.array([[0.0] * 6] * 4 + [[0.1] * 6] * 3 + [[1.0] * 6] * 5)
    y = [A.ACR3] * 4 + [A.ACR5] * 3 + [A.ACR1] * 5
    assert knn_classify(TrainingSet.from_arrays(X, y), np.zeros(6), 7) is A.ACR3


def test_knn_vote_tie_goes_to_nearest():
    X = np.array([[0.0] * 6, [0.2] * 6, [0.3] * 6, [0.4] * 6, [1.0] * 6])
    y = [A.ACR4, A.ACR2, A.ACR2, A.ACR4, A.ACR1]
    assert knn_classify(TrainingSet.from_arrays(X, y), np.full(6, 0.01), 4) is A.ACR4


def test_knn_distance_tie_keeps_training_order():
    X = np.array([[0.0] * 6, [1.0] * 6, [1.0] * 6, [0.5] * 6])
    y = [A.ACR1, A.ACR5, A.ACR3, A.ACR2]
    # (1,..) points are equidistant from 1.0; the earlier one wins at k=1
    assert knn_classify(TrainingSet.from_arrays(X, y), np.ones(6), 1) is A.ACR5


def test_knn_bad_k():
    train = TrainingSet.from_arrays(np.eye(6)[:3], [A.ACR1] * 3)
    with pytest.raises(ValueError):
        knn_classify(train, np.zeros(6), 4)
    with pytest.raises(DegenerateInputError):
        TrainingSet.build([])


@given(st.floats(1e-3, 1e3), st.integers(0, 10**6))
def test_knn_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 10, (25, 6))
    y = [A(1 + int(v)) for v in rng.integers(0, 5, 25)]
    q = rng.uniform(0, 10, (4, 6))
    a = knn_predict(TrainingSet.from_arrays(X, y), q, 5)
    b = knn_predict(TrainingSet.from_arrays(X * scale, y), q * scale, 5)
    assert a == b


def test_normalizer_clamps_and_constant_columns():
    n = Normalizer.fit(np.array([[0.0, 5.0], [10.0, 5.0]]))
    assert n.transform(np.array([[20.0, 5.0], [-1.0, 7.0]])).tolist() == [[1.0, 0.0], [0.0, 1.0]]


# evaluation

def test_evaluate_examples():
    e = evaluate([(lab, lab) for lab in A])
    assert e.overall == 1.0 and np.all(e.per_class == 1.0)
    e = evaluate([(A.ACR1, lab) for lab in A for _ in range(4)])
    assert e.overall == pytest.approx(0.2)
    e = evaluate([(A.ACR1, A.ACR1)] * 3 + [(A.ACR2, A.ACR3)] * 2)
    assert e.overall == pytest.approx(0.6)
    assert e.confusion[2, 1] == 2
    with pytest.raises(DegenerateInputError):
        evaluate([])


@given(st.lists(st.tuples(st.sampled_from(list(A)), st.sampled_from(list(A))), min_size=1, max_size=60))
def test_overall_is_support_weighted_mean(pairs):
    e = evaluate(pairs)
    present = e.support > 0
    weighted = (e.per_class[present] * e.support[present]).sum() / e.support.sum()
    assert e.overall == pytest.approx(weighted, abs=1e-12)


def test_label_parse():
    assert AcrLabel.parse("acr3") is A.ACR3 and A.ACR3.index == 2
    with pytest.raises(ValueError):
        AcrLabel.parse("ACR6")
