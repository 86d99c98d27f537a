"""KNN and MLP classifiers over six-feature texture vectors."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateInputError, ModelFormatError, TrainingError

N_FEATURES = 6
N_CLASSES = 5
MODEL_MAGIC = "mammoseg-mlp"
MODEL_VERSION = 1


class AcrLabel(enum.IntEnum):
    ACR1 = 1
    ACR2 = 2
    ACR3 = 3
    ACR4 = 4
    ACR5 = 5

    @property
    def index(self) -> int:
        return int(self) - 1

    @classmethod
    def parse(cls, text) -> "AcrLabel":
        if isinstance(text, AcrLabel):
            return text
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown ACR label {text!r}") from None


def _as_matrix(x) -> np.ndarray:
    if hasattr(x, "as_array"):
        x = x.as_array()
    arr = np.asarray(x, dtype=np.float64)
    return arr.reshape(1, -1) if arr.ndim == 1 else arr


@dataclass(frozen=True)
class Normalizer:
    """Per-feature min-max scaling fitted on training data."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, X) -> "Normalizer":
        X = _as_matrix(X)
        if not np.all(np.isfinite(X)):
            raise ValueError("training features must be finite")
        return cls(X.min(axis=0), X.max(axis=0))

    def transform(self, X, clamp: bool = True) -> np.ndarray:
        X = _as_matrix(X)
        span = self.hi - self.lo
        # constant features carry no information; map them to 0
        span = np.where(span > 0, span, 1.0)
        Z = (X - self.lo) / span
        return np.clip(Z, 0.0, 1.0) if clamp else Z


@dataclass(frozen=True)
class TrainingSet:
    features: np.ndarray  # raw, (n, 6)
    labels: np.ndarray  # AcrLabel values, (n,)
    normalizer: Normalizer
    normalized: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, samples: Sequence[Tuple[object, AcrLabel]]) -> "TrainingSet":
        if len(samples) == 0:
            raise DegenerateInputError("training set is empty")
        X = np.vstack([_as_matrix(fv) for fv, _ in samples])
        y = np.array([int(AcrLabel.parse(lab)) for _, lab in samples], dtype=np.int64)
        norm = Normalizer.fit(X)
        return cls(X, y, norm, norm.transform(X))

    @classmethod
    def from_arrays(cls, X, y) -> "TrainingSet":
        return cls.build(list(zip(_as_matrix(X), y)))

    def __len__(self):
        return len(self.labels)

    def classes_present(self):
        return sorted({AcrLabel(v) for v in self.labels})


# --------------------------------------------------------------------------
# KNN


def knn_classify(train: TrainingSet, query, k: int = 7) -> AcrLabel:
    """Majority vote of the ``k`` nearest training vectors.

    Distance ties keep training order; a tied vote goes to the tied class
    whose member sits nearest the query.
    """
    if len(train) == 0:
        raise DegenerateInputError("training set is empty")
    if not 1 <= k <= len(train):
        raise ValueError(f"k={k} must lie in [1, {len(train)}]")
    z = train.normalizer.transform(query)[0]
    d = np.sqrt(((train.normalized - z) ** 2).sum(axis=1))
    nearest = np.argsort(d, kind="stable")[:k]
    votes = train.labels[nearest]
    counts = np.bincount(votes, minlength=N_CLASSES + 1)
    tied = np.flatnonzero(counts == counts.max())
    for lab in votes:  # nearest first
        if lab in tied:
            return AcrLabel(int(lab))
    raise AssertionError("unreachable")


def knn_predict(train: TrainingSet, queries, k: int = 7) -> List[AcrLabel]:
    return [knn_classify(train, q, k) for q in _as_matrix(queries)]


# --------------------------------------------------------------------------
# MLP


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class MlpModel:
    """sizes[0] -> sizes[1] (sigmoid) -> sizes[2] (softmax)."""

    W1: np.ndarray  # (hidden, in)
    b1: np.ndarray
    W2: np.ndarray  # (out, hidden)
    b2: np.ndarray
    normalizer: Optional[Normalizer] = None
    activations: Tuple[str, str] = ("sigmoid", "softmax")

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return self.W1.shape[1], self.W1.shape[0], self.W2.shape[0]

    @classmethod
    def init(cls, sizes=(N_FEATURES, 12, N_CLASSES), seed=0, normalizer=None) -> "MlpModel":
        rng = np.random.default_rng(seed)
        n_in, n_hid, n_out = sizes
        return cls(
            rng.uniform(-0.5, 0.5, (n_hid, n_in)),
            rng.uniform(-0.5, 0.5, n_hid),
            rng.uniform(-0.5, 0.5, (n_out, n_hid)),
            rng.uniform(-0.5, 0.5, n_out),
            normalizer,
        )

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def forward(self, Z):
        Z = _as_matrix(Z)
        if Z.shape[1] != self.W1.shape[1]:
            raise ValueError(f"expected {self.W1.shape[1]} features, got {Z.shape[1]}")
        H = _sigmoid(Z @ self.W1.T + self.b1)
        return H, _softmax(H @ self.W2.T + self.b2)

    def predict_proba(self, Z):
        return self.forward(Z)[1]


def one_hot(labels, n_classes=N_CLASSES) -> np.ndarray:
    idx = np.asarray([int(v) - 1 for v in labels])
    Y = np.zeros((idx.size, n_classes))
    Y[np.arange(idx.size), idx] = 1.0
    return Y


def loss_and_grad(model: MlpModel, Z, Y):
    """Mean cross-entropy and its gradient w.r.t. (W1, b1, W2, b2)."""
    Z = _as_matrix(Z)
    n = Z.shape[0]
    H, P = model.forward(Z)
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n
    dO = (P - Y) / n
    gW2 = dO.T @ H
    gb2 = dO.sum(axis=0)
    dH = (dO @ model.W2) * H * (1.0 - H)
    gW1 = dH.T @ Z
    gb1 = dH.sum(axis=0)
    return float(loss), [gW1, gb1, gW2, gb2]


@dataclass(frozen=True)
class MlpHyper:
    learning_rate: float = 2.0
    epochs: int = 5000
    seed: int = 0
    hidden: int = 12
    # an epoch may raise the loss by at most this much before the step is undone
    tolerance: float = 1e-6


def mlp_train(train: TrainingSet, hyper: MlpHyper = MlpHyper()):
    """Full-batch gradient descent with step halving.

    A step that raises the loss by more than ``hyper.tolerance`` is
    rejected and the learning rate halved, so the recorded loss never
    rises.  Returns the fitted model and the per-epoch loss history.
    """
    if len(train) == 0:
        raise DegenerateInputError("training set is empty")
    if hyper.learning_rate <= 0 or hyper.epochs <= 0:
        raise ValueError("learning rate and epochs must be positive")
    Z = train.normalized
    Y = one_hot(train.labels)
    model = MlpModel.init((Z.shape[1], hyper.hidden, N_CLASSES), hyper.seed, train.normalizer)
    lr = hyper.learning_rate
    loss, grads = loss_and_grad(model, Z, Y)
    history = [loss]
    for epoch in range(1, hyper.epochs + 1):
        trial = MlpModel(*(p - lr * g for p, g in zip(model.params(), grads)),
                         normalizer=model.normalizer)
        new_loss, new_grads = loss_and_grad(trial, Z, Y)
        if not np.isfinite(new_loss):
            raise TrainingError("loss became non-finite", epoch)
        if new_loss > loss + hyper.tolerance:
            lr *= 0.5
        else:
            model, loss, grads = trial, new_loss, new_grads
        history.append(loss)
    return model, np.array(history)


def mlp_classify(model: MlpModel, query, normalized: bool = False) -> AcrLabel:
    """Argmax of the softmax output; ties go to the lower ACR index.

    Raw feature vectors are normalised with the model's training ranges
    unless ``normalized`` is set.
    """
    z = _as_matrix(query)
    if not normalized and model.normalizer is not None:
        if z.shape[1] != model.normalizer.lo.size:
            raise ValueError(f"expected {model.normalizer.lo.size} features, got {z.shape[1]}")
        z = model.normalizer.transform(z)
    probs = model.predict_proba(z)[0]
    return AcrLabel(int(np.argmax(probs)) + 1)


def mlp_predict(model: MlpModel, queries) -> List[AcrLabel]:
    return [mlp_classify(model, q) for q in _as_matrix(queries)]


# --------------------------------------------------------------------------
# persistence


def _fmt(arr) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(arr))


def save_mlp(model: MlpModel, path) -> None:
    n_in, n_hid, n_out = model.sizes
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        f"layers {n_in} {n_hid} {n_out}",
        "activations " + " ".join(model.activations),
        "W1 " + _fmt(model.W1),
        "b1 " + _fmt(model.b1),
        "W2 " + _fmt(model.W2),
        "b2 " + _fmt(model.b2),
    ]
    if model.normalizer is not None:
        lines.append("norm_min " + _fmt(model.normalizer.lo))
        lines.append("norm_max " + _fmt(model.normalizer.hi))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mlp(path) -> MlpModel:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    if not rows or rows[0][0] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    if int(rows[0][1]) != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {rows[0][1]}")
    rec = {r[0]: r[1:] for r in rows[1:]}
    n_in, n_hid, n_out = (int(v) for v in rec["layers"])
    arr = lambda key: np.array([float(v) for v in rec[key]])  # noqa: E731
    norm = None
    if "norm_min" in rec:
        norm = Normalizer(arr("norm_min"), arr("norm_max"))
    return MlpModel(
        arr("W1").reshape(n_hid, n_in), arr("b1"),
        arr("W2").reshape(n_out, n_hid), arr("b2"),
        norm, tuple(rec.get("activations", ("sigmoid", "softmax"))),
    )


# --------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class Evaluation:
    overall: float
    per_class: np.ndarray  # accuracy per ACR class, nan when absent from truth
    confusion: np.ndarray  # rows truth, columns prediction
    support: np.ndarray


def evaluate(predictions: Sequence[Tuple[AcrLabel, AcrLabel]]) -> Evaluation:
    """Accuracy from (predicted, truth) pairs."""
    if len(predictions) == 0:
        raise DegenerateInputError("nothing to evaluate")
    conf = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for pred, truth in predictions:
        conf[AcrLabel.parse(truth).index, AcrLabel.parse(pred).index] += 1
    support = conf.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(support > 0, np.diag(conf) / support, np.nan)
    overall = np.trace(conf) / conf.sum()
    return Evaluation(float(overall), per_class, conf, support)
