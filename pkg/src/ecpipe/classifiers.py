"""Classifier heads over feature vectors, plus the evaluation metrics.

Three head kinds are supported: logistic regression (full-batch gradient
descent on mean cross-entropy with optional L2), a linear SVM (subgradient
descent on hinge loss plus L2), and a one-hidden-layer MLP (minibatch
descent, sigmoid or two-logit softmax output). Features are standardized
with constants estimated on the training split only, so affine rescaling
of any input column cannot change predicted labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .defaults import BATCH_SIZE, MLP_HIDDEN_BY_DIM, SE_MLP_HIDDEN
from .errors import DegenerateLabels, EmptyInput, NonFiniteLoss, ShapeMismatch
from .gnn import MlpParams

HEAD_KINDS = ("logreg", "linear-svm", "mlp")


@dataclass
class FeatureMatrix:
    """Feature rows with aligned binary labels and a provenance tag."""

    x: np.ndarray  # (n, p)
    y: np.ndarray  # (n,) in {0, 1}
    provenance: str = "transcript-embedding"  # | "sentiment" | "SE" | "combined"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ShapeMismatch(f"features {self.x.shape} vs labels {self.y.shape}")
        if self.x.shape[0] == 0:
            raise EmptyInput("feature matrix has no rows")
        if not np.isfinite(self.x).all():
            raise ValueError("feature matrix contains non-finite entries")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass
class HeadConfig:
    lr: float = 0.5
    epochs: int = 2000  # full-batch passes for logreg/svm, minibatch for mlp
    l2: float = 0.0
    batch_size: int = BATCH_SIZE
    seed: int = 0
    standardize: bool = True
    hidden: int | None = None  # mlp only; None resolves via the width table
    output: str = "sigmoid"  # mlp only: "sigmoid" | "softmax"
    tol: float = 1e-10  # gradient max-norm stop for logreg/svm


@dataclass
class TrainedHead:
    kind: str
    mean: np.ndarray
    std: np.ndarray
    config: HeadConfig
    weights: np.ndarray | None = None  # logreg/svm: (p,) + intercept stored separately
    intercept: float = 0.0
    mlp: MlpParams | None = None
    loss_curve: list[float] = field(default_factory=list)


def default_mlp_hidden(p: int, provenance: str) -> int:
    """Hidden width rule: dimension-keyed table, small width for hard data."""
    if provenance == "SE":
        return SE_MLP_HIDDEN
    return MLP_HIDDEN_BY_DIM.get(p, SE_MLP_HIDDEN)


def _standardizer(x: np.ndarray, enabled: bool):
    if not enabled:
        return np.zeros(x.shape[1]), np.ones(x.shape[1])
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0] = 1.0  # constant columns pass through centered
    return mean, std


def _check_two_classes(y: np.ndarray):
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")


def _fit_logreg(x, y, config: HeadConfig):
    n, p = x.shape
    w = np.zeros(p)
    b = 0.0
    curve = []
    for _ in range(config.epochs):
        z = x @ w + b
        prob = np.where(z >= 0, 1 / (1 + np.exp(-np.abs(z))),
                        np.exp(-np.abs(z)) / (1 + np.exp(-np.abs(z))))
        grad_w = x.T @ (prob - y) / n + config.l2 * w
        grad_b = float(np.mean(prob - y))
        w -= config.lr * grad_w
        b -= config.lr * grad_b
        loss = float(np.mean(np.logaddexp(0, z) - y * z) + 0.5 * config.l2 * (w @ w))
        curve.append(loss)
        if max(np.abs(grad_w).max(), abs(grad_b)) < config.tol:
            break
    return w, b, curve


def _fit_svm(x, y, config: HeadConfig):
    n, p = x.shape
    sign = 2.0 * y - 1.0  # {0,1} -> {-1,+1}
    w = np.zeros(p)
    b = 0.0
    curve = []
    for _ in range(config.epochs):
        margin = sign * (x @ w + b)
        active = margin < 1.0
        grad_w = -(x[active].T @ sign[active]) / n + config.l2 * w
        grad_b = -float(sign[active].sum()) / n
        w -= config.lr * grad_w
        b -= config.lr * grad_b
        loss = float(np.mean(np.maximum(0.0, 1.0 - margin)) + 0.5 * config.l2 * (w @ w))
        curve.append(loss)
        if max(np.abs(grad_w).max(), abs(grad_b)) < config.tol:
            break
    return w, b, curve


def _fit_mlp(x, y, config: HeadConfig, provenance: str):
    n, p = x.shape
    hidden = config.hidden if config.hidden is not None else default_mlp_hidden(p, provenance)
    out_dim = 1 if config.output == "sigmoid" else 2
    rng = np.random.default_rng(config.seed)
    mlp = MlpParams.init(p, hidden, out_dim, rng)
    params = mlp.tensors("mlp")
    curve = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = np.sort(order[start:start + config.batch_size])
            for t in params.values():
                t.zero_grad()
            logits = mlp.apply(Tensor(x[idx]))
            if config.output == "sigmoid":
                loss = ad.sigmoid_bce_mean(logits, y[idx].astype(np.float64))
            else:
                loss = ad.softmax_cross_entropy(logits, y[idx])
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLoss(f"mlp loss {value}; lr={config.lr}, hidden={hidden}")
            loss.backward()
            for t in params.values():
                if t.grad is not None:
                    t.data -= config.lr * t.grad
            epoch_losses.append(value)
        curve.append(float(np.mean(epoch_losses)))
    return mlp, curve


def fit_head(kind: str, features: FeatureMatrix, config: HeadConfig | None = None) -> TrainedHead:
    """Fit one classifier head; deterministic given the config seed."""
    if kind not in HEAD_KINDS:
        raise ValueError(f"kind must be one of {HEAD_KINDS}, got {kind!r}")
    config = config or HeadConfig()
    if config.output not in ("sigmoid", "softmax"):
        raise ValueError(f"mlp output must be sigmoid or softmax, got {config.output!r}")
    _check_two_classes(features.y)
    mean, std = _standardizer(features.x, config.standardize)
    x = (features.x - mean) / std
    y = features.y.astype(np.float64)

    head = TrainedHead(kind=kind, mean=mean, std=std, config=config)
    if kind == "logreg":
        head.weights, head.intercept, head.loss_curve = _fit_logreg(x, y, config)
    elif kind == "linear-svm":
        head.weights, head.intercept, head.loss_curve = _fit_svm(x, y, config)
    else:
        head.mlp, head.loss_curve = _fit_mlp(x, features.y, config, features.provenance)
    return head


def decision_scores(head: TrainedHead, x: np.ndarray) -> np.ndarray:
    """Probability of class 1 (logreg/mlp) or signed margin (svm)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != head.mean.shape[0]:
        raise ShapeMismatch(f"features {x.shape} do not match trained width {head.mean.shape[0]}")
    z = (x - head.mean) / head.std
    if head.kind == "linear-svm":
        return z @ head.weights + head.intercept
    if head.kind == "logreg":
        raw = z @ head.weights + head.intercept
        return np.where(raw >= 0, 1 / (1 + np.exp(-np.abs(raw))),
                        np.exp(-np.abs(raw)) / (1 + np.exp(-np.abs(raw))))
    logits = head.mlp.apply(Tensor(z)).data
    if head.config.output == "sigmoid":
        raw = logits[:, 0]
        return np.where(raw >= 0, 1 / (1 + np.exp(-np.abs(raw))),
                        np.exp(-np.abs(raw)) / (1 + np.exp(-np.abs(raw))))
    return ad.softmax(logits)[:, 1]


def predict(head: TrainedHead, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and scores; a score exactly at the threshold maps to class 1."""
    scores = decision_scores(head, x)
    threshold = 0.0 if head.kind == "linear-svm" else 0.5
    return (scores >= threshold).astype(np.int64), scores


# --- metrics ---------------------------------------------------------------


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    macro_precision: float
    macro_recall: float
    per_class: dict[int, dict[str, float]]


def evaluate(pred, truth) -> Evaluation:
    """Accuracy plus macro (unweighted class-mean) precision and recall.

    Macro averages run over the classes present in the truth labels. A
    class that is never predicted receives precision 0. A constant
    predictor therefore scores macro recall exactly 0.5 whenever both
    classes appear in the truth.
    """
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if pred.shape[0] != truth.shape[0]:
        raise ShapeMismatch(f"{pred.shape[0]} predictions vs {truth.shape[0]} labels")
    if pred.shape[0] == 0:
        raise EmptyInput("cannot evaluate zero predictions")

    per_class = {}
    classes = sorted(set(truth.tolist()))
    for c in classes:
        tp = int(np.sum((pred == c) & (truth == c)))
        fp = int(np.sum((pred == c) & (truth != c)))
        fn = int(np.sum((pred != c) & (truth == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_class[c] = {"precision": precision, "recall": recall,
                        "support": int(np.sum(truth == c))}
    return Evaluation(
        accuracy=float(np.mean(pred == truth)),
        macro_precision=float(np.mean([v["precision"] for v in per_class.values()])),
        macro_recall=float(np.mean([v["recall"] for v in per_class.values()])),
        per_class=per_class,
    )
