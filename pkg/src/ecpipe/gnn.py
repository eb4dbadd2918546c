"""Gated graph network over graphs-of-words.

One propagation step mixes each node's state with its neighbours' states
through an update gate x and a reset gate r:

    a = A z W_a
    x = sigmoid(a W_x + z U_x + b_x)
    r = sigmoid(a W_r + z U_r + b_r)
    zhat = tanh(a W_z + (r * z) U_z + b_z)
    z' = zhat + z * (1 - x)

with row-per-node matrices and elementwise gate products. Note the final
combination keeps z' = zhat + z * (1 - x) rather than the more common
gated blend x * zhat + (1 - x) * z; the asymmetric form is intentional.

Node states after k steps are squeezed through a gated mean readout
(sigmoid branch times tanh branch, averaged over nodes) into a graph-level
embedding, optionally concatenated with an unsupervised document vector,
and classified by a small MLP head with softmax cross-entropy.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .defaults import BATCH_SIZE, GNN_HOPS, GRAPH_EMBEDDING_DIM
from .errors import EmptyGraph, NonFiniteLoss, ShapeMismatch
from .textgraph import TextGraph

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class GatedGnnParams:
    """Weights of one propagation step, shared across all k steps."""

    w_a: Tensor
    w_x: Tensor
    u_x: Tensor
    b_x: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor

    @classmethod
    def init(cls, d: int, rng: np.random.Generator) -> "GatedGnnParams":
        def w():
            return ad.parameter(glorot_uniform(rng, d, d))

        def b():
            return ad.parameter(np.zeros((1, d)))

        return cls(w_a=w(), w_x=w(), u_x=w(), b_x=b(), w_r=w(), u_r=w(), b_r=b(),
                   w_z=w(), u_z=w(), b_z=b())

    @classmethod
    def zeros(cls, d: int) -> "GatedGnnParams":
        def z():
            return ad.parameter(np.zeros((d, d)))

        def b():
            return ad.parameter(np.zeros((1, d)))

        return cls(w_a=z(), w_x=z(), u_x=z(), b_x=b(), w_r=z(), u_r=z(), b_r=b(),
                   w_z=z(), u_z=z(), b_z=b())

    @property
    def dim(self) -> int:
        return self.w_a.rows

    def tensors(self) -> dict[str, Tensor]:
        return {name: getattr(self, name) for name in
                ("w_a", "w_x", "u_x", "b_x", "w_r", "u_r", "b_r", "w_z", "u_z", "b_z")}


@dataclass
class MlpParams:
    """One hidden layer with tanh, then a linear output."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def init(cls, d_in: int, d_hidden: int, d_out: int, rng: np.random.Generator) -> "MlpParams":
        return cls(
            w1=ad.parameter(glorot_uniform(rng, d_in, d_hidden)),
            b1=ad.parameter(np.zeros((1, d_hidden))),
            w2=ad.parameter(glorot_uniform(rng, d_hidden, d_out)),
            b2=ad.parameter(np.zeros((1, d_out))),
        )

    @classmethod
    def zeros(cls, d_in: int, d_hidden: int, d_out: int) -> "MlpParams":
        return cls(
            w1=ad.parameter(np.zeros((d_in, d_hidden))),
            b1=ad.parameter(np.zeros((1, d_hidden))),
            w2=ad.parameter(np.zeros((d_hidden, d_out))),
            b2=ad.parameter(np.zeros((1, d_out))),
        )

    def apply(self, x: Tensor) -> Tensor:
        hidden = ad.tanh(x @ self.w1 + self.b1)
        return hidden @ self.w2 + self.b2

    def tensors(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.{n}": getattr(self, n) for n in ("w1", "b1", "w2", "b2")}


@dataclass
class AggregatorParams:
    """Independent gate and value branches of the graph readout."""

    gate: MlpParams
    value: MlpParams

    @classmethod
    def init(cls, d: int, d_out: int, rng: np.random.Generator) -> "AggregatorParams":
        # Hidden width follows the node dimension.
        return cls(gate=MlpParams.init(d, d, d_out, rng),
                   value=MlpParams.init(d, d, d_out, rng))

    @classmethod
    def zeros(cls, d: int, d_out: int) -> "AggregatorParams":
        return cls(gate=MlpParams.zeros(d, d, d_out), value=MlpParams.zeros(d, d, d_out))

    @property
    def out_dim(self) -> int:
        return self.gate.w2.cols

    def tensors(self) -> dict[str, Tensor]:
        return {**self.gate.tensors("agg_gate"), **self.value.tensors("agg_value")}


@dataclass
class StockGnnModel:
    """Full parameter set: propagation, readout, and classifier head."""

    gnn: GatedGnnParams
    aggregator: AggregatorParams
    head: MlpParams
    hops: int = GNN_HOPS
    doc_dim: int = 0  # width of the concatenated document vector, 0 if unused

    @classmethod
    def init(
        cls,
        d: int,
        seed: int,
        d_out: int = GRAPH_EMBEDDING_DIM,
        doc_dim: int = 0,
        head_hidden: int = 64,
        hops: int = GNN_HOPS,
    ) -> "StockGnnModel":
        rng = np.random.default_rng(seed)
        return cls(
            gnn=GatedGnnParams.init(d, rng),
            aggregator=AggregatorParams.init(d, d_out, rng),
            head=MlpParams.init(d_out + doc_dim, head_hidden, 2, rng),
            hops=hops,
            doc_dim=doc_dim,
        )

    def tensors(self) -> dict[str, Tensor]:
        return {**self.gnn.tensors(), **self.aggregator.tensors(), **self.head.tensors("head")}

    def zero_grads(self):
        for t in self.tensors().values():
            t.zero_grad()


# --- forward passes -----------------------------------------------------


def _step_t(z: Tensor, adjacency: Tensor, p: GatedGnnParams) -> Tensor:
    a = adjacency @ z @ p.w_a
    x = ad.sigmoid(a @ p.w_x + z @ p.u_x + p.b_x)
    r = ad.sigmoid(a @ p.w_r + z @ p.u_r + p.b_r)
    zhat = ad.tanh(a @ p.w_z + ad.mul(r, z) @ p.u_z + p.b_z)
    ones = Tensor(np.ones_like(x.data))
    return zhat + ad.mul(z, ones - x)


def _run_gnn_t(features: Tensor, adjacency: Tensor, p: GatedGnnParams, k: int) -> Tensor:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    z = features
    for _ in range(k):
        z = _step_t(z, adjacency, p)
    return z


def _aggregate_t(z: Tensor, ap: AggregatorParams) -> Tensor:
    if z.rows < 1:
        raise EmptyGraph("cannot aggregate an empty node set")
    per_node = ad.mul(ad.sigmoid(ap.gate.apply(z)), ad.tanh(ap.value.apply(z)))
    return ad.mean_rows(per_node)


def _forward_logits_t(
    g: TextGraph,
    model: StockGnnModel,
    doc_embedding: np.ndarray | None,
) -> Tensor:
    if g.node_features is None:
        raise ShapeMismatch("graph has no node features attached")
    if g.node_features.shape[1] != model.gnn.dim:
        raise ShapeMismatch(
            f"node features of width {g.node_features.shape[1]}, model expects {model.gnn.dim}"
        )
    z = _run_gnn_t(Tensor(g.node_features), Tensor(g.adjacency), model.gnn, model.hops)
    z_g = _aggregate_t(z, model.aggregator)
    if model.doc_dim:
        if doc_embedding is None:
            raise ShapeMismatch("model expects a document vector but none was given")
        doc = np.asarray(doc_embedding, dtype=np.float64).reshape(1, -1)
        if doc.shape[1] != model.doc_dim:
            raise ShapeMismatch(f"document vector of width {doc.shape[1]}, expected {model.doc_dim}")
        z_g = ad.concat_cols(z_g, Tensor(doc))
    elif doc_embedding is not None:
        raise ShapeMismatch("model was built without a document-vector slot")
    return model.head.apply(z_g)


# --- plain-array API ------------------------------------------------------


def gated_gnn_step(z_prev: np.ndarray, adjacency: np.ndarray, p: GatedGnnParams) -> np.ndarray:
    """One propagation step on plain arrays."""
    z_prev = np.asarray(z_prev, dtype=np.float64)
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if z_prev.shape[0] != adjacency.shape[0] or adjacency.shape[0] != adjacency.shape[1]:
        raise ShapeMismatch(f"features {z_prev.shape} vs adjacency {adjacency.shape}")
    if z_prev.shape[1] != p.dim:
        raise ShapeMismatch(f"features of width {z_prev.shape[1]}, params expect {p.dim}")
    return _step_t(Tensor(z_prev), Tensor(adjacency), p).data


def run_gnn(g: TextGraph, p: GatedGnnParams, k: int = GNN_HOPS) -> np.ndarray:
    """k-fold propagation starting from the graph's node features."""
    if g.node_features is None:
        raise ShapeMismatch("graph has no node features attached")
    if g.node_features.shape[1] != p.dim:
        raise ShapeMismatch(
            f"node features of width {g.node_features.shape[1]}, params expect {p.dim}"
        )
    return _run_gnn_t(Tensor(g.node_features), Tensor(g.adjacency), p, k).data


def aggregate(z_final: np.ndarray, ap: AggregatorParams) -> np.ndarray:
    """Gated mean readout: returns the graph-level embedding row."""
    z_final = np.asarray(z_final, dtype=np.float64)
    if z_final.ndim != 2 or z_final.shape[0] < 1:
        raise EmptyGraph(f"need a non-empty (n, d) node matrix, got {z_final.shape}")
    return _aggregate_t(Tensor(z_final), ap).data[0]


def forward_classify(
    g: TextGraph,
    model: StockGnnModel,
    doc_embedding: np.ndarray | None = None,
) -> np.ndarray:
    """Class probabilities for one graph; always sums to 1."""
    logits = _forward_logits_t(g, model, doc_embedding)
    return ad.softmax(logits.data)[0]


# --- training -------------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 0.1
    epochs: int = 50
    batch_size: int = BATCH_SIZE
    seed: int = 0
    patience: int = 5  # early-stop patience on validation loss


@dataclass
class TrainResult:
    model: StockGnnModel
    loss_curve: list[dict] = field(default_factory=list)
    stopped_epoch: int | None = None


Example = tuple[TextGraph, np.ndarray | None, int]


def _example_loss(model: StockGnnModel, example: Example) -> Tensor:
    g, doc, label = example
    logits = _forward_logits_t(g, model, doc)
    return ad.softmax_cross_entropy(logits, np.array([label]))


def dataset_loss(model: StockGnnModel, dataset: list[Example]) -> float:
    losses = [_example_loss(model, ex).item() for ex in dataset]
    return float(np.mean(losses))


def train(
    dataset: list[Example],
    model: StockGnnModel,
    config: TrainConfig,
    val_set: list[Example] | None = None,
) -> TrainResult:
    """Minibatch gradient descent on mean cross-entropy.

    Shuffle order is fixed by the seed and per-example losses are
    accumulated in sorted index order, so training is deterministic. When a
    validation set is given, training stops after ``patience`` epochs
    without improvement and the best parameters are restored.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(config.seed)
    params = model.tensors()
    result = TrainResult(model=model)
    best_val = np.inf
    best_snapshot: dict[str, np.ndarray] | None = None
    epochs_since_best = 0

    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch_idx = sorted(order[start:start + config.batch_size])
            model.zero_grads()
            losses = [_example_loss(model, dataset[i]) for i in batch_idx]
            loss = ad.mean_of(losses)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLoss(
                    f"non-finite loss {value} at epoch {epoch}, batch start {start}; "
                    f"lr={config.lr}, batch={len(batch_idx)}"
                )
            loss.backward()
            for t in params.values():
                if t.grad is not None:
                    t.data -= config.lr * t.grad
            epoch_losses.append(value)
        entry = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses))}

        if val_set is not None:
            val_loss = dataset_loss(model, val_set)
            entry["val_loss"] = val_loss
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best_snapshot = {k: t.data.copy() for k, t in params.items()}
                epochs_since_best = 0
            else:
                epochs_since_best += 1
        result.loss_curve.append(entry)
        if val_set is not None and epochs_since_best > config.patience:
            result.stopped_epoch = epoch
            logger.info("early stop at epoch %d (best val %.6f)", epoch, best_val)
            break

    if best_snapshot is not None:
        for k, t in params.items():
            t.data = best_snapshot[k]
    return result


# --- checkpoints ------------------------------------------------------------


def save_checkpoint(model: StockGnnModel, path, config: TrainConfig | None = None):
    """Write a versioned JSON checkpoint; round-trips exactly via repr floats."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "hops": model.hops,
        "doc_dim": model.doc_dim,
        "config": None if config is None else {
            "lr": config.lr, "epochs": config.epochs,
            "batch_size": config.batch_size, "seed": config.seed,
            "patience": config.patience,
        },
        "params": {
            name: {"shape": list(t.shape), "data": t.data.reshape(-1).tolist()}
            for name, t in sorted(model.tensors().items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path) -> StockGnnModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    tensors = {}
    for name, spec in payload["params"].items():
        tensors[name] = ad.parameter(
            np.asarray(spec["data"], dtype=np.float64).reshape(spec["shape"])
        )

    def mlp(prefix: str) -> MlpParams:
        return MlpParams(w1=tensors[f"{prefix}.w1"], b1=tensors[f"{prefix}.b1"],
                         w2=tensors[f"{prefix}.w2"], b2=tensors[f"{prefix}.b2"])

    gnn = GatedGnnParams(**{n: tensors[n] for n in
                            ("w_a", "w_x", "u_x", "b_x", "w_r", "u_r", "b_r",
                             "w_z", "u_z", "b_z")})
    return StockGnnModel(
        gnn=gnn,
        aggregator=AggregatorParams(gate=mlp("agg_gate"), value=mlp("agg_value")),
        head=mlp("head"),
        hops=payload["hops"],
        doc_dim=payload["doc_dim"],
    )
