"""Unsupervised document vectors: distributed-memory paragraph vectors.

Each document owns a trainable vector that is averaged with the context
word vectors around a position to predict the center word under a
negative-sampling logistic loss. Negatives come from the unigram
distribution raised to the 3/4 power. Training is single-threaded and
seeded, so embeddings are bit-identical across runs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .defaults import (
    DOCEMBED_LR,
    DOCEMBED_MIN_COUNT,
    DOCEMBED_NEGATIVES,
    DOCEMBED_WINDOW,
)
from .errors import EmptyVocab, NonFiniteLoss

logger = logging.getLogger(__name__)

STORE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Vocab:
    """Words above the frequency floor, indexed by descending count."""

    index: dict[str, int]
    counts: np.ndarray
    min_count: int

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, word: str) -> bool:
        return word in self.index


def build_vocab(corpus: list[list[str]], min_count: int = DOCEMBED_MIN_COUNT) -> Vocab:
    """Count words over the corpus and keep those with count >= min_count.

    Index assignment is deterministic: descending frequency, ties broken
    lexicographically.
    """
    counts: dict[str, int] = {}
    for tokens in corpus:
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted(
        ((w, c) for w, c in counts.items() if c >= min_count),
        key=lambda wc: (-wc[1], wc[0]),
    )
    if not kept:
        raise EmptyVocab(
            f"no word reaches min_count={min_count} over {len(corpus)} documents"
        )
    return Vocab(
        index={w: i for i, (w, _) in enumerate(kept)},
        counts=np.array([c for _, c in kept], dtype=np.float64),
        min_count=min_count,
    )


@dataclass
class PvdmConfig:
    dim: int
    lr: float = DOCEMBED_LR
    negatives: int = DOCEMBED_NEGATIVES
    window: int = DOCEMBED_WINDOW
    epochs: int = 10
    seed: int = 0
    min_lr: float = 1e-4  # linear-decay floor; never raises lr above its start

    def to_dict(self) -> dict:
        return {
            "dim": self.dim, "lr": self.lr, "negatives": self.negatives,
            "window": self.window, "epochs": self.epochs, "seed": self.seed,
            "min_lr": self.min_lr,
        }


@dataclass
class DocEmbeddings:
    """Trained model: per-document vectors plus the two word matrices."""

    config: PvdmConfig
    vocab: Vocab
    doc_ids: list[str]
    doc_vectors: np.ndarray  # (n_docs, dim)
    w_in: np.ndarray  # (|V|, dim) context vectors
    w_out: np.ndarray  # (|V|, dim) prediction vectors
    noise_cdf: np.ndarray = field(repr=False, default=None)
    loss_curve: list[float] = field(default_factory=list)

    def vector(self, doc_id: str) -> np.ndarray:
        return self.doc_vectors[self.doc_ids.index(doc_id)]

    def vectors_by_id(self) -> dict[str, np.ndarray]:
        return {doc_id: self.doc_vectors[i] for i, doc_id in enumerate(self.doc_ids)}


def _sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def _noise_cdf(counts: np.ndarray) -> np.ndarray:
    weights = counts ** 0.75
    return np.cumsum(weights / weights.sum())


def _draw_negatives(rng, cdf, count, center):
    """Sample indices from the noise distribution, never the center word."""
    if len(cdf) < 2 or count == 0:
        return np.empty(0, dtype=np.int64)
    negs = np.searchsorted(cdf, rng.random(count))
    for _ in range(100):
        clash = negs == center
        if not clash.any():
            break
        negs[clash] = np.searchsorted(cdf, rng.random(int(clash.sum())))
    return negs[negs != center]


def _doc_positions(tokens: list[str], vocab: Vocab, window: int):
    """(center, context-indices) pairs for every in-vocab center token."""
    ids = [vocab.index.get(t, -1) for t in tokens]
    positions = []
    for i, center in enumerate(ids):
        if center < 0:
            continue
        ctx = [ids[j] for j in range(max(0, i - window), min(len(ids), i + window + 1))
               if j != i and ids[j] >= 0]
        positions.append((center, tuple(ctx)))
    return positions


def position_loss(doc_vec, ctx_vecs, center, negatives, w_out) -> float:
    """Negative-sampling loss at one position, given resolved vectors."""
    h = doc_vec if not len(ctx_vecs) else (doc_vec + ctx_vecs.sum(axis=0)) / (1 + len(ctx_vecs))
    loss = -np.log(np.clip(_sigmoid(h @ w_out[center]), 1e-12, None))
    if len(negatives):
        loss -= np.log(np.clip(_sigmoid(-(w_out[negatives] @ h)), 1e-12, None)).sum()
    return float(loss)


def _sgd_position(doc_vectors, di, w_in, w_out, center, ctx, negatives, lr,
                  update_words: bool = True) -> float:
    """One stochastic step; returns the pre-update loss at this position."""
    m = 1 + len(ctx)
    ctx = np.asarray(ctx, dtype=np.int64)
    contrib = doc_vectors[di] if m == 1 else (doc_vectors[di] + w_in[ctx].sum(axis=0)) / m

    targets = np.concatenate(([center], negatives)).astype(np.int64)
    labels = np.zeros(len(targets))
    labels[0] = 1.0
    scores = _sigmoid(w_out[targets] @ contrib)
    loss = -float(np.log(np.clip(scores[0], 1e-12, None)))
    if len(targets) > 1:
        loss -= float(np.log(np.clip(1.0 - scores[1:], 1e-12, None)).sum())

    err = scores - labels  # d loss / d (w_out[t] . h)
    grad_h = err @ w_out[targets]
    if update_words:
        # subtract.at accumulates when a word is drawn as negative twice
        np.subtract.at(w_out, targets, lr * np.outer(err, contrib))
    # the mean splits the gradient evenly across contributors
    share = lr * grad_h / m
    doc_vectors[di] -= share
    if update_words and len(ctx):
        np.subtract.at(w_in, ctx, share)
    return loss


def train_pvdm(
    corpus: list[tuple[str, list[str]]],
    vocab: Vocab,
    config: PvdmConfig,
) -> DocEmbeddings:
    """Train document and word vectors over (doc_id, tokens) pairs.

    The learning rate decays linearly from ``config.lr`` to the floor over
    all scheduled updates. With lr=0 nothing moves and the embeddings equal
    their seeded initialization.
    """
    if config.dim <= 0:
        raise ValueError(f"dim must be positive, got {config.dim}")
    rng = np.random.default_rng(config.seed)
    n_docs = len(corpus)
    doc_ids = [doc_id for doc_id, _ in corpus]
    span = 0.5 / config.dim
    doc_vectors = rng.uniform(-span, span, size=(n_docs, config.dim))
    w_in = rng.uniform(-span, span, size=(len(vocab), config.dim))
    w_out = np.zeros((len(vocab), config.dim))
    cdf = _noise_cdf(vocab.counts)

    positions = [(di, _doc_positions(tokens, vocab, config.window))
                 for di, (_, tokens) in enumerate(corpus)]
    total = config.epochs * sum(len(p) for _, p in positions)
    floor = min(config.min_lr, config.lr)
    done = 0
    model = DocEmbeddings(config=config, vocab=vocab, doc_ids=doc_ids,
                          doc_vectors=doc_vectors, w_in=w_in, w_out=w_out,
                          noise_cdf=cdf)
    if total == 0:
        logger.warning("no trainable positions (all tokens out of vocabulary?)")
        return model

    for epoch in range(config.epochs):
        epoch_loss = 0.0
        n_pos = 0
        for di, doc_pos in positions:
            for center, ctx in doc_pos:
                lr_t = config.lr + (floor - config.lr) * (done / total)
                negs = _draw_negatives(rng, cdf, config.negatives, center)
                epoch_loss += _sgd_position(
                    doc_vectors, di, w_in, w_out, center, ctx, negs, lr_t
                )
                done += 1
                n_pos += 1
        mean_loss = epoch_loss / max(1, n_pos)
        if not np.isfinite(mean_loss):
            raise NonFiniteLoss(f"document-embedding loss {mean_loss} at epoch {epoch}")
        model.loss_curve.append(mean_loss)
    return model


def infer_vector(
    tokens: list[str],
    model: DocEmbeddings,
    steps: int = 5,
    seed: int = 0,
) -> np.ndarray:
    """Embed an unseen document with the word matrices frozen.

    Runs ``steps`` passes of document-vector-only updates. A document with
    no in-vocabulary token returns its seeded initialization unchanged
    (logged, since downstream consumers may want to drop it).
    """
    config = model.config
    rng = np.random.default_rng(seed)
    span = 0.5 / config.dim
    vec = rng.uniform(-span, span, size=(1, config.dim))
    positions = _doc_positions(tokens, model.vocab, config.window)
    if not positions:
        logger.warning("inference document has no in-vocabulary tokens; returning initialization")
        return vec[0]
    floor = min(config.min_lr, config.lr)
    total = steps * len(positions)
    done = 0
    for _ in range(steps):
        for center, ctx in positions:
            lr_t = config.lr + (floor - config.lr) * (done / total)
            negs = _draw_negatives(rng, model.noise_cdf, config.negatives, center)
            _sgd_position(vec, 0, model.w_in, model.w_out, center, ctx, negs, lr_t,
                          update_words=False)
            done += 1
    return vec[0]


# --- embedding store --------------------------------------------------------


def save_embeddings(model: DocEmbeddings, path):
    """One file per model: header plus per-document vectors keyed by id."""
    vocab_words = [None] * len(model.vocab)
    for w, i in model.vocab.index.items():
        vocab_words[i] = w
    payload = {
        "format_version": STORE_FORMAT_VERSION,
        "dim": model.config.dim,
        "vocab_size": len(model.vocab),
        "config": model.config.to_dict(),
        "seed": model.config.seed,
        "min_count": model.vocab.min_count,
        "vocab": vocab_words,
        "vocab_counts": model.vocab.counts.tolist(),
        "doc_ids": model.doc_ids,
        "vectors": {doc_id: model.doc_vectors[i].tolist()
                    for i, doc_id in enumerate(model.doc_ids)},
        "w_in": model.w_in.tolist(),
        "w_out": model.w_out.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_embeddings(path) -> DocEmbeddings:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != STORE_FORMAT_VERSION:
        raise ValueError(f"unsupported embedding store version {payload.get('format_version')}")
    config = PvdmConfig(**payload["config"])
    vocab = Vocab(
        index={w: i for i, w in enumerate(payload["vocab"])},
        counts=np.asarray(payload["vocab_counts"], dtype=np.float64),
        min_count=payload["min_count"],
    )
    doc_ids = list(payload["doc_ids"])
    vectors = payload["vectors"]
    return DocEmbeddings(
        config=config,
        vocab=vocab,
        doc_ids=doc_ids,
        doc_vectors=np.asarray([vectors[i] for i in doc_ids], dtype=np.float64),
        w_in=np.asarray(payload["w_in"], dtype=np.float64),
        w_out=np.asarray(payload["w_out"], dtype=np.float64),
        noise_cdf=_noise_cdf(np.asarray(payload["vocab_counts"], dtype=np.float64)),
    )
