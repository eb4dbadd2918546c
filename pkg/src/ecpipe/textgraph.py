"""Graph-of-words construction.

Each unique word in a document becomes a node (first-occurrence order) and
an undirected, unweighted edge joins two words whenever some pair of their
occurrences sits within a sliding window of token positions. Repeated
co-occurrence never produces multi-edges and self-loops are forbidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .defaults import GRAPH_WINDOW
from .errors import DimensionMismatch, EmptyDocument, FileUnreadable


@dataclass
class TextGraph:
    """Unique-word nodes, symmetric 0/1 adjacency, optional node features."""

    nodes: list[str]
    adjacency: np.ndarray  # (|V|, |V|) float64, symmetric, zero diagonal
    node_features: np.ndarray | None = None  # (|V|, d) float64

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2


def build_text_graph(tokens: list[str], window: int = GRAPH_WINDOW) -> TextGraph:
    """Build the co-occurrence graph for one token stream.

    Two words are adjacent iff occurrences of them appear within ``window``
    positions of each other. Node features are left unset; attach them with
    :func:`attach_features`.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not tokens:
        raise EmptyDocument("cannot build a graph from an empty token stream")

    index: dict[str, int] = {}
    nodes: list[str] = []
    for tok in tokens:
        if tok not in index:
            index[tok] = len(nodes)
            nodes.append(tok)

    n = len(nodes)
    adjacency = np.zeros((n, n), dtype=np.float64)
    for i, tok in enumerate(tokens):
        u = index[tok]
        for j in range(max(0, i - window), i):
            v = index[tokens[j]]
            if u != v:
                adjacency[u, v] = 1.0
                adjacency[v, u] = 1.0
    return TextGraph(nodes=nodes, adjacency=adjacency)


def fallback_vector(word: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic per-word fallback feature, uniform in [-0.05, 0.05].

    Keyed by (seed, word) so the same word receives the same vector in
    every graph and on every run.
    """
    rng = np.random.default_rng([seed, *word.encode("utf-8")])
    return rng.uniform(-0.05, 0.05, size=dim)


def attach_features(
    g: TextGraph,
    table: dict[str, np.ndarray],
    dim: int,
    seed: int = 0,
) -> TextGraph:
    """Attach initial node features from a word-vector table.

    Words present in the table take their table row; absent words take the
    seeded fallback vector. The table's vectors must all have length
    ``dim``.
    """
    features = np.empty((g.num_nodes, dim), dtype=np.float64)
    for i, word in enumerate(g.nodes):
        vec = table.get(word)
        if vec is None:
            features[i] = fallback_vector(word, dim, seed)
        else:
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise DimensionMismatch(
                    f"vector for {word!r} has shape {vec.shape}, expected ({dim},)"
                )
            features[i] = vec
    g.node_features = features
    return g


def load_word_vectors(path) -> tuple[dict[str, np.ndarray], int]:
    """Load a plain-text vector table: one line = word then d reals.

    This is the standard distribution format of common pre-trained word
    vectors. Returns the table and the (uniform) dimension.
    """
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    continue
                word, values = parts[0], parts[1:]
                try:
                    vec = np.asarray([float(v) for v in values], dtype=np.float64)
                except ValueError as exc:
                    raise FileUnreadable(f"{path}:{lineno}: bad vector: {exc}") from exc
                if dim is None:
                    dim = vec.size
                elif vec.size != dim:
                    raise DimensionMismatch(
                        f"{path}:{lineno}: vector of length {vec.size}, expected {dim}"
                    )
                table[word] = vec
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    if dim is None:
        raise FileUnreadable(f"{path}: no vectors found")
    return table, dim
