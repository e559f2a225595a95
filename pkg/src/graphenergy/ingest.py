"""File loaders, writers, and seeded synthetic graph generators.

Edge lists are plain text, one edge per line as ``i j`` or ``i j w``,
whitespace separated, 0-indexed, undirected, with ``#`` comments.
Features are headerless CSV, row i = node i. Labels are one integer per
line. Matrix dumps carry a single ``#`` metadata line.

Generators use numpy's seeded PCG64 stream, so identical specs
reproduce identical graphs across runs and platforms.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from graphenergy.graph import WeightedGraph, build_weighted_graph

KIND_PATH = "path"
KIND_RING = "ring"
KIND_GRID = "grid2d"
KIND_ER = "erdos-renyi"
KIND_SBM = "sbm"
GENERATOR_KINDS = (KIND_PATH, KIND_RING, KIND_GRID, KIND_ER, KIND_SBM)


@dataclass(frozen=True)
class DatasetStats:
    """Row of summary numbers for one dataset: node and undirected edge
    counts, feature width, distinct label count, and the number of
    connected components. Optional fields stay None when the matching
    file was not supplied."""

    nodes: int
    edges: int
    feature_dim: int | None
    class_count: int | None
    components: int


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic graph.

    ``size`` drives path/ring/erdos-renyi, ``shape`` drives grid2d, and
    ``block_sizes``/``block_probs`` drive sbm. Random kinds redraw up to
    ``max_retries`` times until the sample is connected, consuming one
    seeded stream, so results stay deterministic per spec.
    """

    kind: str
    size: int | None = None
    shape: tuple[int, int] | None = None
    edge_prob: float | None = None
    block_sizes: tuple[int, ...] | None = None
    block_probs: tuple[tuple[float, ...], ...] | None = None
    seed: int = 0
    max_retries: int = 50

    def __post_init__(self) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(
                f"unknown generator kind {self.kind!r}; expected one of "
                f"{GENERATOR_KINDS}"
            )
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")
        if self.kind == KIND_PATH:
            if self.size is None or self.size < 1:
                raise ValueError("path needs size >= 1")
        elif self.kind == KIND_RING:
            if self.size is None or self.size < 3:
                raise ValueError("ring needs size >= 3")
        elif self.kind == KIND_GRID:
            if self.shape is None or len(self.shape) != 2 or min(self.shape) < 1:
                raise ValueError("grid2d needs shape (rows, cols) with both >= 1")
        elif self.kind == KIND_ER:
            if self.size is None or self.size < 2:
                raise ValueError("erdos-renyi needs size >= 2")
            if self.edge_prob is None or not 0 < self.edge_prob <= 1:
                raise ValueError("erdos-renyi needs edge_prob in (0, 1]")
        else:
            if not self.block_sizes or min(self.block_sizes) < 1:
                raise ValueError("sbm needs nonempty block_sizes with entries >= 1")
            k = len(self.block_sizes)
            P = self.block_probs
            if P is None or len(P) != k or any(len(row) != k for row in P):
                raise ValueError(f"sbm needs a {k}x{k} block_probs matrix")
            flat = [p for row in P for p in row]
            if min(flat) < 0 or max(flat) > 1:
                raise ValueError("block probabilities must lie in [0, 1]")
            for a in range(k):
                for b in range(a + 1, k):
                    if P[a][b] != P[b][a]:
                        raise ValueError("block_probs must be symmetric")


def generate_graph(spec: SyntheticSpec) -> WeightedGraph:
    """Build the graph a spec describes: unit weights, degree-plus-one
    measure. Random kinds raise RuntimeError when the retry budget runs
    out without hitting a connected sample."""
    if spec.kind == KIND_PATH:
        n = spec.size
        edges = [(i, i + 1) for i in range(n - 1)]
        return build_weighted_graph(edges, n=n)
    if spec.kind == KIND_RING:
        n = spec.size
        edges = [(i, (i + 1) % n) for i in range(n)]
        return build_weighted_graph(edges, n=n)
    if spec.kind == KIND_GRID:
        rows, cols = spec.shape
        edges = []
        for r in range(rows):
            for c in range(cols):
                node = r * cols + c
                if c + 1 < cols:
                    edges.append((node, node + 1))
                if r + 1 < rows:
                    edges.append((node, node + cols))
        return build_weighted_graph(edges, n=rows * cols)

    rng = np.random.default_rng(spec.seed)
    if spec.kind == KIND_ER:
        n = spec.size
        blocks = np.zeros(n, dtype=np.int64)
        prob_of = np.array([[spec.edge_prob]])
    else:
        n = int(sum(spec.block_sizes))
        blocks = np.repeat(np.arange(len(spec.block_sizes)), spec.block_sizes)
        prob_of = np.asarray(spec.block_probs, dtype=float)

    src, dst = np.triu_indices(n, k=1)
    pair_probs = prob_of[blocks[src], blocks[dst]]
    for _ in range(spec.max_retries):
        keep = rng.random(src.size) < pair_probs
        if not keep.any():
            continue
        G = build_weighted_graph(np.column_stack([src[keep], dst[keep]]), n=n)
        if G.is_connected:
            return G
    raise RuntimeError(
        f"no connected sample within {spec.max_retries} draws; raise the "
        "edge probability or the retry budget"
    )


def random_features(n: int, d: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """Seeded centered-normal feature matrix; scale 0 gives exact zeros."""
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    if scale < 0:
        raise ValueError("scale cannot be negative")
    return np.random.default_rng(seed).normal(0.0, scale, size=(n, d))


def load_edge_list(path) -> WeightedGraph:
    """Read an undirected edge list; see the module docstring for the
    format. Duplicate lines (either orientation) collapse to one edge.
    Malformed lines report their 1-based line number."""
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) not in (2, 3):
                raise ValueError(
                    f"{path}:{lineno}: expected 'i j' or 'i j w', "
                    f"got {raw.strip()!r}"
                )
            i = _int_token(tokens[0], path, lineno)
            j = _int_token(tokens[1], path, lineno)
            if i < 0 or j < 0:
                raise ValueError(f"{path}:{lineno}: negative node index")
            if len(tokens) == 3:
                try:
                    w = float(tokens[2])
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: non-numeric weight {tokens[2]!r}"
                    ) from None
                edges.append((i, j, w))
            else:
                edges.append((i, j, 1.0))
    if not edges:
        raise ValueError(f"{path}: no edges found")
    deduped = sorted({(min(i, j), max(i, j), w) for i, j, w in edges})
    return build_weighted_graph(deduped)


def load_features(path, n: int) -> np.ndarray:
    """Read a headerless CSV feature matrix and check it has n rows.
    A non-numeric token is reported with its line and column."""
    try:
        arr = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError:
        raise ValueError(_locate_bad_token(path, ",")) from None
    if arr.shape[0] != n:
        raise ValueError(f"{path}: expected {n} rows, found {arr.shape[0]}")
    return arr


def load_labels(path, n: int) -> np.ndarray:
    """Read one integer label per line; count must match n."""
    try:
        arr = np.loadtxt(path, comments="#", ndmin=1)
    except ValueError:
        raise ValueError(_locate_bad_token(path, None)) from None
    if arr.ndim != 1:
        raise ValueError(f"{path}: expected one label per line")
    if arr.shape[0] != n:
        raise ValueError(f"{path}: expected {n} labels, found {arr.shape[0]}")
    if not np.equal(np.mod(arr, 1), 0).all():
        raise ValueError(f"{path}: labels must be integers")
    return arr.astype(np.int64)


def dataset_stats(
    G: WeightedGraph,
    features: np.ndarray | None = None,
    labels: np.ndarray | None = None,
) -> DatasetStats:
    """Summary counts; each undirected edge counted once."""
    return DatasetStats(
        nodes=G.n,
        edges=G.indices.size // 2,
        feature_dim=None if features is None else int(np.atleast_2d(features).shape[1]),
        class_count=None if labels is None else int(np.unique(labels).size),
        components=G.component_count,
    )


def write_edge_list(path, G: WeightedGraph) -> None:
    """Write each undirected edge once (smaller endpoint first); weights
    are included only when some weight differs from 1."""
    src = G.edge_sources
    upper = src < G.indices
    pairs = zip(src[upper], G.indices[upper], G.weights[upper])
    weighted = not np.all(G.weights == 1.0)
    with open(path, "w") as fh:
        fh.write(f"# nodes {G.n}\n")
        for i, j, w in pairs:
            if weighted:
                fh.write(f"{int(i)} {int(j)} {float(w)!r}\n")
            else:
                fh.write(f"{int(i)} {int(j)}\n")


def write_matrix(path, M: np.ndarray, provenance: str = "") -> None:
    """CSV dump with a one-line '#' header recording shape and origin."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    header = f"shape={M.shape[0]}x{M.shape[1]} provenance={provenance}"
    np.savetxt(path, M, delimiter=",", header=header)


def load_matrix(path) -> np.ndarray:
    """Read back a write_matrix dump (or any headerless CSV matrix)."""
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def _int_token(token: str, path, lineno: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise ValueError(
            f"{path}:{lineno}: non-numeric node index {token!r}"
        ) from None
    if not value.is_integer():
        raise ValueError(f"{path}:{lineno}: node index {token!r} is not an integer")
    return int(value)


def _locate_bad_token(path, delimiter) -> str:
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split(delimiter) if delimiter else line.split()
            for col, token in enumerate(tokens, start=1):
                try:
                    float(token)
                except ValueError:
                    return (
                        f"{path}:{lineno}: column {col}: "
                        f"non-numeric token {token.strip()!r}"
                    )
    return f"{path}: failed to parse as a numeric table"


def ensure_directory(path) -> None:
    """mkdir -p."""
    os.makedirs(path, exist_ok=True)