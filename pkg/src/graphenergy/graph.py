"""Weighted graphs and their discrete calculus.

A graph here is an undirected topology with strictly positive symmetric
edge weights ``w`` and a strictly positive vertex measure ``mu``. Those two
ingredients define every operator in this module:

.. math::

    (\\Delta X)(i) = \\sum_{j \\sim i} \\frac{w_{ij}}{\\mu_i} (X(j) - X(i))

    (P X)(i) = X(i) + (\\Delta X)(i)

    \\int X \\, d\\mu = \\sum_i X(i) \\mu_i

    (\\nabla X \\cdot \\nabla Y)(i)
        = \\frac{1}{2} \\sum_{j \\sim i} \\frac{w_{ij}}{\\mu_i}
          \\langle X(j) - X(i), Y(j) - Y(i) \\rangle

The 1/2 in the gradient product is what makes integration by parts exact:
``∫ -ΔX · Y dμ = ∫ ∇X·∇Y dμ``. The aggregation operator ``P`` is only
defined when every vertex satisfies ``sum_j w_ij < mu_i``; rows of ``P``
are then convex combinations, so constants are fixed points.

Feature matrices are plain numpy arrays of shape ``(n,)`` or ``(n, d)``.
Storage is sorted compressed neighbor lists (CSR triple plus the measure);
dense operators appear only behind small-size guards as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse import csgraph

DEGREE_PLUS_ONE = "degree-plus-one"

# Edge-gather temporaries are processed in row blocks of at most this many
# matrix entries to bound peak memory on large graphs.
_BLOCK_ENTRIES = 1 << 24


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected weighted graph with a vertex measure.

    Fields are frozen and the arrays are marked read-only; derived views
    are cached on first use. ``indptr``/``indices``/``weights`` hold both
    directions of every undirected edge with neighbor lists sorted.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    measure: np.ndarray
    is_connected: bool

    def __post_init__(self) -> None:
        for arr in (self.indptr, self.indices, self.weights, self.measure):
            arr.setflags(write=False)

    def __repr__(self) -> str:
        return (
            f"WeightedGraph(n={self.n}, edges={self.indices.size // 2}, "
            f"connected={self.is_connected})"
        )

    @cached_property
    def degrees(self) -> np.ndarray:
        """Neighbor counts (unweighted)."""
        return np.diff(self.indptr)

    @cached_property
    def edge_sources(self) -> np.ndarray:
        """Source vertex of every stored directed edge, aligned with indices."""
        return np.repeat(np.arange(self.n, dtype=self.indices.dtype), self.degrees)

    @cached_property
    def weight_row_sums(self) -> np.ndarray:
        """Per-vertex sum of incident edge weights."""
        return _row_sums(self, self.weights)

    @cached_property
    def aggregation_admissible(self) -> bool:
        """True when sum_j w_ij < mu_i holds strictly at every vertex."""
        return bool(np.all(self.weight_row_sums < self.measure))

    @cached_property
    def reverse_edge_ids(self) -> np.ndarray:
        """Position of the reversed copy of each stored directed edge."""
        return np.lexsort((self.edge_sources, self.indices))

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Weight matrix as scipy CSR, sharing this graph's buffers."""
        return sparse.csr_matrix(
            (self.weights, self.indices, self.indptr), shape=(self.n, self.n)
        )

    @cached_property
    def component_count(self) -> int:
        return int(csgraph.connected_components(self.adjacency, directed=False)[0])

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted neighbor ids and matching weights of vertex ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]


def build_weighted_graph(
    edges,
    measure=DEGREE_PLUS_ONE,
    n: int | None = None,
) -> WeightedGraph:
    """Build a :class:`WeightedGraph` from undirected edge triples.

    ``edges`` is a sequence of ``(i, j, w)`` (or ``(i, j)``, weight 1)
    entries, or an array of shape ``(E, 2)`` or ``(E, 3)``. Listing an edge
    in both orientations or repeatedly is fine as long as the weights
    agree. ``measure`` is either the string ``"degree-plus-one"`` (then
    ``mu_i = sum_j w_ij + 1``) or an explicit positive array of length n.
    """
    src, dst, wgt = _parse_edges(edges)

    if n is None:
        if not isinstance(measure, str):
            n = len(np.atleast_1d(measure))
        elif src.size:
            n = int(max(src.max(), dst.max())) + 1
        else:
            raise ValueError(
                "cannot infer the vertex count from an empty edge list; pass n"
            )
    n = int(n)
    if n <= 0:
        raise ValueError(f"vertex count must be positive, got {n}")

    if src.size:
        if src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n:
            raise ValueError(f"edge endpoint out of range for n={n}")
        loops = src == dst
        if loops.any():
            i = int(src[loops.argmax()])
            raise ValueError(
                f"self-loop ({i}, {i}) not allowed: self-mass belongs in the "
                "vertex measure, and aggregation adds the identity"
            )
        if not np.all(np.isfinite(wgt)) or wgt.min() <= 0:
            raise ValueError("edge weights must be finite and strictly positive")

    indptr, indices, weights = _symmetric_csr(n, src, dst, wgt)

    if isinstance(measure, str):
        if measure != DEGREE_PLUS_ONE:
            raise ValueError(f"unknown measure rule {measure!r}")
        row_sums = np.zeros(n)
        if weights.size:
            counts = np.diff(indptr)
            mask = counts > 0
            row_sums[mask] = np.add.reduceat(weights, indptr[:-1][mask])
        mu = row_sums + 1.0
    else:
        mu = np.array(measure, dtype=float).reshape(-1)
        if mu.size != n:
            raise ValueError(f"measure has length {mu.size}, expected {n}")
        if not np.all(np.isfinite(mu)) or mu.min() <= 0:
            raise ValueError("vertex measure must be finite and strictly positive")

    adj = sparse.csr_matrix((weights, indices, indptr), shape=(n, n))
    ncomp = int(csgraph.connected_components(adj, directed=False)[0])

    return WeightedGraph(
        n=n,
        indptr=indptr,
        indices=indices,
        weights=weights,
        measure=mu,
        is_connected=ncomp == 1,
    )


def laplacian_apply(G: WeightedGraph, X) -> np.ndarray:
    """Apply the measure-weighted Laplacian row-wise.

    Computed from neighbor differences, so constant inputs map to exact
    zeros. Output rows are mu-mean-free up to roundoff.
    """
    X2, squeeze = _as_features(G, X)
    out = _neighbor_difference_sums(G, X2) / G.measure[:, None]
    return out[:, 0] if squeeze else out


def aggregate_apply(G: WeightedGraph, X) -> np.ndarray:
    """Apply the aggregation operator ``P = I + Delta``.

    Rows of ``P`` are convex combinations of the vertex and its neighbors;
    requires the strict admissibility ``sum_j w_ij < mu_i`` everywhere.
    """
    if not G.aggregation_admissible:
        raise ValueError(
            "aggregation undefined: need sum of incident weights < vertex "
            "measure at every vertex"
        )
    X2, squeeze = _as_features(G, X)
    out = X2 + _neighbor_difference_sums(G, X2) / G.measure[:, None]
    return out[:, 0] if squeeze else out


def integrate(G: WeightedGraph, X):
    """Measure integral ``sum_i X(i) mu_i`` per feature column."""
    X2, squeeze = _as_features(G, X)
    vals = G.measure @ X2
    return float(vals[0]) if squeeze else vals


def grad_inner_product(G: WeightedGraph, X, Y) -> np.ndarray:
    """Pointwise gradient inner product, one value per vertex.

    ``(1/2) sum_j (w_ij/mu_i) <X(j)-X(i), Y(j)-Y(i)>``; always nonnegative
    when ``Y is X``.
    """
    X2, _ = _as_features(G, X)
    Y2, _ = _as_features(G, Y)
    src, dst = G.edge_sources, G.indices
    per_edge = np.empty(G.weights.size)
    step = max(_BLOCK_ENTRIES // max(X2.shape[1], 1), 1)
    for lo in range(0, per_edge.size, step):
        hi = min(lo + step, per_edge.size)
        dx = X2[dst[lo:hi]] - X2[src[lo:hi]]
        dy = Y2[dst[lo:hi]] - Y2[src[lo:hi]]
        per_edge[lo:hi] = G.weights[lo:hi] * np.einsum("ed,ed->e", dx, dy)
    return 0.5 * _row_sums(G, per_edge) / G.measure


def derivative_energy(G: WeightedGraph, X, m: int) -> float:
    """Normalized m-th derivative energy ``(1/n) ∫ |∇^m X|² dμ``.

    Even m contracts to ``|Δ^{m/2} X|²`` rows, odd m to the gradient
    product of ``Δ^{(m-1)/2} X`` with itself. Order 0 measures the spread
    around the mu-weighted mean. Zero exactly on constants (per component
    for m >= 1).
    """
    if not isinstance(m, (int, np.integer)) or m < 0:
        raise ValueError(f"derivative order must be a nonnegative integer, got {m!r}")
    X2, _ = _as_features(G, X)
    if m == 0:
        mean = (G.measure @ X2) / G.measure.sum()
        per_node = ((X2 - mean) ** 2).sum(axis=1)
        return max(float(G.measure @ per_node) / G.n, 0.0)
    Z = X2
    for _ in range(m // 2):
        Z = -laplacian_apply(G, Z)
    if m % 2 == 0:
        per_node = (Z**2).sum(axis=1)
    else:
        per_node = grad_inner_product(G, Z, Z)
    return max(float(G.measure @ per_node) / G.n, 0.0)


def canonical_energy_graph(G: WeightedGraph) -> WeightedGraph:
    """Same topology with unit weights and measure ``degree + 1``.

    All cross-variant energy comparisons happen on this graph so that
    attention-induced weights never leak into the measurement.
    """
    weights = np.ones_like(G.weights)
    measure = np.asarray(G.degrees, dtype=float) + 1.0
    return WeightedGraph(
        n=G.n,
        indptr=G.indptr.copy(),
        indices=G.indices.copy(),
        weights=weights,
        measure=measure,
        is_connected=G.is_connected,
    )


def dense_laplacian(G: WeightedGraph, max_nodes: int = 2000) -> np.ndarray:
    """Dense matrix of the Laplacian. Small-graph oracle; guarded."""
    if G.n > max_nodes:
        raise ValueError(
            f"dense operator requested for n={G.n}, guard is {max_nodes}"
        )
    A = G.adjacency.toarray()
    L = A - np.diag(G.weight_row_sums)
    return L / G.measure[:, None]


def dense_spectrum(G: WeightedGraph, max_nodes: int = 2000) -> np.ndarray:
    """Eigenvalues of ``-Delta`` in ascending order.

    Solved as the generalized symmetric problem ``(D - A) v = λ M v`` with
    ``M = diag(mu)``, which is the self-adjoint form of ``-Delta`` in the
    mu-weighted inner product; eigenvalues are real and nonnegative, and 0
    appears once per connected component.
    """
    if G.n > max_nodes:
        raise ValueError(
            f"dense spectrum requested for n={G.n}, guard is {max_nodes}"
        )
    A = G.adjacency.toarray()
    L = np.diag(G.weight_row_sums) - A
    vals = eigh(L, np.diag(G.measure), eigvals_only=True)
    return np.sort(vals)


def _parse_edges(edges) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(edges, np.ndarray):
        arr = np.asarray(edges, dtype=float)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
    else:
        rows = list(edges)
        if not rows:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty, np.empty(0)
        widths = {len(r) for r in rows}
        if not widths <= {2, 3}:
            raise ValueError("edges must be (i, j) or (i, j, w) entries")
        arr = np.array([tuple(r) + (1.0,) * (3 - len(r)) for r in rows], dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValueError("edge array must have shape (E, 2) or (E, 3)")
    ij = arr[:, :2]
    if not np.all(np.isfinite(ij)) or np.any(ij != np.floor(ij)):
        raise ValueError("edge endpoints must be integers")
    src = ij[:, 0].astype(np.int64)
    dst = ij[:, 1].astype(np.int64)
    wgt = arr[:, 2].astype(float) if arr.shape[1] == 3 else np.ones(len(arr))
    return src, dst, wgt


def _symmetric_csr(n, src, dst, wgt):
    u = np.concatenate([src, dst])
    v = np.concatenate([dst, src])
    w = np.concatenate([wgt, wgt])
    order = np.lexsort((v, u))
    u, v, w = u[order], v[order], w[order]
    if u.size:
        dup = (u[1:] == u[:-1]) & (v[1:] == v[:-1])
        conflict = dup & (w[1:] != w[:-1])
        if conflict.any():
            k = int(conflict.argmax()) + 1
            raise ValueError(
                f"edge ({u[k]}, {v[k]}) listed with conflicting weights "
                f"{w[k - 1]!r} and {w[k]!r}"
            )
        keep = np.concatenate([[True], ~dup])
        u, v, w = u[keep], v[keep], w[keep]
    counts = np.bincount(u, minlength=n) if u.size else np.zeros(n, dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return indptr, np.ascontiguousarray(v), np.ascontiguousarray(w)


def _as_features(G: WeightedGraph, X) -> tuple[np.ndarray, bool]:
    arr = np.asarray(X, dtype=float)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != G.n:
        raise ValueError(
            f"feature array of shape {np.shape(X)} does not match n={G.n}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("feature array contains non-finite entries")
    return arr, squeeze


def _row_sums(G: WeightedGraph, per_edge: np.ndarray) -> np.ndarray:
    out = np.zeros(G.n)
    counts = np.diff(G.indptr)
    mask = counts > 0
    if per_edge.size:
        out[mask] = np.add.reduceat(per_edge, G.indptr[:-1][mask])
    return out


def _neighbor_difference_sums(G: WeightedGraph, X2: np.ndarray) -> np.ndarray:
    """Per-vertex ``sum_j w_ij (X(j) - X(i))``, block-wise over rows.

    Formed from explicit neighbor differences so constants map to exact
    zeros; a plain matvec would leave roundoff residue.
    """
    n, d = G.n, X2.shape[1]
    out = np.zeros((n, d))
    src, dst, w = G.edge_sources, G.indices, G.weights
    counts = np.diff(G.indptr)
    for rlo, rhi in _row_blocks(G, d):
        elo, ehi = int(G.indptr[rlo]), int(G.indptr[rhi])
        if elo == ehi:
            continue
        contrib = w[elo:ehi, None] * (X2[dst[elo:ehi]] - X2[src[elo:ehi]])
        rows = np.arange(rlo, rhi)
        use = rows[counts[rows] > 0]
        out[use] = np.add.reduceat(contrib, G.indptr[use] - elo, axis=0)
    return out


def _row_blocks(G: WeightedGraph, d: int):
    """Vertex ranges whose incident edge gathers stay within the budget."""
    per_block = max(_BLOCK_ENTRIES // max(d, 1), 1)
    lo = 0
    while lo < G.n:
        target = G.indptr[lo] + per_block
        hi = int(np.searchsorted(G.indptr, target, side="right")) - 1
        hi = min(max(hi, lo + 1), G.n)
        yield lo, hi
        lo = hi
