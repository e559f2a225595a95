"""Shared fixtures and independent dense oracles for the test suite.

The oracles here rebuild every operator from the raw edge list with dense
matrices and never call into the package's sparse kernels, so agreement is
meaningful.
"""

from __future__ import annotations

import numpy as np
import pytest

from graphenergy.graph import WeightedGraph, build_weighted_graph

P3_EDGES = [(0, 1, 1.0), (1, 2, 1.0)]


@pytest.fixture
def p3() -> WeightedGraph:
    """Unit-weight path on three vertices, measure degree + 1 = [2, 3, 2]."""
    return build_weighted_graph(P3_EDGES)


def dense_weight_matrix(n: int, edges) -> np.ndarray:
    A = np.zeros((n, n))
    for i, j, w in edges:
        A[i, j] = w
        A[j, i] = w
    return A


def dense_laplacian_oracle(n: int, edges, measure) -> np.ndarray:
    """Dense Delta = diag(mu)^-1 (A - diag(row sums of A))."""
    A = dense_weight_matrix(n, edges)
    L = A - np.diag(A.sum(axis=1))
    return L / np.asarray(measure, dtype=float)[:, None]


def grad_inner_oracle(n, edges, measure, X, Y) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float).T).T
    Y = np.atleast_2d(np.asarray(Y, dtype=float).T).T
    mu = np.asarray(measure, dtype=float)
    out = np.zeros(n)
    for i, j, w in edges:
        val = w * float((X[j] - X[i]) @ (Y[j] - Y[i]))
        out[i] += 0.5 * val / mu[i]
        out[j] += 0.5 * val / mu[j]
    return out


def random_connected_edges(rng: np.random.Generator, n: int):
    """Random spanning tree plus extra random chords, unit-free weights."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a = int(order[rng.integers(0, k)])
        b = int(order[k])
        edges.add((min(a, b), max(a, b)))
    extra = int(rng.integers(0, max(n, 2)))
    for _ in range(extra):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return [(i, j, float(rng.uniform(0.2, 3.0))) for i, j in sorted(edges)]


def random_graph(rng: np.random.Generator, n: int, admissible: bool = False):
    """Connected random graph with random positive measure.

    With admissible=True the measure strictly dominates the incident
    weight sums, so aggregation is defined.
    """
    edges = random_connected_edges(rng, n)
    wsum = np.zeros(n)
    for i, j, w in edges:
        wsum[i] += w
        wsum[j] += w
    if admissible:
        measure = wsum + rng.uniform(0.05, 1.5, size=n)
    else:
        measure = rng.uniform(0.5, 4.0, size=n)
    G = build_weighted_graph(edges, measure=measure, n=n)
    return G, edges
