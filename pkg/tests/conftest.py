"""Shared fixtures and independent oracle implementations.

The oracles here are deliberately naive (double loops, exhaustive sums) and
never call into the code paths they check.
"""

from __future__ import annotations

import numpy as np
import pytest

from graphseg.graph import PatchGraph, graph_from_adjacency


def oracle_adjacency(values: np.ndarray, tau: float) -> np.ndarray:
    """Brute-force thresholded dot-product adjacency, zero diagonal."""
    n = values.shape[0]
    adj = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and float(np.dot(values[i], values[j])) > tau:
                adj[i, j] = 1.0
    return adj


def oracle_modularity_matrix(adj: np.ndarray) -> np.ndarray:
    """Entrywise A_ij - d_i d_j / (2m)."""
    d = adj.sum(axis=1)
    two_m = d.sum()
    n = adj.shape[0]
    b = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            b[i, j] = adj[i, j] - d[i] * d[j] / two_m
    return b


def oracle_hard_modularity(adj: np.ndarray, labels: np.ndarray) -> float:
    """Double-loop partition quality with an explicit Kronecker delta."""
    d = adj.sum(axis=1)
    two_m = d.sum()
    q = 0.0
    for i in range(adj.shape[0]):
        for j in range(adj.shape[0]):
            if labels[i] == labels[j]:
                q += adj[i, j] - d[i] * d[j] / two_m
    return q / two_m


def oracle_trace_quadratic(c: np.ndarray, b: np.ndarray) -> float:
    """Sum over entries b_ij * <c_i, c_j>."""
    total = 0.0
    for i in range(b.shape[0]):
        for j in range(b.shape[1]):
            total += b[i, j] * float(np.dot(c[i], c[j]))
    return total


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4) -> PatchGraph:
    """Erdos-Renyi graph resampled until it has at least one edge."""
    while True:
        upper = np.triu(rng.random((n, n)) < p, k=1)
        adj = (upper | upper.T).astype(float)
        if adj.sum() > 0:
            return graph_from_adjacency(adj)


def one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    return np.eye(k)[np.asarray(labels)]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
