"""Patch-graph construction: similarity threshold, degrees, Â, and B.

A per-image graph is built by thresholding the cosine similarity of
row-normalized patch features: nodes i and j are joined iff ⟨fᵢ, fⱼ⟩ > tau,
with the diagonal excluded (self-similarity is always 1, and the modularity
formalism is stated on simple graphs). The modularity matrix
B = A − d·dᵀ/(2m) compares observed edges against a degree-matched random
graph; its rows sum to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateGraphError, DegenerateInputError, ShapeError
from .sparse import CsrMatrix

__all__ = [
    "FeatureMatrix",
    "PatchGraph",
    "ModularityMatrix",
    "row_normalize",
    "build_adjacency",
    "graph_from_adjacency",
    "modularity_matrix",
]


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-patch embeddings with their patch-grid geometry."""

    values: np.ndarray  # (n, c_in) float64
    grid: tuple[int, int]  # (g_h, g_w), g_h * g_w == n

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ShapeError("feature matrix must be 2-D")
        g_h, g_w = self.grid
        if g_h * g_w != values.shape[0]:
            raise ShapeError(
                f"grid {g_h}x{g_w} does not cover {values.shape[0]} feature rows"
            )
        if not np.isfinite(values).all():
            raise DegenerateInputError("feature matrix has non-finite entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def c_in(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PatchGraph:
    """Thresholded similarity graph with its normalized adjacency."""

    n: int
    adjacency: CsrMatrix  # binary, symmetric, zero diagonal
    degrees: np.ndarray  # (n,) int64
    m: int  # edge count |E|
    norm_adj: CsrMatrix  # D^{-1/2} A D^{-1/2}
    tau: float | None = None
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ModularityMatrix:
    """Dense B = A − d·dᵀ/(2m)."""

    dense: np.ndarray

    @property
    def n(self) -> int:
        return self.dense.shape[0]


def row_normalize(features: FeatureMatrix) -> FeatureMatrix:
    """Scale every feature row to unit L2 norm."""
    norms = np.linalg.norm(features.values, axis=1)
    bad = np.nonzero(norms <= 1e-12)[0]
    if bad.size:
        raise DegenerateInputError(f"zero-norm feature row at index {int(bad[0])}")
    return FeatureMatrix(features.values / norms[:, None], features.grid)


def graph_from_adjacency(dense_adj: np.ndarray, tau: float | None = None) -> PatchGraph:
    """Wrap an explicit 0/1 adjacency matrix (tests, synthetic benchmarks).

    Unlike build_adjacency this does not reject edgeless graphs, so unit
    tests can exercise the all-isolated forward path; modularity_matrix
    still refuses m = 0.
    """
    a = np.asarray(dense_adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    if not np.array_equal(a, a.T):
        raise ShapeError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0):
        raise ShapeError("adjacency must have a zero diagonal")
    if not np.isin(a, (0, 1)).all():
        raise ShapeError("adjacency entries must be 0 or 1")
    a = a.astype(np.float64)
    n = a.shape[0]
    degrees = a.sum(axis=1).astype(np.int64)
    m = int(degrees.sum()) // 2
    inv_sqrt_d = np.zeros(n)
    nz = degrees > 0
    inv_sqrt_d[nz] = 1.0 / np.sqrt(degrees[nz].astype(np.float64))
    norm = inv_sqrt_d[:, None] * a * inv_sqrt_d[None, :]
    return PatchGraph(
        n=n,
        adjacency=CsrMatrix.from_dense(a, symmetric=True),
        degrees=degrees,
        m=m,
        norm_adj=CsrMatrix.from_dense(norm, symmetric=True),
        tau=tau,
    )


def build_adjacency(features: FeatureMatrix, tau: float, allow_self_loops: bool = False) -> PatchGraph:
    """Threshold pairwise feature correlations into a simple graph.

    Expects row-normalized features so the Gram matrix holds cosine
    similarities; an edge requires similarity strictly greater than tau.
    """
    if not (0.0 < tau < 1.0):
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    norms = np.linalg.norm(features.values, axis=1)
    if np.abs(norms - 1.0).max(initial=0.0) > 1e-9:
        raise DegenerateInputError("features must be row-normalized before thresholding")
    sims = features.values @ features.values.T
    adj = (sims > tau).astype(np.float64)
    if not allow_self_loops:
        np.fill_diagonal(adj, 0.0)
    adj = np.minimum(adj, adj.T)  # guard against asymmetric rounding of fᵢ·fⱼ
    graph = graph_from_adjacency(adj, tau=tau)
    if graph.m == 0:
        raise DegenerateGraphError(
            f"no similarity above tau={tau}: the graph has no edges (try a lower tau)"
        )
    return graph


def modularity_matrix(graph: PatchGraph) -> ModularityMatrix:
    """Dense modularity matrix B = A − d·dᵀ/(2m)."""
    if graph.m < 1:
        raise DegenerateGraphError("modularity is undefined for an edgeless graph")
    d = graph.degrees.astype(np.float64)
    b = graph.adjacency.to_dense() - np.outer(d, d) / (2.0 * graph.m)
    return ModularityMatrix(b)
