"""Weighted graphs with row-normalized neighborhood weights."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .hermitian import hermitize

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightedGraph:
    """Vertex neighborhoods ``N_i`` (each containing ``i``) and weights ``w_ik``.

    ``neighborhoods[i]`` and ``weights[i]`` are aligned arrays; every weight
    row sums to one.  With ``symmetric=True`` the constructor also verifies
    ``w_ij == w_ji`` and mutual membership.
    """

    neighborhoods: tuple
    weights: tuple
    symmetric: bool = False
    _matrix: sparse.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nbrs = tuple(np.asarray(n, dtype=np.int64) for n in self.neighborhoods)
        wts = tuple(np.asarray(w, dtype=float) for w in self.weights)
        n = len(nbrs)
        if n == 0:
            raise ValueError("graph has no vertices")
        if len(wts) != n:
            raise ValueError("neighborhoods and weights differ in length")
        rows, cols, vals = [], [], []
        for i, (nb, w) in enumerate(zip(nbrs, wts)):
            if nb.shape != w.shape:
                raise ValueError(f"vertex {i}: neighborhood and weights misaligned")
            if i not in nb:
                raise ValueError(f"vertex {i} is missing from its own neighborhood")
            if len(np.unique(nb)) != len(nb):
                raise ValueError(f"vertex {i}: duplicate neighbors")
            if np.any(nb < 0) or np.any(nb >= n):
                raise ValueError(f"vertex {i}: neighbor index out of range")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(f"vertex {i}: weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > _SUM_TOL:
                raise ValueError(f"vertex {i}: weights sum to {w.sum()!r}, not 1")
            rows.append(np.full(len(nb), i))
            cols.append(nb)
            vals.append(w)
        mat = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        mat.sort_indices()
        if self.symmetric:
            pattern = (mat != 0).astype(np.int8)
            if (pattern != pattern.T).nnz or abs(mat - mat.T).max() > _SUM_TOL:
                raise ValueError("graph flagged symmetric but weights are not")
        object.__setattr__(self, "neighborhoods", nbrs)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "_matrix", mat)

    @property
    def n_vertices(self) -> int:
        return len(self.neighborhoods)

    @property
    def matrix(self) -> sparse.csr_matrix:
        """Sparse ``n x n`` weight matrix ``Omega``."""
        return self._matrix

    @classmethod
    def from_dense(cls, W, symmetric: bool = False) -> "WeightedGraph":
        """Build from a dense weight matrix; the diagonal is always kept."""
        W = np.asarray(W, dtype=float)
        nbrs, wts = [], []
        for i, row in enumerate(W):
            nb = np.flatnonzero(row)
            if i not in nb:
                nb = np.sort(np.append(nb, i))
            nbrs.append(nb)
            wts.append(row[nb])
        return cls(tuple(nbrs), tuple(wts), symmetric=symmetric)

    @classmethod
    def uniform(cls, neighborhoods: Sequence[Sequence[int]], symmetric: bool = False) -> "WeightedGraph":
        """Uniform weights ``1/|N_i|`` over the given neighborhoods."""
        nbrs = [np.unique(np.append(np.asarray(nb, dtype=np.int64), i)) for i, nb in enumerate(neighborhoods)]
        wts = [np.full(len(nb), 1.0 / len(nb)) for nb in nbrs]
        return cls(tuple(nbrs), tuple(wts), symmetric=symmetric)

    def reweighted(self, raw_weights: Sequence[np.ndarray]) -> "WeightedGraph":
        """Same neighborhoods, new nonnegative weights normalized per row."""
        wts = []
        for i, w in enumerate(raw_weights):
            w = np.asarray(w, dtype=float)
            s = w.sum()
            if s <= 0:
                raise ValueError(f"vertex {i}: raw weights sum to zero")
            w = w / s
            # absorb rounding so that the row sums to one within 1e-12
            w[np.argmax(w)] += 1.0 - w.sum()
            wts.append(w)
        return WeightedGraph(self.neighborhoods, tuple(wts), symmetric=False)


def single_vertex_graph() -> WeightedGraph:
    return WeightedGraph((np.array([0]),), (np.array([1.0]),), symmetric=True)


def complete_graph(n: int) -> WeightedGraph:
    nbrs = [np.arange(n) for _ in range(n)]
    return WeightedGraph.uniform(nbrs, symmetric=True)


def grid_graph(height: int, width: int, radius: int = 1, periodic: bool = False) -> WeightedGraph:
    """Square ``(2r+1) x (2r+1)`` stencil on a pixel grid with uniform weights.

    Vertices are numbered row-major.  Without ``periodic`` the stencil is
    truncated at the border, so border rows have fewer neighbors and the
    weights are not symmetric; with ``periodic`` the grid is a torus and the
    graph is symmetric (requires ``2r + 1 <= min(height, width)``).
    """
    if periodic and 2 * radius + 1 > min(height, width):
        raise ValueError("periodic stencil wraps onto itself")
    offsets = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    nbrs = []
    for y in range(height):
        for x in range(width):
            nb = []
            for dy, dx in offsets:
                yy, xx = y + dy, x + dx
                if periodic:
                    yy %= height
                    xx %= width
                elif not (0 <= yy < height and 0 <= xx < width):
                    continue
                nb.append(yy * width + xx)
            nbrs.append(sorted(nb))
    return WeightedGraph.uniform(nbrs, symmetric=periodic)


def knn_graph(features, k: int = 8) -> WeightedGraph:
    """Each vertex adjacent to its ``k`` closest vertices in feature space.

    Distances are Euclidean over flattened features; ties are broken by vertex
    index so the result is deterministic.  Weights are uniform.
    """
    X = np.asarray(features, dtype=float).reshape(len(features), -1)
    n = len(X)
    k = min(k, n - 1)
    sq = np.sum(X * X, axis=1)
    dist = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    nbrs = []
    for i in range(n):
        d = dist[i].copy()
        d[i] = -1.0
        order = np.lexsort((np.arange(n), d))
        nbrs.append(np.sort(order[: k + 1]))
    return WeightedGraph.uniform(nbrs)


def omega_apply(G: WeightedGraph, M):
    """Neighborhood averages ``Omega[M]_i = sum_k w_ik M_k``.

    ``M`` has shape ``(n, ...)``; trailing axes are averaged entrywise.
    """
    M = np.asarray(M)
    if M.shape[0] != G.n_vertices:
        raise ValueError(f"expected {G.n_vertices} vertex values, got {M.shape[0]}")
    flat = M.reshape(M.shape[0], -1)
    return (G.matrix @ flat).reshape(M.shape)


def omega_apply_rows(G: WeightedGraph, M, rows: slice):
    """Rows ``rows`` of :func:`omega_apply`, Hermitized; used by chunked workers."""
    flat = np.asarray(M).reshape(M.shape[0], -1)
    out = (G.matrix[rows] @ flat).reshape((-1,) + M.shape[1:])
    return hermitize(out)
