"""Uniform grids on the 1- and 2-dimensional simplex with linear interpolation."""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InputError, UnsupportedDimensionError


class SimplexGrid:
    """Uniform grid of resolution ``n`` on the simplex with ``k`` states.

    For ``k = 2`` the nodes are ``(i/n, 1 - i/n)`` for ``i = 0..n`` (so the
    default ``n = 2000`` gives 2001 points, indexed by the mass on state 1).
    For ``k = 3`` the nodes are ``(i/n, j/n, 1 - (i+j)/n)`` with the standard
    two-triangles-per-cell triangulation.
    """

    def __init__(self, k: int, n: int):
        if k not in (2, 3):
            raise UnsupportedDimensionError(f"grids are implemented for k in (2, 3), got k={k}")
        if n < 1:
            raise InputError("grid resolution must be >= 1")
        self.k = k
        self.n = int(n)
        if k == 2:
            t = np.arange(n + 1) / n
            self.nodes = np.column_stack([t, 1.0 - t])
            self._ij = None
        else:
            ij = [(i, j) for i in range(n + 1) for j in range(n + 1 - i)]
            ij = np.array(ij)
            self._ij = ij
            self._index = -np.ones((n + 1, n + 1), dtype=int)
            self._index[ij[:, 0], ij[:, 1]] = np.arange(len(ij))
            self.nodes = np.column_stack([ij[:, 0] / n, ij[:, 1] / n, (n - ij.sum(axis=1)) / n])

    def __len__(self):
        return self.nodes.shape[0]

    def __repr__(self):
        return f"SimplexGrid(k={self.k}, n={self.n})"

    @property
    def step(self) -> float:
        return 1.0 / self.n

    def locate(self, points):
        """Return ``(idx, w)`` arrays of shape ``(m, k)``: vertices of the
        containing cell and barycentric weights."""
        Q = np.atleast_2d(np.asarray(points, dtype=float))
        if Q.shape[1] != self.k:
            raise InputError(f"expected {self.k}-dim beliefs, got {Q.shape[1]}")
        n = self.n
        if self.k == 2:
            x = np.clip(Q[:, 0], 0.0, 1.0) * n
            i = np.clip(np.floor(x).astype(int), 0, n - 1)
            t = np.clip(x - i, 0.0, 1.0)
            return np.column_stack([i, i + 1]), np.column_stack([1.0 - t, t])
        x = np.clip(Q[:, 0], 0.0, 1.0) * n
        y = np.clip(Q[:, 1], 0.0, 1.0) * n
        i = np.clip(np.floor(x).astype(int), 0, n - 1)
        j = np.clip(np.floor(y).astype(int), 0, n - 1 - i)
        fx = x - i
        fy = y - j
        upper = (fx + fy > 1.0) & (i + j <= n - 2)
        idx = np.empty((len(Q), 3), dtype=int)
        w = np.empty((len(Q), 3))
        lo = ~upper
        ix = self._index
        idx[lo] = np.column_stack([ix[i[lo], j[lo]], ix[i[lo] + 1, j[lo]], ix[i[lo], j[lo] + 1]])
        w[lo] = np.column_stack([1.0 - fx[lo] - fy[lo], fx[lo], fy[lo]])
        up = upper
        idx[up] = np.column_stack([ix[i[up] + 1, j[up] + 1], ix[i[up] + 1, j[up]], ix[i[up], j[up] + 1]])
        w[up] = np.column_stack([fx[up] + fy[up] - 1.0, 1.0 - fy[up], 1.0 - fx[up]])
        w = np.clip(w, 0.0, None)
        w /= w.sum(axis=1, keepdims=True)
        return idx, w

    def interpolation_matrix(self, points) -> sp.csr_matrix:
        """Sparse ``(m, len(grid))`` matrix mapping node values to values at ``points``."""
        idx, w = self.locate(points)
        m = idx.shape[0]
        rows = np.repeat(np.arange(m), idx.shape[1])
        return sp.csr_matrix((w.ravel(), (rows, idx.ravel())), shape=(m, len(self)))

    def interpolate(self, values, points) -> np.ndarray:
        idx, w = self.locate(points)
        return (np.asarray(values)[idx] * w).sum(axis=1)

    def nearest(self, q) -> int:
        """Index of the grid node closest to ``q`` in l1 distance."""
        q = np.asarray(q, dtype=float)
        return int(np.argmin(np.abs(self.nodes - q).sum(axis=1)))

    def index_of(self, q, tol: float = 1e-12):
        """Index of the node equal to ``q`` (within ``tol``) or ``None``."""
        i = self.nearest(q)
        return i if np.abs(self.nodes[i] - np.asarray(q, float)).max() <= tol else None

    @cached_property
    def lines(self) -> np.ndarray:
        """Index triples ``(a, b, c)`` of consecutive collinear nodes, ``b`` the midpoint.

        Used to test concavity of node values along every grid direction.
        """
        if self.k == 2:
            i = np.arange(1, self.n)
            return np.column_stack([i - 1, i, i + 1])
        ix = self._index
        out = []
        n = self.n
        for di, dj in ((1, 0), (0, 1), (1, -1)):
            for i, j in self._ij:
                a, c = (i - di, j - dj), (i + di, j + dj)
                if min(a) < 0 or min(c) < 0 or sum(a) > n or sum(c) > n:
                    continue
                out.append((ix[a], ix[i, j], ix[c]))
        return np.array(out, dtype=int)

    @cached_property
    def neighbor_pairs(self) -> np.ndarray:
        L = self.lines
        return np.unique(np.vstack([L[:, :2], L[:, 1:]]), axis=0)

    def max_concavity_violation(self, values) -> float:
        """Largest positive second difference along grid lines (0 if concave)."""
        v = np.asarray(values, dtype=float)
        L = self.lines
        if L.size == 0:
            return 0.0
        d2 = v[L[:, 0]] + v[L[:, 2]] - 2.0 * v[L[:, 1]]
        return float(max(d2.max(), 0.0))
