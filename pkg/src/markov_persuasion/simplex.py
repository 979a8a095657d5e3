"""Geometry of the belief simplex: validation, hull membership, Caratheodory splits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull, QhullError

from .config import EPS_HULL, EPS_NUM
from .errors import InputError, PreconditionError


def as_belief(x, eps: float = EPS_NUM) -> np.ndarray:
    """Validate ``x`` as a point of the simplex and return a clean copy.

    Entries down to ``-eps`` are clamped to zero and the vector is
    renormalized; anything further off raises :class:`InputError`.
    """
    q = np.array(x, dtype=float).reshape(-1)
    if q.size < 2:
        raise InputError(f"belief needs dimension >= 2, got {q.size}")
    if not np.all(np.isfinite(q)):
        raise InputError(f"belief has non-finite entries: {q}")
    if q.min() < -eps or abs(q.sum() - 1.0) > eps:
        raise InputError(f"not a probability vector: {q} (sum={q.sum()!r})")
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def vertex(i: int, k: int) -> np.ndarray:
    e = np.zeros(k)
    e[i] = 1.0
    return e


def l1(p, q) -> float:
    return float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


@dataclass(frozen=True)
class Split:
    """A finite distribution over posteriors (a Blackwell experiment).

    ``posteriors`` is an ``(m, k)`` array, ``weights`` an ``(m,)`` array of
    strictly positive weights summing to one. ``support`` optionally records
    the generator indices the atoms were drawn from.
    """

    posteriors: np.ndarray
    weights: np.ndarray
    support: tuple | None = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.posteriors, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if P.shape[0] != w.size:
            raise InputError("split: one weight per posterior required")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > EPS_NUM:
            raise InputError(f"split weights must be positive and sum to 1: {w}")
        object.__setattr__(self, "posteriors", P)
        object.__setattr__(self, "weights", w / w.sum())

    def __len__(self):
        return self.weights.size

    @property
    def barycenter(self) -> np.ndarray:
        return self.weights @ self.posteriors

    def value(self, f) -> float:
        """Expected value of ``f`` (a callable on beliefs) under the split."""
        return float(sum(w * f(q) for w, q in zip(self.weights, self.posteriors)))

    def check(self, p, tol: float = EPS_NUM) -> None:
        err = np.abs(self.barycenter - np.asarray(p, float)).max()
        if err > tol:
            raise InputError(f"split barycenter off by {err:.3g}")

    @classmethod
    def trivial(cls, p) -> "Split":
        return cls(np.asarray(p, float)[None, :], np.ones(1))


@dataclass(frozen=True)
class Membership:
    feasible: bool
    weights: np.ndarray | None
    residual: float

    def __bool__(self):
        return self.feasible


def _as_generators(point, generators):
    x = np.asarray(point, dtype=float).reshape(-1)
    G = np.atleast_2d(np.asarray(generators, dtype=float))
    if G.size == 0 or G.shape[0] == 0:
        raise InputError("generator set is empty")
    if G.shape[1] != x.size:
        raise InputError(f"dimension mismatch: point has {x.size} coords, generators {G.shape[1]}")
    return x, G


def _solve_weights(x, G):
    # Non-negative least squares on [G^T; 1] a = [x; 1]; zero residual iff x in conv(G).
    A = np.vstack([G.T, np.ones(G.shape[0])])
    b = np.append(x, 1.0)
    a, _ = nnls(A, b, maxiter=50 * A.shape[1] + 100)
    s = a.sum()
    if s <= 0:
        return None, np.inf
    a = a / s
    return a, float(np.abs(a @ G - x).max())


def convex_membership(point, generators, tol: float = EPS_HULL) -> Membership:
    """Decide whether ``point`` lies in the convex hull of ``generators``.

    Returns a :class:`Membership`; on success ``weights`` are convex weights
    (one per generator) reconstructing the point within ``tol`` in every
    coordinate.
    """
    x, G = _as_generators(point, generators)
    a, res = _solve_weights(x, G)
    if a is None or res > tol:
        return Membership(False, None, res)
    return Membership(True, a, res)


def _dfs_support(x, G, k, tol):
    n = G.shape[0]

    def in_hull(idx):
        if k <= 3:
            return bool(hull_contains(x[None, :], G[idx], tol)[0])
        a, res = _solve_weights(x, G[idx])
        return a is not None and res <= tol

    def search(prefix, start):
        for j in range(start, n):
            # every support extending prefix + (j,) lives in prefix + {j..n-1}
            if not in_hull(list(prefix) + list(range(j, n))):
                return None
            cand = prefix + (j,)
            a, res = _solve_weights(x, G[list(cand)])
            if a is not None and res <= tol:
                return cand, a
            if len(cand) < k:
                found = search(cand, j + 1)
                if found is not None:
                    return found
        return None

    return search((), 0) or (None, None)


def caratheodory_reduce(point, generators, tol: float = EPS_HULL) -> Split:
    """Split ``point`` over at most ``k`` of the ``generators``.

    Among all feasible supports of size ``<= k`` the lexicographically
    smallest index tuple is returned (depth-first search in lexicographic
    order). Atoms with weight at most ``EPS_NUM`` are dropped.
    """
    x, G = _as_generators(point, generators)
    k = x.size
    if not convex_membership(x, G, tol):
        raise PreconditionError("point is not in the convex hull of the generators")
    support, a = _dfs_support(x, G, k, tol)
    if support is None:
        raise PreconditionError("no support of size <= k found within tolerance")
    keep = a > EPS_NUM
    idx = tuple(i for i, kp in zip(support, keep) if kp)
    return Split(G[list(idx)], a[keep] / a[keep].sum(), support=idx)


def hull_contains(points, generators, tol: float = EPS_HULL) -> np.ndarray:
    """Vectorized membership of many points in ``conv(generators)``.

    Exact facet tests for ``k <= 3``; falls back to one NNLS solve per point
    in higher dimension.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    G = np.atleast_2d(np.asarray(generators, dtype=float))
    if G.shape[0] == 0:
        return np.zeros(X.shape[0], dtype=bool)
    if G.shape[1] != X.shape[1]:
        raise InputError("dimension mismatch")
    k = G.shape[1]
    if k == 2:
        lo, hi = G[:, 0].min(), G[:, 0].max()
        return (X[:, 0] >= lo - tol) & (X[:, 0] <= hi + tol)
    if k == 3:
        return _contains_2d(X[:, :2], G[:, :2], tol)
    return np.array([bool(convex_membership(x, G, tol)) for x in X])


def _contains_2d(X, G, tol):
    G = np.unique(G, axis=0)
    if G.shape[0] >= 3:
        try:
            hull = ConvexHull(G)
        except QhullError:
            hull = None
        if hull is not None:
            # equations: n.x + c <= 0 inside, with unit normals
            return np.all(X @ hull.equations[:, :2].T + hull.equations[:, 2] <= tol, axis=1)
    # collinear or tiny set: project on the principal direction
    c = G.mean(axis=0)
    D = G - c
    if np.abs(D).max() <= tol:
        return np.abs(X - c).max(axis=1) <= tol
    _, _, vt = np.linalg.svd(D)
    d = vt[0]
    t = D @ d
    normal = np.array([-d[1], d[0]])
    Y = X - c
    along = Y @ d
    return (np.abs(Y @ normal) <= tol) & (along >= t.min() - tol) & (along <= t.max() + tol)


def hull_vertices(generators) -> np.ndarray:
    """Extreme points of ``conv(generators)`` (k <= 3), in a stable order."""
    G = np.unique(np.atleast_2d(np.asarray(generators, dtype=float)), axis=0)
    k = G.shape[1]
    if G.shape[0] <= 1:
        return G
    if k == 2:
        return G[[np.argmin(G[:, 0]), np.argmax(G[:, 0])]] if np.ptp(G[:, 0]) > 0 else G[:1]
    if k == 3:
        try:
            hull = ConvexHull(G[:, :2])
            return G[hull.vertices]
        except QhullError:
            c = G.mean(axis=0)
            _, _, vt = np.linalg.svd(G - c)
            t = (G - c) @ vt[0]
            return G[[np.argmin(t), np.argmax(t)]]
    raise InputError("hull_vertices supports k <= 3 only")


def polygon_area(points) -> float:
    """Area of the convex polygon spanned by 3-dim beliefs, in (q0, q1) units."""
    V = hull_vertices(points)
    if V.shape[0] < 3:
        return 0.0
    x, y = V[:, 0], V[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def check_points(points: Sequence, k: int | None = None) -> np.ndarray:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if k is not None and P.shape[1] != k:
        raise InputError(f"expected beliefs of dimension {k}, got {P.shape[1]}")
    for q in P:
        as_belief(q)
    return P
