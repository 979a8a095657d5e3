"""M-absorbing sets: certificates, maximal subsets, orbit closure and the region D."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .concav import Envelope, UtilityFunction, cav, contact_set, supporting_hyperplanes
from .config import DEFAULT, Tolerances
from .errors import InputError
from .markov import as_transition
from .simplex import (Split, as_belief, caratheodory_reduce, check_points, hull_contains,
                      hull_vertices, l1)


@dataclass(frozen=True)
class AbsorbingCertificate:
    """Finite set ``C`` with, for every point, a split of ``q_i M`` over ``C``.

    ``W[i, j]`` is the weight of ``C[j]`` in the decomposition of ``C[i] M``,
    so ``W @ P = P @ M`` with ``P`` the matrix of points.
    """

    points: np.ndarray
    decompositions: tuple
    W: np.ndarray

    def __bool__(self):
        return True

    def __len__(self):
        return self.points.shape[0]

    def residual(self, M) -> float:
        M = as_transition(M)
        return float(np.abs(self.W @ self.points - self.points @ M.entries).max())


@dataclass(frozen=True)
class Refutation:
    """Witness that a set is not absorbing: ``points[index] @ M`` leaves the hull."""

    index: int
    point: np.ndarray
    image: np.ndarray

    def __bool__(self):
        return False


def is_absorbing(C, M, tol: Tolerances = DEFAULT):
    """Certify ``q M in conv(C)`` for every ``q`` in ``C``.

    Returns an :class:`AbsorbingCertificate` (truthy) or the first failing
    point as a :class:`Refutation` (falsy).
    """
    M = as_transition(M)
    P = check_points(C, M.k)
    if P.shape[0] == 0:
        raise InputError("absorbing check needs a non-empty set")
    images = P @ M.entries
    inside = hull_contains(images, P, tol.hull)
    splits = []
    W = np.zeros((len(P), len(P)))
    for i, img in enumerate(images):
        if not inside[i]:
            return Refutation(i, P[i].copy(), img)
        s = caratheodory_reduce(img, P, tol.hull)
        splits.append(s)
        W[i, list(s.support)] = s.weights
    return AbsorbingCertificate(P.copy(), tuple(splits), W)


def maximal_absorbing_subset(A, M, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Indices of the largest absorbing subset of the finite set ``A``.

    Greatest fixed point of the deletion map: every round removes all points
    whose image leaves the hull of the survivors. Any absorbing subset
    survives every round, so the result is the union of all of them (and is
    empty when there is none).
    """
    M = as_transition(M)
    P = check_points(A, M.k) if len(A) else np.zeros((0, M.k))
    alive = np.arange(P.shape[0])
    while alive.size:
        keep = hull_contains(P[alive] @ M.entries, P[alive], tol.hull)
        if keep.all():
            break
        alive = alive[keep]
    return alive


def orbit_absorbing(q, M, C, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Indices of the closure of ``{q}`` under ``w -> support(decomposition of wM)``.

    ``C`` must be absorbing and contain ``q``; the closure is itself absorbing.
    """
    M = as_transition(M)
    P = check_points(C, M.k)
    q = as_belief(q)
    hits = np.flatnonzero(np.abs(P - q).max(axis=1) <= tol.num)
    if hits.size == 0:
        raise InputError("q is not a point of C")
    cert = is_absorbing(P, M, tol)
    if not cert:
        raise InputError(f"C is not absorbing (fails at index {cert.index})")
    seen = {int(hits[0])}
    frontier = [int(hits[0])]
    while frontier:
        i = frontier.pop()
        for j in cert.decompositions[i].support:
            if j not in seen:
                seen.add(j)
                frontier.append(j)
    return np.array(sorted(seen), dtype=int)


@dataclass
class RegionPiece:
    hyperplane: object
    contact: np.ndarray          # grid indices of A_z
    absorbing: np.ndarray        # grid indices of B_z
    vertices: np.ndarray         # extreme points of conv(B_z)


@dataclass
class RegionD:
    """Union over extreme supporting hyperplanes of ``conv(B_z)``."""

    pi: np.ndarray
    pieces: list = field(default_factory=list)
    r_D: float = 0.0

    @property
    def polytopes(self) -> list:
        return [pc.vertices for pc in self.pieces if len(pc.absorbing)]

    @property
    def nonempty(self) -> bool:
        return bool(self.polytopes)

    @property
    def maximal(self) -> bool:
        """Some contact set holds an absorbing set: the long-run value is maximal."""
        return any(len(pc.absorbing) for pc in self.pieces)

    def contains(self, p, tol: float = 1e-9) -> np.ndarray | bool:
        Q = np.atleast_2d(np.asarray(p, dtype=float))
        out = np.zeros(Q.shape[0], dtype=bool)
        for V in self.polytopes:
            out |= hull_contains(Q, V, tol)
        return bool(out[0]) if np.ndim(p) == 1 else out


def _ball_boundary(pi, r, m=360):
    # boundary of the l1 ball (within the simplex plane) of radius r around pi
    k = pi.size
    if k == 2:
        d = np.array([[0.5, -0.5], [-0.5, 0.5]]) * r
        return pi + d
    # hexagon with vertices pi + (r/2)(e_i - e_j)
    verts = []
    for i, j in ((0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)):
        v = np.zeros(3)
        v[i], v[j] = 0.5 * r, -0.5 * r
        verts.append(v)
    # order by angle in the (q0, q1) plane
    verts = sorted(verts, key=lambda v: np.arctan2(v[1], v[0]))
    t = np.linspace(0.0, 1.0, m // 6, endpoint=False)[:, None]
    pts = [a + t * (b - a) for a, b in zip(verts, verts[1:] + verts[:1])]
    return pi + np.vstack(pts)


def _clip_to_simplex(pi, X):
    # pull points outside the simplex back along the ray from pi
    out = X.copy()
    for n, x in enumerate(X):
        d = x - pi
        neg = d < 0
        s = 1.0
        if np.any(neg):
            s = min(1.0, float(np.min(pi[neg] / -d[neg])))
        out[n] = pi + s * d
    return out


def inradius(region: RegionD, bisect_tol: float = 1e-6, contain_tol: float = 1e-9) -> float:
    """Largest ``r`` with the l1 ball around ``pi`` (within the simplex) inside D.

    D is a union of convex sets containing ``pi``, hence star-shaped around
    it, so testing the ball boundary suffices.
    """
    pi = region.pi
    if not region.nonempty or not region.contains(pi, contain_tol):
        return 0.0

    def fits(r):
        pts = _clip_to_simplex(pi, _ball_boundary(pi, r))
        return bool(np.all(region.contains(pts, contain_tol)))

    lo, hi = 0.0, 2.0
    if fits(hi):
        return hi
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return lo


def build_region_D(u: UtilityFunction, M, tol: Tolerances = DEFAULT, env: Envelope | None = None) -> RegionD:
    """Contact sets, their maximal absorbing subsets and the inradius ``r_D``."""
    M = as_transition(M)
    env = cav(u) if env is None else env
    region = RegionD(pi=M.stationary.copy())
    for hp in supporting_hyperplanes(u, M, env):
        A = contact_set(u, hp, tol, env)
        keep = maximal_absorbing_subset(A.points, M, tol)
        B = A.indices[keep]
        V = hull_vertices(u.grid.nodes[B]) if B.size else np.zeros((0, M.k))
        region.pieces.append(RegionPiece(hp, A.indices, B, V))
    region.r_D = inradius(region)
    return region
