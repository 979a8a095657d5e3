"""Concavification of grid utilities, supporting hyperplanes and contact sets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numba
import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .config import DEFAULT, Tolerances
from .errors import ConsistencyError, InputError, UnsupportedDimensionError
from .grid import SimplexGrid
from .markov import as_transition
from .simplex import Split, as_belief, caratheodory_reduce, hull_vertices


@numba.njit(cache=True)
def _upper_hull_1d(x, y):
    # Andrew's monotone chain on x-sorted points, upper part only.
    n = x.shape[0]
    hull = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        while m >= 2:
            a = hull[m - 2]
            b = hull[m - 1]
            # drop b unless it lies strictly above the chord a -> i
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross >= 0.0:
                m -= 1
            else:
                break
        hull[m] = i
        m += 1
    return hull[:m]


def upper_hull_1d(x, y) -> np.ndarray:
    """Indices of the upper concave envelope knots of points sorted by ``x``."""
    return _upper_hull_1d(np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(y, dtype=np.float64))


class UtilityFunction:
    """A payoff function on the simplex, stored by its values on a grid and
    extended piecewise-linearly between nodes."""

    kind = "grid"

    def __init__(self, grid: SimplexGrid, values, kind: str | None = None, meta: dict | None = None):
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size != len(grid):
            raise InputError(f"utility has {v.size} values for a grid of {len(grid)} nodes")
        if not np.all(np.isfinite(v)):
            raise InputError("utility values must be finite")
        self.grid = grid
        self.values = v
        if kind is not None:
            self.kind = kind
        self.meta = meta or {}

    @property
    def k(self) -> int:
        return self.grid.k

    @property
    def scale(self) -> float:
        m = float(np.abs(self.values).max())
        return m if m > 0 else 1.0

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = self.grid.interpolate(self.values, q)
        return float(out[0]) if q.ndim == 1 else out

    @classmethod
    def from_function(cls, grid: SimplexGrid, f: Callable, kind: str = "function", meta=None):
        return cls(grid, [f(q) for q in grid.nodes], kind=kind, meta=meta)

    @classmethod
    def from_state_payoffs(cls, grid: SimplexGrid, payoff: Callable, policy: Callable, meta=None):
        """Materialize ``u(q) = sum_l q[l] * payoff(l, policy(q))``."""

        def u(q):
            b = policy(q)
            return sum(q[l] * payoff(l, b) for l in range(len(q)))

        obj = cls.from_function(grid, u, kind="state-payoffs", meta=meta)
        obj.payoff = payoff
        obj.policy = policy
        return obj


def example1_utility(grid: SimplexGrid) -> UtilityFunction:
    """Two states H, L; the receiver's action is her belief p on H.

    Sender payoffs: 2 - 3|p - 1/2| in state H and p/10 in state L.
    """
    if grid.k != 2:
        raise InputError("example1 utility is defined for k = 2")
    return UtilityFunction.from_state_payoffs(
        grid,
        payoff=lambda state, b: 2.0 - 3.0 * abs(b - 0.5) if state == 0 else b / 10.0,
        policy=lambda q: q[0],
        meta={"builder": "example1"},
    )


class Envelope(UtilityFunction):
    """Upper concave envelope of a grid function.

    It is the exact concavification of the piecewise-linear interpolant, so
    evaluation off the grid is exact: through the hull knots for ``k = 2``
    and as the minimum over the upper facet planes for ``k = 3``.
    ``planes`` has rows ``(g0, g1, c)`` with value ``g0*q0 + g1*q1 + c``
    (``k = 3``) or ``(g0, c)`` with value ``g0*q0 + c`` (``k = 2``).
    """

    kind = "envelope"

    def __init__(self, grid, values, planes, knots=None, source=None):
        super().__init__(grid, values)
        self.planes = planes
        self.knots = knots
        self.source = source

    def __call__(self, q):
        Q = np.atleast_2d(np.asarray(q, dtype=float))
        if self.k == 2:
            x = self.grid.nodes[self.knots, 0]
            out = np.interp(Q[:, 0], x, self.values[self.knots])
        else:
            out = (Q[:, :2] @ self.planes[:, :2].T + self.planes[:, 2]).min(axis=1)
        return float(out[0]) if np.ndim(q) == 1 else out

    def active_planes(self, q, tol: float) -> np.ndarray:
        """Planes (rows of ``planes``) that attain the envelope at ``q``."""
        q = np.asarray(q, dtype=float)
        if self.k == 2:
            vals = self.planes[:, 0] * q[0] + self.planes[:, 1]
        else:
            vals = self.planes[:, :2] @ q[:2] + self.planes[:, 2]
        # planes of a 1-d envelope are only valid on their own segment
        if self.k == 2:
            x = self.grid.nodes[self.knots, 0]
            inside = (q[0] >= x[:-1] - 1e-12) & (q[0] <= x[1:] + 1e-12)
            vals = np.where(inside, vals, np.inf)
        return self.planes[np.abs(vals - self(q)) <= tol]


def _cav_1d(grid, y):
    x = grid.nodes[:, 0]
    h = upper_hull_1d(x, y)
    vals = np.interp(x, x[h], y[h])
    vals = np.maximum(vals, y)
    slopes = np.diff(y[h]) / np.diff(x[h])
    planes = np.column_stack([slopes, y[h][:-1] - slopes * x[h][:-1]])
    return vals, planes, h


def _cav_2d(grid, y):
    X = grid.nodes[:, :2]
    try:
        hull = ConvexHull(np.column_stack([X, y]))
        eq = hull.equations
        up = eq[:, 2] > 1e-12
        eq = eq[up]
        planes = np.column_stack([-eq[:, 0] / eq[:, 2], -eq[:, 1] / eq[:, 2], -eq[:, 3] / eq[:, 2]])
    except QhullError:
        # lifted points are coplanar: y is affine on the grid
        A = np.column_stack([X, np.ones(len(X))])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        planes = coef[None, :]
    planes = np.unique(np.round(planes, 12), axis=0)
    vals = (X @ planes[:, :2].T + planes[:, 2]).min(axis=1)
    vals = np.maximum(vals, y)
    return vals, planes


def cav_values(grid: SimplexGrid, y) -> np.ndarray:
    """Envelope values at the grid nodes only (fast path for value iteration)."""
    y = np.asarray(y, dtype=float)
    if grid.k == 2:
        x = grid.nodes[:, 0]
        h = upper_hull_1d(x, y)
        return np.maximum(np.interp(x, x[h], y[h]), y)
    return _cav_2d(grid, y)[0]


def cav(u: UtilityFunction) -> Envelope:
    """Least concave function above ``u`` on its grid."""
    if u.k == 2:
        vals, planes, knots = _cav_1d(u.grid, u.values)
        return Envelope(u.grid, vals, planes, knots=knots, source=u)
    if u.k == 3:
        vals, planes = _cav_2d(u.grid, u.values)
        return Envelope(u.grid, vals, planes, source=u)
    raise UnsupportedDimensionError(f"concavification implemented for k <= 3, got k={u.k}")


def envelope_of(grid: SimplexGrid, values) -> Envelope:
    return cav(UtilityFunction(grid, values))


@dataclass(frozen=True)
class SupportingHyperplane:
    """Affine function ``f(q) = level + <z, q - anchor>`` supporting the envelope at ``anchor``."""

    z: np.ndarray
    anchor: np.ndarray
    level: float

    def __call__(self, q):
        Q = np.asarray(q, dtype=float)
        return self.level + (Q - self.anchor) @ self.z

    @property
    def slope(self) -> float:
        """Derivative along the mass of state 1 (meaningful for ``k = 2``)."""
        return float(self.z[0] - self.z[-1]) if self.z.size == 2 else float("nan")


def _z_from_gradient(g, k):
    # plane gradient w.r.t. (q0, ..., q_{k-2}); the last coordinate is implicit
    z = np.append(np.asarray(g, float), 0.0)
    return z - z.mean()


def hyperplanes_at(env: Envelope, p, tol: float | None = None) -> list[SupportingHyperplane]:
    """Extreme supporting hyperplanes of the envelope at ``p``.

    When the subdifferential is not a singleton, the average of the extreme
    gradients is appended as an interior representative.
    """
    p = as_belief(p)
    if tol is None:
        tol = 1e-10 * env.scale
    level = env(p)
    k = env.k
    active = env.active_planes(p, tol)
    if len(active) == 0:
        raise ConsistencyError("no envelope plane is active at the anchor")
    grads = active[:, : k - 1]
    grads = np.unique(np.round(grads, 9), axis=0)
    if k == 3 and len(grads) >= 3:
        try:
            grads = grads[ConvexHull(grads).vertices]
        except QhullError:
            pass
    elif len(grads) > 2:
        grads = grads[[grads[:, 0].argmin(), grads[:, 0].argmax()]]
    if k == 2:
        grads = grads[np.argsort(-grads[:, 0])]  # left slope (larger) first
    zs = [_z_from_gradient(g, k) for g in grads]
    if len(zs) > 1:
        zs.append(np.mean(zs, axis=0))
    return [SupportingHyperplane(z, p.copy(), level) for z in zs]


def supporting_hyperplanes(u: UtilityFunction, M, env: Envelope | None = None) -> list[SupportingHyperplane]:
    """Extreme supporting hyperplanes of ``Cav u`` at the stationary distribution of ``M``."""
    env = cav(u) if env is None else env
    return hyperplanes_at(env, as_transition(M).stationary)


@dataclass(frozen=True)
class ContactSet:
    points: np.ndarray
    indices: np.ndarray
    hyperplane: SupportingHyperplane

    def __len__(self):
        return len(self.indices)


def contact_tolerance(u: UtilityFunction, tol: Tolerances = DEFAULT) -> float:
    return tol.contact * u.scale


def contact_set(u: UtilityFunction, hp: SupportingHyperplane, tol: Tolerances = DEFAULT,
                env: Envelope | None = None) -> ContactSet:
    """Grid nodes where ``u`` touches the hyperplane."""
    eps = contact_tolerance(u, tol)
    f = hp(u.grid.nodes)
    env = cav(u) if env is None else env
    if np.any(f < env.values - eps):
        raise InputError("hyperplane does not dominate the envelope")
    idx = np.flatnonzero(np.abs(u.values - f) <= eps)
    if idx.size == 0:
        raise ConsistencyError("empty contact set")
    return ContactSet(u.grid.nodes[idx], idx, hp)


def optimal_split(p, grid: SimplexGrid, values, env: Envelope | None = None,
                  tol: Tolerances = DEFAULT) -> Split:
    """Split of ``p`` attaining the concavification of the grid function ``values``."""
    p = as_belief(p)
    g = UtilityFunction(grid, values)
    env = cav(g) if env is None else env
    eps = contact_tolerance(g, tol)
    if env(p) - g(p) <= eps:
        return Split.trivial(p)
    hps = hyperplanes_at(env, p)
    hp = hps[-1]  # interior of the subdifferential when it is not a singleton
    f = hp(grid.nodes)
    idx = np.flatnonzero(np.abs(g.values - f) <= eps)
    split = caratheodory_reduce(p, grid.nodes[idx], tol=tol.hull)
    return Split(split.posteriors, split.weights, support=tuple(int(idx[i]) for i in split.support))


def optimal_static_split(p, u: UtilityFunction, env: Envelope | None = None, tol: Tolerances = DEFAULT) -> Split:
    """Best one-shot split of ``p``; the trivial split wherever ``u = Cav u``."""
    return optimal_split(p, u.grid, u.values, env=env if env is not None else cav(u), tol=tol)
