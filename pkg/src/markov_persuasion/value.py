"""Sender values: closed form on D, discounted and finite-horizon dynamic programming,
two-sided bounds and the long-run value."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .absorbing import RegionD
from .concav import Envelope, UtilityFunction, cav, cav_values
from .config import DEFAULT, Tolerances
from .errors import DomainError, InputError, NonConvergenceError
from .grid import SimplexGrid
from .markov import as_transition, mixing_time
from .simplex import as_belief, check_points, vertex

log = logging.getLogger(__name__)


@dataclass
class ValueFunction:
    """Node values of a value function on a simplex grid.

    ``lam`` is set for discounted values, ``horizon`` for N-stage averages.
    """

    grid: SimplexGrid
    values: np.ndarray
    lam: float | None = None
    horizon: int | None = None
    residual: float = 0.0
    iterations: int = 0

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = self.grid.interpolate(self.values, q)
        return float(out[0]) if q.ndim == 1 else out

    def concavity_violation(self) -> float:
        return self.grid.max_concavity_violation(self.values)


@dataclass
class ValueBounds:
    N: int
    lower: float
    upper: float
    I_term: float


def _check_lambda(lam):
    if not 0.0 <= lam < 1.0:
        raise InputError(f"discount factor must lie in [0, 1), got {lam}")


def shift_operator(grid: SimplexGrid, M):
    """Sparse matrix taking node values ``v`` to node values of ``q -> v(qM)``."""
    M = as_transition(M)
    return grid.interpolation_matrix(grid.nodes @ M.entries)


def effective_belief(p, M, lam: float) -> np.ndarray:
    """Discounted occupation measure ``(1 - lam) p (I - lam M)^{-1}``.

    ``p`` may be a single belief or an ``(m, k)`` array of beliefs.
    """
    _check_lambda(lam)
    M = as_transition(M)
    single = np.ndim(p) == 1
    P = as_belief(p)[None, :] if single else check_points(p, M.k)
    A = (np.eye(M.k) - lam * M.entries).T
    X = np.linalg.solve(A, (1.0 - lam) * P.T).T
    if not np.all(np.isfinite(X)):
        raise NonConvergenceError("effective belief solve failed")
    X = np.clip(X, 0.0, None)
    X /= X.sum(axis=1, keepdims=True)
    return X[0] if single else X


def closed_form_value(p, u: UtilityFunction, M, lam: float, region: RegionD,
                      env: Envelope | None = None, tol: float = 1e-9) -> float:
    """Value on D: the envelope at the effective belief."""
    p = as_belief(p)
    if not region.maximal:
        raise DomainError("no contact set contains an absorbing set; the closed form does not apply")
    if not region.contains(p, tol):
        raise DomainError(f"p = {p} lies outside D")
    env = cav(u) if env is None else env
    return env(effective_belief(p, M, lam))


def value_iteration(u: UtilityFunction, M, lam: float, tol: Tolerances = DEFAULT,
                    v0=None, grid: SimplexGrid | None = None) -> ValueFunction:
    """Fixed point of ``v -> Cav[(1 - lam) u + lam v(. M)]`` on the grid.

    The map is a ``lam``-contraction in the sup norm; iteration stops when the
    sup-norm change falls below ``tol.vi``.
    """
    _check_lambda(lam)
    grid = u.grid if grid is None else grid
    S = shift_operator(grid, M)
    base = (1.0 - lam) * u.values
    v = u.values.copy() if v0 is None else np.asarray(v0, dtype=float).copy()
    if lam == 0.0:
        return ValueFunction(grid, cav_values(grid, base), lam=lam, iterations=1)
    resid = np.inf
    for it in range(1, tol.vi_max_iter + 1):
        v_new = cav_values(grid, base + lam * (S @ v))
        resid = float(np.abs(v_new - v).max())
        v = v_new
        if resid < tol.vi:
            log.debug("value iteration lam=%s converged in %d iterations", lam, it)
            return ValueFunction(grid, v, lam=lam, residual=resid, iterations=it)
    raise NonConvergenceError(f"value iteration did not converge (lam={lam})", residual=resid)


def finite_horizon_value(u: UtilityFunction, M, N: int) -> list[ValueFunction]:
    """Average values ``v_1, ..., v_N`` of the N-stage games.

    Backward recursion on totals: ``n v_n = Cav[u + (n - 1) v_{n-1}(. M)]``.
    """
    if N < 1:
        raise InputError("horizon must be >= 1")
    grid = u.grid
    S = shift_operator(grid, M)
    total = cav_values(grid, u.values)
    out = [ValueFunction(grid, total.copy(), horizon=1)]
    for n in range(2, N + 1):
        total = cav_values(grid, u.values + S @ total)
        out.append(ValueFunction(grid, total / n, horizon=n))
    return out


def sandwich_bounds(p, u: UtilityFunction, M, lam: float, region: RegionD,
                    env: Envelope | None = None) -> ValueBounds:
    """Lower/upper bounds on ``v_lam(p)``: a silent (resp. envelope) prefix of
    ``N`` stages followed by the closed form once beliefs have entered D.

    ``N`` is the exact mixing time into an l1 ball slightly smaller than the
    inradius of D.
    """
    _check_lambda(lam)
    if region.r_D <= 0:
        raise DomainError("stationary distribution is not interior to D; bounds are inapplicable")
    M = as_transition(M)
    env = cav(u) if env is None else env
    p = as_belief(p)
    N = mixing_time(M, region.r_D * (1.0 - 1e-6))
    beliefs = [p]
    for _ in range(N):
        beliefs.append(beliefs[-1] @ M.entries)
    B = np.array(beliefs[:N])
    w = (1.0 - lam) * lam ** np.arange(N)
    I_term = lam**N * env(effective_belief(beliefs[N], M, lam))
    lower = float(w @ u(B)) + I_term
    upper = float(w @ env(B)) + I_term
    return ValueBounds(N, lower, upper, I_term)


def abel_average(a, lam: float) -> float:
    """``(1 - lam) * sum_n lam^(n-1) a_n`` over the given (finite) sequence."""
    a = np.asarray(a, dtype=float)
    return float((1.0 - lam) * np.sum(lam ** np.arange(a.size) * a))


def cesaro_averages(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.cumsum(a) / np.arange(1, a.size + 1)


def abel_from_cesaro(A, lam: float) -> float:
    """Discounted average rewritten as a mixture of running averages:
    ``(1 - lam)^2 * sum_n n lam^(n-1) A_n``."""
    A = np.asarray(A, dtype=float)
    n = np.arange(1, A.size + 1)
    return float((1.0 - lam) ** 2 * np.sum(n * lam ** (n - 1) * A))


@dataclass
class VInfinityEstimate:
    value: float
    horizons: np.ndarray
    vN_at_pi: np.ndarray
    richardson: np.ndarray
    lambdas: tuple
    points: np.ndarray
    lambda_values: np.ndarray          # (len(lambdas), len(points))
    cav_at_pi: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        """How far the long-run value falls short of the static value at ``pi``."""
        return self.cav_at_pi - self.value


def probe_points(k: int, pi) -> np.ndarray:
    pts = [vertex(i, k) for i in range(k)]
    pts.append(np.full(k, 1.0 / k))
    pts.append(np.asarray(pi, float))
    return np.array(pts)


def estimate_v_infinity(u: UtilityFunction, M, lambdas=(0.9, 0.99, 0.999),
                        powers=range(4, 11), tol: Tolerances = DEFAULT,
                        points=None) -> VInfinityEstimate:
    """Long-run value from Richardson extrapolation of ``v_N(pi)`` over
    ``N = 2^j``, cross-checked with discounted values for ``lam -> 1``."""
    M = as_transition(M)
    pi = M.stationary
    horizons = np.array([2**j for j in powers])
    vs = finite_horizon_value(u, M, int(horizons.max()))
    vN = np.array([vs[n - 1](pi) for n in horizons])
    rich = 2.0 * vN[1:] - vN[:-1]
    value = float(rich[-1]) if rich.size else float(vN[-1])
    pts = probe_points(M.k, pi) if points is None else np.atleast_2d(points)
    lam_vals = []
    v0 = None
    for lam in lambdas:
        vf = value_iteration(u, M, lam, tol, v0=v0)
        v0 = vf.values
        lam_vals.append(vf(pts))
    lam_vals = np.array(lam_vals)
    env = cav(u)
    diag = {
        "spread_at_largest_lambda": float(np.ptp(lam_vals[-1])) if lam_vals.size else float("nan"),
        "richardson_minus_vi": float(value - lam_vals[-1].mean()) if lam_vals.size else float("nan"),
        "vN_last": float(vN[-1]),
    }
    return VInfinityEstimate(value, horizons, vN, rich, tuple(lambdas), pts, lam_vals,
                             env(pi), diag)
