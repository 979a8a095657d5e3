"""Transition-matrix analysis: stationarity, mixing, operator norms, homothety."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .config import EPS_NUM
from .errors import InputError, NonConvergenceError, UnsupportedChainError
from .simplex import as_belief


def _period(adj: np.ndarray) -> int:
    # gcd over edges (u -> v) of level(u) + 1 - level(v), levels from a BFS at state 0
    order, pred = breadth_first_order(adj, 0, directed=True, return_predecessors=True)
    level = np.full(adj.shape[0], -1)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    g = 0
    for u, v in zip(*np.nonzero(adj)):
        g = gcd(g, int(abs(level[u] + 1 - level[v])))
    return g


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic ``k x k`` matrix with cached chain diagnostics."""

    entries: np.ndarray
    irreducible: bool = field(init=False)
    aperiodic: bool = field(init=False)
    _stationary: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        M = np.array(self.entries, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
            raise InputError(f"transition matrix must be square with k >= 2, got shape {M.shape}")
        for i, row in enumerate(M):
            try:
                M[i] = as_belief(row)
            except InputError as exc:
                raise InputError(f"row {i} of M is not a probability vector: {row}") from exc
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)
        adj = (M > 0).astype(int)
        ncomp, _ = connected_components(adj, directed=True, connection="strong")
        irreducible = ncomp == 1
        object.__setattr__(self, "irreducible", bool(irreducible))
        object.__setattr__(self, "aperiodic", bool(irreducible and _period(adj) == 1))
        object.__setattr__(self, "_stationary", None)

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic

    def require_ergodic(self):
        if not self.irreducible:
            raise UnsupportedChainError("transition matrix is reducible")
        if not self.aperiodic:
            raise UnsupportedChainError("transition matrix is periodic")

    @property
    def stationary(self) -> np.ndarray:
        if self._stationary is None:
            object.__setattr__(self, "_stationary", stationary_distribution(self))
        return self._stationary

    def __matmul__(self, other):
        return self.entries @ other

    def __rmatmul__(self, other):
        return np.asarray(other) @ self.entries


def as_transition(M) -> TransitionMatrix:
    return M if isinstance(M, TransitionMatrix) else TransitionMatrix(M)


def stationary_distribution(M) -> np.ndarray:
    """Unique stationary distribution of an irreducible aperiodic chain.

    Solved as the linear system ``pi (M - I) = 0, sum(pi) = 1``; a power
    iteration cross-check guards against a silently bad solve.
    """
    M = as_transition(M)
    M.require_ergodic()
    P = M.entries
    k = M.k
    A = np.vstack([(P - np.eye(k)).T, np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    # one refinement step keeps the fixed-point residual at machine precision
    pi = pi @ P
    pi /= pi.sum()
    q = np.full(k, 1.0 / k)
    for _ in range(10_000):
        q_next = q @ P
        if np.abs(q_next - q).max() < 1e-14:
            break
        q = q_next
    if np.abs(q - pi).max() > 1e-8:
        raise NonConvergenceError("stationary solve disagrees with power iteration")
    return pi


def advance_belief(p, M, n: int = 1) -> np.ndarray:
    """The belief ``p M^n``."""
    M = as_transition(M)
    if n < 0:
        raise InputError("n must be non-negative")
    q = as_belief(p)
    for _ in range(int(n)):
        q = q @ M.entries
    return q


def mixing_time(M, eps: float, cap: int = 1_000_000) -> int:
    """Smallest ``n >= 1`` with ``max_i ||e_i M^n - pi||_1 <= eps``.

    Checking the vertices suffices because the l1 ball is convex.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    M = as_transition(M)
    pi = M.stationary
    X = M.entries.copy()
    for n in range(1, cap + 1):
        if np.abs(X - pi).sum(axis=1).max() <= eps:
            return n
        X = X @ M.entries
    raise NonConvergenceError(f"mixing time exceeds cap {cap} for eps={eps}")


@dataclass(frozen=True)
class OperatorNorms:
    l1: float
    l2: float
    linf: float

    @property
    def l2_exceeds_one(self) -> bool:
        # the l2 norm of a stochastic matrix can exceed 1 unless it is doubly stochastic
        return self.l2 > 1.0 + 1e-12


def operator_norms(M, iters: int = 10_000) -> OperatorNorms:
    """l1 (max column sum), l2 (largest singular value) and l-inf (max row sum)."""
    P = as_transition(M).entries
    linf = float(np.abs(P).sum(axis=1).max())
    l1 = float(np.abs(P).sum(axis=0).max())
    G = P.T @ P
    x = np.ones(P.shape[0]) / np.sqrt(P.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = G @ x
        lam_next = float(np.linalg.norm(y))
        x = y / lam_next
        if abs(lam_next - lam) < 1e-15 * max(lam_next, 1.0):
            lam = lam_next
            break
        lam = lam_next
    return OperatorNorms(l1=l1, l2=float(np.sqrt(lam)), linf=linf)


@dataclass(frozen=True)
class HomothetyReport:
    is_homothety: bool
    ratio: float | None
    per_state_ratios: np.ndarray
    residual: float


def homothety_test(M, eps: float = EPS_NUM) -> HomothetyReport:
    """Test whether ``x -> xM`` shrinks every point toward ``pi_M`` by a common ratio.

    For each state ``i`` the ratio solves ``e_i M = b_i e_i + (1 - b_i) pi``
    in coordinate ``i``; the other coordinates give the reconstruction
    residual.
    """
    M = as_transition(M)
    pi = M.stationary
    P = M.entries
    k = M.k
    betas = (np.diag(P) - pi) / (1.0 - pi)
    recon = betas[:, None] * np.eye(k) + (1.0 - betas[:, None]) * pi[None, :]
    residual = float(np.abs(recon - P).max())
    ok = (
        residual <= eps
        and np.ptp(betas) <= eps
        and betas.min() >= -eps
        and betas.max() < 1.0
    )
    ratio = float(betas.mean()) if ok else None
    return HomothetyReport(bool(ok), ratio, betas, residual)


def homothety_matrix(pi, beta: float) -> np.ndarray:
    """The stochastic matrix ``beta I + (1 - beta) 1 pi``."""
    pi = as_belief(pi)
    return beta * np.eye(pi.size) + (1.0 - beta) * np.outer(np.ones(pi.size), pi)
