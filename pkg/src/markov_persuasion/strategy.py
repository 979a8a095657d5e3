"""Sender strategies as signal lotteries, the confined-chain construction and
seeded Monte Carlo simulation of beliefs and payoffs."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.sparse.csgraph import connected_components

from .absorbing import AbsorbingCertificate, is_absorbing
from .concav import Envelope, UtilityFunction, cav, cav_values, optimal_split
from .config import DEFAULT, EPS_NUM, Tolerances
from .errors import ConsistencyError, InputError
from .markov import as_transition, mixing_time
from .simplex import Split, as_belief, caratheodory_reduce, hull_contains, vertex
from .value import abel_average, shift_operator

RNG_ALGORITHM = "PCG64"  # numpy default_rng; one SeedSequence per integer seed


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("MP_THREADS", "1")))
    except ValueError:
        return 1


def map_seeds(fn, seeds):
    """Apply ``fn`` to every seed, in parallel up to ``MP_THREADS`` workers; order is kept."""
    seeds = list(seeds)
    n = min(max_workers(), len(seeds)) or 1
    if n == 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(n) as ex:
        return list(ex.map(fn, seeds))


# ---------------------------------------------------------------- signal rules

@dataclass(frozen=True)
class SignalRule:
    """``probs[l, i]``: probability that the sender emits signal ``i`` in state ``l``."""

    probs: np.ndarray
    prior: np.ndarray
    split: Split

    @property
    def k(self) -> int:
        return self.probs.shape[0]

    def posterior(self, signal: int) -> np.ndarray:
        """Bayes update of ``prior`` after observing ``signal``."""
        w = self.prior * self.probs[:, signal]
        return w / w.sum()

    def signal_probabilities(self) -> np.ndarray:
        return self.prior @ self.probs


def signal_rule_from_split(p, split: Split, tol: float = EPS_NUM) -> SignalRule:
    """Lottery that induces ``split`` from prior ``p``.

    State ``l`` sends signal ``i`` with probability ``w_i q_i[l] / p[l]``;
    states with ``p[l] = 0`` send signal 0.
    """
    p = as_belief(p)
    k = p.size
    if split.posteriors.shape[1] != k:
        raise InputError("split and prior have different dimensions")
    if len(split) > k:
        raise InputError(f"split has {len(split)} atoms but only {k} signals are available")
    err = np.abs(split.barycenter - p).max()
    if err > tol:
        raise InputError(f"split barycenter differs from the prior by {err:.3g}")
    probs = np.zeros((k, k))
    pos = p > 0
    probs[pos, : len(split)] = (split.posteriors.T * split.weights[None, :])[pos] / p[pos, None]
    probs[pos] /= probs[pos].sum(axis=1, keepdims=True)
    probs[~pos, 0] = 1.0
    return SignalRule(probs, p, split)


# ---------------------------------------------------------------- strategies

class Strategy:
    """Posterior-Markov sender strategy: a split of the stage prior, possibly
    depending on the stage index."""

    name = "strategy"

    def split(self, prior: np.ndarray, n: int) -> Split:
        raise NotImplementedError


class Babbling(Strategy):
    name = "babbling"

    def split(self, prior, n):
        return Split.trivial(prior)


class FullRevelation(Strategy):
    name = "full-revelation"

    def split(self, prior, n):
        idx = np.flatnonzero(prior > 0)
        return Split(np.eye(prior.size)[idx], prior[idx], support=tuple(int(i) for i in idx))


def _bracket_split(p, grid, env: Envelope, g_values, eps):
    # k = 2: split onto the envelope knots around p unless the function already touches it
    x = grid.nodes[env.knots, 0]
    if env(p) - grid.interpolate(g_values, p[None, :])[0] <= eps:
        return Split.trivial(p)
    j = int(np.clip(np.searchsorted(x, p[0], side="right") - 1, 0, x.size - 2))
    a, b = x[j], x[j + 1]
    t = (p[0] - a) / (b - a)
    atoms = np.array([[a, 1.0 - a], [b, 1.0 - b]])
    w = np.array([1.0 - t, t])
    keep = w > 0
    return Split(atoms[keep], w[keep], support=tuple(int(env.knots[j + i]) for i in np.flatnonzero(keep)))


class GreedyStatic(Strategy):
    """Myopic play: the optimal one-shot split of every stage prior."""

    name = "greedy"

    def __init__(self, u: UtilityFunction, tol: Tolerances = DEFAULT):
        self.u = u
        self.env = cav(u)
        self.tol = tol
        self.eps = tol.contact * u.scale

    def split(self, prior, n):
        if self.u.k == 2:
            return _bracket_split(prior, self.u.grid, self.env, self.u.values, self.eps)
        return optimal_split(prior, self.u.grid, self.u.values, self.env, self.tol)


class ConfinedStrategy(Strategy):
    """Keeps every posterior inside the certified absorbing set ``C``.

    A prior equal to ``q_i M`` is split by certificate row ``i``; any other
    prior in ``conv(C)`` by a Caratheodory decomposition over ``C``; priors
    outside ``conv(C)`` are not split.
    """

    name = "confined"

    def __init__(self, cert: AbsorbingCertificate, M, tol: Tolerances = DEFAULT):
        if not isinstance(cert, AbsorbingCertificate):
            raise InputError("confined strategy needs an absorbing certificate")
        self.cert = cert
        self.M = as_transition(M)
        self.tol = tol
        self.images = cert.points @ self.M.entries

    def split_of_image(self, i: int) -> Split:
        s = self.cert.decompositions[i]
        return Split(self.cert.points[list(s.support)], s.weights, support=s.support)

    def split(self, prior, n):
        d = np.abs(self.images - prior).max(axis=1)
        i = int(d.argmin())
        if d[i] <= self.tol.num:
            return self.split_of_image(i)
        if not hull_contains(prior[None, :], self.cert.points, self.tol.hull)[0]:
            return Split.trivial(prior)
        s = caratheodory_reduce(prior, self.cert.points, self.tol.hull)
        return Split(self.cert.points[list(s.support)], s.weights, support=s.support)

    def split_from_posterior(self, q) -> Split:
        """Split applied to ``qM`` after posterior ``q``."""
        return self.split(as_belief(q) @ self.M.entries, 1)


class BlockStrategy(Strategy):
    """Alternates ``N_eps`` stages of optimal ``N_eps``-stage play with
    ``T_eps`` silent stages that bring the belief back within ``eps`` of ``pi``.

    Optimal finite-horizon play is realized greedily from the stored totals:
    with ``h`` stages left the prior is split to attain
    ``Cav[u + (h - 1) v_{h-1}(. M)]``.
    """

    name = "block"

    def __init__(self, u: UtilityFunction, M, eps: float, tol: Tolerances = DEFAULT,
                 horizon_cap: int = 1024, play_cap: int = 4096):
        if eps <= 0:
            raise InputError("eps must be positive")
        self.u = u
        self.M = as_transition(M)
        self.eps = eps
        self.tol = tol
        self.T = mixing_time(self.M, eps)
        grid = u.grid
        S = shift_operator(grid, self.M)
        pi_row = grid.interpolation_matrix(self.M.stationary[None, :])
        totals = [np.zeros(len(grid))]
        vN = []
        for h in range(1, horizon_cap + 1):
            totals.append(cav_values(grid, u.values + S @ totals[-1]))
            vN.append(float((pi_row @ totals[-1])[0]) / h)
        vN = np.array(vN)
        limit = 2.0 * vN[-1] - vN[horizon_cap // 2 - 1] if horizon_cap >= 2 else vN[-1]
        close = np.flatnonzero(np.abs(vN - limit) <= eps)
        n_star = int(close[0]) + 1 if close.size else horizon_cap
        self.N = int(min(max(math.ceil(self.T / eps), n_star), play_cap))
        self.v_limit = float(limit)
        while len(totals) <= self.N:
            totals.append(cav_values(grid, u.values + S @ totals[-1]))
        # objective with h stages left
        self._g = [None] + [u.values + S @ totals[h - 1] for h in range(1, self.N + 1)]
        self._env = {}
        self.cycle = self.N + self.T

    def _envelope(self, h):
        env = self._env.get(h)
        if env is None:
            env = self._env[h] = cav(UtilityFunction(self.u.grid, self._g[h]))
        return env

    def is_silent(self, n: int) -> bool:
        return (n % self.cycle) >= self.N

    def split(self, prior, n):
        j = n % self.cycle
        if j >= self.N:
            return Split.trivial(prior)
        h = self.N - j
        env = self._envelope(h)
        eps = self.tol.contact * max(1.0, float(np.abs(self._g[h]).max()))
        if self.u.k == 2:
            return _bracket_split(prior, self.u.grid, env, self._g[h], eps)
        return optimal_split(prior, self.u.grid, self._g[h], env, self.tol)


# ---------------------------------------------------------------- simulation

@dataclass
class SimTrace:
    """One simulated play: stage ``n`` has prior ``priors[n]``, state
    ``states[n]``, signal ``signals[n]``, posterior ``posteriors[n]`` and
    payoff ``u(posteriors[n])``."""

    seed: int
    states: np.ndarray
    signals: np.ndarray
    priors: np.ndarray
    posteriors: np.ndarray
    payoffs: np.ndarray
    rules: np.ndarray
    lambdas: tuple = (0.99, 0.999)
    strategy: str = ""

    def __len__(self):
        return self.payoffs.size

    def cesaro(self) -> float:
        return float(self.payoffs.mean())

    def abel(self, lam: float) -> float:
        return abel_average(self.payoffs, lam)

    def summary(self) -> dict:
        out = {"seed": int(self.seed), "steps": len(self), "strategy": self.strategy,
               "cesaro": self.cesaro()}
        for lam in self.lambdas:
            out[f"abel_{lam}"] = self.abel(lam)
        return out

    def write_csv(self, path):
        k = self.priors.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "state", "signal"] + [f"posterior_{i}" for i in range(k)] + ["payoff"])
            for n in range(len(self)):
                w.writerow([n + 1, int(self.states[n]), int(self.signals[n])]
                           + [repr(float(x)) for x in self.posteriors[n]] + [repr(float(self.payoffs[n]))])


def simulate(p, strategy: Strategy, M, u: UtilityFunction, horizon: int, seed: int,
             lambdas=(0.99, 0.999)) -> SimTrace:
    """Sample states, signals and beliefs for ``horizon`` stages.

    ``X_1 ~ p`` and ``X_{n+1} ~ M[X_n]``; the receiver's belief is updated by
    Bayes' rule and then shifted by ``M`` to give the next stage prior.
    """
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    M = as_transition(M)
    P = M.entries
    k = M.k
    rng = make_rng(seed)
    prior = as_belief(p)
    states = np.empty(horizon, dtype=int)
    signals = np.empty(horizon, dtype=int)
    priors = np.empty((horizon, k))
    posts = np.empty((horizon, k))
    rules = np.empty((horizon, k, k))
    x = int(rng.choice(k, p=prior))
    for n in range(horizon):
        split = strategy.split(prior, n)
        rule = signal_rule_from_split(prior, split)
        s = int(rng.choice(k, p=rule.probs[x]))
        states[n], signals[n] = x, s
        priors[n] = prior
        rules[n] = rule.probs
        # the Bayes posterior is the split atom; store the atom itself
        posts[n] = split.posteriors[s]
        prior = posts[n] @ P
        x = int(rng.choice(k, p=P[x]))
    payoffs = np.asarray(u(posts), dtype=float).reshape(-1)
    return SimTrace(int(seed), states, signals, priors, posts, payoffs, rules, tuple(lambdas),
                    getattr(strategy, "name", ""))


def simulate_seeds(p, strategy, M, u, horizon, seeds, lambdas=(0.99, 0.999)) -> list[SimTrace]:
    return map_seeds(lambda s: simulate(p, strategy, M, u, horizon, s, lambdas), seeds)


def martingale_residuals(traces) -> np.ndarray:
    """``p_{n+1} - p_n M`` over consecutive stages (zero-mean under any strategy)."""
    return np.vstack([t.posteriors[1:] - t.priors[1:] for t in traces])


# ---------------------------------------------------------------- confined chain

@dataclass
class ConfinedChain:
    """Markov chain of posteriors on a closed communicating class of an
    absorbing certificate, with its stationary law."""

    certificate: AbsorbingCertificate
    W: np.ndarray
    recurrent: np.ndarray
    W_R: np.ndarray
    nu: np.ndarray
    Q: np.ndarray
    residual: float
    classes: list = field(default_factory=list)

    def target(self, u: UtilityFunction) -> float:
        """Long-run average payoff ``sum_i nu_i u(q_i)``."""
        return float(self.nu @ np.asarray(u(self.Q)).reshape(-1))


def _closed_classes(W, thresh=1e-14):
    adj = (W > thresh).astype(int)
    n, labels = connected_components(adj, directed=True, connection="strong")
    classes = [np.flatnonzero(labels == c) for c in range(n)]
    closed = []
    for members in classes:
        out = adj[members].sum(axis=0)
        out[members] = 0
        if out.sum() == 0:
            closed.append(members)
    closed.sort(key=lambda m: int(m.min()))
    return classes, closed


def _stationary_irreducible(P):
    k = P.shape[0]
    A = np.vstack([(P - np.eye(k)).T, np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    nu, *_ = np.linalg.lstsq(A, b, rcond=None)
    nu = np.clip(nu, 0.0, None)
    return nu / nu.sum()


def confined_chain_construction(C, M, pi=None, tol: Tolerances = DEFAULT) -> ConfinedChain:
    """Chain of posteriors induced by the confined strategy on the lowest-index
    closed communicating class, and the check ``nu P_R = pi_M``."""
    M = as_transition(M)
    cert = C if isinstance(C, AbsorbingCertificate) else is_absorbing(C, M, tol)
    if not cert:
        raise InputError(f"set is not absorbing (fails at index {cert.index})")
    pi = M.stationary if pi is None else as_belief(pi)
    W = cert.W
    classes, closed = _closed_classes(W)
    R = closed[0]
    W_R = W[np.ix_(R, R)]
    W_R = W_R / W_R.sum(axis=1, keepdims=True)
    nu = _stationary_irreducible(W_R)
    Q = cert.points[R]
    residual = float(np.abs(nu @ Q - pi).max())
    if residual > tol.num:
        raise ConsistencyError(f"nu P_R differs from pi_M by {residual:.3g}")
    return ConfinedChain(cert, W, R, W_R, nu, Q, residual, classes)


@numba.njit(cache=True)
def _walk(cum, x0, U):
    n = U.shape[0]
    out = np.empty(n, dtype=np.int64)
    x = x0
    r = cum.shape[1]
    for t in range(n):
        out[t] = x
        j = 0
        while j < r - 1 and U[t] > cum[x, j]:
            j += 1
        x = j
    return out


def sample_chain(P, x0: int, steps: int, rng) -> np.ndarray:
    """States ``x_1 = x0, ..., x_steps`` of the chain ``P``."""
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    return _walk(cum, int(x0), rng.random(steps))


@dataclass
class ErgodicReport:
    target: float
    seeds: list
    cesaro: np.ndarray
    abel: dict
    occupation: np.ndarray
    nu: np.ndarray

    def max_cesaro_deviation(self) -> float:
        return float(np.abs(self.cesaro - self.target).max())

    def abel_deviation(self, lam) -> tuple[float, float]:
        """(deviation of the seed mean, largest per-seed deviation)."""
        a = self.abel[lam]
        return float(abs(a.mean() - self.target)), float(np.abs(a - self.target).max())

    def summary(self) -> dict:
        out = {
            "target": self.target,
            "seeds": [int(s) for s in self.seeds],
            "cesaro": self.cesaro.tolist(),
            "cesaro_max_deviation": self.max_cesaro_deviation(),
            "nu": self.nu.tolist(),
            "occupation_max_deviation": float(np.abs(self.occupation - self.nu).max()),
        }
        for lam, a in self.abel.items():
            mean_dev, max_dev = self.abel_deviation(lam)
            out[f"abel_{lam}"] = a.tolist()
            out[f"abel_{lam}_mean_deviation"] = mean_dev
            out[f"abel_{lam}_max_deviation"] = max_dev
        return out


def ergodic_check(chain: ConfinedChain, u: UtilityFunction, steps: int, seeds,
                  lambdas=(0.99, 0.999)) -> ErgodicReport:
    """Simulate the posterior chain on ``Q`` (started from ``nu``, the split of
    ``pi_M`` over ``Q``) and collect Cesaro and Abel payoff averages per seed."""
    pay = np.asarray(u(chain.Q), dtype=float).reshape(-1)
    r = len(chain.nu)

    def one(seed):
        rng = make_rng(seed)
        x0 = int(rng.choice(r, p=chain.nu))
        xs = sample_chain(chain.W_R, x0, steps, rng)
        a = pay[xs]
        occ = np.bincount(xs, minlength=r) / steps
        return a.mean(), [abel_average(a, lam) for lam in lambdas], occ

    res = map_seeds(one, seeds)
    ces = np.array([c for c, _, _ in res])
    ab = {lam: np.array([r_[1][i] for r_ in res]) for i, lam in enumerate(lambdas)}
    occ = np.array([o for _, _, o in res])
    return ErgodicReport(chain.target(u), list(seeds), ces, ab, occ, chain.nu)
