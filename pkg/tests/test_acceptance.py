"""Acceptance criteria, each check at its stated tolerance.

A per-criterion PASS/FAIL line is printed at the end of the run (see conftest).
"""
from fractions import Fraction

import numpy as np
import pytest

from markov_persuasion import (closed_form_value, confined_chain_construction, ergodic_check,
                               estimate_v_infinity, finite_horizon_value, is_absorbing,
                               maximal_absorbing_subset, sandwich_bounds, simulate,
                               value_iteration)
from markov_persuasion.absorbing import build_region_D
from markov_persuasion.concav import UtilityFunction, cav, contact_set, supporting_hyperplanes
from markov_persuasion.markov import homothety_test
from markov_persuasion.strategy import ConfinedStrategy, GreedyStatic, martingale_residuals
from markov_persuasion.value import abel_average, abel_from_cesaro, cesaro_averages

import oracles
from conftest import M1, M2

STEP = 1 / 2000
TARGET_M2 = 0.5125


# ---------------------------------------------------------------- criterion 1

@pytest.mark.criterion(1)
def test_stationary_distributions(m1, m2):
    assert np.abs(m1.stationary - [0.4, 0.6]).max() <= 1e-9
    assert np.abs(m2.stationary - [0.25, 0.75]).max() <= 1e-9


@pytest.mark.criterion(1)
def test_cav_at_stationary_m2(env1, m2):
    val = env1(m2.stationary)
    assert 0.5115 <= val <= 0.5135
    assert val == pytest.approx(float(oracles.example1_cav(Fraction(1, 4))), abs=1e-12)


@pytest.mark.criterion(1)
def test_utility_maximum(u1, grid2):
    i = int(np.argmax(u1.values))
    p_star = grid2.nodes[i, 0]
    assert abs(p_star - 0.581) <= STEP + 1e-12
    assert abs(u1.values[i] - 1.045) <= 5e-4          # target given to three decimals
    p_ex, u_ex = oracles.example1_max()
    assert abs(p_star - float(p_ex)) <= STEP
    assert u1.values[i] <= float(u_ex) + 1e-12


# ---------------------------------------------------------------- criterion 2

@pytest.mark.criterion(2)
def test_contact_set_m2_detected_and_absorbing(u1, m2, env1, region_m2):
    expected = np.array([[0.0, 1.0], [0.5, 0.5]])
    hps = supporting_hyperplanes(u1, m2, env1)
    assert hps
    for hp in hps:
        A = contact_set(u1, hp, env=env1).points
        # every expected point is matched within one grid step, and vice versa
        d = np.abs(A[:, None, :] - expected[None, :, :]).max(axis=2)
        assert d.min(axis=0).max() <= STEP + 1e-12
        assert d.min(axis=1).max() <= STEP + 1e-12
        cert = is_absorbing(A, m2)
        assert cert
        assert cert.residual(m2) <= 1e-8
    assert region_m2.maximal


@pytest.mark.criterion(2)
def test_maximal_absorbing_subset_m1_empty(u1, m1, env1, region_m1):
    for hp in supporting_hyperplanes(u1, m1, env1):
        A = contact_set(u1, hp, env=env1).points
        assert maximal_absorbing_subset(A, m1).size == 0
    assert all(len(pc.absorbing) == 0 for pc in region_m1.pieces)
    assert not region_m1.maximal


# ---------------------------------------------------------------- criterion 3

@pytest.mark.criterion(3)
@pytest.mark.parametrize("lam", [0.3, 0.5, 0.9, 0.99])
def test_closed_form_matches_value_iteration(lam, u1, m2, env1, region_m2, vi_cache):
    rng = np.random.default_rng(3)
    V = region_m2.polytopes[0]
    w = rng.dirichlet(np.ones(len(V)), size=50)
    pts = w @ V
    assert np.all(region_m2.contains(pts))
    vf = vi_cache(m2, lam)
    err = max(abs(closed_form_value(p, u1, m2, lam, region_m2, env1) - vf(p)) for p in pts)
    assert err <= 2e-3


@pytest.mark.criterion(3)
def test_value_at_center_half_discount(u1, m2, env1, region_m2, vi_cache):
    p = [0.5, 0.5]
    assert closed_form_value(p, u1, m2, 0.5, region_m2, env1) == pytest.approx(0.82, abs=2e-3)
    assert vi_cache(m2, 0.5)(p) == pytest.approx(0.82, abs=2e-3)


# ---------------------------------------------------------------- criterion 4

PROBES = lambda pi: [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.5, 0.5]), pi]


@pytest.mark.criterion(4)
def test_long_run_constancy_m2(m2, vi_cache):
    vf = vi_cache(m2, 0.999)
    vals = np.array([vf(p) for p in PROBES(m2.stationary)])
    assert np.ptp(vals) <= 1e-2
    assert np.abs(vals - TARGET_M2).max() <= 1e-2


@pytest.mark.criterion(4)
def test_long_run_gap_m1(m1, vi_cache):
    vf = vi_cache(m1, 0.999)
    vals = np.array([vf(p) for p in PROBES(m1.stationary)])
    assert np.ptp(vals) <= 1e-2
    assert vals.max() <= 0.82 - 0.01


# ---------------------------------------------------------------- criterion 5

@pytest.mark.criterion(5)
def test_two_sided_bounds(u1, m2, env1, region_m2, grid2):
    rng = np.random.default_rng(5)
    umax = u1.max_abs
    for _ in range(20):
        p = grid2.nodes[rng.integers(len(grid2))]
        lam = float(rng.uniform(0.05, 0.99))
        b = sandwich_bounds(p, u1, m2, lam, region_m2, env1)
        v = value_iteration(u1, m2, lam)(p)
        assert b.lower - 1e-6 <= v <= b.upper + 1e-6, (p, lam, b, v)
        assert b.upper - b.lower <= 1.5 * (1 - lam**b.N) * umax


# ---------------------------------------------------------------- criterion 6

@pytest.fixture(scope="module")
def chain_m2(m2):
    return confined_chain_construction([[0.0, 1.0], [0.5, 0.5]], m2)


@pytest.fixture(scope="module")
def ergodic_m2(chain_m2, u1):
    return ergodic_check(chain_m2, u1, steps=100_000, seeds=range(30), lambdas=(0.99, 0.999))


@pytest.mark.criterion(6)
def test_confined_chain_construction(chain_m2, m2):
    assert np.abs(chain_m2.W - [[2 / 3, 1 / 3], [1 / 3, 2 / 3]]).max() <= 1e-9
    assert np.abs(chain_m2.nu - [0.5, 0.5]).max() <= 1e-9
    assert np.abs(chain_m2.nu @ chain_m2.Q - m2.stationary).max() <= 1e-9


@pytest.mark.criterion(6)
def test_cesaro_every_seed(ergodic_m2):
    assert ergodic_m2.target == pytest.approx(TARGET_M2, abs=1e-12)
    assert ergodic_m2.max_cesaro_deviation() <= 0.01


@pytest.mark.criterion(6)
def test_abel_every_seed(ergodic_m2):
    # Literal per-seed reading. The discounted sum at lam = 0.999 of a single
    # path has standard deviation ~0.016 here, so this is expected to fail.
    _, max_dev = ergodic_m2.abel_deviation(0.999)
    print(f"per-seed Abel(0.999) max deviation: {max_dev:.4f}")
    assert max_dev <= 0.015


@pytest.mark.criterion(6)
def test_abel_seed_mean(ergodic_m2):
    # the discounted payoff is an expectation; the seed mean estimates it
    mean_dev, max_dev = ergodic_m2.abel_deviation(0.999)
    print(f"Abel(0.999) seed-mean deviation {mean_dev:.4f}, per-seed max {max_dev:.4f}")
    assert mean_dev <= 0.015


# ---------------------------------------------------------------- criterion 7

@pytest.mark.criterion(7)
def test_martingale_law_confined(chain_m2, m2, u1):
    strat = ConfinedStrategy(chain_m2.certificate, m2)
    tr = simulate(m2.stationary, strat, m2, u1, 10_001, seed=7)
    prev, nxt = tr.posteriors[:-1], tr.posteriors[1:]
    for q in chain_m2.Q:
        sel = np.all(np.abs(prev - q) <= 1e-12, axis=1)
        assert sel.sum() > 100
        X = nxt[sel]
        se = X.std(axis=0, ddof=1) / np.sqrt(sel.sum())
        assert np.all(np.abs(X.mean(axis=0) - q @ m2.entries) <= 3 * se + 1e-12)


@pytest.mark.criterion(7)
def test_martingale_law_greedy(m1, u1):
    tr = simulate(m1.stationary, GreedyStatic(u1), m1, u1, 10_001, seed=7)
    R = martingale_residuals([tr])
    se = R.std(axis=0, ddof=1) / np.sqrt(len(R))
    assert np.all(np.abs(R.mean(axis=0)) <= 3 * se)


@pytest.mark.criterion(7)
@pytest.mark.parametrize("which", ["m1", "m2"])
def test_jensen_cap(which, m1, m2, env1, vi_cache):
    M = m1 if which == "m1" else m2
    cap = env1(M.stationary)
    for lam in (0.0, 0.3, 0.5, 0.9, 0.99, 0.999):
        assert vi_cache(M, lam)(M.stationary) <= cap + 1e-6


@pytest.mark.criterion(7)
@pytest.mark.parametrize("which", ["m1", "m2"])
def test_finite_horizon_subadditive_and_dyadic_monotone(which, m1, m2, u1):
    M = m1 if which == "m1" else m2
    vs = finite_horizon_value(u1, M, 1024)
    v = np.array([f(M.stationary) for f in vs])
    n = np.arange(1, 1025)
    T = n * v
    # T[N + L] <= T[N] + T[L] for all N + L <= 1024
    N, L = np.meshgrid(n, n, indexing="ij")
    ok = N + L <= 1024
    lhs = T[(N + L - 1)[ok]]
    rhs = T[N[ok] - 1] + T[L[ok] - 1]
    assert np.all(lhs <= rhs + 1e-9)
    dyadic = v[[2**j - 1 for j in range(11)]]
    assert np.all(np.diff(dyadic) <= 1e-9)


@pytest.mark.criterion(7)
def test_decomposition_identity():
    rng = np.random.default_rng(28)
    for lam in (0.5, 0.9, 0.99):
        n = int(np.ceil(np.log(1e-14) / np.log(lam))) + 1
        for _ in range(20):
            a = rng.uniform(-1, 1, n)
            A = cesaro_averages(a)
            assert abs(abel_average(a, lam) - abel_from_cesaro(A, lam)) <= 1e-10


def _ball_vertices(pi, r):
    k = pi.size
    out = []
    for i in range(k):
        for j in range(k):
            if i != j:
                v = pi.copy()
                v[i] += r / 2
                v[j] -= r / 2
                out.append(v)
    return np.array(out)


def _random_chain(rng, k):
    while True:
        M = rng.dirichlet(np.ones(k), size=k)
        if M.min() > 0.02:
            return M


@pytest.mark.criterion(7)
def test_absorbing_union_closure_and_stationary_in_hull():
    from markov_persuasion import TransitionMatrix
    from markov_persuasion.simplex import hull_contains

    rng = np.random.default_rng(200)
    certified = 0
    for trial in range(200):
        k = 2 if trial % 2 else 3
        M = TransitionMatrix(_random_chain(rng, k))
        pi = M.stationary
        sets = []
        for _ in range(2):
            r = rng.uniform(0.0, 1.0) * pi.min()
            A = np.vstack([_ball_vertices(pi, r), rng.dirichlet(np.ones(k), size=rng.integers(1, 6))])
            B = A[maximal_absorbing_subset(A, M)]
            assert B.size, "ball vertices around pi are absorbing for a contracting chain"
            sets.append(B)
        for B in sets:
            cert = is_absorbing(B, M)
            assert cert and cert.residual(M) <= 1e-8
            assert hull_contains(pi[None, :], B, 1e-8)[0]
        union = np.unique(np.vstack(sets), axis=0)
        assert is_absorbing(union, M)
        certified += 1
    assert certified == 200


@pytest.mark.criterion(7)
def test_maximal_absorbing_subset_matches_exhaustive():
    from markov_persuasion import TransitionMatrix

    rng = np.random.default_rng(12)
    nonempty = 0
    for trial in range(100):
        k = 2 if trial % 2 else 3
        M = TransitionMatrix(_random_chain(rng, k))
        pi = M.stationary
        size = int(rng.integers(1, 13))
        pool = [rng.dirichlet(np.ones(k)) for _ in range(size)]
        if trial % 3 == 0:
            ball = _ball_vertices(pi, rng.uniform(0.05, 1.0) * pi.min())
            pool[: min(size, len(ball))] = ball[: min(size, len(ball))]
        A = np.array(pool)
        got = sorted(maximal_absorbing_subset(A, M).tolist())
        want = oracles.exhaustive_maximal_absorbing(A, M.entries)
        assert got == want, (trial, got, want)
        nonempty += bool(want)
    assert nonempty >= 10


@pytest.mark.criterion(7)
def test_homothety_implies_maximal_long_run_value(m2, grid2):
    assert homothety_test(m2).is_homothety
    rng = np.random.default_rng(6)
    x = grid2.nodes[:, 0]
    for _ in range(5):
        c = rng.normal(size=4)
        f = rng.uniform(1, 6, size=4)
        vals = sum(ci * np.sin(fi * np.pi * x + fi) for ci, fi in zip(c, f))
        u = UtilityFunction(grid2, vals)
        env = cav(u)
        assert build_region_D(u, m2, env=env).maximal
        est = estimate_v_infinity(u, m2, lambdas=(0.9,))
        assert abs(est.value - env(m2.stationary)) <= 1e-2
