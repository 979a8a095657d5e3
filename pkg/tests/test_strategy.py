import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from markov_persuasion import (SimplexGrid, confined_chain_construction, ergodic_check, example1_utility,
                               is_absorbing)
from markov_persuasion.errors import InputError
from markov_persuasion.markov import homothety_matrix, mixing_time
from markov_persuasion.simplex import Split
from markov_persuasion.strategy import (Babbling, BlockStrategy, ConfinedStrategy, FullRevelation,
                                        GreedyStatic, make_rng, map_seeds, sample_chain,
                                        signal_rule_from_split, simulate)

from conftest import M1, M2


@pytest.fixture(scope="module")
def small():
    return example1_utility(SimplexGrid(2, 200))


class TestSignalRule:
    def test_example(self):
        s = Split(np.array([[0.0, 1.0], [0.5, 0.5]]), np.array([0.5, 0.5]))
        r = signal_rule_from_split([0.25, 0.75], s)
        np.testing.assert_allclose(r.probs, [[0.0, 1.0], [2 / 3, 1 / 3]], atol=1e-12)
        np.testing.assert_allclose(r.signal_probabilities(), [0.5, 0.5])
        np.testing.assert_allclose(r.posterior(0), [0, 1], atol=1e-12)
        np.testing.assert_allclose(r.posterior(1), [0.5, 0.5], atol=1e-12)

    def test_example_high_state_always_sends_second_signal(self):
        s = Split(np.array([[0.0, 1.0], [0.5, 0.5]]), np.array([0.2, 0.8]))
        r = signal_rule_from_split([0.4, 0.6], s)
        np.testing.assert_allclose(r.probs, [[0.0, 1.0], [1 / 3, 2 / 3]], atol=1e-12)

    def test_trivial_and_full_revelation_rules(self):
        p = np.array([0.3, 0.7])
        np.testing.assert_allclose(signal_rule_from_split(p, Split.trivial(p)).probs, [[1, 0], [1, 0]])
        np.testing.assert_allclose(signal_rule_from_split(p, FullRevelation().split(p, 0)).probs, np.eye(2))

    def test_zero_prior_state(self):
        r = signal_rule_from_split([0.0, 1.0], Split.trivial(np.array([0.0, 1.0])))
        np.testing.assert_allclose(r.probs, [[1, 0], [1, 0]])

    def test_barycenter_mismatch(self):
        s = Split(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
        with pytest.raises(InputError):
            signal_rule_from_split([0.3, 0.7], s)

    def test_too_many_atoms(self):
        G = np.array([[0, 1], [0.5, 0.5], [1, 0]], float)
        s = Split(G, np.array([0.25, 0.5, 0.25]))
        with pytest.raises(InputError):
            signal_rule_from_split([0.5, 0.5], s)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 4), st.data())
    def test_bayes_round_trip(self, k, data):
        n = data.draw(st.integers(1, k))
        seed = data.draw(st.integers(0, 10**6))
        rng = np.random.default_rng(seed)
        Q = rng.dirichlet(np.ones(k), size=n)
        w = rng.dirichlet(np.ones(n))
        p = w @ Q
        r = signal_rule_from_split(p, Split(Q, w))
        np.testing.assert_allclose(r.probs.sum(axis=1), 1.0)
        np.testing.assert_allclose(r.signal_probabilities()[:n], w, atol=1e-10)
        for i in range(n):
            np.testing.assert_allclose(r.posterior(i), Q[i], atol=1e-9)


class TestStrategies:
    def test_babbling_and_full(self):
        p = np.array([0.3, 0.7])
        assert len(Babbling().split(p, 0)) == 1
        s = FullRevelation().split(p, 0)
        np.testing.assert_allclose(s.posteriors, np.eye(2))
        np.testing.assert_allclose(s.weights, p)

    def test_greedy_attains_envelope(self, u1, env1):
        g = GreedyStatic(u1)
        for p in (0.1, 0.25, 0.45, 0.7):
            q = np.array([p, 1 - p])
            s = g.split(q, 0)
            s.check(q, 1e-9)
            assert s.value(u1) == pytest.approx(env1(q), abs=1e-6)

    def test_confined_uses_certificate_rows(self):
        cert = is_absorbing([[0.0, 1.0], [0.5, 0.5]], M2)
        c = ConfinedStrategy(cert, M2)
        s = c.split_from_posterior([0.0, 1.0])
        np.testing.assert_allclose(s.weights, cert.decompositions[0].weights)
        assert len(c.split(np.array([0.8, 0.2]), 0)) == 1          # outside the hull: no split

    def test_confined_at_stationary_singleton(self):
        pi = np.array([0.25, 0.75])
        c = ConfinedStrategy(is_absorbing([pi], M2), M2)
        s = c.split(pi, 0)
        assert len(s) == 1
        np.testing.assert_allclose(s.posteriors[0], pi)

    def test_confined_requires_certificate(self):
        with pytest.raises(InputError):
            ConfinedStrategy(is_absorbing([[0.0, 1.0], [0.5, 0.5]], M1), M1)


class TestConfinedChain:
    def test_stationary_singleton(self):
        ch = confined_chain_construction([[0.25, 0.75]], M2)
        np.testing.assert_allclose(ch.nu, [1.0])
        assert ch.residual <= 1e-12

    def test_m2_pair(self):
        ch = confined_chain_construction([[0.0, 1.0], [0.5, 0.5]], M2)
        np.testing.assert_allclose(ch.nu, [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(ch.nu @ ch.Q, [0.25, 0.75], atol=1e-12)

    def test_transient_points_dropped(self):
        # both vertices leak into pi, which is the only closed class
        pi = np.array([0.25, 0.75])
        M = homothety_matrix(pi, 0.5)
        C = np.array([[0.0, 1.0], pi, [1.0, 0.0]])
        ch = confined_chain_construction(C, M)
        assert ch.recurrent.tolist() == [1]
        np.testing.assert_allclose(ch.nu, [1.0])
        assert len(ch.classes) == 3

    def test_three_point_transient(self):
        # the third point maps into conv of the first two, which already form a closed class
        C = np.array([[0.0, 1.0], [0.5, 0.5], [0.2, 0.8]])
        ch = confined_chain_construction(C, M2)
        assert ch.recurrent.tolist() == [0, 1]
        # oracle: closed classes by exhaustive reachability on the support graph of W
        reach = (ch.W > 0).astype(int)
        for _ in range(3):
            reach = ((reach + reach @ reach) > 0).astype(int)
        closed = [i for i in range(3) if all(reach[j, i] for j in range(3) if reach[i, j])]
        assert closed == [0, 1]
        np.testing.assert_allclose(ch.nu, [0.5, 0.5], atol=1e-12)

    def test_occupation_matches_nu(self, u1):
        ch = confined_chain_construction([[0.0, 1.0], [0.5, 0.5]], M2)
        rep = ergodic_check(ch, u1, 100_000, range(30))
        assert np.abs(rep.occupation - ch.nu).max() <= 0.01

    def test_not_absorbing(self):
        with pytest.raises(InputError):
            confined_chain_construction([[0.0, 1.0], [0.5, 0.5]], M1)

    def test_sample_chain_occupation(self):
        P = np.array([[2 / 3, 1 / 3], [1 / 3, 2 / 3]])
        xs = sample_chain(P, 0, 200_000, make_rng(0))
        assert xs[0] == 0
        assert abs(xs.mean() - 0.5) < 0.01


class TestSimulate:
    def test_invariants(self, u1):
        tr = simulate([0.25, 0.75], GreedyStatic(u1), M2, u1, 500, seed=3)
        assert len(tr) == 500
        np.testing.assert_allclose(tr.posteriors.sum(axis=1), 1.0)
        np.testing.assert_allclose(tr.priors[1:], tr.posteriors[:-1] @ M2, atol=1e-12)
        np.testing.assert_allclose(tr.payoffs, u1(tr.posteriors))
        # a state with zero posterior weight is never the realised state
        assert np.all(tr.posteriors[np.arange(500), tr.states] > 0)

    def test_babbling_follows_the_chain(self, u1):
        tr = simulate([1.0, 0.0], Babbling(), M1, u1, 30, seed=0)
        q = np.array([1.0, 0.0])
        for n in range(30):
            np.testing.assert_allclose(tr.posteriors[n], q, atol=1e-12)
            q = q @ M1

    def test_full_revelation_posteriors_are_states(self, u1):
        tr = simulate([0.5, 0.5], FullRevelation(), M1, u1, 200, seed=2)
        np.testing.assert_allclose(tr.posteriors, np.eye(2)[tr.states])
        np.testing.assert_allclose(tr.payoffs, u1(np.eye(2))[tr.states])

    def test_confined_posteriors_stay_in_set(self, u1):
        C = np.array([[0.0, 1.0], [0.5, 0.5]])
        strat = ConfinedStrategy(is_absorbing(C, M2), M2)
        tr = simulate([0.25, 0.75], strat, M2, u1, 2000, seed=5)
        d = np.abs(tr.posteriors[:, None, :] - C[None, :, :]).max(axis=2).min(axis=1)
        assert d.max() == 0.0

    def test_bayes_consistency(self, u1):
        tr = simulate([0.3, 0.7], GreedyStatic(u1), M1, u1, 500, seed=9)
        for n in range(500):
            w = tr.priors[n] * tr.rules[n][:, tr.signals[n]]
            np.testing.assert_allclose(w / w.sum(), tr.posteriors[n], atol=1e-9)

    def test_deterministic(self, u1):
        a = simulate([0.5, 0.5], GreedyStatic(u1), M1, u1, 300, seed=11)
        b = simulate([0.5, 0.5], GreedyStatic(u1), M1, u1, 300, seed=11)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.payoffs, b.payoffs)
        c = simulate([0.5, 0.5], GreedyStatic(u1), M1, u1, 300, seed=12)
        assert not np.array_equal(a.states, c.states)

    def test_jensen_at_stationary(self, u1, env1):
        # started at pi, the mean posterior is pi at every stage, so payoffs average below Cav u(pi)
        traces = map_seeds(lambda s: simulate([0.4, 0.6], FullRevelation(), M1, u1, 200, s), range(20))
        means = np.mean([t.posteriors.mean(axis=0) for t in traces], axis=0)
        np.testing.assert_allclose(means, [0.4, 0.6], atol=0.03)
        assert np.mean([t.cesaro() for t in traces]) <= env1([0.4, 0.6]) + 1e-9

    def test_bad_horizon(self, u1):
        with pytest.raises(InputError):
            simulate([0.5, 0.5], Babbling(), M1, u1, 0, seed=0)

    def test_thread_count_does_not_change_results(self, u1, monkeypatch):
        run = lambda: [t.cesaro() for t in map_seeds(
            lambda s: simulate([0.5, 0.5], GreedyStatic(u1), M1, u1, 200, s), range(4))]
        monkeypatch.setenv("MP_THREADS", "1")
        one = run()
        monkeypatch.setenv("MP_THREADS", "3")
        assert run() == one


class TestBlockStrategy:
    def test_large_eps_one_silent_stage(self, small):
        b = BlockStrategy(small, M2, eps=2.0, horizon_cap=16)
        assert b.T == 1 and b.N >= 1
        assert b.cycle == b.N + 1
        assert b.is_silent(b.N) and not b.is_silent(0)

    def test_silent_period_returns_near_stationary(self, small):
        eps = 0.05
        b = BlockStrategy(small, M1, eps=eps, horizon_cap=64)
        assert b.T == mixing_time(M1, eps)
        tr = simulate([1.0, 0.0], b, M1, small, 3 * b.cycle, seed=0)
        starts = np.arange(b.cycle, 3 * b.cycle, b.cycle)
        pi = np.array([0.4, 0.6])
        for s in starts:
            assert np.abs(tr.priors[s] - pi).sum() <= eps + 1e-12

    def test_reduced_scale_average(self, small):
        b = BlockStrategy(small, M2, eps=0.05, horizon_cap=64)
        tr = simulate([0.25, 0.75], b, M2, small, 4000, seed=1)
        assert tr.cesaro() == pytest.approx(0.5125, abs=0.03)

    def test_bad_eps(self, small):
        with pytest.raises(InputError):
            BlockStrategy(small, M1, eps=0.0)
