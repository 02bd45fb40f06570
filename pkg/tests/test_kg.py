import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from kgband.belief import AttributeBelief, BeliefState, FeatureMatrix, prior_from_attributes, update_full
from kgband.kg import (
    KgScores,
    LineSet,
    PolicyConfig,
    dominant_lines,
    kg_factor_all,
    kg_factor_all_attribute,
    kg_h,
    kgcb_step,
    select_offline,
    select_online,
    subset_reduce,
    subset_reduce_attribute,
)

PHI0 = 1.0 / np.sqrt(2.0 * np.pi)


def quad_oracle(p, q):
    """E[max_i(p_i + q_i Z)] - max p by adaptive quadrature, split at every pairwise crossing."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    cuts = []
    for i, j in itertools.combinations(range(len(p)), 2):
        if q[i] != q[j]:
            cuts.append((p[i] - p[j]) / (q[j] - q[i]))
    cuts = sorted(c for c in cuts if -12 < c < 12)
    edges = [-12.0] + cuts + [12.0]

    def g(z):
        return (np.max(p + q * z) - p.max()) * stats.norm.pdf(z)

    return sum(integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:]) if b > a)


def envelope_oracle(p, q):
    """Lines that are the unique maximizer at some probe point between crossings (after collapsing duplicates)."""
    pts = set()
    for i, j in itertools.combinations(range(len(p)), 2):
        if q[i] != q[j]:
            pts.add((p[i] - p[j]) / (q[j] - q[i]))
    pts = sorted(pts)
    probes = [-1e6, 1e6]
    probes += [0.5 * (a + b) for a, b in zip(pts[:-1], pts[1:])]
    if pts:
        probes += [pts[0] - 1.0, pts[-1] + 1.0]
    winners = set()
    for z in probes:
        vals = p + q * z
        best = np.flatnonzero(vals == vals.max())
        # duplicates of the same line count as one
        keys = {(p[i], q[i]) for i in best}
        if len(keys) == 1:
            winners.add(keys.pop())
    return winners


class TestDominantLines:
    def test_two_crossing(self):
        d = dominant_lines(LineSet([0, 0], [0, 1]))
        np.testing.assert_array_equal(d.kept, [0, 1])
        np.testing.assert_array_equal(d.breakpoints, [0])

    def test_middle_dominated(self):
        d = dominant_lines(LineSet([0, 0, 0], [1, 2, 3]))
        np.testing.assert_array_equal(d.kept, [0, 2])
        np.testing.assert_array_equal(d.breakpoints, [0])

    def test_parallel(self):
        d = dominant_lines(LineSet([5, 0], [1, 1]))
        np.testing.assert_array_equal(d.kept, [0])
        assert d.breakpoints.size == 0
        assert d.lines.tolist() == [0]

    def test_single_line(self):
        d = dominant_lines(LineSet([2.0], [0.3]))
        assert d.kept.tolist() == [0] and d.breakpoints.size == 0

    def test_duplicates_collapse(self):
        d = dominant_lines(LineSet([1, 1, 0], [2, 2, 0]))
        assert len(d.kept) == 2

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 9))
    def test_matches_probe_oracle(self, seed, m):
        rng = np.random.default_rng(seed)
        # small integer grid makes ties and coincident crossings common
        p = rng.integers(-3, 4, size=m).astype(float)
        q = rng.integers(-3, 4, size=m).astype(float)
        d = dominant_lines(LineSet(p, q))
        got = {(p[i], q[i]) for i in d.lines}
        assert got == envelope_oracle(p, q)
        assert np.all(np.diff(d.breakpoints) > 0)
        assert np.all(np.diff(q[d.lines]) > 0)


class TestKgH:
    def test_two_lines(self):
        assert kg_h(LineSet([0, 0], [0, 1])) == pytest.approx(PHI0, abs=1e-15)

    def test_identical(self):
        assert kg_h(LineSet([1, 1], [1, 1])) == 0.0

    def test_three_lines(self):
        assert kg_h(LineSet([0, 0, 0], [1, 2, 3])) == pytest.approx(2 * PHI0, abs=1e-15)

    def test_three_lines_monte_carlo(self):
        z = np.random.default_rng(0).standard_normal(10_000_000)
        g = np.maximum(np.maximum(z, 2 * z), 3 * z)
        se = g.std() / np.sqrt(z.size)
        assert kg_h(LineSet([0, 0, 0], [1, 2, 3])) == pytest.approx(g.mean(), abs=4 * se)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 7))
    def test_matches_quadrature(self, seed, m):
        rng = np.random.default_rng(seed)
        p = rng.normal(size=m)
        q = rng.normal(size=m)
        assert kg_h(LineSet(p, q)) == pytest.approx(quad_oracle(p, q), abs=1e-9)

    def test_far_apart_lines_underflow_gracefully(self):
        v = kg_h(LineSet([0.0, -60.0], [0.0, 1.0]))
        assert 0.0 <= v < 1e-300

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12),
        st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12),
    )
    def test_nonnegative(self, p, q):
        n = min(len(p), len(q))
        assert kg_h(LineSet(p[:n], q[:n])) >= 0.0


class TestKgFactors:
    def test_identity_prior(self):
        v = kg_factor_all(BeliefState([0, 0], np.eye(2), [1, 1])).v
        np.testing.assert_allclose(v, [PHI0 / np.sqrt(2)] * 2, atol=1e-12)
        assert v[0] == pytest.approx(0.28210, abs=1e-5)

    def test_nothing_to_learn(self):
        np.testing.assert_array_equal(kg_factor_all(BeliefState([0, 1, 2], np.zeros((3, 3)), 1.0)).v, 0)

    def test_label_permutation(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=(6, 6))
        b = BeliefState(rng.normal(size=6), a @ a.T, rng.uniform(0.5, 2, 6))
        perm = rng.permutation(6)
        bp = BeliefState(b.mu[perm], b.sigma[np.ix_(perm, perm)], b.lam[perm])
        np.testing.assert_allclose(kg_factor_all(bp).v, kg_factor_all(b).v[perm], atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_attribute_path_matches_full(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 51))
        l = int(rng.integers(1, 8))
        x = np.column_stack([np.ones(m), rng.normal(size=(m, l - 1))])
        a = rng.normal(size=(l, l))
        ab = AttributeBelief(rng.normal(size=l), a @ a.T)
        lam = rng.uniform(0.1, 10, m)
        fm = FeatureMatrix(x)
        np.testing.assert_allclose(
            kg_factor_all_attribute(ab, fm, lam).v,
            kg_factor_all(prior_from_attributes(ab, fm, lam)).v,
            atol=1e-8,
            rtol=0,
        )

    def test_attribute_zero_c(self):
        fm = FeatureMatrix(np.column_stack([np.ones(5), np.arange(5.0)]))
        v = kg_factor_all_attribute(AttributeBelief([1.0, 2.0], np.zeros((2, 2))), fm, 1.0).v
        np.testing.assert_array_equal(v, 0)

    def test_intercept_only_model(self):
        fm = FeatureMatrix(np.ones((4, 1)))
        v = kg_factor_all_attribute(AttributeBelief([0.0], [[1.0]]), fm, 1.0).v
        # every sigma_tilde column is the same constant vector: all lines parallel
        np.testing.assert_array_equal(v, 0)
        assert select_offline(KgScores(v)) == 0


class TestSelect:
    def test_offline(self):
        assert select_offline(KgScores([0.1, 0.3, 0.2])) == 1
        assert select_offline(KgScores([0.2, 0.2])) == 0
        assert select_offline(KgScores([0.0, 0.0, 0.0])) == 0

    def test_online_hand(self):
        assert select_online([1.0, 0.0], KgScores([0.0, 0.6]), 0, 2) == 1

    def test_online_horizon_end(self):
        assert select_online([0.0, 3.0, 1.0], KgScores([5.0, 0.0, 9.0]), 4, 4) == 1

    def test_online_no_kg(self):
        for n in range(5):
            assert select_online([0.0, 3.0, 1.0], KgScores([0.0, 0.0, 0.0]), n, 5) == 1

    def test_online_range(self):
        with pytest.raises(ValueError):
            select_online([0.0], KgScores([0.0]), 6, 5)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=20), st.sampled_from([1e-9, 1.0]))
    def test_monotone_transform(self, v, delta):
        v = np.array(v)
        w = np.log(v + delta)
        # log may merge near-ties; otherwise the choice must not move
        if np.sum(w == w.max()) == np.sum(v == v.max()):
            assert select_offline(KgScores(v)) == select_offline(w)


class TestSubset:
    def test_full_size(self):
        b = BeliefState(np.zeros(5), np.eye(5), 1.0)
        np.testing.assert_array_equal(subset_reduce(b, 5, 10, 0), np.arange(5))

    def test_certain_winner(self):
        b = BeliefState([10.0, 0.0, 0.0], 1e-12 * np.eye(3), 1.0)
        for seed in range(5):
            assert 0 in subset_reduce(b, 1, 100, seed)

    def test_sorted_and_deterministic(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(20, 20))
        b = BeliefState(rng.normal(size=20), a @ a.T, 1.0)
        s1 = subset_reduce(b, 6, 500, 42)
        s2 = subset_reduce(b, 6, 500, 42)
        np.testing.assert_array_equal(s1, s2)
        assert np.all(np.diff(s1) > 0) and s1.size == 6

    def test_symmetric_frequency(self):
        b = BeliefState(np.zeros(4), np.eye(4), 1.0)
        hits = np.zeros(4)
        for seed in range(200):
            hits[subset_reduce(b, 2, 100_000, seed)] += 1
        np.testing.assert_allclose(hits / 200, 0.5, atol=0.05)

    def test_rank_deficient_covariance(self):
        x = np.column_stack([np.ones(30), np.linspace(-1, 1, 30)])
        b = prior_from_attributes(AttributeBelief([0.0, 1.0], np.eye(2)), FeatureMatrix(x))
        s = subset_reduce(b, 3, 2000, 0)
        # the slope is positive in expectation, so the right end dominates
        assert 29 in s

    def test_attribute_draws_agree_with_full(self):
        rng = np.random.default_rng(4)
        x = np.column_stack([np.ones(40), rng.normal(size=(40, 3))])
        ab = AttributeBelief(rng.normal(size=4), np.eye(4))
        fm = FeatureMatrix(x)
        full = prior_from_attributes(ab, fm)
        a = subset_reduce_attribute(ab, fm, 8, 20000, 1)
        b = subset_reduce(full, 8, 20000, 2)
        # same distribution, different draws: the shortlists should mostly coincide
        assert len(set(a) & set(b)) >= 6

    def test_bad_k(self):
        with pytest.raises(ValueError):
            subset_reduce(BeliefState([0.0], [[1.0]], 1.0), 2, 10, 0)


class TestKgcbStep:
    def test_subset_equal_to_m_matches_full(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(15, 15))
        b = BeliefState(rng.normal(size=15), a @ a.T, 1.0)
        x1, s1 = kgcb_step(b, PolicyConfig(), 0)
        x2, s2 = kgcb_step(b, PolicyConfig(subset_k=15), 0)
        assert x1 == x2
        np.testing.assert_array_equal(s1.v, s2.v)

    def test_choice_inside_subset(self):
        rng = np.random.default_rng(3)
        m, l = 1000, 7
        x = np.column_stack([np.ones(m), rng.normal(size=(m, l - 1))])
        fm = FeatureMatrix(x)
        ab = AttributeBelief(rng.normal(size=l), np.eye(l))
        b = prior_from_attributes(ab, fm, 1.0)
        pol = PolicyConfig(subset_k=100, seed=5)
        chosen, scores = kgcb_step(b, pol, 0)
        assert len(scores) == 100
        assert chosen in subset_reduce(b, 100, pol.mc_samples, [5, 0, 0])
        chosen_a, _ = kgcb_step(ab, pol, 0, features=fm, lam=1.0)
        assert chosen_a in subset_reduce_attribute(ab, fm, 100, pol.mc_samples, [5, 0, 0])

    def test_online_mode(self):
        b = BeliefState([1.0, 0.0], np.diag([1e-6, 4.0]), 1.0)
        x_off, _ = kgcb_step(b, PolicyConfig(mode="offline", budget_n=10), 0)
        x_on_end, _ = kgcb_step(b, PolicyConfig(mode="online", budget_n=10), 10)
        assert x_off == 1
        assert x_on_end == 0

    def test_brute_force_kg_oracle(self):
        # KG of x estimated by sampling y from the predictive law and redoing the update by hand
        rng = np.random.default_rng(12)
        checked = 0
        for _ in range(20):
            a = rng.normal(size=(3, 3))
            sigma = a @ a.T
            mu = rng.normal(scale=0.5, size=3)
            lam = rng.uniform(0.2, 2.0, size=3)
            est, se = [], []
            for x in range(3):
                s = sigma[x, x] + lam[x]
                y = mu[x] + np.sqrt(s) * rng.standard_normal(1_000_000)
                post = mu[None, :] + np.outer((y - mu[x]) / s, sigma[:, x])
                gain = post.max(axis=1) - mu.max()
                est.append(gain.mean())
                se.append(gain.std() / 1000.0)
            order = np.argsort(est)[::-1]
            if est[order[0]] - est[order[1]] < 5 * (se[order[0]] + se[order[1]]):
                continue
            chosen, _ = kgcb_step(BeliefState(mu, sigma, lam), PolicyConfig(), 0)
            assert chosen == order[0]
            checked += 1
        assert checked >= 10

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=(60, 60))
        b = BeliefState(rng.normal(size=60), a @ a.T, 1.0)
        pol = PolicyConfig(subset_k=10, seed=3, mc_samples=300)
        seq1 = [kgcb_step(b, pol, n)[0] for n in range(5)]
        seq2 = [kgcb_step(b, pol, n)[0] for n in range(5)]
        assert seq1 == seq2

    def test_subset_too_large(self):
        with pytest.raises(ValueError):
            kgcb_step(BeliefState([0.0, 1.0], np.eye(2), 1.0), PolicyConfig(subset_k=3), 0)


def test_dominated_line_insensitivity():
    rng = np.random.default_rng(77)
    for _ in range(300):
        m = int(rng.integers(2, 8))
        p = rng.normal(size=m)
        q = rng.normal(size=m)
        base = kg_h(LineSet(p, q))
        qj = rng.uniform(q.min(), q.max())
        # lowest gap between envelope and the new slope, found at pairwise crossings
        zs = [(p[i] - p[j]) / (q[j] - q[i]) for i, j in itertools.combinations(range(m), 2) if q[i] != q[j]]
        gap = min(np.max(p + q * z) - qj * z for z in zs) if zs else (p.max())
        pj = gap - rng.choice([0.0, rng.exponential()])
        assert kg_h(LineSet(np.append(p, pj), np.append(q, qj))) == pytest.approx(base, abs=1e-12)


def test_positive_homogeneity():
    rng = np.random.default_rng(78)
    for _ in range(300):
        q = rng.normal(size=int(rng.integers(1, 10)))
        c = rng.uniform(0.01, 100)
        p = np.zeros_like(q)
        assert kg_h(LineSet(p, c * q)) == pytest.approx(c * kg_h(LineSet(p, q)), abs=1e-10)


def test_update_then_kg_consistency():
    # measuring the KG winner and observing its mean leaves mu unchanged and shrinks every KG factor
    b = BeliefState([0.0, 0.2, -0.1], [[1.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 1.0]], 0.5)
    x, s = kgcb_step(b, PolicyConfig(), 0)
    b2 = update_full(b, x, b.mu[x])
    s2 = kg_factor_all(b2)
    assert s2.v[x] < s.v[x]
