import math
from fractions import Fraction

import numpy as np
import pytest

import oracles
from candsel.adversary import (SearchConfig, gap_instance, minimize_on_grid,
                               nonstrategic_pair_bound, nonstrategic_pair_ratios,
                               random_explicit_instance, ratio_search, rd_claimed_ratio,
                               rd_exact_ratio, rd_worst_instance, regular_simplex,
                               replay_ratio, simplex_audit, triangle_audit, triangle_candidates)
from candsel.evaluation import approximation_ratio
from candsel.geometry import distance
from candsel.mechanisms import MEDIAN, RANDOM_DICTATOR, RANKING, SPIKE, UniformLottery
from candsel.truthfulness import make_fixed_mechanism


def test_gap_instance_ratios():
    eps = 1e-3
    x, xp = gap_instance(eps)
    assert approximation_ratio(SPIKE, x).ratio == pytest.approx(2 / (1 + eps), abs=1e-12)
    assert approximation_ratio(SPIKE, xp).ratio == pytest.approx(2 / (1 + eps), abs=1e-12)
    assert approximation_ratio(MEDIAN, xp).ratio == pytest.approx((3 - eps) / (1 + eps), abs=1e-12)
    with pytest.raises(ValueError):
        gap_instance(1.0)


@pytest.mark.parametrize("n,eps", [(2, 0.5), (4, 0.01), (100, 1e-3), (7, 0.25)])
def test_rd_ratio_matches_exact_oracle(n, eps):
    inst = rd_worst_instance(n, eps)
    r = approximation_ratio(RANDOM_DICTATOR, inst).ratio
    exact = float(oracles.rd_ratio_on_worst_instance(n, Fraction(eps)))
    assert r == pytest.approx(exact, abs=1e-12)
    assert rd_exact_ratio(n, eps) == pytest.approx(exact, abs=1e-12)


def test_rd_claimed_formula_values():
    assert rd_claimed_ratio(4, 0.01) == pytest.approx((3 - 0.5 + 0.005 + 0.01) / 1.01)
    assert rd_claimed_ratio(2, 0.5) == pytest.approx(2.0)
    assert rd_exact_ratio(10**6, 1e-9) == pytest.approx(3, abs=1e-5)


def test_regular_simplex_unit_edges():
    for d in (1, 2, 3, 5):
        V = regular_simplex(d)
        assert V.shape == (d + 1, d)
        dists = [np.linalg.norm(V[i] - V[j]) for i in range(d + 1) for j in range(i)]
        assert np.allclose(dists, 1.0)
        assert np.allclose(V.mean(axis=0), 0.0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_simplex_audit_random_dictator(d):
    rep = simplex_audit(RANDOM_DICTATOR, d)
    assert rep.achieved == pytest.approx(3 - 2 / (d + 1), abs=1e-12)
    assert rep.extra["p_last_initial"] == pytest.approx(rep.extra["p_last_final"], abs=1e-9)
    assert rep.direct_ratio == pytest.approx(rep.achieved, abs=1e-9)


def test_simplex_audit_relabels_top_candidate():
    def favour_first(votes, cands):
        lot = np.full(cands.m, 0.5 / (cands.m - 1))
        lot[0] = 0.5
        return lot
    M = make_fixed_mechanism(favour_first, "voting", "favour-first", randomized=True)
    rep = simplex_audit(M, 2)
    assert rep.extra["relabel"][2] == 0
    assert rep.achieved == pytest.approx(2 * 2 * 0.5 + 1)


def test_triangle_geometry():
    c = triangle_candidates()
    y = c.locations
    for i in range(3):
        for j in range(i):
            assert distance(c.metric, y[i], y[j]) == pytest.approx(2.0)


def test_triangle_audit_uniform():
    rep = triangle_audit(UniformLottery(RANKING))
    assert rep.achieved == pytest.approx(7 / 3, abs=1e-12)
    assert rep.chain == pytest.approx([1 / 3] * 3)
    # mass off the two named candidates only adds cost on the witness
    assert rep.direct_ratio >= rep.achieved - 1e-9


def test_triangle_audit_point_mass_on_second():
    M = make_fixed_mechanism(lambda r, c: np.array([0.0, 1.0, 0.0]), RANKING, "second")
    rep = triangle_audit(M)
    # the top candidate is relabelled, so the extracted probability is 1
    assert rep.achieved == pytest.approx(5.0)


@pytest.mark.parametrize("p,expected", [(0.0, 3 - 0.01), (1.0, 3 - 0.01), (0.5, 2.0)])
def test_nonstrategic_formula_values(p, expected):
    assert nonstrategic_pair_bound(p, 0.01) == pytest.approx(expected, abs=1e-12)


def test_nonstrategic_exact_ratios():
    eps = 0.01
    a, b = nonstrategic_pair_ratios(0.5, eps)
    assert a == pytest.approx(2 / (1 + eps)) and b == pytest.approx(2 / (1 + eps))
    p, v = minimize_on_grid(lambda p: max(nonstrategic_pair_ratios(p, eps)))
    assert p == 0.5 and v == pytest.approx(2 / (1 + eps), abs=1e-12)
    with pytest.raises(ValueError):
        nonstrategic_pair_bound(1.5, eps)


def test_minimize_on_grid():
    p, v = minimize_on_grid(lambda p: (p - 0.3) ** 2, 0.1)
    assert p == pytest.approx(0.3) and v == pytest.approx(0.0, abs=1e-15)


def test_random_explicit_metric_is_valid():
    rng = np.random.default_rng(3)
    cfg = SearchConfig(metric="explicit", n_range=(1, 8), m_range=(2, 8))
    for _ in range(50):
        inst = random_explicit_instance(rng, cfg)
        D = inst.metric.matrix
        k = len(D)
        assert 2 <= k <= 8
        for a in range(k):
            for b in range(k):
                for c in range(k):
                    assert D[a][c] <= D[a][b] + D[b][c] + 1e-12


def test_ratio_search_is_reproducible_and_bounded():
    cfg = SearchConfig(count=300, n_range=(1, 8), m_range=(1, 4), seed=5, chunk_size=100)
    a = ratio_search(SPIKE, cfg)
    b = ratio_search(SPIKE, SearchConfig(count=300, n_range=(1, 8), m_range=(1, 4), seed=5,
                                         chunk_size=100, workers=2))
    assert a.achieved == b.achieved and a.extra == b.extra
    assert 1 <= a.achieved <= 2 + 1e-9
    assert replay_ratio(SPIKE, a.witness, a.witness_profile) == pytest.approx(a.achieved)


def test_median_search_with_gap_probe():
    cfg = SearchConfig(count=200, n_range=(1, 8), m_range=(1, 4), gap_eps=(1e-3,))
    rep = ratio_search(MEDIAN, cfg)
    assert 2.9 <= rep.achieved <= 3 + 1e-9


def test_rd_explicit_search():
    cfg = SearchConfig(count=300, metric="explicit", n_range=(1, 8), m_range=(2, 8))
    rep = ratio_search(RANDOM_DICTATOR, cfg)
    assert rep.achieved <= 3 + 1e-9


def test_empty_search_skipped():
    rep = ratio_search(SPIKE, SearchConfig(count=0))
    assert rep.extra == {"skipped": True} and math.isnan(rep.achieved)


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(count=-1)
    with pytest.raises(ValueError):
        SearchConfig(metric="sphere")
    with pytest.raises(ValueError):
        SearchConfig(n_range=(0, 3))
