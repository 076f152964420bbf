from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from candsel.geometry import CandidateSet
from candsel.mechanisms import (MEDIAN, RANDOM_DICTATOR, SPIKE, WPV, BorderFraction,
                                Claim1Ranking, Claim4Location, Claim5Voting, Percentile,
                                UniformLottery, check_lottery, claim5_components,
                                get_mechanism, median_weights, spike_cdf, spike_weights,
                                uniform_weights)


@st.composite
def vote_profiles(draw, max_m=6, max_n=16):
    m = draw(st.integers(1, max_m))
    ys = sorted(draw(st.lists(st.integers(-30, 30), min_size=m, max_size=m, unique=True)))
    votes = draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=max_n))
    return CandidateSet.on_line([float(y) for y in ys]), votes


def test_spike_cdf_reference_values():
    assert spike_cdf(0, 10) == 0
    assert spike_cdf(5, 10) == 0.5
    assert spike_cdf(10, 10) == 1
    assert spike_cdf(2, 4) == 0.5
    assert spike_cdf(3, 4) == pytest.approx(1.5 - 4 / 6)
    with pytest.raises(ValueError):
        spike_cdf(5, 4)


def test_spike_reference_lottery():
    # n=10 with cumulative counts 2, 4, 7, 10 on four candidates
    cands = CandidateSet.on_line((4, 14, 22, 30))
    votes = [0, 0, 1, 1, 2, 2, 2, 3, 3, 3]
    lot = SPIKE.lottery(votes, cands)
    assert lot == pytest.approx([1 / 8, 5 / 24, 19 / 42, 3 / 14], abs=1e-15)
    assert [Fraction(p).limit_denominator(100) for p in lot] == oracles.spike_lottery(votes, 4)


def test_spike_two_candidate_split():
    cands = CandidateSet.on_line((-1, 1))
    assert SPIKE.lottery([0, 1], cands) == pytest.approx([0.5, 0.5])
    assert SPIKE.lottery([0, 0, 0, 1], cands) == pytest.approx([1 - 1 / 6, 1 / 6])


@given(st.integers(1, 1000))
def test_spike_cdf_monotone_and_symmetric(n):
    F = [spike_cdf(t, n) for t in range(n + 1)]
    assert F[0] == 0 and F[-1] == pytest.approx(1, abs=1e-12)
    assert all(b >= a - 1e-15 for a, b in zip(F, F[1:]))
    for t in range(n + 1):
        assert F[t] + F[n - t] == pytest.approx(1, abs=1e-12)


@given(vote_profiles())
def test_spike_matches_exact_oracle(prof):
    cands, votes = prof
    lot = SPIKE.lottery(votes, cands)
    exact = oracles.spike_lottery(votes, cands.m)
    assert lot == pytest.approx([float(p) for p in exact], abs=1e-12)


@given(vote_profiles())
def test_spike_equals_its_wpv_weights(prof):
    cands, votes = prof
    assert WPV(spike_weights).lottery(votes, cands) == pytest.approx(
        SPIKE.lottery(votes, cands), abs=1e-12)


@given(vote_profiles(), st.integers(0, 10**6))
def test_wpv_matches_sorting_oracle(prof, seed):
    cands, votes = prof
    w = np.random.default_rng(seed).dirichlet(np.ones(len(votes)))
    lot = WPV(w).lottery(votes, cands)
    exact = oracles.wpv_lottery([Fraction(x) for x in w], votes, cands.locations)
    assert lot == pytest.approx([float(p) for p in exact], abs=1e-12)


@given(vote_profiles())
def test_fast_lottery_agrees(prof):
    cands, votes = prof
    for M in (SPIKE, RANDOM_DICTATOR, WPV(uniform_weights), MEDIAN):
        assert list(M.fast_lottery(votes, cands)) == pytest.approx(
            list(M.lottery(votes, cands)), abs=1e-12)


@given(vote_profiles())
def test_lotteries_are_distributions(prof):
    cands, votes = prof
    for M in (SPIKE, MEDIAN, RANDOM_DICTATOR, Percentile(0)):
        lot = M.lottery(votes, cands)
        assert np.all(lot >= 0) and lot.sum() == pytest.approx(1, abs=1e-12)


@given(vote_profiles())
def test_median_matches_oracle(prof):
    cands, votes = prof
    j = MEDIAN.choose(votes, cands)
    assert j == oracles.median_choice(votes, cands.locations)
    assert MEDIAN.lottery(votes, cands)[j] == 1.0


@given(vote_profiles())
def test_wpv_is_anonymous(prof):
    cands, votes = prof
    rev = list(reversed(votes))
    assert SPIKE.lottery(rev, cands) == pytest.approx(SPIKE.lottery(votes, cands))


def test_random_dictator_is_vote_share():
    cands = CandidateSet.on_line((0, 1, 2))
    assert RANDOM_DICTATOR.lottery([0, 2, 2, 2], cands) == pytest.approx([0.25, 0, 0.75])


def test_percentile_extremes():
    cands = CandidateSet.on_line((0, 1, 2))
    assert Percentile(0).choose([2, 1, 2], cands) == 1
    assert Percentile(2).choose([2, 1, 0], cands) == 2
    with pytest.raises(ValueError):
        Percentile(3).choose([0, 1, 2], cands)


def test_median_weights_pick_lower_median():
    assert list(median_weights(4)) == [0, 1, 0, 0]
    assert list(median_weights(5)) == [0, 0, 1, 0, 0]


def test_wpv_rejects_bad_inputs():
    cands = CandidateSet.on_line((0, 1))
    with pytest.raises(ValueError):
        WPV([0.5, 0.6]).lottery([0, 1], cands)
    with pytest.raises(ValueError):
        WPV([0.5, 0.5]).lottery([0, 1, 1], cands)
    with pytest.raises(ValueError):
        SPIKE.lottery([0, 2], cands)
    with pytest.raises(ValueError):
        SPIKE.lottery([], cands)


def test_check_lottery():
    check_lottery([0.5, 0.5], 2)
    with pytest.raises(ValueError):
        check_lottery([0.5, 0.6], 2)
    with pytest.raises(ValueError):
        check_lottery([-0.1, 1.1], 2)
    with pytest.raises(ValueError):
        check_lottery([1.0], 2)


def test_claim1_ranking():
    cands = CandidateSet.on_line((0, 2, 5))
    M = Claim1Ranking()
    assert M.choose([(0, 1, 2), (1, 0, 2)], cands) == 0
    assert M.choose([(0, 1, 2), (1, 2, 0)], cands) == 2
    with pytest.raises(ValueError):
        M.choose([(0, 1, 2)], cands)


def test_claim4_location():
    cands = CandidateSet.on_line((0, 3, 4))
    M = Claim4Location()
    assert M.lottery([0.75], cands) == pytest.approx([1 / 3] * 3)
    assert M.lottery([1.25], cands) == pytest.approx([0.25, 0.5, 0.25])
    assert M.lottery([0.0, 2.0], cands) == pytest.approx([7 / 24, 10 / 24, 7 / 24])
    with pytest.raises(ValueError):
        M.lottery([0.0], CandidateSet.on_line((0, 1, 2)))


def test_claim5_mixture_matches_components():
    cands = CandidateSet.on_line((-1, 1))
    votes = [0, 1, 1]
    mix = sum(p * M.lottery(votes, cands) for p, M in claim5_components(3))
    assert mix == pytest.approx(Claim5Voting().lottery(votes, cands))
    assert Claim5Voting().lottery(votes, cands) == pytest.approx([0.9 / 3 + 0.2 / 3, 1.8 / 3 + 0.1 / 3])


def test_border_fraction():
    cands = CandidateSet.on_line((-1, 1))
    assert BorderFraction(0.25).lottery([-0.5, 0.0, 0.5, 0.7], cands) == pytest.approx([0.3125, 0.6875])


def test_uniform_lottery():
    cands = CandidateSet.on_line((0, 1, 2))
    assert UniformLottery().lottery([(0, 1, 2)], cands) == pytest.approx([1 / 3] * 3)
    with pytest.raises(ValueError):
        UniformLottery("bogus")


@pytest.mark.parametrize("name,cls_name", [
    ("spike", "Spike"), ("median", "Median"), ("random-dictator", "RandomDictator"),
    ("percentile:2", "Percentile"), ("wpv:0.5,0.5", "WPV"), ("claim1", "Claim1Ranking"),
    ("claim4", "Claim4Location"), ("claim5", "Claim5Voting"),
    ("border-fraction:0.5", "BorderFraction"), ("uniform:ranking", "UniformLottery"),
])
def test_registry(name, cls_name):
    assert type(get_mechanism(name)).__name__ == cls_name


@pytest.mark.parametrize("bad", ["nope", "percentile:x", "wpv:", "uniform:bogus"])
def test_registry_rejects(bad):
    with pytest.raises(KeyError):
        get_mechanism(bad)


def test_randomized_flags():
    assert SPIKE.randomized and RANDOM_DICTATOR.randomized
    assert not MEDIAN.randomized and not Percentile(1).randomized
    assert not WPV([0, 1, 0]).randomized
