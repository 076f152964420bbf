import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from candsel.geometry import CandidateSet, Instance
from candsel.mechanisms import (LOCATION, MEDIAN, RANDOM_DICTATOR, RANKING, SPIKE, VOTING,
                                BorderFraction, Claim1Ranking, Claim4Location)
from candsel.reductions import (ConsistentMap, ReducedMechanism, check_reduction, claim2_map,
                                coarsen_action, default_map, favorite_of,
                                find_reduction_conflicts, lift, perturbation_size,
                                project_location_to_ranking, project_location_to_voting_2cand,
                                ranking_of, vote_to_ranking)


@st.composite
def line_instances(draw, max_m=4, max_n=5):
    m = draw(st.integers(1, max_m))
    ys = sorted(draw(st.lists(st.integers(-10, 10), min_size=m, max_size=m, unique=True)))
    xs = draw(st.lists(st.integers(-24, 24).map(lambda k: k / 2), min_size=1, max_size=max_n))
    return Instance.on_line([float(y) for y in ys], xs)


def test_extraction_helpers():
    cands = CandidateSet.on_line((0, 10, 20))
    assert favorite_of(5.0, cands) == 0
    assert ranking_of(12.0, cands) == (1, 2, 0)
    assert vote_to_ranking(2, cands) == (2, 1, 0)
    assert coarsen_action((2, 1, 0), RANKING, VOTING, cands) == 2
    assert coarsen_action(16.0, LOCATION, RANKING, cands) == (2, 1, 0)
    with pytest.raises(ValueError):
        coarsen_action(1, VOTING, RANKING, cands)


def test_lift_examples():
    cands = CandidateSet.on_line((-1, 1))
    assert lift(MEDIAN, RANKING).choose([(0, 1), (1, 0)], cands) == 0
    assert lift(SPIKE, LOCATION).lottery([-1.0, 1e-3], cands) == pytest.approx([0.5, 0.5])
    three = CandidateSet.on_line((0, 1, 2))
    assert lift(RANDOM_DICTATOR, RANKING).lottery(
        [(2, 1, 0), (0, 1, 2), (2, 0, 1)], three) == pytest.approx([1 / 3, 0, 2 / 3])
    with pytest.raises(ValueError):
        lift(lift(MEDIAN, LOCATION), RANKING)


@given(line_instances())
def test_lift_round_trips(inst):
    for M in (MEDIAN, SPIKE, RANDOM_DICTATOR):
        for kind in (RANKING, LOCATION):
            assert check_reduction(lift(M, kind), M, [inst]).passed


@given(line_instances())
def test_zone_projection_agrees(inst):
    for M in (lift(MEDIAN, LOCATION), lift(SPIKE, LOCATION)):
        R = project_location_to_ranking(M)
        assert check_reduction(M, R, [inst], claim2_map(M)).passed


def test_zone_projection_reference_example():
    M = lift(MEDIAN, LOCATION)
    inst = Instance.on_line((0, 10, 20), (2, 12))
    R = project_location_to_ranking(M)
    rankings = [ranking_of(x, inst.candidates) for x in inst.agents]
    assert R.choose(rankings, inst.candidates) == M.choose(inst.agents, inst.candidates)


def test_zone_projection_small_cases():
    M = lift(MEDIAN, LOCATION)
    one = CandidateSet.on_line((3,))
    assert project_location_to_ranking(M).lottery([(0,), (0,)], one) == pytest.approx([1.0])
    three = CandidateSet.on_line((0, 2, 5))
    R = project_location_to_ranking(M)
    assert R.lottery([(1, 2, 0)] * 3, three) == pytest.approx(M.lottery([3.0] * 3, three))


def test_perturbation_size_positive():
    assert 0 < perturbation_size(CandidateSet.on_line((0, 2, 5))) <= 0.25


def test_default_maps():
    cands = CandidateSet.on_line((0, 10, 20))
    assert default_map(VOTING, RANKING)((1, 2), cands) == [(1.0, ((1, 0, 2), (2, 1, 0)))]
    assert default_map(RANKING, VOTING)(((1, 0, 2),), cands) == [(1.0, (1,))]
    with pytest.raises(ValueError):
        default_map(VOTING, LOCATION)


def test_check_reduction_detects_mismatch():
    inst = Instance.on_line((0, 10, 20), (0, 20, 20))
    rep = check_reduction(lift(MEDIAN, RANKING), RANDOM_DICTATOR, [inst])
    assert not rep.passed


def test_reduced_mechanism_mixture():
    cands = CandidateSet.on_line((0, 10))
    cmap = ConsistentMap(VOTING, VOTING, lambda prof, c: [(0.25, (0, 0)), (0.75, (1, 1))], "mix")
    R = ReducedMechanism(MEDIAN, cmap)
    assert R.lottery((0, 1), cands) == pytest.approx([0.25, 0.75])
    with pytest.raises(ValueError):
        ReducedMechanism(MEDIAN, ConsistentMap(VOTING, RANKING, lambda p, c: p))


def test_border_mixing_reference_q():
    cands = CandidateSet.on_line((-1, 1))
    proj = project_location_to_voting_2cand(BorderFraction(0.5), cands)
    assert proj.border_probabilities(1, 1, 1) == pytest.approx((0.5, 2 / 3, 1 / 3))
    assert proj.mixing_q(1, 1, 1) == pytest.approx(0.5)


def test_border_mixing_degenerate_cases():
    cands = CandidateSet.on_line((-1, 1))
    proj = project_location_to_voting_2cand(BorderFraction(0.5), cands)
    assert proj.mechanism.lottery((0, 0, 0), cands) == pytest.approx([1.0, 0.0])
    assert proj.mechanism.lottery((0, 1), cands) == pytest.approx([0.5, 0.5])
    with pytest.raises(ValueError):
        project_location_to_voting_2cand(BorderFraction(0.5), CandidateSet.on_line((0, 1, 2)))


@pytest.mark.parametrize("w", [0.0, 0.3, 0.5, 1.0])
def test_border_mixing_monotone_and_reduces(w):
    cands = CandidateSet.on_line((-1, 1))
    M = BorderFraction(w)
    proj = project_location_to_voting_2cand(M, cands)
    for n in range(1, 8):
        for n1 in range(n + 1):
            for n2 in range(n - n1 + 1):
                p1, p2, p3 = proj.border_probabilities(n1, n2, n - n1 - n2)
                assert p3 - 1e-9 <= p1 <= p2 + 1e-9
                q = proj.mixing_q(n1, n2, n - n1 - n2)
                assert -1e-9 <= q <= 1 + 1e-9
    insts = [Instance(cands, xs) for xs in itertools.product((-1.0, -0.5, 0.0, 0.5, 1.0), repeat=3)]
    assert check_reduction(M, proj.mechanism, insts, proj.consistent_map).passed


def test_ranking_counterexample_conflict_witness():
    cands = CandidateSet.on_line((0, 2, 5))
    pi1, pi2, pi3 = (0, 1, 2), (1, 0, 2), (1, 2, 0)
    conflicts = find_reduction_conflicts(Claim1Ranking(), VOTING, [(pi1, pi2), (pi1, pi3)], cands)
    assert len(conflicts) == 1
    c = conflicts[0]
    assert c.image == (0, 1)
    assert np.argmax(c.first_lottery) == 0 and np.argmax(c.second_lottery) == 2


def test_location_counterexample_conflict_witness():
    cands = CandidateSet.on_line((0, 3, 4))
    conflicts = find_reduction_conflicts(Claim4Location(), RANKING, [(0.75,), (1.25,)], cands)
    assert len(conflicts) == 1
    assert conflicts[0].first_lottery != conflicts[0].second_lottery


def test_zone_map_needs_deterministic():
    with pytest.raises(ValueError):
        claim2_map(Claim4Location())((1.5,), CandidateSet.on_line((0, 3, 4)))
