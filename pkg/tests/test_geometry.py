import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from candsel.geometry import (CandidateSet, Instance, MetricSpace, distance,
                              favorite_candidates, is_tie, on_voting_border,
                              ranking_borders_line, ranking_zones_line, true_rankings,
                              voting_borders)

coords = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


@st.composite
def line_candidates(draw, min_m=1, max_m=6):
    ys = draw(st.lists(st.integers(-50, 50), min_size=min_m, max_size=max_m, unique=True))
    return CandidateSet.on_line(sorted(float(y) for y in ys))


def test_line_distance():
    eps = 0.25
    assert distance(MetricSpace.line(), -1, eps) == 1 + eps


def test_distance_identity_and_pythagoras():
    e2 = MetricSpace.euclidean(2)
    assert distance(e2, (1, 2), (1, 2)) == 0
    assert distance(e2, (0, 0), (3, 4)) == 5


def test_distance_errors():
    with pytest.raises(ValueError):
        distance(MetricSpace.euclidean(2), (0, 0), (1, 2, 3))
    D = MetricSpace.explicit([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        distance(D, 0, 5)
    with pytest.raises(ValueError):
        MetricSpace.line().point(math.nan)


def test_explicit_metric_validation():
    MetricSpace.explicit([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    with pytest.raises(ValueError, match="triangle"):
        MetricSpace.explicit([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    with pytest.raises(ValueError, match="symmetric"):
        MetricSpace.explicit([[0, 1], [2, 0]])
    with pytest.raises(ValueError, match="diagonal"):
        MetricSpace.explicit([[1, 1], [1, 0]])
    # violation within tolerance is accepted
    MetricSpace.explicit([[0, 1, 2 + 5e-10], [1, 0, 1], [2 + 5e-10, 1, 0]])


@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=3))
def test_euclidean_metric_axioms(pts):
    e2 = MetricSpace.euclidean(2)
    a, b, c = pts
    assert distance(e2, a, b) == pytest.approx(distance(e2, b, a))
    assert distance(e2, a, c) <= distance(e2, a, b) + distance(e2, b, c) + 1e-9


@pytest.mark.parametrize("ys,expected", [
    ((-1, 1), (0,)),
    ((4, 14, 22, 30), (9, 18, 26)),
    ((0, 10, 20), (5, 15)),
    ((3,), ()),
])
def test_voting_borders(ys, expected):
    assert voting_borders(CandidateSet.on_line(ys)) == pytest.approx(expected)


def test_candidates_must_increase():
    with pytest.raises(ValueError):
        CandidateSet.on_line((0, 0))
    with pytest.raises(ValueError):
        CandidateSet.on_line((1, 0))
    with pytest.raises(ValueError):
        CandidateSet.on_line(())


def test_favorite_candidates():
    inst = Instance.on_line((-1, 1), (0,))
    assert favorite_candidates(0, inst) == {0, 1}
    assert favorite_candidates(0.3, inst) == {1}


def test_favorites_of_triangle_centroid():
    h = math.sqrt(3) / 2
    cands = CandidateSet(MetricSpace.euclidean(2), ((0, 0), (1, 0), (0.5, h)))
    inst = Instance(cands, ((0.5, h / 3),))
    assert favorite_candidates((0.5, h / 3), inst) == {0, 1, 2}


def test_true_rankings():
    inst = Instance.on_line((-1, 0, 1), (0,))
    assert true_rankings(-0.9, inst) == [(0, 1, 2)]
    assert set(true_rankings(0.5, inst)) == {(1, 2, 0), (2, 1, 0)}
    two = Instance.on_line((0, 1), (0,))
    assert true_rankings(0, two) == [(0, 1)]


def test_ranking_zones_three_candidates():
    zp = ranking_zones_line(CandidateSet.on_line((0, 2, 5)))
    assert zp.ranking_borders == (1.0, 2.5, 3.5)
    assert [z.ranking for z in zp.zones] == [(0, 1, 2), (1, 0, 2), (1, 2, 0), (2, 1, 0)]
    assert [z.representative for z in zp.zones] == [0.0, 1.75, 3.0, 4.5]


def test_ranking_zones_small_cases():
    two = ranking_zones_line(CandidateSet.on_line((0, 4)))
    assert len(two.zones) == 2 and two.ranking_borders == (2.0,)
    one = ranking_zones_line(CandidateSet.on_line((7,)))
    assert len(one.zones) == 1 and one.zones[0].representative == 7.0


def test_equal_spacing_merges_ranking_borders():
    # b_{1,3} coincides with y_2 and b_{1,4} with b_{2,3}
    zp = ranking_zones_line(CandidateSet.on_line((0, 1, 2, 3)))
    assert zp.ranking_borders == (0.5, 1.0, 1.5, 2.0, 2.5)


@given(line_candidates(min_m=2), coords)
def test_unique_favorite_off_borders(cands, x):
    inst = Instance(cands, (x,))
    if not any(is_tie(abs(x - b), 0) for b in cands.voting_borders):
        assert len(favorite_candidates(x, inst)) == 1


@given(line_candidates(), coords)
def test_favorites_top_every_true_ranking(cands, x):
    inst = Instance(cands, (x,))
    favs = favorite_candidates(x, inst)
    ranks = true_rankings(x, inst)
    assert {r[0] for r in ranks} == set(favs)
    assert (len(ranks) > 1) == (len(ranks) != 1)


@given(line_candidates(min_m=2))
def test_voting_borders_are_ranking_borders(cands):
    rb = ranking_borders_line(cands)
    for b in cands.voting_borders:
        assert any(abs(b - r) <= 1e-9 for r in rb)


@given(line_candidates())
def test_zones_tile_the_line(cands):
    zp = ranking_zones_line(cands)
    zones = zp.zones
    assert zones[0].lo == -math.inf and zones[-1].hi == math.inf
    for a, b in zip(zones, zones[1:]):
        assert a.hi == b.lo
    for z in zones:
        assert z.lo < z.representative < z.hi
        assert true_rankings(z.representative, Instance(cands, (0,))) == [z.ranking]
        assert zp.zone_of_point(z.representative) is z
    assert len({z.ranking for z in zones}) == len(zones)


def test_instance_json_round_trip():
    data = {"metric": {"kind": "explicit", "matrix": [[0, 1], [1, 0]]},
            "candidates": [[0], [1]], "agents": [[1], [1], [0]]}
    inst = Instance.from_dict(data)
    assert inst.n == 3 and inst.m == 2
    again = Instance.from_dict(inst.to_dict())
    assert again.agents == inst.agents and again.candidate_costs == inst.candidate_costs
    e = Instance.from_dict({"metric": {"kind": "euclidean", "dim": 2},
                            "candidates": [[0, 0], [3, 4]], "agents": [[0, 0]]})
    assert e.candidate_costs == (0.0, 5.0)
    with pytest.raises(ValueError):
        Instance.from_dict({"metric": {"kind": "euclidean"}, "candidates": [[0]], "agents": [[0]]})


def test_on_voting_border():
    inst = Instance.on_line((0, 10), (5,))
    assert on_voting_border(5, inst)
    assert not on_voting_border(5.1, inst)
    assert on_voting_border(5 + 1e-12, inst)


def test_is_tie_relative():
    assert is_tie(1e6, 1e6 + 1e-4)
    assert not is_tie(1.0, 1.0 + 1e-6)
    assert np.isclose(0.0, 0.0)
