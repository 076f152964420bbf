"""Metric spaces, candidate sets, instances and the zone structure they induce.

Candidates are addressed by 0-based index everywhere in this package; on the
line, index order is location order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np

LINE = "line"
EUCLIDEAN = "euclidean"
EXPLICIT = "explicit"

TIE_RTOL = 1e-9
TRIANGLE_TOL = 1e-9


def is_tie(d1: float, d2: float) -> bool:
    """Two distances count as equal iff they agree up to a relative 1e-9."""
    return abs(d1 - d2) <= TIE_RTOL * max(1.0, d1 + d2)


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """The universe agents and candidates live in.

    Points are normalised per kind: a float on the line, a tuple of ``dim``
    floats in Euclidean space, and an integer index for explicit metrics.
    """

    kind: str
    dim: int = 1
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == LINE:
            object.__setattr__(self, "dim", 1)
        elif self.kind == EUCLIDEAN:
            if int(self.dim) < 1:
                raise ValueError(f"Euclidean dimension must be >= 1, got {self.dim}")
            object.__setattr__(self, "dim", int(self.dim))
        elif self.kind == EXPLICIT:
            D = np.asarray(self.matrix, dtype=float)
            _validate_distance_matrix(D)
            D.setflags(write=False)
            object.__setattr__(self, "matrix", D)
            object.__setattr__(self, "dim", 0)
        else:
            raise ValueError(f"unknown metric kind {self.kind!r}")

    @classmethod
    def line(cls) -> "MetricSpace":
        return _LINE

    @classmethod
    def euclidean(cls, dim: int) -> "MetricSpace":
        return cls(EUCLIDEAN, dim)

    @classmethod
    def explicit(cls, matrix) -> "MetricSpace":
        return cls(EXPLICIT, matrix=matrix)

    @property
    def is_line(self) -> bool:
        return self.kind == LINE

    def point(self, p) -> Any:
        """Validate ``p`` and return its normalised form."""
        if self.kind == LINE:
            if isinstance(p, (list, tuple, np.ndarray)):
                if len(p) != 1:
                    raise ValueError(f"line point must have 1 coordinate, got {len(p)}")
                p = p[0]
            x = float(p)
            if not math.isfinite(x):
                raise ValueError(f"non-finite coordinate {p!r}")
            return x
        if self.kind == EUCLIDEAN:
            coords = tuple(float(c) for c in np.atleast_1d(p))
            if len(coords) != self.dim:
                raise ValueError(
                    f"point has {len(coords)} coordinates, metric has dimension {self.dim}"
                )
            if not all(math.isfinite(c) for c in coords):
                raise ValueError(f"non-finite coordinate in {p!r}")
            return coords
        if isinstance(p, (list, tuple, np.ndarray)):
            if len(p) != 1:
                raise ValueError("explicit metric points are single indices")
            p = p[0]
        if float(p) != int(p):
            raise ValueError(f"explicit metric point must be an integer index, got {p!r}")
        idx = int(p)
        if not 0 <= idx < self.matrix.shape[0]:
            raise ValueError(f"unknown point index {idx} (metric has {self.matrix.shape[0]} points)")
        return idx

    def distance(self, p, q) -> float:
        """Distance between two normalised points."""
        if self.kind == LINE:
            return abs(p - q)
        if self.kind == EUCLIDEAN:
            return math.dist(p, q)
        return float(self.matrix[p, q])

    def to_dict(self) -> dict:
        if self.kind == EUCLIDEAN:
            return {"kind": EUCLIDEAN, "dim": self.dim}
        if self.kind == EXPLICIT:
            return {"kind": EXPLICIT, "matrix": self.matrix.tolist()}
        return {"kind": LINE}


def _validate_distance_matrix(D: np.ndarray) -> None:
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
        raise ValueError("explicit metric needs a non-empty square matrix")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix has non-finite entries")
    if np.any(D < 0):
        raise ValueError("distances must be nonnegative")
    if np.any(np.abs(np.diag(D)) > 0):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(np.abs(D - D.T) > TRIANGLE_TOL):
        raise ValueError("distance matrix must be symmetric")
    # D[i, k] <= D[i, j] + D[j, k] for all i, j, k
    slack = D[:, :, None] + D[None, :, :] - D[:, None, :]
    if np.any(slack < -TRIANGLE_TOL):
        i, j, k = np.argwhere(slack < -TRIANGLE_TOL)[0]
        raise ValueError(f"triangle inequality violated at ({i}, {j}, {k})")


_LINE = MetricSpace(LINE)


def distance(metric: MetricSpace, p, q) -> float:
    """Distance between two raw points of ``metric`` (validated first)."""
    return metric.distance(metric.point(p), metric.point(q))


@dataclass(frozen=True, eq=False)
class CandidateSet:
    metric: MetricSpace
    locations: tuple

    def __post_init__(self):
        locs = tuple(self.metric.point(y) for y in self.locations)
        if not locs:
            raise ValueError("need at least one candidate")
        if self.metric.is_line:
            for a, b in zip(locs, locs[1:]):
                if not a < b:
                    raise ValueError(
                        "candidates on the line must be strictly increasing "
                        f"(got {a} before {b})"
                    )
        object.__setattr__(self, "locations", locs)

    @classmethod
    def on_line(cls, ys: Iterable[float]) -> "CandidateSet":
        return cls(_LINE, tuple(ys))

    @property
    def m(self) -> int:
        return len(self.locations)

    def __len__(self):
        return len(self.locations)

    def __getitem__(self, j):
        return self.locations[j]

    def distances_from(self, x) -> list[float]:
        d = self.metric.distance
        return [d(x, y) for y in self.locations]

    @cached_property
    def voting_borders(self) -> tuple[float, ...]:
        return voting_borders(self)


@dataclass(frozen=True, eq=False)
class Instance:
    """A candidate set plus the true locations of the agents."""

    candidates: CandidateSet
    agents: tuple

    def __post_init__(self):
        xs = tuple(self.candidates.metric.point(x) for x in self.agents)
        if not xs:
            raise ValueError("need at least one agent")
        object.__setattr__(self, "agents", xs)

    @classmethod
    def on_line(cls, ys: Iterable[float], xs: Iterable[float]) -> "Instance":
        return cls(CandidateSet.on_line(ys), tuple(xs))

    @property
    def metric(self) -> MetricSpace:
        return self.candidates.metric

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return self.candidates.m

    def with_agents(self, xs) -> "Instance":
        return Instance(self.candidates, tuple(xs))

    @cached_property
    def agent_distances(self) -> tuple[tuple[float, ...], ...]:
        """``agent_distances[i][j]`` is the distance from agent i to candidate j."""
        return tuple(tuple(self.candidates.distances_from(x)) for x in self.agents)

    @cached_property
    def candidate_costs(self) -> tuple[float, ...]:
        return tuple(math.fsum(col) for col in zip(*self.agent_distances))

    @cached_property
    def favorite_sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(_argmin_ties(d) for d in self.agent_distances)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.to_dict(),
            "candidates": [_point_json(y) for y in self.candidates.locations],
            "agents": [_point_json(x) for x in self.agents],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        spec = data.get("metric", {"kind": LINE})
        kind = spec.get("kind", LINE)
        if kind == LINE:
            metric = _LINE
        elif kind == EUCLIDEAN:
            if "dim" not in spec:
                raise ValueError("euclidean metric needs 'dim'")
            metric = MetricSpace.euclidean(spec["dim"])
        elif kind == EXPLICIT:
            if "matrix" not in spec:
                raise ValueError("explicit metric needs 'matrix'")
            metric = MetricSpace.explicit(spec["matrix"])
        else:
            raise ValueError(f"unknown metric kind {kind!r}")
        try:
            ys, xs = data["candidates"], data["agents"]
        except KeyError as exc:
            raise ValueError(f"instance is missing {exc.args[0]!r}") from None
        return cls(CandidateSet(metric, tuple(ys)), tuple(xs))


def _point_json(p):
    if isinstance(p, tuple):
        return list(p)
    return [p]


def _argmin_ties(dists: Sequence[float]) -> tuple[int, ...]:
    dmin = min(dists)
    # is_tie inlined: this runs once per agent in every evaluation
    return tuple(j for j, d in enumerate(dists) if d - dmin <= TIE_RTOL * max(1.0, d + dmin))


def voting_borders(candidates: CandidateSet) -> tuple[float, ...]:
    """Midpoints between consecutive candidates on the line (empty if m < 2)."""
    if not candidates.metric.is_line:
        raise ValueError("voting borders are only defined on the line")
    ys = candidates.locations
    return tuple((a + b) / 2 for a, b in zip(ys, ys[1:]))


def favorite_candidates(x, inst: Instance) -> frozenset[int]:
    x = inst.metric.point(x)
    return frozenset(_argmin_ties(inst.candidates.distances_from(x)))


def true_rankings(x, inst: Instance) -> list[tuple[int, ...]]:
    """Every ranking that sorts the candidates by nondecreasing distance from ``x``.

    Rankings list candidate indices, most preferred first.
    """
    x = inst.metric.point(x)
    return _rankings_from_distances(inst.candidates.distances_from(x))


def _rankings_from_distances(dists: Sequence[float]) -> list[tuple[int, ...]]:
    order = sorted(range(len(dists)), key=lambda j: (dists[j], j))
    classes: list[list[int]] = []
    for j in order:
        if classes and is_tie(dists[j], dists[classes[-1][0]]):
            classes[-1].append(j)
        else:
            classes.append([j])
    out = [
        tuple(itertools.chain.from_iterable(parts))
        for parts in itertools.product(*(itertools.permutations(c) for c in classes))
    ]
    return sorted(out)


def on_voting_border(x, inst: Instance) -> bool:
    return len(favorite_candidates(x, inst)) >= 2


@dataclass(frozen=True)
class Zone:
    lo: float
    hi: float
    ranking: tuple[int, ...]
    representative: float


@dataclass(frozen=True)
class ZonePartition:
    voting_borders: tuple[float, ...]
    ranking_borders: tuple[float, ...]
    zones: tuple[Zone, ...] = field(default=())

    def zone_of_ranking(self, ranking) -> Zone | None:
        ranking = tuple(ranking)
        for z in self.zones:
            if z.ranking == ranking:
                return z
        return None

    def zone_of_point(self, x: float) -> Zone | None:
        """The open zone containing ``x``; None when ``x`` sits on a ranking border."""
        for b in self.ranking_borders:
            if _same_border(x, b):
                return None
        for z in self.zones:
            if z.lo < x < z.hi:
                return z
        return None


def _same_border(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * max(1.0, abs(a) + abs(b))


def ranking_borders_line(candidates: CandidateSet) -> tuple[float, ...]:
    """Distinct pairwise midpoints b_{i,j}, sorted."""
    if not candidates.metric.is_line:
        raise ValueError("ranking zones are computed on the line only")
    ys = candidates.locations
    mids = sorted((a + b) / 2 for a, b in itertools.combinations(ys, 2))
    distinct: list[float] = []
    for b in mids:
        if not distinct or not _same_border(b, distinct[-1]):
            distinct.append(b)
    return tuple(distinct)


def ranking_zones_line(candidates: CandidateSet) -> ZonePartition:
    """Partition of the line into ranking zones, each with one representative.

    Bounded zones use their midpoint; the two unbounded end zones sit one
    unit beyond the outermost border. With a single candidate the whole line
    is one zone represented by the candidate itself.
    """
    borders = ranking_borders_line(candidates)
    vb = voting_borders(candidates)
    if not borders:
        y = candidates.locations[0]
        return ZonePartition(vb, borders, (Zone(-math.inf, math.inf, (0,), y),))
    edges = (-math.inf,) + borders + (math.inf,)
    zones = []
    for lo, hi in zip(edges, edges[1:]):
        if lo == -math.inf:
            rep = hi - 1.0
        elif hi == math.inf:
            rep = lo + 1.0
        else:
            rep = (lo + hi) / 2
        ranks = _rankings_from_distances(candidates.distances_from(rep))
        if len(ranks) != 1:  # pragma: no cover - representatives avoid borders
            raise RuntimeError(f"zone representative {rep} lies on a border")
        zones.append(Zone(lo, hi, ranks[0], rep))
    return ZonePartition(vb, borders, tuple(zones))
