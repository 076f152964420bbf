"""Maps between action kinds and the mechanisms they induce.

A consistent map sends an action profile of one kind to a distribution over
profiles of another kind. Reducing ``M`` through such a map yields a mechanism
that accepts the map's source kind and returns ``M``'s mixed lottery.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .evaluation import truthful_action_profiles
from .geometry import CandidateSet, Instance, is_tie, ranking_zones_line
from .mechanisms import (GRANULARITY, LOCATION, RANKING, VOTING, Mechanism,
                         check_ranking)
from .truthfulness import AuditReport, Violation

REDUCTION_TOL = 1e-9

# A profile map returns either one target profile or a list of (probability, profile).
ProfileMap = Callable[[tuple, CandidateSet], object]


def _as_mixture(mapped) -> list[tuple[float, tuple]]:
    if isinstance(mapped, list):
        return mapped
    return [(1.0, tuple(mapped))]


def favorite_of(x, candidates: CandidateSet) -> int:
    """Lowest-index favorite candidate of a location."""
    d = candidates.distances_from(x)
    best = min(d)
    return next(j for j, dj in enumerate(d) if is_tie(dj, best))


def ranking_of(x, candidates: CandidateSet) -> tuple[int, ...]:
    """Distance order from ``x`` with ties broken by candidate index."""
    d = candidates.distances_from(x)
    return tuple(sorted(range(len(d)), key=lambda j: (d[j], j)))


def vote_to_ranking(v: int, candidates: CandidateSet) -> tuple[int, ...]:
    """Canonical ranking for a vote: the voted candidate, then the rest by distance from it."""
    return ranking_of(candidates.locations[v], candidates)


def coarsen_action(a, source: str, target: str, candidates: CandidateSet):
    """Drop the information a coarser action kind cannot carry."""
    if source == target:
        return a
    if source == RANKING and target == VOTING:
        return a[0]
    if source == LOCATION:
        x = candidates.metric.point(a)
        return favorite_of(x, candidates) if target == VOTING else ranking_of(x, candidates)
    raise ValueError(f"{target} is not coarser than {source}")


def coarsen_profile(profile, source: str, target: str, candidates: CandidateSet) -> tuple:
    return tuple(coarsen_action(a, source, target, candidates) for a in profile)


class LiftedMechanism(Mechanism):
    """Accepts a finer action kind and forwards the coarser part to ``inner``."""

    def __init__(self, inner: Mechanism, to_kind: str):
        if to_kind not in GRANULARITY:
            raise ValueError(f"unknown action kind {to_kind!r}")
        if GRANULARITY[to_kind] <= GRANULARITY[inner.input_kind]:
            raise ValueError(f"cannot lift a {inner.input_kind} mechanism to {to_kind}")
        self.inner = inner
        self.input_kind = to_kind
        self.randomized = inner.randomized
        self.anonymous = inner.anonymous
        self.name = f"lift({inner.name}, {to_kind})"

    def extract(self, actions, candidates) -> tuple:
        if self.input_kind == RANKING:
            actions = [check_ranking(r, candidates.m) for r in actions]
        return coarsen_profile(actions, self.input_kind, self.inner.input_kind, candidates)

    def lottery(self, actions, candidates):
        return self.inner.lottery(self.extract(actions, candidates), candidates)

    def choose(self, actions, candidates):
        return self.inner.choose(self.extract(actions, candidates), candidates)


def lift(M: Mechanism, to_kind: str) -> LiftedMechanism:
    return LiftedMechanism(M, to_kind)


@dataclass
class ConsistentMap:
    source: str
    target: str
    profile_map: ProfileMap
    name: str = "map"

    def __call__(self, profile, candidates):
        return _as_mixture(self.profile_map(tuple(profile), candidates))


class ReducedMechanism(Mechanism):
    """``inner`` evaluated on the image of the submitted profile under ``cmap``."""

    def __init__(self, inner: Mechanism, cmap: ConsistentMap, name: str | None = None):
        if cmap.target != inner.input_kind:
            raise ValueError("map target kind must match the inner mechanism")
        self.inner = inner
        self.cmap = cmap
        self.input_kind = cmap.source
        self.randomized = inner.randomized
        self.name = name or f"reduce({inner.name} via {cmap.name})"

    def lottery(self, actions, candidates):
        total = np.zeros(candidates.m)
        for p, prof in self.cmap(actions, candidates):
            if p:
                total += p * self.inner.lottery(prof, candidates)
        return total


# ---------------------------------------------------------------------------
# location -> ranking for deterministic mechanisms


class ZoneProjection(Mechanism):
    """Ranking mechanism that places each agent at its ranking zone's
    representative and runs a location mechanism there."""

    input_kind = RANKING

    def __init__(self, inner: Mechanism):
        if inner.input_kind != LOCATION:
            raise ValueError("zone projection takes a location mechanism")
        self.inner = inner
        self.randomized = inner.randomized
        self.anonymous = inner.anonymous
        self.name = f"project({inner.name}, ranking)"
        self._zones: dict[tuple, object] = {}

    def zones(self, candidates: CandidateSet):
        key = candidates.locations
        zp = self._zones.get(key)
        if zp is None:
            zp = ranking_zones_line(candidates)
            self._zones[key] = zp
        return zp

    def representatives(self, rankings, candidates) -> tuple[float, ...]:
        if not candidates.metric.is_line:
            raise ValueError("zone projection needs candidates on the line")
        zp = self.zones(candidates)
        reps = []
        for r in rankings:
            z = zp.zone_of_ranking(check_ranking(r, candidates.m))
            if z is None:
                raise ValueError(f"ranking {tuple(r)} matches no ranking zone")
            reps.append(z.representative)
        return tuple(reps)

    def lottery(self, rankings, candidates):
        return self.inner.lottery(self.representatives(rankings, candidates), candidates)


def project_location_to_ranking(M: Mechanism) -> ZoneProjection:
    return ZoneProjection(M)


def perturbation_size(candidates: CandidateSet) -> float:
    """A quarter of the smallest gap between distinct ranking borders (or candidates)."""
    pts = sorted(set(ranking_zones_line(candidates).ranking_borders) | set(candidates.locations))
    gaps = [b - a for a, b in zip(pts, pts[1:]) if b > a]
    return min(gaps) / 4 if gaps else 0.5


def claim2_map(M: Mechanism) -> ConsistentMap:
    """Location profile -> ranking profile the zone projection should agree on.

    Border agents are nudged toward the candidate ``M`` elects (deterministic
    ``M``) or toward the vote ``M`` extracts from them (lifted voting
    mechanisms), then each agent reports the ranking of its nudged point.
    """

    def towards(profile, candidates) -> list[float]:
        if isinstance(M, LiftedMechanism) and M.inner.input_kind == VOTING:
            votes = M.extract(profile, candidates)
            return [candidates.locations[v] for v in votes]
        if M.randomized:
            raise ValueError("the zone-projection map needs a deterministic mechanism or a lifted voting rule")
        y = candidates.locations[M.choose(profile, candidates)]
        return [y] * len(profile)

    def fmap(profile, candidates):
        zp = ranking_zones_line(candidates)
        eps = perturbation_size(candidates)
        targets = towards(profile, candidates)
        out = []
        for x, t in zip(profile, targets):
            if zp.zone_of_point(x) is None:
                direction = 1.0 if t >= x else -1.0
                x = x + direction * eps
            out.append(ranking_of(x, candidates))
        return tuple(out)

    return ConsistentMap(LOCATION, RANKING, fmap, name="claim2")


# ---------------------------------------------------------------------------
# two-candidate location -> voting with border mixing


@dataclass
class TwoCandidateProjection:
    """Voting mechanism obtained from a two-candidate location mechanism.

    Vote profiles are evaluated by placing voters on their candidate. Border
    agents of a location profile are sent jointly to C1 with probability ``q``
    and to C2 otherwise, where ``q`` mixes the two border-free profiles so that
    the probability of C1 is reproduced.
    """

    inner: Mechanism
    candidates: CandidateSet

    def __post_init__(self):
        if self.inner.input_kind != LOCATION:
            raise ValueError("expected a location mechanism")
        if self.candidates.m != 2 or not self.candidates.metric.is_line:
            raise ValueError("two-candidate projection needs 2 candidates on the line")
        self.border = self.candidates.voting_borders[0]

    def _p1(self, n1: int, n2: int, n3: int) -> float:
        y1, y2 = self.candidates.locations
        xs = (y1,) * n1 + (self.border,) * n2 + (y2,) * n3
        return float(self.inner.lottery(xs, self.candidates)[0])

    def border_probabilities(self, n1: int, n2: int, n3: int) -> tuple[float, float, float]:
        """P(C1) with n2 agents on the border, all moved to C1, all moved to C2."""
        if min(n1, n2, n3) < 0 or n1 + n2 + n3 < 1:
            raise ValueError("counts must be nonnegative with a positive total")
        return self._p1(n1, n2, n3), self._p1(n1 + n2, 0, n3), self._p1(n1, 0, n2 + n3)

    def mixing_q(self, n1: int, n2: int, n3: int) -> float:
        p1, p2, p3 = self.border_probabilities(n1, n2, n3)
        if abs(p2 - p3) <= REDUCTION_TOL:
            if abs(p1 - p2) > REDUCTION_TOL:
                raise ValueError(
                    f"inconsistent mechanism: border profile gives {p1} but both "
                    f"border-free profiles give {p2}"
                )
            return 0.5
        return (p1 - p3) / (p2 - p3)

    @property
    def mechanism(self) -> Mechanism:
        proj = self

        class _Voting(Mechanism):
            name = f"project({proj.inner.name}, voting)"
            input_kind = VOTING
            randomized = proj.inner.randomized
            anonymous = proj.inner.anonymous

            def lottery(self, votes, candidates):
                locs = candidates.locations
                return proj.inner.lottery(tuple(locs[v] for v in votes), candidates)

        return _Voting()

    def _counts(self, locations) -> tuple[list[int], list[int], list[int]]:
        left, border, right = [], [], []
        for i, x in enumerate(locations):
            d1, d2 = self.candidates.distances_from(x)
            if is_tie(d1, d2):
                border.append(i)
            elif d1 < d2:
                left.append(i)
            else:
                right.append(i)
        return left, border, right

    @property
    def consistent_map(self) -> ConsistentMap:
        def fmap(profile, candidates):
            left, border, right = self._counts(profile)
            votes = [0 if i in left else 1 for i in range(len(profile))]
            if not border:
                return tuple(votes)
            q = self.mixing_q(len(left), len(border), len(right))
            all_c1 = list(votes)
            for i in border:
                all_c1[i] = 0
            return [(q, tuple(all_c1)), (1.0 - q, tuple(votes))]

        return ConsistentMap(LOCATION, VOTING, fmap, name="border-mixing")


def project_location_to_voting_2cand(M: Mechanism, candidates: CandidateSet) -> TwoCandidateProjection:
    return TwoCandidateProjection(M, candidates)


# ---------------------------------------------------------------------------
# checks


def default_map(source: str, target: str) -> ConsistentMap:
    if GRANULARITY[target] < GRANULARITY[source]:
        return ConsistentMap(source, target,
                             lambda prof, c: coarsen_profile(prof, source, target, c),
                             name=f"{source}->{target}")
    if source == target:
        return ConsistentMap(source, target, lambda prof, c: prof, name="identity")
    if source == VOTING and target == RANKING:
        return ConsistentMap(source, target,
                             lambda prof, c: tuple(vote_to_ranking(v, c) for v in prof),
                             name="vote->ranking")
    raise ValueError(f"no canonical map from {source} to {target}")


def check_reduction(M: Mechanism, target: Mechanism, instances: Iterable[Instance],
                    mapping: ConsistentMap | None = None, tol: float = REDUCTION_TOL) -> AuditReport:
    """Compare ``M`` on each truthful profile with ``target`` on the mapped profile."""
    if mapping is None:
        mapping = default_map(M.input_kind, target.input_kind)
    violations = []
    checks = 0
    count = 0
    for inst in instances:
        count += 1
        cands = inst.candidates
        for prof in truthful_action_profiles(inst, M.input_kind):
            mine = M.lottery(prof, cands)
            theirs = np.zeros(inst.m)
            image = mapping(prof, cands)
            for p, q in image:
                if p:
                    theirs += p * target.lottery(q, cands)
            checks += 1
            if np.max(np.abs(mine - theirs)) > tol:
                violations.append(Violation(
                    tuple(range(inst.n)), tuple(prof), tuple(image[0][1]),
                    tuple(float(v) for v in mine), tuple(float(v) for v in theirs), inst))
    return AuditReport(violations, f"{count} instances, map {mapping.name}", checks)


@dataclass
class ReductionConflict:
    """Two profiles with the same coarse image that ``M`` treats differently."""

    first: tuple
    second: tuple
    image: tuple
    first_lottery: tuple
    second_lottery: tuple


def find_reduction_conflicts(M: Mechanism, target_kind: str, profiles: Sequence,
                             candidates: CandidateSet, tol: float = REDUCTION_TOL) -> list[ReductionConflict]:
    """Pairs of profiles that every consistent map to ``target_kind`` identifies
    but on which ``M`` returns different lotteries; any such pair rules out a
    reduction to a ``target_kind`` mechanism."""
    seen: dict[tuple, tuple] = {}
    conflicts = []
    for prof in profiles:
        prof = tuple(prof)
        image = coarsen_profile(prof, M.input_kind, target_kind, candidates)
        lot = tuple(float(v) for v in M.lottery(prof, candidates))
        if image in seen:
            other, other_lot = seen[image]
            if max(abs(a - b) for a, b in zip(lot, other_lot)) > tol:
                conflicts.append(ReductionConflict(other, prof, image, other_lot, lot))
        else:
            seen[image] = (prof, lot)
    return conflicts
