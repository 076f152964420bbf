"""Tight profiles, border compressions and the three-candidate reduction for spike.

All operations work on the line and keep the index of the optimal candidate
fixed (pass ``opt`` explicitly to pin it; by default it is computed from the
instance at hand).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .evaluation import optimal_candidate, ratio_value
from .geometry import Instance, _same_border
from .mechanisms import Mechanism, spike_cdf


def _require_line(inst: Instance) -> None:
    if not inst.metric.is_line:
        raise ValueError("compression is defined on the line only")


def _opt(inst: Instance, opt: int | None) -> int:
    if opt is None:
        return optimal_candidate(inst)[0]
    if not 0 <= opt < inst.m:
        raise IndexError(f"optimal index {opt} outside [0, {inst.m})")
    return opt


@dataclass(frozen=True)
class GroupedProfile:
    """Agents collapsed into (location, count) groups sorted by location."""

    groups: tuple[tuple[float, int], ...]

    def __post_init__(self):
        locs = [g[0] for g in self.groups]
        if any(c < 1 for _, c in self.groups):
            raise ValueError("group counts must be positive")
        if any(not a < b for a, b in zip(locs, locs[1:])):
            raise ValueError("group locations must be strictly increasing")

    @classmethod
    def from_agents(cls, xs) -> "GroupedProfile":
        merged: list[list] = []
        for x in sorted(xs):
            if merged and _same_border(x, merged[-1][0]):
                merged[-1][1] += 1
            else:
                merged.append([x, 1])
        return cls(tuple((loc, c) for loc, c in merged))

    @property
    def n(self) -> int:
        return sum(c for _, c in self.groups)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(c for _, c in self.groups)

    def agents(self) -> tuple[float, ...]:
        return tuple(loc for loc, c in self.groups for _ in range(c))

    def to_dict(self) -> dict:
        return {"groups": [[loc, c] for loc, c in self.groups]}


def tight_profile(inst: Instance, opt: int | None = None) -> Instance:
    """Move every agent inside its voting zone as close to the optimum as possible.

    Agents on a voting border stay put.
    """
    _require_line(inst)
    opt = _opt(inst, opt)
    ys = inst.candidates.locations
    bs = inst.candidates.voting_borders
    xs = []
    for x, fav in zip(inst.agents, inst.favorite_sets):
        if len(fav) > 1:
            xs.append(x)
            continue
        j = fav[0]
        if j == opt:
            xs.append(ys[opt])
        elif j < opt:
            xs.append(bs[j])
        else:
            xs.append(bs[j - 1])
    return inst.with_agents(xs)


def _border_index(loc: float, borders) -> int | None:
    for k, b in enumerate(borders):
        if _same_border(loc, b):
            return k
    return None


def _check_tight(g: GroupedProfile, inst: Instance, opt: int) -> None:
    y_opt = inst.candidates.locations[opt]
    for loc, _ in g.groups:
        if loc != y_opt and _border_index(loc, inst.candidates.voting_borders) is None:
            raise ValueError(f"profile is not tight: agent at {loc} is neither on a border nor at the optimum")


def _move_group(g: GroupedProfile, src: int, dest: float) -> GroupedProfile:
    loc, count = g.groups[src]
    rest = [list(grp) for k, grp in enumerate(g.groups) if k != src]
    for grp in rest:
        if _same_border(grp[0], dest):
            grp[1] += count
            break
    else:
        rest.append([dest, count])
    rest.sort()
    return GroupedProfile(tuple((a, c) for a, c in rest))


def left_compress(g: GroupedProfile, inst: Instance, opt: int | None = None) -> GroupedProfile:
    """Shift the leftmost border group one border toward the optimum, if that
    border is still left of it. ``inst`` supplies the candidates (and ``opt``
    when not given)."""
    _require_line(inst)
    opt = _opt(inst, opt)
    _check_tight(g, inst, opt)
    if not g.groups:
        return g
    y_opt = inst.candidates.locations[opt]
    bs = inst.candidates.voting_borders
    loc = g.groups[0][0]
    if loc >= y_opt:
        return g
    k = _border_index(loc, bs)
    if k + 1 < len(bs) and bs[k + 1] < y_opt:
        return _move_group(g, 0, bs[k + 1])
    return g


def right_compress(g: GroupedProfile, inst: Instance, opt: int | None = None) -> GroupedProfile:
    """Mirror image of :func:`left_compress`."""
    _require_line(inst)
    opt = _opt(inst, opt)
    _check_tight(g, inst, opt)
    if not g.groups:
        return g
    y_opt = inst.candidates.locations[opt]
    bs = inst.candidates.voting_borders
    loc = g.groups[-1][0]
    if loc <= y_opt:
        return g
    k = _border_index(loc, bs)
    if k - 1 >= 0 and bs[k - 1] > y_opt:
        return _move_group(g, len(g.groups) - 1, bs[k - 1])
    return g


def compression_trace(inst: Instance, opt: int | None = None) -> list[GroupedProfile]:
    """Tight profile followed by alternating left/right compressions until nothing moves."""
    _require_line(inst)
    opt = _opt(inst, opt)
    g = GroupedProfile.from_agents(tight_profile(inst, opt).agents)
    trace = [g]
    moved = True
    while moved:
        moved = False
        for step in (left_compress, right_compress):
            nxt = step(g, inst, opt)
            if nxt != g:
                trace.append(nxt)
                g, moved = nxt, True
    return trace


@dataclass(frozen=True)
class ThreeCandidateReduction:
    """Agent counts at b_L, y_C and b_C after full compression.

    Distances are rescaled so that ``b_C - y_C = 1``; ``beta`` is ``y_C - b_L``.
    """

    L: int
    C: int
    R: int
    beta: float = 1.0

    def __post_init__(self):
        if min(self.L, self.C, self.R) < 0 or self.L + self.C + self.R < 1:
            raise ValueError("counts must be nonnegative with a positive total")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def n(self) -> int:
        return self.L + self.C + self.R

    def costs(self) -> tuple[float, float, float]:
        """Social costs of the left, central and right candidate."""
        L, C, R, b = self.L, self.C, self.R, self.beta
        return (b * (L + 2 * C + 2 * R) + R, L * b + R, L * b + 2 * L + 2 * C + R)

    def spike_lottery(self) -> tuple[float, float, float]:
        """Spike's lottery when every border agent votes outward."""
        n = self.n
        F1 = spike_cdf(self.L, n)
        F2 = spike_cdf(self.L + self.C, n)
        return (F1, F2 - F1, 1.0 - F2)

    def to_instance(self) -> Instance:
        """Line instance realising the reduction: y_C = 0, b_C = 1, b_L = -beta."""
        b = self.beta
        xs = [-b] * self.L + [0.0] * self.C + [1.0] * self.R
        return Instance.on_line((-2 * b, 0.0, 2.0), xs)

    def to_dict(self) -> dict:
        return {"L": self.L, "C": self.C, "R": self.R, "beta": self.beta}


def compress_fully(inst: Instance, opt: int | None = None) -> ThreeCandidateReduction:
    _require_line(inst)
    opt = _opt(inst, opt)
    final = compression_trace(inst, opt)[-1]
    ys = inst.candidates.locations
    bs = inst.candidates.voting_borders
    y = ys[opt]
    L = C = R = 0
    for loc, c in final.groups:
        if loc < y:
            L += c
        elif loc > y:
            R += c
        else:
            C += c
    if opt < len(bs):
        unit = bs[opt] - y
    elif opt > 0:
        unit = y - bs[opt - 1]
    else:
        unit = 1.0
    beta = (y - bs[opt - 1]) / unit if opt > 0 and L > 0 else 1.0
    return ThreeCandidateReduction(L, C, R, beta)


def three_candidate_spike_ratio(r: ThreeCandidateReduction) -> float:
    """Spike's social cost over the central candidate's cost on a reduced profile."""
    costs = r.costs()
    expected = math.fsum(p * c for p, c in zip(r.spike_lottery(), costs))
    return ratio_value(expected, costs[1])[0]


def outward_votes(inst: Instance, opt: int | None = None) -> tuple[int, ...]:
    """Truthful votes where each border agent picks the neighbour farther from the optimum."""
    _require_line(inst)
    opt = _opt(inst, opt)
    y = inst.candidates.locations[opt]
    votes = []
    for x, fav in zip(inst.agents, inst.favorite_sets):
        if len(fav) == 1:
            votes.append(fav[0])
        elif x < y:
            votes.append(min(fav))
        else:
            votes.append(max(fav))
    return tuple(votes)


def outward_social_cost(M: Mechanism, inst: Instance, opt: int | None = None) -> float:
    votes = outward_votes(inst, opt)
    lot = M.fast_lottery(votes, inst.candidates)
    return math.fsum(float(p) * c for p, c in zip(lot, inst.candidate_costs) if p)


def outward_ratio(M: Mechanism, inst: Instance, opt: int | None = None) -> float:
    opt = _opt(inst, opt)
    return ratio_value(outward_social_cost(M, inst, opt), inst.candidate_costs[opt])[0]
