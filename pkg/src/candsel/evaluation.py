"""Social cost, optimal candidate and worst-case truthful approximation ratio."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from .geometry import Instance, _rankings_from_distances, is_tie
from .mechanisms import LOCATION, RANKING, VOTING, WPV, Mechanism, check_lottery

ENUMERATION_CAP = 2**20


class EnumerationOverflow(ValueError):
    """Raised when a truthful-profile enumeration would exceed the cap."""


def candidate_cost(j: int, inst: Instance) -> float:
    """Sum of distances from every agent to candidate ``j``."""
    if not 0 <= j < inst.m:
        raise IndexError(f"candidate index {j} outside [0, {inst.m})")
    return inst.candidate_costs[j]


def optimal_candidate(inst: Instance) -> tuple[int, float]:
    """Cheapest candidate; ties go to the lowest index (the leftmost on the line)."""
    costs = inst.candidate_costs
    best = min(costs)
    for j, c in enumerate(costs):
        if is_tie(c, best):
            return j, c
    raise AssertionError("unreachable")


def lottery_social_cost(lot, inst: Instance) -> float:
    lot = check_lottery(lot, inst.m)
    return math.fsum(float(p) * c for p, c in zip(lot, inst.candidate_costs) if p != 0.0)


def agent_cost(lot, inst: Instance, agent: int) -> float:
    """Expected distance from ``agent``'s true location to the drawn candidate."""
    d = inst.agent_distances[agent]
    return math.fsum(float(p) * dj for p, dj in zip(lot, d) if p != 0.0)


def true_action_sets(inst: Instance, kind: str) -> tuple[tuple, ...]:
    """Per agent, every action that is truthful for it under ``kind``."""
    if kind == VOTING:
        return inst.favorite_sets
    if kind == RANKING:
        return tuple(tuple(_rankings_from_distances(d)) for d in inst.agent_distances)
    if kind == LOCATION:
        return tuple((x,) for x in inst.agents)
    raise ValueError(f"unknown action kind {kind!r}")


def _check_cap(count: int) -> None:
    if count > ENUMERATION_CAP:
        raise EnumerationOverflow(
            f"{count} truthful profiles exceed the enumeration cap of {ENUMERATION_CAP}"
        )


def truthful_action_profiles(inst: Instance, kind: str) -> Iterator[tuple]:
    """Every truthful action profile: the product of the agents' true-action sets."""
    sets = true_action_sets(inst, kind)
    _check_cap(math.prod(len(s) for s in sets))
    return itertools.product(*sets)


def _anonymous_profiles(sets: Sequence[tuple]) -> Iterator[tuple]:
    """One representative per multiset of truthful actions.

    Agents with identical true-action sets are interchangeable for an
    anonymous mechanism, so only the multiset of their choices matters.
    """
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(sets):
        groups.setdefault(s, []).append(i)
    keys = list(groups)
    _check_cap(math.prod(math.comb(len(k) + len(groups[k]) - 1, len(groups[k])) for k in keys))
    n = len(sets)
    per_group = [
        itertools.combinations_with_replacement(k, len(groups[k])) for k in keys
    ]
    for choice in itertools.product(*per_group):
        prof: list[Any] = [None] * n
        for k, picks in zip(keys, choice):
            for i, a in zip(groups[k], picks):
                prof[i] = a
        yield tuple(prof)


def candidate_profiles(M: Mechanism, inst: Instance) -> Iterator[tuple]:
    """Truthful profiles that are distinct as far as ``M`` can tell."""
    sets = true_action_sets(inst, M.input_kind)
    if all(len(s) == 1 for s in sets):
        return iter((tuple(s[0] for s in sets),))
    if M.anonymous:
        return _anonymous_profiles(sets)
    _check_cap(math.prod(len(s) for s in sets))
    return itertools.product(*sets)


def _worst_by_counts(M: WPV, inst: Instance, sets: Sequence[tuple]) -> tuple[float, tuple]:
    # a WPV only sees vote counts: score every count vector in one numpy pass
    m, n = inst.m, inst.n
    base = np.zeros(m, dtype=np.int64)
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(sets):
        if len(s) == 1:
            base[s[0]] += 1
        else:
            groups.setdefault(s, []).append(i)
    keys = list(groups)
    _check_cap(math.prod(math.comb(len(k) + len(groups[k]) - 1, len(groups[k])) for k in keys))
    combos = [list(itertools.combinations_with_replacement(k, len(groups[k]))) for k in keys]
    counts = base[None, :]
    for picks_list in combos:
        rows = []
        for picks in picks_list:
            row = [0] * m
            for a in picks:
                row[a] += 1
            rows.append(row)
        inc = np.array(rows, dtype=np.int64)
        # the last group varies fastest, matching itertools.product order
        counts = (counts[:, None, :] + inc[None, :, :]).reshape(-1, m)
    P = np.asarray(M.cumulative(n))
    t = np.cumsum(counts, axis=1)
    lots = P[t] - P[t - counts]
    costs = np.asarray(inst.candidate_costs, dtype=float)
    j = int(np.argmax(lots @ costs))
    worst = math.fsum([p * c for p, c in zip(lots[j].tolist(), inst.candidate_costs) if p])
    prof: list[Any] = [s[0] for s in sets]
    idx = np.unravel_index(j, [len(c) for c in combos]) if combos else ()
    for k, picks_list, r in zip(keys, combos, idx):
        for i, a in zip(groups[k], picks_list[int(r)]):
            prof[i] = a
    return worst, tuple(prof)


def worst_truthful_social_cost(M: Mechanism, inst: Instance) -> tuple[float, tuple]:
    """Largest social cost over truthful action profiles, with a maximising profile."""
    if isinstance(M, WPV) and inst.metric.is_line and inst.n > 0:
        sets = true_action_sets(inst, VOTING)
        if any(len(s) > 1 for s in sets):
            return _worst_by_counts(M, inst, sets)
    costs = inst.candidate_costs
    cands = inst.candidates
    worst, witness = -math.inf, None
    fast = not M.randomized
    for prof in candidate_profiles(M, inst):
        if fast:
            c = costs[M.choose(prof, cands)]
        else:
            lot = M.fast_lottery(prof, cands)
            c = math.fsum([p * cj for p, cj in zip(lot, costs) if p])
        if c > worst:
            worst, witness = c, prof
    return worst, witness


@dataclass
class RatioReport:
    mechanism: str
    worst_truthful_cost: float
    optimal_cost: float
    optimal_candidate: int
    ratio: float
    witness_action_profile: tuple
    infinite: bool = False
    instance: Instance | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "worst_truthful_cost": self.worst_truthful_cost,
            "optimal_cost": self.optimal_cost,
            "optimal_candidate": self.optimal_candidate,
            "ratio": None if self.infinite else self.ratio,
            "infinite": self.infinite,
            "witness_action_profile": [_jsonable(a) for a in self.witness_action_profile],
            "instance": None if self.instance is None else self.instance.to_dict(),
        }

    def csv_row(self, instance_id: str = "") -> list:
        ratio = "inf" if self.infinite else repr(self.ratio)
        return [instance_id, self.mechanism, repr(self.worst_truthful_cost),
                repr(self.optimal_cost), self.optimal_candidate, ratio]


def _jsonable(a):
    if isinstance(a, (tuple, list)):
        return [_jsonable(v) for v in a]
    if isinstance(a, (np.integer,)):
        return int(a)
    if isinstance(a, (np.floating,)):
        return float(a)
    return a


def ratio_value(worst: float, opt: float) -> tuple[float, bool]:
    """(ratio, infinite flag) with 0/0 read as 1."""
    if opt > 0:
        return worst / opt, False
    if worst > 0:
        return math.inf, True
    return 1.0, False


def approximation_ratio(M: Mechanism, inst: Instance) -> RatioReport:
    worst, witness = worst_truthful_social_cost(M, inst)
    j, opt = optimal_candidate(inst)
    ratio, infinite = ratio_value(worst, opt)
    return RatioReport(M.name, worst, opt, j, ratio, witness, infinite, inst)
