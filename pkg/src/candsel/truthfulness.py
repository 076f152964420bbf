"""Brute-force incentive audits over finite deviation spaces."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .evaluation import _jsonable, agent_cost, true_action_sets
from .geometry import Instance, ranking_borders_line, _same_border
from .mechanisms import LOCATION, RANKING, VOTING, Mechanism, Percentile, WPV

MARGIN = 1e-9
SPACE_CAP = 10**6
DEFAULT_GRID_STEP = 0.05
DEFAULT_BOX_PAD = 2.0


class SearchSpaceOverflow(ValueError):
    """Raised when a deviation space is too large to enumerate."""


@dataclass
class Violation:
    agents: tuple[int, ...]
    true_profile: tuple
    deviation: tuple
    cost_before: tuple[float, ...]
    cost_after: tuple[float, ...]
    instance: Instance | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "agents": list(self.agents),
            "true_profile": _jsonable(self.true_profile),
            "deviation": _jsonable(self.deviation),
            "cost_before": list(self.cost_before),
            "cost_after": list(self.cost_after),
            "instance": None if self.instance is None else self.instance.to_dict(),
        }


@dataclass
class AuditReport:
    violations: list[Violation]
    search_space: str
    checks: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def merge(self, other: "AuditReport") -> "AuditReport":
        return AuditReport(
            self.violations + other.violations,
            self.search_space if self.search_space == other.search_space
            else f"{self.search_space}; {other.search_space}",
            self.checks + other.checks,
        )

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
            "search_space": self.search_space,
            "checks": self.checks,
        }


def replay_violation(M: Mechanism, v: Violation) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Re-evaluate a violation's before/after costs from scratch."""
    inst = v.instance
    cands = inst.candidates
    before = M.lottery(v.true_profile, cands)
    prof = list(v.true_profile)
    for i, a in zip(v.agents, v.deviation):
        prof[i] = a
    after = M.lottery(tuple(prof), cands)
    return (tuple(agent_cost(before, inst, i) for i in v.agents),
            tuple(agent_cost(after, inst, i) for i in v.agents))


def location_grid(inst: Instance, step: float = DEFAULT_GRID_STEP,
                  box: tuple[float, float] | None = None) -> list[float]:
    """Evenly spaced reports covering ``box`` (default: candidate hull padded by 2)."""
    if not inst.metric.is_line:
        raise ValueError("location deviation grids are built on the line")
    if not step > 0:
        raise ValueError("grid step must be positive")
    if box is None:
        ys = inst.candidates.locations
        box = (ys[0] - DEFAULT_BOX_PAD, ys[-1] + DEFAULT_BOX_PAD)
    lo, hi = box
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    if count > SPACE_CAP:
        raise SearchSpaceOverflow(f"location grid of {count} points exceeds {SPACE_CAP}")
    return [lo + k * step for k in range(count)]


def deviation_space(M: Mechanism, inst: Instance, grid_step: float = DEFAULT_GRID_STEP,
                    box=None) -> tuple[list, str]:
    m = inst.m
    if M.input_kind == VOTING:
        return list(range(m)), f"all {m} votes"
    if M.input_kind == RANKING:
        if math.factorial(m) > SPACE_CAP:
            raise SearchSpaceOverflow(f"{m}! rankings exceed {SPACE_CAP}")
        return list(itertools.permutations(range(m))), f"all {math.factorial(m)} rankings"
    grid = location_grid(inst, grid_step, box)
    return grid, f"{len(grid)} grid reports in [{grid[0]:g}, {grid[-1]:g}] step {grid_step:g}"


def audit_unilateral(M: Mechanism, inst: Instance, deviations: Sequence | None = None, *,
                     grid_step: float = DEFAULT_GRID_STEP, box=None,
                     margin: float = MARGIN, stop_at_first: bool = False) -> AuditReport:
    """Check that no agent gains more than ``margin`` by a unilateral misreport.

    Every truthful profile is examined, so each true action of each agent is
    tested against every report in the deviation space.
    """
    if deviations is None:
        deviations, desc = deviation_space(M, inst, grid_step, box)
    else:
        deviations = list(deviations)
        desc = f"{len(deviations)} supplied deviations"
    sets = true_action_sets(inst, M.input_kind)
    total = math.prod(len(s) for s in sets)
    if total * inst.n * len(deviations) > SPACE_CAP * 16:
        raise SearchSpaceOverflow("unilateral audit space too large")
    cands = inst.candidates
    dists = inst.agent_distances
    deterministic = not M.randomized
    violations: list[Violation] = []
    checks = 0
    for prof in itertools.product(*sets):
        prof = tuple(prof)
        if deterministic:
            base = M.choose(prof, cands)
        else:
            base_lot = M.lottery(prof, cands)
        for i in range(inst.n):
            d = dists[i]
            before = d[base] if deterministic else agent_cost(base_lot, inst, i)
            dev = list(prof)
            for a in deviations:
                if a == prof[i]:
                    continue
                dev[i] = a
                if deterministic:
                    after = d[M.choose(dev, cands)]
                else:
                    after = agent_cost(M.lottery(dev, cands), inst, i)
                checks += 1
                if after < before - margin:
                    violations.append(Violation((i,), prof, (a,), (before,), (after,), inst))
                    if stop_at_first:
                        return AuditReport(violations, desc, checks)
    return AuditReport(violations, desc, checks)


def _instance_key(inst: Instance) -> tuple:
    return (inst.candidates.locations, tuple(sorted(inst.agents)))


def audit_universal_wpv(weights, instances: Iterable[Instance], cache: dict | None = None) -> AuditReport:
    """Audit each percentile mechanism a WPV mixes over, on every instance.

    ``weights`` is a weight vector, a function of ``n``, or a :class:`WPV`.
    Percentile verdicts depend only on (percentile, instance), so ``cache``
    may be shared between calls for different weight vectors.
    """
    if isinstance(weights, WPV):
        weight_fn = weights.weights
    elif callable(weights):
        weight_fn = weights
    else:
        weight_fn = WPV(weights).weights
    cache = {} if cache is None else cache
    violations: list[Violation] = []
    checks = 0
    count = 0
    support: dict[int, list[int]] = {}
    for inst in instances:
        count += 1
        ks = support.get(inst.n)
        if ks is None:
            ks = support[inst.n] = [int(k) for k in np.flatnonzero(weight_fn(inst.n))]
        key = _instance_key(inst)
        for k in ks:
            rep = cache.get((k, key))
            if rep is None:
                rep = audit_unilateral(Percentile(k), inst)
                cache[(k, key)] = rep
            violations.extend(rep.violations)
            checks += rep.checks
    return AuditReport(violations, f"percentile parts on {count} instances", checks)


def audit_gsp(M: Mechanism, inst: Instance, max_coalition: int | None = None,
              margin: float = MARGIN) -> AuditReport:
    """Search for a coalition whose joint vote deviation makes every member strictly better off."""
    if M.input_kind != VOTING:
        raise ValueError("group audits are implemented for voting mechanisms")
    n, m = inst.n, inst.m
    if n > 6:
        raise SearchSpaceOverflow("group audits support at most 6 agents")
    kmax = n if max_coalition is None else min(max_coalition, n)
    sets = inst.favorite_sets
    profiles = list(itertools.product(*sets))
    space = len(profiles) * sum(math.comb(n, k) * m**k for k in range(1, kmax + 1))
    if space > SPACE_CAP:
        raise SearchSpaceOverflow(f"group deviation space {space} exceeds {SPACE_CAP}")
    cands = inst.candidates
    violations = []
    for prof in profiles:
        base = M.lottery(prof, cands)
        before = [agent_cost(base, inst, i) for i in range(n)]
        for k in range(1, kmax + 1):
            for S in itertools.combinations(range(n), k):
                for joint in itertools.product(range(m), repeat=k):
                    dev = list(prof)
                    for i, a in zip(S, joint):
                        dev[i] = a
                    lot = M.lottery(dev, cands)
                    after = [agent_cost(lot, inst, i) for i in S]
                    if all(a < before[i] - margin for i, a in zip(S, after)):
                        violations.append(Violation(
                            S, prof, joint, tuple(before[i] for i in S), tuple(after), inst))
    return AuditReport(violations, f"coalitions up to size {kmax}, all joint votes", space)


def border_equal_probe(M: Mechanism, inst: Instance, agent: int,
                       delta: float = 1e-7) -> tuple[float, float]:
    """The probed agent's expected cost under its two truthful reports.

    Voting and ranking mechanisms need the agent on a border, where it has two
    truthful actions; other agents use their first truthful action. A location
    mechanism has one truthful report, so the probe compares reports just left
    and right of the agent's location instead.
    """
    cands = inst.candidates
    if M.input_kind == LOCATION:
        x = inst.agents[agent]
        prof = list(inst.agents)
        out = []
        for r in (x - delta, x + delta):
            prof[agent] = r
            out.append(agent_cost(M.lottery(tuple(prof), cands), inst, agent))
        return out[0], out[1]
    sets = true_action_sets(inst, M.input_kind)
    options = sets[agent]
    if len(options) < 2:
        raise ValueError(f"agent {agent} at {inst.agents[agent]} is not on a border")
    if M.input_kind == RANKING and len(options) > 2:
        # several ties at once: compare the two extreme orders
        options = (options[0], options[-1])
    prof = [s[0] for s in sets]
    out = []
    for a in options[:2]:
        prof[agent] = a
        out.append(agent_cost(M.lottery(tuple(prof), cands), inst, agent))
    return out[0], out[1]


def on_ranking_border(x: float, inst: Instance) -> bool:
    return any(_same_border(x, b) for b in ranking_borders_line(inst.candidates))


def make_fixed_mechanism(fn: Callable, kind: str = VOTING, name: str = "fixture",
                         randomized: bool = False) -> Mechanism:
    """Wrap ``fn(actions, candidates) -> lottery`` as a mechanism (for fixtures)."""
    mech = Mechanism()
    mech.name = name
    mech.input_kind = kind
    mech.randomized = randomized
    mech.lottery = fn
    return mech
