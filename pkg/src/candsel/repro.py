"""Reproduction runs for every headline claim, shared by the CLI and the test suite.

Each ``check_*`` function returns a list of :class:`ClaimRow`; a row passes
when its measured value meets the stated bound at the stated tolerance.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import adversary as adv
from .compression import (GroupedProfile, ThreeCandidateReduction, left_compress,
                          outward_ratio, outward_social_cost, outward_votes,
                          right_compress, three_candidate_spike_ratio, tight_profile)
from .evaluation import approximation_ratio, optimal_candidate
from .geometry import CandidateSet, Instance
from .mechanisms import (MEDIAN, RANDOM_DICTATOR, SPIKE, WPV, BorderFraction, Claim1Ranking,
                         Claim4Location, Claim5Voting, claim5_components,
                         median_weights, spike_cdf, spike_weights, uniform_weights)
from .reductions import (check_reduction, claim2_map, find_reduction_conflicts, lift,
                         project_location_to_ranking, project_location_to_voting_2cand)
from .truthfulness import audit_gsp, audit_unilateral, audit_universal_wpv

TOL = 1e-9


@dataclass
class ClaimRow:
    claim: str
    bound: float | str
    achieved: float | str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.claim}: bound={_fmt(self.bound)} achieved={_fmt(self.achieved)}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


# ---------------------------------------------------------------------------
# shared instance families


def random_weight_fn(seed: int, idx: int):
    """Seeded random WPV weights, one Dirichlet draw per agent count."""
    def weights(n: int) -> np.ndarray:
        return np.random.default_rng([seed, idx, n]).dirichlet(np.ones(n))
    return weights


def grid_instances(points=tuple(range(-4, 5)), n_max: int = 4, m_max: int = 4):
    """Every line instance with candidates and agents on ``points`` (agents as multisets)."""
    pts = [float(p) for p in points]
    for m in range(1, m_max + 1):
        for ys in itertools.combinations(pts, m):
            cands = CandidateSet.on_line(ys)
            for n in range(1, n_max + 1):
                for xs in itertools.combinations_with_replacement(pts, n):
                    yield Instance(cands, xs)


def random_line_instances(count: int, seed: int, n_max: int = 8, m_max: int = 5,
                          border_prob: float = 0.0):
    """Seeded random line instances; agents snap to a voting border with ``border_prob``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        m = int(rng.integers(1, m_max + 1))
        n = int(rng.integers(1, n_max + 1))
        ys = np.sort(rng.uniform(-10, 10, m))
        while m > 1 and np.any(np.diff(ys) <= 0):
            ys = np.sort(rng.uniform(-10, 10, m))
        xs = rng.uniform(-10, 10, n)
        if m > 1 and border_prob > 0:
            bs = (ys[1:] + ys[:-1]) / 2
            snap = rng.random(n) < border_prob
            xs = np.where(snap, bs[rng.integers(0, m - 1, n)], xs)
        out.append(Instance.on_line(ys.tolist(), xs.tolist()))
    return out


# ---------------------------------------------------------------------------
# claims


def check_spike_upper(samples: int = 100_000, seed: int = 0) -> list[ClaimRow]:
    cfg = adv.SearchConfig(count=samples, n_range=(1, 16), m_range=(1, 6),
                           coord_range=(-10.0, 10.0), seed=seed, probe_transforms=True)
    if samples == 0:
        return [ClaimRow("spike ratio search <= 2", 2.0, "skipped", True)]
    rep = adv.ratio_search(SPIKE, cfg)
    return [ClaimRow("spike ratio search <= 2", 2.0, rep.achieved, rep.achieved <= 2 + TOL,
                     {"samples": samples, "report": rep})]


def check_spike_cdf(n_max: int = 1000) -> list[ClaimRow]:
    """F(t) + F(n - t) = 1, F monotone, F(n) = 1 for every n up to ``n_max``."""
    worst = 0.0
    monotone = True
    for n in range(1, n_max + 1):
        F = [spike_cdf(t, n) for t in range(n + 1)]
        worst = max(worst, abs(F[n] - 1), *(abs(F[t] + F[n - t] - 1) for t in range(n + 1)))
        monotone &= all(b >= a for a, b in zip(F, F[1:]))
    return [ClaimRow("spike CDF symmetric and monotone", 0, worst,
                     worst <= TOL and monotone, {"n_max": n_max})]


def check_spike_tightness(eps: float = 1e-3) -> list[ClaimRow]:
    target = 2 / (1 + eps)
    rows = []
    for label, inst in zip(("x", "x'"), adv.gap_instance(eps)):
        r = approximation_ratio(SPIKE, inst).ratio
        rows.append(ClaimRow(f"spike gap profile {label} = 2/(1+eps)", target, r,
                             abs(r - target) <= TOL))
    return rows


def check_three_candidate(max_count: int = 50, ks=range(-6, 7)) -> list[ClaimRow]:
    worst = -math.inf
    worst_at = None
    equality_fail = []
    equality_cases = 0
    for L in range(max_count + 1):
        for C in range(max_count + 1):
            for R in range(max_count + 1):
                if L + C + R == 0:
                    continue
                interior = L >= 1 and R >= 1 and L < C + R and R < L + C
                for k in ks:
                    red = ThreeCandidateReduction(L, C, R, 2.0**k)
                    r = three_candidate_spike_ratio(red)
                    if r > worst:
                        worst, worst_at = r, red
                    if interior:
                        equality_cases += 1
                        if abs(r - 2) > TOL:
                            equality_fail.append(red)
    return [
        ClaimRow("three-candidate spike ratio <= 2", 2.0, worst, worst <= 2 + TOL,
                 {"argmax": worst_at}),
        ClaimRow("three-candidate ratio = 2 when median at y_C", 2.0,
                 f"{equality_cases - len(equality_fail)}/{equality_cases} cases equal",
                 not equality_fail, {"failures": equality_fail[:10]}),
    ]


def check_median(samples: int = 100_000, seed: int = 0, eps: float = 1e-3) -> list[ClaimRow]:
    rows = []
    if samples:
        cfg = adv.SearchConfig(count=samples, seed=seed, gap_eps=(eps,))
        rep = adv.ratio_search(MEDIAN, cfg)
        rows.append(ClaimRow("median ratio search <= 3", 3.0, rep.achieved,
                             rep.achieved <= 3 + TOL, {"report": rep}))
    else:
        rows.append(ClaimRow("median ratio search <= 3", 3.0, "skipped", True))
    target = (3 - eps) / (1 + eps)
    r = max(approximation_ratio(MEDIAN, inst).ratio for inst in adv.gap_instance(eps))
    rows.append(ClaimRow("median gap probe = (3-eps)/(1+eps)", target, r, abs(r - target) <= TOL))
    return rows


def check_random_dictator(n: int = 100, eps: float = 1e-3, samples: int = 20_000,
                          seed: int = 0) -> list[ClaimRow]:
    inst = adv.rd_worst_instance(n, eps)
    r = approximation_ratio(RANDOM_DICTATOR, inst).ratio
    quoted = adv.rd_claimed_ratio(n, eps)
    rows = [ClaimRow("random dictator worst instance = quoted closed form", quoted, r,
                     abs(r - quoted) <= TOL, {"exact_closed_form": adv.rd_exact_ratio(n, eps)})]
    if samples:
        cfg = adv.SearchConfig(count=samples, seed=seed, metric="explicit", n_range=(1, 8),
                               m_range=(2, 8), probe_transforms=False)
        rep = adv.ratio_search(RANDOM_DICTATOR, cfg)
        rows.append(ClaimRow("random dictator explicit-metric search <= 3", 3.0, rep.achieved,
                             rep.achieved <= 3 + TOL, {"report": rep}))
    else:
        rows.append(ClaimRow("random dictator explicit-metric search <= 3", 3.0, "skipped", True))
    return rows


def check_simplex(ds=(1, 2, 3)) -> list[ClaimRow]:
    rows = []
    for d in ds:
        rep = adv.simplex_audit(RANDOM_DICTATOR, d)
        target = 3 - 2 / (d + 1)
        step_ok = abs(rep.extra["p_last_final"] - rep.extra["p_last_initial"]) <= TOL
        rows.append(ClaimRow(f"simplex audit d={d} = 3-2/(d+1)", target, rep.achieved,
                             abs(rep.achieved - target) <= 1e-12, {"report": rep}))
        rows.append(ClaimRow(f"simplex d={d} border-equal step", rep.extra["p_last_initial"],
                             rep.extra["p_last_final"], step_ok))
    return rows


def check_triangle() -> list[ClaimRow]:
    from .mechanisms import UniformLottery
    rep = adv.triangle_audit(UniformLottery("ranking"))
    return [ClaimRow("triangle audit of uniform ranking lottery = 7/3", 7 / 3, rep.achieved,
                     abs(rep.achieved - 7 / 3) <= 1e-12, {"report": rep})]


def check_nonstrategic(eps: float = 1e-2, step: float = 1e-3) -> list[ClaimRow]:
    p, v = adv.minimize_on_grid(lambda p: adv.nonstrategic_pair_bound(p, eps), step)
    target = 2 - eps / 2
    _, exact = adv.minimize_on_grid(lambda p: max(adv.nonstrategic_pair_ratios(p, eps)), step)
    return [
        ClaimRow("non-strategic pair bound minimum = 2-eps/2", target, v, abs(v - target) <= 1e-6,
                 {"exact_pair_minimax": exact}),
        ClaimRow("non-strategic pair bound minimiser = 0.5", 0.5, p, abs(p - 0.5) <= 1e-3),
    ]


def check_wpv_universal(n_random: int = 50, seed: int = 0, points=tuple(range(-4, 5))) -> list[ClaimRow]:
    instances = list(grid_instances(points))
    cache: dict = {}
    rows = []
    named = [("spike", spike_weights), ("median", median_weights),
             ("random-dictator", uniform_weights)]
    named += [(f"random-wpv-{i}", random_weight_fn(seed, i)) for i in range(n_random)]
    random_bad = 0
    n_max = max(inst.n for inst in instances)
    by_support: dict = {}
    for name, fn in named:
        # the verdict depends only on which percentiles carry weight
        support = tuple(tuple(np.flatnonzero(fn(n))) for n in range(1, n_max + 1))
        rep = by_support.get(support)
        if rep is None:
            rep = by_support[support] = audit_universal_wpv(fn, instances, cache)
        if name.startswith("random-wpv"):
            random_bad += len(rep.violations)
        else:
            rows.append(ClaimRow(f"universal truthfulness of {name}", 0, len(rep.violations),
                                 rep.passed, {"instances": len(instances)}))
    rows.append(ClaimRow(f"universal truthfulness of {n_random} random WPVs", 0,
                         random_bad, random_bad == 0, {"instances": len(instances)}))
    return rows


def claim5_draw_failures(inst: Instance) -> list[str]:
    """Names of the realised claim5 draws that an agent can manipulate on ``inst``."""
    return [mech.name for _, mech in claim5_components(inst.n)
            if not audit_unilateral(mech, inst).passed]


def check_counterexamples(grid_step: float = 0.01) -> list[ClaimRow]:
    rows = []
    c4 = Claim4Location()
    y4 = CandidateSet.on_line((0, 3, 4))
    pts = [-1.0, 0.5, 1.0, 1.5, 2.0, 3.5, 5.0]
    bad = 0
    for xs in itertools.combinations_with_replacement(pts, 2):
        bad += len(audit_unilateral(c4, Instance(y4, xs), grid_step=grid_step, box=(-2, 6)).violations)
    for x in pts:
        bad += len(audit_unilateral(c4, Instance(y4, (x,)), grid_step=grid_step, box=(-2, 6)).violations)
    rows.append(ClaimRow("claim4 passes the truthful-in-expectation grid audit", 0, bad, bad == 0))
    conflicts = find_reduction_conflicts(c4, "ranking", [(0.75,), (1.25,)], y4)
    rows.append(ClaimRow("claim4 differs on 0.75 vs 1.25 (same ranking)", "conflict",
                         len(conflicts), len(conflicts) == 1))

    c1 = Claim1Ranking()
    y1 = CandidateSet.on_line((0, 2, 5))
    line_pts = [x / 4 for x in range(-8, 29)]
    bad = 0
    for xs in itertools.product(line_pts, repeat=2):
        bad += len(audit_unilateral(c1, Instance(y1, xs)).violations)
    rows.append(ClaimRow("claim1 passes the deterministic audit", 0, bad, bad == 0))
    pi1, pi2, pi3 = (0, 1, 2), (1, 0, 2), (1, 2, 0)
    conflicts = find_reduction_conflicts(c1, "voting", [(pi1, pi2), (pi1, pi3)], y1)
    rows.append(ClaimRow("claim1 differs on (pi1,pi2) vs (pi1,pi3)", "conflict",
                         len(conflicts), len(conflicts) == 1))

    c5 = Claim5Voting()
    y5 = CandidateSet.on_line((-1, 1))
    profiles = [Instance(y5, xs) for xs in itertools.product([-1.5, -0.5, 0.0, 0.5, 1.5], repeat=2)]
    bad = sum(len(audit_unilateral(c5, inst).violations) for inst in profiles)
    rows.append(ClaimRow("claim5 mixture passes the truthful-in-expectation audit", 0, bad, bad == 0))
    failing = set()
    for inst in profiles:
        failing.update(claim5_draw_failures(inst))
    rows.append(ClaimRow("claim5 realised draws fail the deterministic audit", "some fail",
                         len(failing), bool(failing), {"failing_draws": sorted(failing)}))

    inst = Instance.on_line((-1, 0, 1), (-0.51, 0.51))
    rep = audit_gsp(RANDOM_DICTATOR, inst, 2)
    hit = [v for v in rep.violations if v.deviation == (1, 1)]
    ok = bool(hit) and all(abs(c - 1.0) <= TOL for c in hit[0].cost_before) \
        and all(abs(c - 0.51) <= TOL for c in hit[0].cost_after)
    rows.append(ClaimRow("random dictator coalition deviation 1 -> 0.51", "1 -> 0.51",
                         f"{hit[0].cost_before} -> {hit[0].cost_after}" if hit else "none", ok))
    return rows


def _expected(lot, inst: Instance) -> float:
    return math.fsum(p * c for p, c in zip(lot, inst.candidate_costs) if p)


def check_compression(samples: int = 10_000, seed: int = 0, n_weights: int = 20) -> list[ClaimRow]:
    instances = random_line_instances(samples, seed, n_max=10, m_max=6)
    wpvs = [WPV(random_weight_fn(seed + 1, i), name=f"random-wpv-{i}") for i in range(n_weights)]
    opt_bad = ineq_bad = diff_bad = outward_bad = 0
    borders_checked = 0
    for inst in instances:
        opt = optimal_candidate(inst)[0]
        tight = tight_profile(inst, opt)
        if optimal_candidate(tight)[0] != opt:
            opt_bad += 1
        for M in wpvs:
            if outward_ratio(M, tight, opt) < outward_ratio(M, inst, opt) - TOL:
                ineq_bad += 1
        # spike compression difference along one left and one right step
        g = GroupedProfile.from_agents(tight.agents)
        for step in (left_compress, right_compress):
            g2 = step(g, inst, opt)
            if g2 == g:
                continue
            x2 = inst.with_agents(g2.agents())
            delta = tight.candidate_costs[opt] - x2.candidate_costs[opt]
            diff = outward_social_cost(SPIKE, tight, opt) - outward_social_cost(SPIKE, x2, opt)
            if diff > 2 * delta + TOL:
                diff_bad += 1
        votes = outward_votes(tight, opt)
        y_opt = inst.candidates.locations[opt]
        for i, (x, fav) in enumerate(zip(tight.agents, tight.favorite_sets)):
            if len(fav) < 2:
                continue
            borders_checked += 1
            inward = list(votes)
            inward[i] = max(fav) if x < y_opt else min(fav)
            for M in [SPIKE] + wpvs:
                out_cost = _expected(M.fast_lottery(votes, inst.candidates), tight)
                in_cost = _expected(M.fast_lottery(inward, inst.candidates), tight)
                if out_cost < in_cost - TOL:
                    outward_bad += 1
    return [
        ClaimRow("tightening keeps the optimal candidate", 0, opt_bad, opt_bad == 0),
        ClaimRow(f"tightening never lowers the ratio ({n_weights} WPVs)", 0, ineq_bad, ineq_bad == 0),
        ClaimRow("spike compression difference <= 2 * opt difference", 0, diff_bad, diff_bad == 0),
        ClaimRow("outward border votes dominate", 0, outward_bad, outward_bad == 0,
                 {"border_agents": borders_checked}),
    ]


def check_reductions(samples: int = 1000, seed: int = 0, n_max: int = 12) -> list[ClaimRow]:
    instances = random_line_instances(samples, seed, n_max=6, m_max=5, border_prob=0.2)
    rows = []
    for M in (MEDIAN, SPIKE):
        for kind in ("ranking", "location"):
            rep = check_reduction(lift(M, kind), M, instances)
            rows.append(ClaimRow(f"lift({M.name}, {kind}) reduces to {M.name}", 0,
                                 len(rep.violations), rep.passed, {"checks": rep.checks}))
        lifted = lift(M, "location")
        proj = project_location_to_ranking(lifted)
        rep = check_reduction(lifted, proj, instances, claim2_map(lifted))
        rows.append(ClaimRow(f"zone projection of lift({M.name}, location)", 0,
                             len(rep.violations), rep.passed, {"checks": rep.checks}))
    cands = CandidateSet.on_line((-1, 1))
    bad = 0
    cases = 0
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        proj = project_location_to_voting_2cand(BorderFraction(lam), cands)
        for n in range(1, n_max + 1):
            for n1 in range(n + 1):
                for n2 in range(n - n1 + 1):
                    p1, p2, p3 = proj.border_probabilities(n1, n2, n - n1 - n2)
                    cases += 1
                    if not (p3 - TOL <= p1 <= p2 + TOL):
                        bad += 1
    rows.append(ClaimRow("border mixing monotone p3 <= p1 <= p2", 0, bad, bad == 0, {"cases": cases}))
    return rows


CLAIMS = {
    "spike-upper": check_spike_upper,
    "spike-cdf": check_spike_cdf,
    "spike-tight": check_spike_tightness,
    "three-candidate": check_three_candidate,
    "median": check_median,
    "random-dictator": check_random_dictator,
    "simplex": check_simplex,
    "triangle": check_triangle,
    "nonstrategic": check_nonstrategic,
    "wpv-universal": check_wpv_universal,
    "counterexamples": check_counterexamples,
    "compression": check_compression,
    "reductions": check_reductions,
}


def repro_all(samples: int | None = None, seed: int = 0) -> list[ClaimRow]:
    """Run every claim; ``samples`` overrides the search sample counts."""
    rows = []
    for name, fn in CLAIMS.items():
        kwargs = {}
        if samples is not None and name in ("spike-upper", "median", "random-dictator"):
            kwargs["samples"] = samples
        if "seed" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
            kwargs["seed"] = seed
        rows.extend(fn(**kwargs))
    return rows
