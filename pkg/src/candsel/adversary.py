"""Lower-bound instances, black-box bound audits and randomised worst-case search."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .compression import compression_trace, tight_profile
from .evaluation import (RatioReport, _jsonable, approximation_ratio,
                         lottery_social_cost, optimal_candidate)
from .geometry import CandidateSet, Instance, MetricSpace
from .mechanisms import Mechanism

REPLAY_TOL = 1e-9


@dataclass
class BoundReport:
    """``achieved`` is the bound extracted from ``mechanism``; ``claimed_bound``
    is the target value for the construction."""

    mechanism: str
    claimed_bound: float
    achieved: float
    witness: Instance | None = None
    witness_profile: tuple | None = None
    chain: list = field(default_factory=list)
    direct_ratio: float | None = None
    samples: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "claimed_bound": self.claimed_bound,
            "achieved": self.achieved,
            "direct_ratio": self.direct_ratio,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "witness_profile": _jsonable(self.witness_profile) if self.witness_profile else None,
            "chain": _jsonable(self.chain),
            "samples": self.samples,
            **({"extra": self.extra} if self.extra else {}),
        }


def replay_ratio(M: Mechanism, inst: Instance, profile: Sequence) -> float:
    """Social cost of ``M`` on ``profile`` over the optimum of ``inst``."""
    cost = lottery_social_cost(M.lottery(tuple(profile), inst.candidates), inst)
    return cost / optimal_candidate(inst)[1]


# ---------------------------------------------------------------------------
# fixed constructions


def gap_instance(eps: float) -> tuple[Instance, Instance]:
    """Candidates at -1 and 1 with agents (-1, eps) and (-eps, 1).

    Both profiles share the truthful votes (C1, C2), yet the optimum flips.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    ys = (-1.0, 1.0)
    return Instance.on_line(ys, (-1.0, eps)), Instance.on_line(ys, (-eps, 1.0))


def rd_worst_instance(n: int, eps: float) -> Instance:
    """n-1 agents on the left candidate and one at ``eps``; candidates at -1 and 1."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return Instance.on_line((-1.0, 1.0), (-1.0,) * (n - 1) + (eps,))


def rd_claimed_ratio(n: int, eps: float) -> float:
    """Closed form quoted for random dictator's ratio on :func:`rd_worst_instance`."""
    return (3 - 2 / n + 2 * eps / n + eps) / (1 + eps)


def rd_exact_ratio(n: int, eps: float) -> float:
    """Random dictator's ratio on :func:`rd_worst_instance`, from its two candidate costs."""
    return (3 - 2 / n + eps - 2 * eps / n) / (1 + eps)


def regular_simplex(d: int) -> np.ndarray:
    """(d+1) x d array of vertices of a regular simplex with unit edges, centred at 0."""
    if d < 1:
        raise ValueError("d must be >= 1")
    E = np.eye(d + 1) - 1.0 / (d + 1)
    _, _, vt = np.linalg.svd(E)
    return (E @ vt[:d].T) / math.sqrt(2)


def _relabel_swap(a: int, b: int, size: int) -> list[int]:
    perm = list(range(size))
    perm[a], perm[b] = perm[b], perm[a]
    return perm


def simplex_audit(M: Mechanism, d: int) -> BoundReport:
    """Extract a lower bound for a voting mechanism on the unit regular simplex.

    The candidate drawn most often when every agent sits on its own vertex is
    relabelled as the last one. Agents sitting on the face centroid of the
    other vertices then switch, one at a time, to the first vertex; the
    resulting probability ``p`` of the last candidate certifies a ratio of
    ``2 d p + 1`` on d agents at the first vertex plus one agent halfway
    between the first and last vertex.
    """
    V = regular_simplex(d)
    metric = MetricSpace.euclidean(d)
    cands = CandidateSet(metric, tuple(map(tuple, V)))
    m = d + 1
    base = tuple(range(m))
    lot = np.asarray(M.lottery(base, cands))
    top = int(np.argmax(lot))
    # logical candidate k is actual candidate sigma[k]; logical agent i is actual agent sigma[i]
    sigma = _relabel_swap(top, d, m)
    last = sigma[d]
    first = sigma[0]
    prof = list(base)
    chain = [float(lot[last])]
    for i in range(1, d):
        prof[sigma[i]] = first
        chain.append(float(M.lottery(tuple(prof), cands)[last]))
    p_last = chain[-1]
    implied = 2 * d * p_last + 1

    Q = tuple((V[first] + V[last]) / 2)
    xs = [None] * m
    for i in range(d):
        xs[sigma[i]] = tuple(V[first])
    xs[sigma[d]] = Q
    witness = Instance(cands, tuple(xs))
    direct = approximation_ratio(M, witness)
    P = tuple(V[[sigma[i] for i in range(d)]].mean(axis=0))
    return BoundReport(
        M.name, 3 - 2 / (d + 1), implied, witness, tuple(prof), chain, direct.ratio,
        extra={"p_last_initial": chain[0], "p_last_final": p_last,
               "face_centroid": list(P), "relabel": sigma},
    )


TRIANGLE_EDGE = 2.0


def triangle_candidates() -> CandidateSet:
    h = TRIANGLE_EDGE * math.sqrt(3) / 2
    pts = ((0.0, 0.0), (TRIANGLE_EDGE, 0.0), (TRIANGLE_EDGE / 2, h))
    return CandidateSet(MetricSpace.euclidean(2), pts)


def triangle_audit(M: Mechanism) -> BoundReport:
    """Extract a lower bound for a ranking mechanism on an equilateral triangle.

    Starting from the three cyclic rankings, labels are rotated so the most
    likely candidate is the third. Two border-preserving swaps follow; the
    third candidate's final probability ``p`` certifies ``1 + 4 p`` on two
    agents at the second vertex and one halfway between the second and third.
    """
    cands = triangle_candidates()
    cyc = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    lot = np.asarray(M.lottery(tuple(cyc), cands))
    top = int(np.argmax(lot))
    s = (top - 2) % 3

    def act(k: int) -> int:
        return (k + s) % 3

    def actual_ranking(r):
        return tuple(act(k) for k in r)

    # logical agent i holds logical ranking cyc[i] and is actual agent act(i)
    prof = list(cyc)
    chain = [float(lot[act(2)])]
    prof[act(0)] = actual_ranking((1, 0, 2))
    chain.append(float(M.lottery(tuple(prof), cands)[act(2)]))
    prof[act(2)] = actual_ranking((2, 1, 0))
    chain.append(float(M.lottery(tuple(prof), cands)[act(2)]))
    implied = 1 + 4 * chain[-1]

    y = cands.locations
    Q = tuple((a + b) / 2 for a, b in zip(y[act(1)], y[act(2)]))
    xs = [None] * 3
    xs[act(0)] = y[act(1)]
    xs[act(1)] = y[act(1)]
    xs[act(2)] = Q
    witness = Instance(cands, tuple(xs))
    direct = approximation_ratio(M, witness)
    return BoundReport(M.name, 7 / 3, implied, witness, tuple(prof), chain, direct.ratio,
                       extra={"rotation": s})


def nonstrategic_pair_bound(p: float, eps: float) -> float:
    """Closed-form bound quoted for a voting mechanism that elects the left
    candidate with probability ``p`` on the shared gap profile."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return max(1 + 2 * p - p * eps, 3 - 2 * p + 2 * p * eps - eps)


def nonstrategic_pair_ratios(p: float, eps: float) -> tuple[float, float]:
    """Exact ratios on the two gap profiles when the left candidate has probability ``p``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    x, xp = gap_instance(eps)
    lot = np.array([p, 1 - p])
    return (lottery_social_cost(lot, x) / optimal_candidate(x)[1],
            lottery_social_cost(lot, xp) / optimal_candidate(xp)[1])


def minimize_on_grid(fn, step: float = 1e-3) -> tuple[float, float]:
    """(argmin, min) of ``fn`` over p = 0, step, ..., 1; first minimiser wins."""
    count = int(round(1 / step))
    best_p, best = 0.0, math.inf
    for k in range(count + 1):
        p = k / count
        v = fn(p)
        if v < best:
            best_p, best = p, v
    return best_p, best


# ---------------------------------------------------------------------------
# random search


@dataclass(frozen=True)
class SearchConfig:
    count: int = 1000
    n_range: tuple[int, int] = (1, 16)
    m_range: tuple[int, int] = (1, 6)
    coord_range: tuple[float, float] = (-10.0, 10.0)
    seed: int = 0
    metric: str = "line"
    probe_transforms: bool = True
    gap_eps: tuple[float, ...] = ()
    chunk_size: int = 2000
    workers: int = 1

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        for lo, hi in (self.n_range, self.m_range, self.coord_range):
            if lo > hi:
                raise ValueError("search ranges must be nonempty")
        if self.n_range[0] < 1 or self.m_range[0] < 1:
            raise ValueError("need at least one agent and one candidate")
        if self.metric not in ("line", "explicit"):
            raise ValueError(f"unsupported search metric {self.metric!r}")
        if self.chunk_size < 1 or self.workers < 1:
            raise ValueError("chunk_size and workers must be positive")


def random_line_instance(rng: np.random.Generator, cfg: SearchConfig) -> Instance:
    lo, hi = cfg.coord_range
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    m = int(rng.integers(cfg.m_range[0], cfg.m_range[1] + 1))
    while True:
        ys = np.sort(rng.uniform(lo, hi, m))
        if m == 1 or np.all(np.diff(ys) > 0):
            break
    xs = rng.uniform(lo, hi, n)
    return Instance.on_line(ys.tolist(), xs.tolist())


def random_explicit_instance(rng: np.random.Generator, cfg: SearchConfig) -> Instance:
    """Random shortest-path metric on up to ``m_range[1]`` points (at least 2)."""
    k = int(rng.integers(max(2, cfg.m_range[0]), max(2, cfg.m_range[1]) + 1))
    W = rng.uniform(0.1, 1.0, (k, k))
    D = np.minimum(W, W.T)
    np.fill_diagonal(D, 0.0)
    for via in range(k):  # Floyd-Warshall repairs the triangle inequality
        D = np.minimum(D, D[:, via, None] + D[None, via, :])
    metric = MetricSpace.explicit(D)
    m = int(rng.integers(1, k + 1))
    ys = rng.choice(k, size=m, replace=False).tolist()
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    xs = rng.integers(0, k, n).tolist()
    return Instance(CandidateSet(metric, tuple(ys)), tuple(xs))


def probe_instances(inst: Instance, with_transforms: bool) -> list[Instance]:
    out = [inst]
    if with_transforms and inst.metric.is_line:
        opt = optimal_candidate(inst)[0]
        tight = tight_profile(inst, opt)
        out.append(tight)
        # tight_profile is idempotent, so the trace can start from the shared tight instance
        final = compression_trace(tight, opt)[-1]
        out.append(inst.with_agents(final.agents()))
    return out


def _search_chunk(M: Mechanism, cfg: SearchConfig, chunk: int) -> tuple[float, int, RatioReport | None]:
    rng = np.random.default_rng([cfg.seed, chunk])
    start = chunk * cfg.chunk_size
    stop = min(cfg.count, start + cfg.chunk_size)
    draw = random_line_instance if cfg.metric == "line" else random_explicit_instance
    best, best_idx, best_rep = -math.inf, -1, None
    for idx in range(start, stop):
        inst = draw(rng, cfg)
        for probe in probe_instances(inst, cfg.probe_transforms):
            rep = approximation_ratio(M, probe)
            if rep.ratio > best:
                best, best_idx, best_rep = rep.ratio, idx, rep
    return best, best_idx, best_rep


def ratio_search(M: Mechanism, cfg: SearchConfig) -> BoundReport:
    """Largest approximation ratio over seeded random instances (plus probes).

    Samples are drawn in chunks, chunk ``c`` from ``default_rng([seed, c])``,
    so the result does not depend on how chunks are spread over workers.
    """
    chunks = range(math.ceil(cfg.count / cfg.chunk_size)) if cfg.count else range(0)
    if cfg.workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_search_chunk, [M] * len(chunks), [cfg] * len(chunks), chunks))
    else:
        results = [_search_chunk(M, cfg, c) for c in chunks]
    best, best_idx, best_rep = -math.inf, -1, None
    for val, idx, rep in results:
        if val > best or (val == best and 0 <= idx < best_idx):
            best, best_idx, best_rep = val, idx, rep
    for eps in cfg.gap_eps:
        for inst in gap_instance(eps):
            rep = approximation_ratio(M, inst)
            if rep.ratio > best:
                best, best_idx, best_rep = rep.ratio, -1, rep
    if best_rep is None:
        return BoundReport(M.name, math.nan, math.nan, samples=0, extra={"skipped": True})
    return BoundReport(
        M.name, math.nan, best, best_rep.instance, best_rep.witness_action_profile,
        direct_ratio=best_rep.ratio, samples=cfg.count,
        extra={"sample_index": best_idx},
    )
