"""Candidate-selection mechanisms as pure maps from action profiles to lotteries.

A lottery is a length-``m`` float array of candidate probabilities. Votes are
candidate indices, rankings are tuples of candidate indices (most preferred
first) and locations are points of the candidate set's metric.
"""
from __future__ import annotations

import functools
import math
from typing import Callable, Sequence

import numpy as np

from .geometry import CandidateSet, is_tie

VOTING = "voting"
RANKING = "ranking"
LOCATION = "location"
KINDS = (VOTING, RANKING, LOCATION)
# larger = finer granularity
GRANULARITY = {VOTING: 0, RANKING: 1, LOCATION: 2}

LOTTERY_TOL = 1e-12


def check_lottery(lot, m: int | None = None) -> np.ndarray:
    lot = np.asarray(lot, dtype=float)
    if lot.ndim != 1 or (m is not None and lot.shape[0] != m):
        raise ValueError(f"lottery must be a vector of length {m}")
    if np.any(lot < -LOTTERY_TOL):
        raise ValueError("lottery has negative entries")
    if abs(lot.sum() - 1.0) > LOTTERY_TOL * max(1, lot.shape[0]):
        raise ValueError(f"lottery sums to {lot.sum()!r}, not 1")
    return lot


def point_mass(j: int, m: int) -> np.ndarray:
    lot = np.zeros(m)
    lot[j] = 1.0
    return lot


def vote_counts(votes: Sequence[int], m: int) -> np.ndarray:
    if len(votes) == 0:
        raise ValueError("empty vote profile")
    counts = np.bincount(np.asarray(votes, dtype=np.intp), minlength=m)
    if counts.shape[0] != m:
        raise ValueError(f"vote for unknown candidate (m={m}): {max(votes)}")
    return counts


def check_ranking(r, m: int) -> tuple[int, ...]:
    r = tuple(int(c) for c in r)
    if sorted(r) != list(range(m)):
        raise ValueError(f"{r} is not a ranking of {m} candidates")
    return r


class Mechanism:
    """Base class. Subclasses implement :meth:`lottery`.

    ``anonymous`` mechanisms depend only on the multiset of submitted actions;
    evaluation code uses this to avoid enumerating agent permutations.
    """

    name = "mechanism"
    input_kind = VOTING
    randomized = True
    anonymous = False

    def lottery(self, actions: Sequence, candidates: CandidateSet) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, actions, candidates):
        return self.lottery(actions, candidates)

    def fast_lottery(self, actions, candidates) -> Sequence[float]:
        """Lottery as a plain sequence, for hot loops; defaults to :meth:`lottery`."""
        return self.lottery(actions, candidates)

    def choose(self, actions, candidates) -> int:
        """Elected candidate of a deterministic mechanism."""
        if self.randomized:
            raise TypeError(f"{self.name} is randomized; use lottery()")
        return int(np.argmax(self.lottery(actions, candidates)))

    def __repr__(self):
        return f"<{type(self).__name__} {self.name!r} ({self.input_kind})>"


# ---------------------------------------------------------------------------
# weighted percentile voting


def spike_cdf(t: int, n: int) -> float:
    """Cumulative probability spike assigns to the ``t`` leftmost of ``n`` votes."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= t <= n:
        raise ValueError(f"cumulative count {t} outside [0, {n}]")
    if 2 * t <= n:
        return t / (2 * (n - t))
    return 1.5 - n / (2 * t)


def spike_weights(n: int) -> np.ndarray:
    """Percentile weights of spike: the k-th smallest vote gets F(k) - F(k-1)."""
    F = [spike_cdf(t, n) for t in range(n + 1)]
    return np.diff(F)


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def median_weights(n: int) -> np.ndarray:
    return point_mass(math.ceil(n / 2) - 1, n)


def percentile_weights(k: int, n: int) -> np.ndarray:
    if not 0 <= k < n:
        raise ValueError(f"percentile index {k} outside [0, {n})")
    return point_mass(k, n)


class WPV(Mechanism):
    """Weighted percentile voting on the line.

    The i-th smallest vote (votes sorted by candidate location, ties by agent
    index) is elected with probability ``weights[i]``. ``weights`` is either a
    fixed vector, which pins the number of agents, or a deterministic function
    of ``n``.
    """

    input_kind = VOTING
    anonymous = True
    requires_line = True

    def __init__(self, weights: Sequence[float] | Callable[[int], Sequence[float]], name: str = "wpv"):
        if callable(weights):
            self._weight_fn = weights
            self._fixed = None
        else:
            w = np.asarray(weights, dtype=float)
            _check_weights(w)
            w.setflags(write=False)
            self._fixed = w
            self._weight_fn = None
        self.name = name

    def weights(self, n: int) -> np.ndarray:
        if self._fixed is not None:
            if len(self._fixed) != n:
                raise ValueError(f"{self.name} has {len(self._fixed)} weights but {n} votes")
            return self._fixed
        # weight functions are assumed deterministic, so each n is built once
        cache = self.__dict__.setdefault("_w_cache", {})
        w = cache.get(n)
        if w is None:
            w = np.asarray(self._weight_fn(n), dtype=float)
            _check_weights(w, n)
            w.setflags(write=False)
            cache[n] = w
        return w

    @property
    def randomized(self) -> bool:
        if self._fixed is not None:
            return int(np.count_nonzero(self._fixed)) > 1
        return True

    def _counts(self, votes, candidates):
        if self.requires_line and not candidates.metric.is_line:
            raise ValueError(f"{self.name} needs candidates on the line")
        return vote_counts(votes, candidates.m)

    def lottery(self, votes, candidates):
        counts = self._counts(votes, candidates)
        w = self.weights(len(votes))
        P = np.concatenate(([0.0], np.cumsum(w)))
        t = np.cumsum(counts)
        lot = P[t] - P[t - counts]
        return lot

    def cumulative(self, n: int) -> list[float]:
        """Partial sums of the weights for ``n`` votes, starting at 0 and ending at exactly 1."""
        cache = self.__dict__.setdefault("_cum_cache", {})
        P = cache.get(n)
        if P is None:
            P = [0.0] + np.cumsum(self.weights(n)).tolist()
            P[-1] = 1.0
            cache[n] = P
        return P

    def fast_lottery(self, votes, candidates):
        return self.count_lottery(_count_list(votes, candidates, self.requires_line), len(votes))

    def count_lottery(self, counts: Sequence[int], n: int) -> list[float]:
        """Lottery from per-candidate vote counts (candidates in line order)."""
        P = self.cumulative(n)
        out = []
        t = 0
        for c in counts:
            out.append(P[t + c] - P[t])
            t += c
        return out


def _check_weights(w: np.ndarray, n: int | None = None) -> None:
    if w.ndim != 1 or len(w) == 0:
        raise ValueError("WPV weights must be a non-empty vector")
    if n is not None and len(w) != n:
        raise ValueError(f"expected {n} weights, got {len(w)}")
    if np.any(w < 0):
        raise ValueError("WPV weights must be nonnegative")
    if abs(w.sum() - 1.0) > LOTTERY_TOL * max(1, len(w)):
        raise ValueError(f"WPV weights sum to {w.sum()!r}, not 1")


def _count_list(votes, candidates, line: bool) -> list[int]:
    if line and not candidates.metric.is_line:
        raise ValueError("weighted percentile voting needs candidates on the line")
    m = candidates.m
    counts = [0] * m
    for v in votes:
        if not 0 <= v < m:
            raise ValueError(f"vote for unknown candidate {v} (m={m})")
        counts[v] += 1
    if not votes:
        raise ValueError("empty vote profile")
    return counts


def wpv(weights) -> WPV:
    return WPV(weights)


class Spike(WPV):
    """Spike: WPV whose cumulative distribution over votes is ``spike_cdf``."""

    name = "spike"

    def __init__(self):
        super().__init__(spike_weights, name="spike")

    def lottery(self, votes, candidates):
        counts = self._counts(votes, candidates)
        n = len(votes)
        F = [spike_cdf(int(t), n) for t in np.cumsum(counts)]
        return np.diff([0.0] + F)

    def fast_lottery(self, votes, candidates):
        n = len(votes)
        out = []
        t = 0
        prev = 0.0
        for c in _count_list(votes, candidates, True):
            if c:
                t += c
                F = t / (2 * (n - t)) if 2 * t <= n else 1.5 - n / (2 * t)
                out.append(F - prev)
                prev = F
            else:
                out.append(0.0)
        return out


def spike(votes, candidates: CandidateSet) -> np.ndarray:
    return SPIKE.lottery(votes, candidates)


def _sorted_votes(votes, candidates) -> list[int]:
    # lean validation: percentile mechanisms sit in the audit hot loop
    if not candidates.metric.is_line:
        raise ValueError("percentile mechanisms need candidates on the line")
    s = sorted(votes)
    if s[0] < 0 or s[-1] >= candidates.m:
        raise ValueError(f"vote for unknown candidate (m={candidates.m})")
    return s


class Percentile(WPV):
    """Deterministically elects the ``k``-th smallest vote (0 = leftmost)."""

    randomized = False

    def __init__(self, k: int):
        self.k = int(k)
        super().__init__(functools.partial(percentile_weights, self.k), name=f"percentile:{self.k}")

    def choose(self, votes, candidates):
        if len(votes) <= self.k:
            raise ValueError(f"{self.name} needs more than {self.k} votes")
        return _sorted_votes(votes, candidates)[self.k]

    def lottery(self, votes, candidates):
        return point_mass(self.choose(votes, candidates), candidates.m)


class Median(WPV):
    """Elects the ceil(n/2)-th smallest vote."""

    randomized = False

    def __init__(self):
        super().__init__(median_weights, name="median")

    def choose(self, votes, candidates):
        if len(votes) == 0:
            raise ValueError("empty vote profile")
        return _sorted_votes(votes, candidates)[math.ceil(len(votes) / 2) - 1]

    def lottery(self, votes, candidates):
        return point_mass(self.choose(votes, candidates), candidates.m)


class RandomDictator(WPV):
    """Elects each agent's vote with probability 1/n; works in any metric."""

    requires_line = False

    def __init__(self):
        super().__init__(uniform_weights, name="random-dictator")

    def lottery(self, votes, candidates):
        counts = self._counts(votes, candidates)
        return counts / len(votes)

    def fast_lottery(self, votes, candidates):
        n = len(votes)
        return [c / n for c in _count_list(votes, candidates, False)]


SPIKE = Spike()
MEDIAN = Median()
RANDOM_DICTATOR = RandomDictator()


def median(votes, candidates: CandidateSet) -> np.ndarray:
    return MEDIAN.lottery(votes, candidates)


def random_dictator(votes, candidates: CandidateSet) -> np.ndarray:
    return RANDOM_DICTATOR.lottery(votes, candidates)


# ---------------------------------------------------------------------------
# counterexample mechanisms


class Claim1Ranking(Mechanism):
    """Two agents, three candidates on the line.

    Elects C1 when both rankings put C1 or C2 first with C3 last (the two
    leftmost ranking zones), else C3.
    """

    name = "claim1"
    input_kind = RANKING
    randomized = False
    anonymous = True
    LEFT_ZONES = frozenset({(0, 1, 2), (1, 0, 2)})

    def choose(self, rankings, candidates):
        if candidates.m != 3 or len(rankings) != 2:
            raise ValueError("claim1 is defined for exactly 2 agents and 3 candidates")
        rs = [check_ranking(r, 3) for r in rankings]
        return 0 if all(r in self.LEFT_ZONES for r in rs) else 2

    def lottery(self, rankings, candidates):
        return point_mass(self.choose(rankings, candidates), 3)


class Claim4Location(Mechanism):
    """Candidates at 0, 3, 4. A uniformly drawn agent's report picks the lottery:
    uniform if the report is <= 1, else (1/4, 1/2, 1/4)."""

    name = "claim4"
    input_kind = LOCATION
    anonymous = True
    LOW = np.array([1 / 3, 1 / 3, 1 / 3])
    HIGH = np.array([0.25, 0.5, 0.25])

    def lottery(self, locations, candidates):
        if not candidates.metric.is_line or candidates.locations != (0.0, 3.0, 4.0):
            raise ValueError("claim4 is defined for candidates at (0, 3, 4)")
        if len(locations) == 0:
            raise ValueError("empty profile")
        low = sum(1 for a in locations if a <= 1)
        n = len(locations)
        return (low * self.LOW + (n - low) * self.HIGH) / n


class Claim5Voting(Mechanism):
    """Two candidates. A uniformly drawn agent's vote wins w.p. 0.9, the other
    candidate w.p. 0.1."""

    name = "claim5"
    input_kind = VOTING
    anonymous = True
    KEEP = 0.9

    def lottery(self, votes, candidates):
        if candidates.m != 2:
            raise ValueError("claim5 is defined for exactly 2 candidates")
        c = vote_counts(votes, 2) / len(votes)
        return self.KEEP * c + (1 - self.KEEP) * c[::-1]


class Claim5Component(Mechanism):
    """One realised draw of claim5: agent ``agent``'s vote (keep) or its opposite."""

    input_kind = VOTING
    randomized = False

    def __init__(self, agent: int, keep: bool):
        self.agent = agent
        self.keep = keep
        self.name = f"claim5-draw:{agent}:{'keep' if keep else 'flip'}"

    def choose(self, votes, candidates):
        if candidates.m != 2:
            raise ValueError("claim5 draws are defined for exactly 2 candidates")
        v = votes[self.agent]
        return v if self.keep else 1 - v

    def lottery(self, votes, candidates):
        return point_mass(self.choose(votes, candidates), 2)


def claim5_components(n: int) -> list[tuple[float, Claim5Component]]:
    """claim5 as an explicit mixture of deterministic draws."""
    out = []
    for i in range(n):
        out.append((Claim5Voting.KEEP / n, Claim5Component(i, True)))
        out.append(((1 - Claim5Voting.KEEP) / n, Claim5Component(i, False)))
    return out


class BorderFraction(Mechanism):
    """Two-candidate location mechanism: P(C1) = (#closer to C1 + w * #on border) / n."""

    input_kind = LOCATION
    anonymous = True

    def __init__(self, border_weight: float = 0.5):
        if not 0 <= border_weight <= 1:
            raise ValueError("border weight must lie in [0, 1]")
        self.border_weight = float(border_weight)
        self.name = f"border-fraction:{self.border_weight:g}"

    def lottery(self, locations, candidates):
        if candidates.m != 2:
            raise ValueError("border-fraction is defined for exactly 2 candidates")
        left = border = 0
        for x in locations:
            d1, d2 = candidates.distances_from(x)
            if is_tie(d1, d2):
                border += 1
            elif d1 < d2:
                left += 1
        p = (left + self.border_weight * border) / len(locations)
        return np.array([p, 1 - p])


class UniformLottery(Mechanism):
    """Ignores the reports and draws a candidate uniformly."""

    anonymous = True

    def __init__(self, input_kind: str = RANKING):
        if input_kind not in KINDS:
            raise ValueError(f"unknown input kind {input_kind!r}")
        self.input_kind = input_kind
        self.name = f"uniform:{input_kind}"

    def lottery(self, actions, candidates):
        return np.full(candidates.m, 1.0 / candidates.m)


# ---------------------------------------------------------------------------
# registry


def get_mechanism(spec: str) -> Mechanism:
    """Look up a mechanism by registry name.

    Names: ``spike``, ``median``, ``random-dictator``, ``percentile:k``,
    ``wpv:w1,w2,...``, ``claim1``, ``claim4``, ``claim5``,
    ``border-fraction:w``, ``uniform:<kind>``.
    """
    spec = spec.strip()
    fixed = {
        "spike": SPIKE,
        "median": MEDIAN,
        "random-dictator": RANDOM_DICTATOR,
        "claim1": Claim1Ranking(),
        "claim4": Claim4Location(),
        "claim5": Claim5Voting(),
    }
    if spec in fixed:
        return fixed[spec]
    head, _, arg = spec.partition(":")
    try:
        if head == "percentile" and arg:
            return Percentile(int(arg))
        if head == "wpv" and arg:
            ws = [float(s) for s in arg.split(",")]
            return WPV(ws, name=f"wpv:{arg}")
        if head == "border-fraction" and arg:
            return BorderFraction(float(arg))
        if head == "uniform" and arg:
            return UniformLottery(arg)
    except ValueError as exc:
        raise KeyError(f"bad mechanism spec {spec!r}: {exc}") from None
    raise KeyError(f"unknown mechanism {spec!r}")


MECHANISM_NAMES = (
    "spike", "median", "random-dictator", "percentile:k", "wpv:<weights>",
    "claim1", "claim4", "claim5", "border-fraction:w", "uniform:<kind>",
)
