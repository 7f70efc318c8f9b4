"""Birkhoff/Monte Carlo bookkeeping: accumulators, replica CIs, rate fits, RNG streams."""

from __future__ import annotations

import math
import statistics
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from scipy.special import betainc

from .errors import EmptyEstimate, FitError
from .interval import Interval

# -- reproducible random streams ----------------------------------------------

_U64_CTX = gmpy2.context(precision=66)
_BUFFER = 4096


def experiment_key(experiment: str | int) -> int:
    """Stable 32-bit key for an experiment name (CRC-32 of its UTF-8 bytes)."""
    if isinstance(experiment, int):
        return experiment
    return zlib.crc32(experiment.encode("utf-8"))


class RngStream:
    """Deterministic random stream for one (experiment, replica) pair.

    The generator is numpy's PCG64 seeded through ``SeedSequence(seed,
    spawn_key=(crc32(experiment), replica))``.  Distinct ids give
    independent streams; the same id always replays the same draws.
    """

    def __init__(self, seed: int, experiment: str | int = 0, replica: int = 0):
        self.seed = int(seed)
        self.experiment = experiment
        self.replica = int(replica)
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(experiment_key(experiment), self.replica))
        self.generator = np.random.Generator(np.random.PCG64(ss))
        self._raw = self.generator.bit_generator.random_raw
        self._buf: list[int] = []

    @property
    def stream_id(self) -> tuple:
        return (self.experiment, self.replica)

    def bits64(self) -> int:
        if not self._buf:
            self._buf = self._raw(_BUFFER).tolist()
            self._buf.reverse()
        return self._buf.pop()

    def uniform_mpfr(self) -> gmpy2.mpfr:
        """Exact dyadic uniform ``(2k + 1) / 2**65`` with 64 random bits, in (0, 1)."""
        return _U64_CTX.div_2exp(gmpy2.mpz(2 * self.bits64() + 1), 65)

    def uniform(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits of one draw."""
        return (self.bits64() >> 11) * 2.0 ** -53


def rng_stream(seed: int, experiment: str | int = 0, replica: int = 0) -> RngStream:
    return RngStream(seed, experiment, replica)


# -- weighted Birkhoff sums ---------------------------------------------------

@dataclass
class BirkhoffAccumulator:
    """Running sums for a weighted Birkhoff mean ``sum(w*A) / sum(w)``.

    Values may be floats or ``Interval`` enclosures; with intervals the
    deterministic error is carried through to ``ratio``.
    """

    sum_wA: object = 0.0
    sum_w: object = 0.0
    count: int = 0

    def add(self, weight, value) -> "BirkhoffAccumulator":
        if not isinstance(weight, Interval) and weight < 0:
            raise ValueError("weights must be non-negative")
        self.sum_wA = self.sum_wA + weight * value
        self.sum_w = self.sum_w + weight
        self.count += 1
        return self

    def merge(self, other: "BirkhoffAccumulator") -> "BirkhoffAccumulator":
        return BirkhoffAccumulator(self.sum_wA + other.sum_wA,
                                   self.sum_w + other.sum_w,
                                   self.count + other.count)

    def ratio(self):
        w = self.sum_w
        if isinstance(w, Interval):
            if w.hi <= 0:
                raise EmptyEstimate("ratio of an accumulator with zero total weight")
            return self.sum_wA / w
        if w <= 0:
            raise EmptyEstimate("ratio of an accumulator with zero total weight")
        return self.sum_wA / w


def accumulate(acc: BirkhoffAccumulator, weight, value) -> BirkhoffAccumulator:
    return acc.add(weight, value)


def ratio(acc: BirkhoffAccumulator):
    return acc.ratio()


def merge_tree(accs: Sequence[BirkhoffAccumulator]) -> BirkhoffAccumulator:
    """Pairwise (balanced binary tree) reduction in list order."""
    if not accs:
        return BirkhoffAccumulator()
    level = list(accs)
    while len(level) > 1:
        nxt = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


# -- replica statistics -------------------------------------------------------

@dataclass
class ReplicaEstimate:
    """Per-replica Birkhoff means (interval midpoints) with their radii."""

    means: list[float]
    radii: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.radii:
            self.radii = [0.0] * len(self.means)

    @classmethod
    def from_intervals(cls, values: Iterable[Interval]) -> "ReplicaEstimate":
        vals = list(values)
        return cls([float(v.midpoint()) for v in vals], [float(v.radius()) for v in vals])

    @property
    def R(self) -> int:
        return len(self.means)

    @property
    def det_err(self) -> float:
        """Radius of the enclosure of the replica mean."""
        return math.fsum(self.radii) / self.R if self.R else 0.0


def t_cdf(t: float, df: float) -> float:
    """Student-t CDF through the regularized incomplete beta function."""
    x = df / (df + t * t)
    tail = 0.5 * float(betainc(df / 2.0, 0.5, x))
    return 1.0 - tail if t >= 0 else tail


def t_quantile(p: float, df: float, tol: float = 1e-13) -> float:
    """Inverse Student-t CDF by bisection on ``t_cdf``."""
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie in (0, 1)")
    if p < 0.5:
        return -t_quantile(1.0 - p, df, tol)
    lo, hi = 0.0, 1.0
    while t_cdf(hi, df) < p:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def student_ci(estimates, level: float = 0.99) -> tuple[float, float]:
    """Mean and CI halfwidth ``t_{(1+level)/2, R-1} * s / sqrt(R)``."""
    means = estimates.means if isinstance(estimates, ReplicaEstimate) else list(estimates)
    R = len(means)
    if R < 2:
        raise ValueError("at least two replicas are needed for a confidence interval")
    mean = math.fsum(means) / R
    s = math.sqrt(math.fsum((m - mean) ** 2 for m in means) / (R - 1))
    return mean, t_quantile(0.5 * (1.0 + level), R - 1) * s / math.sqrt(R)


# -- exponential rate fitting -------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    n_used: int
    floor: float

    @property
    def xi(self) -> float:
        """Per-step decay factor ``exp(slope)``."""
        return math.exp(self.slope)


def fit_rate(ns: Sequence[float], values: Sequence[float], floor: float | None = None,
             ci: Sequence[float] | None = None, min_points: int = 4) -> RateFit:
    """Least-squares fit of ``log|value|`` against ``n`` above a noise floor.

    The floor defaults to the median of ``ci`` (or 0).  Points are taken in
    order of ``n`` until the first one that drops to the floor, so noise
    excursions past the floor are not fitted.
    """
    if floor is None:
        floor = statistics.median(ci) if ci is not None and len(ci) else 0.0
    order = np.argsort(np.asarray(ns, dtype=float), kind="stable")
    xs, ys = [], []
    for i in order:
        v = abs(float(values[i]))
        if not v > floor:
            break
        xs.append(float(ns[i]))
        ys.append(math.log(v))
    if len(xs) < min_points:
        raise FitError(f"only {len(xs)} points above the floor {floor:.3g}; need {min_points}")
    x = np.asarray(xs)
    y = np.asarray(ys)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, len(xs), float(floor))
