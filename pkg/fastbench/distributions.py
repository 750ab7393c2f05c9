# -----------------------------------------------------------------------------
# Summary:		Input rate profiles and payload size histograms
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Rate and size distributions that shape a workload's input stream.

Rates are held in events per second. Hourly figures are converted with
:meth:`RateProfile.from_hourly`.
"""

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from fastbench.errors import OutOfRangeError, ValidationError

PROBABILITY_TOLERANCE = 1e-9
SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class SizeBin:
    lo: int
    hi: int
    prob: float


@dataclass(frozen=True)
class SizeHistogram:
    """Probability distribution over payload sizes in bytes

    Each bin covers ``[lo, hi)``. A single bin with ``hi == lo + 1`` models a
    constant size.
    """
    bins: Tuple[SizeBin, ...]

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]]) -> 'SizeHistogram':
        return cls(tuple(SizeBin(int(lo), int(hi), float(p)) for lo, hi, p in triples))

    @classmethod
    def constant(cls, size: int) -> 'SizeHistogram':
        return cls((SizeBin(int(size), int(size) + 1, 1.0),))

    def violations(self) -> List[str]:
        """Lists every broken invariant, empty when the histogram is valid"""
        problems = []
        if not self.bins:
            problems.append('histogram has no bins')
            return problems
        prev_hi = None
        for i, b in enumerate(self.bins):
            if b.lo < 0 or b.lo >= b.hi:
                problems.append('bin {0}: lo must be >= 0 and < hi (got [{1}, {2}))'.format(i, b.lo, b.hi))
            if b.lo == 0:
                problems.append('bin {0}: sizes must be > 0'.format(i))
            if not 0.0 <= b.prob <= 1.0:
                problems.append('bin {0}: probability {1} outside [0, 1]'.format(i, b.prob))
            if prev_hi is not None and b.lo < prev_hi:
                problems.append('bin {0}: overlaps or is out of order with the previous bin'.format(i))
            prev_hi = b.hi
        total = math.fsum(b.prob for b in self.bins)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            problems.append('bin probabilities sum to {0!r}, not 1'.format(total))
        return problems

    def check(self):
        """Raises:
            ValidationError: when any invariant is broken; probabilities are never renormalized
        """
        problems = self.violations()
        if problems:
            raise ValidationError('invalid size histogram: ' + '; '.join(problems))

    def digest(self) -> str:
        payload = json.dumps([[b.lo, b.hi, repr(b.prob)] for b in self.bins], separators=(',', ':'))
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]

    def _cumulative(self) -> np.ndarray:
        cum = np.cumsum([b.prob for b in self.bins])
        cum[-1] = 1.0
        return cum


@dataclass(frozen=True)
class RateBucket:
    duration: float
    rate: float


@dataclass(frozen=True)
class RateProfile:
    """Piecewise-constant arrival rate, buckets of (duration seconds, events/second)"""
    buckets: Tuple[RateBucket, ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> 'RateProfile':
        return cls(tuple(RateBucket(float(d), float(r)) for d, r in pairs))

    @classmethod
    def from_hourly(cls, events_per_hour: Iterable[float]) -> 'RateProfile':
        """Builds one-hour buckets from hourly event counts"""
        return cls(tuple(RateBucket(SECONDS_PER_HOUR, float(n) / SECONDS_PER_HOUR) for n in events_per_hour))

    @classmethod
    def constant(cls, rate: float, duration: float) -> 'RateProfile':
        return cls((RateBucket(float(duration), float(rate)),))

    @property
    def span(self) -> float:
        return math.fsum(b.duration for b in self.buckets)

    @property
    def peak_rate(self) -> float:
        return max((b.rate for b in self.buckets), default=0.0)

    def starts(self) -> List[float]:
        """Start time in seconds of every bucket"""
        out, t = [], 0.0
        for b in self.buckets:
            out.append(t)
            t += b.duration
        return out

    def violations(self) -> List[str]:
        problems = []
        for i, b in enumerate(self.buckets):
            if not b.duration > 0:
                problems.append('bucket {0}: duration must be > 0 (got {1})'.format(i, b.duration))
            if not b.rate >= 0:
                problems.append('bucket {0}: rate must be >= 0 (got {1})'.format(i, b.rate))
        return problems

    def check(self):
        problems = self.violations()
        if problems:
            raise ValidationError('invalid rate profile: ' + '; '.join(problems))

    def digest(self) -> str:
        payload = json.dumps([[repr(b.duration), repr(b.rate)] for b in self.buckets], separators=(',', ':'))
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


def sample_sizes(hist: SizeHistogram, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draws ``count`` payload sizes

    A bin is chosen with its probability, then the size is uniform within the bin.

    Args:
        hist (SizeHistogram): size distribution
        rng (np.random.Generator): seeded random source owned by the caller
        count (int): number of sizes to draw

    Raises:
        ValidationError: on an invalid histogram

    Returns:
        np.ndarray: int64 sizes in bytes
    """
    hist.check()
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    lo = np.array([b.lo for b in hist.bins], dtype=np.int64)
    width = np.array([b.hi - b.lo for b in hist.bins], dtype=np.int64)
    index = np.searchsorted(hist._cumulative(), rng.random(count), side='right')
    np.minimum(index, len(hist.bins) - 1, out=index)
    within = np.floor(rng.random(count) * width[index]).astype(np.int64)
    return lo[index] + np.minimum(within, width[index] - 1)


def sample_size(hist: SizeHistogram, rng: np.random.Generator) -> int:
    """Draws a single payload size in bytes, see :func:`sample_sizes`"""
    return int(sample_sizes(hist, rng, 1)[0])


def expected_total(profile: RateProfile) -> float:
    """Expected number of events, the sum of duration x rate"""
    return math.fsum(b.duration * b.rate for b in profile.buckets)


def instantaneous_rate(profile: RateProfile, t: float) -> float:
    """Rate of the bucket containing ``t`` seconds

    Raises:
        OutOfRangeError: when t is outside [0, span)
    """
    if t < 0:
        raise OutOfRangeError('t={0} s is before the profile start'.format(t))
    start = 0.0
    for b in profile.buckets:
        if t < start + b.duration:
            return b.rate
        start += b.duration
    raise OutOfRangeError('t={0} s is past the profile span of {1} s'.format(t, start))


def compress_time(profile: RateProfile, factor: float) -> RateProfile:
    """Divides every bucket duration by ``factor``, rates are unchanged

    Raises:
        ValidationError: when factor is not positive
    """
    if not factor > 0:
        raise ValidationError('compression factor must be > 0 (got {0})'.format(factor))
    return RateProfile(tuple(RateBucket(b.duration / factor, b.rate) for b in profile.buckets))


def scale_rate(profile: RateProfile, factor: float) -> RateProfile:
    """Multiplies every bucket rate by ``factor``, durations are unchanged

    Raises:
        ValidationError: when factor is not positive
    """
    if not factor > 0:
        raise ValidationError('rate scale factor must be > 0 (got {0})'.format(factor))
    return RateProfile(tuple(RateBucket(b.duration, b.rate * factor) for b in profile.buckets))
