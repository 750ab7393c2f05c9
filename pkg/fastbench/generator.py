# -----------------------------------------------------------------------------
# Summary:		Event trace generation, persistence and wall-clock replay
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Pre-generates timestamped, sized events from a rate profile and size
histogram, stores them as CSV and replays them at wall-clock speed.
"""

import hashlib
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional

import numpy as np

from fastbench.clock import now, sleep_until
from fastbench.distributions import RateProfile, SizeHistogram, sample_sizes
from fastbench.enums import ArrivalMode
from fastbench.errors import ReplayStallError, TraceFormatError, ValidationError

logger = logging.getLogger(__name__)

GENERATOR_VERSION = 1
TRACE_HEADER = 'id,offset_ms,size_bytes'


@dataclass(frozen=True)
class EventRecord:
    id: int
    offset: int
    size: int


@dataclass(frozen=True)
class TraceMetadata:
    seed: int
    profile_digest: str
    histogram_digest: str
    generator_version: int = GENERATOR_VERSION
    arrivals: str = ArrivalMode.EVEN.value

    def lines(self) -> List[str]:
        return ['# seed={0}'.format(self.seed),
                '# profile_digest={0}'.format(self.profile_digest),
                '# histogram_digest={0}'.format(self.histogram_digest),
                '# generator_version={0}'.format(self.generator_version),
                '# arrivals={0}'.format(self.arrivals)]


@dataclass(eq=False)
class Trace:
    """Column-wise event trace, ids are the dense row index

    Args:
        offsets (np.ndarray): int64 milliseconds from trace start, non-decreasing
        sizes (np.ndarray): int64 payload sizes in bytes
        metadata (TraceMetadata): provenance of the trace
    """
    offsets: np.ndarray
    sizes: np.ndarray
    metadata: TraceMetadata

    def __len__(self):
        return len(self.offsets)

    def __getitem__(self, i: int) -> EventRecord:
        return EventRecord(int(i), int(self.offsets[i]), int(self.sizes[i]))

    def __iter__(self) -> Iterator[EventRecord]:
        for i, (offset, size) in enumerate(zip(self.offsets.tolist(), self.sizes.tolist())):
            yield EventRecord(i, offset, size)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.metadata == other.metadata
                and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.sizes, other.sizes))

    @property
    def span_ms(self) -> int:
        return int(self.offsets[-1]) if len(self) else 0

    def content_digest(self) -> str:
        h = hashlib.sha256()
        h.update('\n'.join(self.metadata.lines()).encode('utf-8'))
        h.update(np.ascontiguousarray(self.offsets, dtype='<i8').tobytes())
        h.update(np.ascontiguousarray(self.sizes, dtype='<i8').tobytes())
        return h.hexdigest()


def bucket_count(duration: float, rate: float) -> int:
    """Events generated for a bucket, duration x rate rounded half up"""
    return int(math.floor(duration * rate + 0.5))


def generate(profile: RateProfile, hist: SizeHistogram, seed: int,
             arrivals: ArrivalMode = ArrivalMode.EVEN) -> Trace:
    """Generates a deterministic trace

    Each bucket receives exactly ``round(duration x rate)`` events, evenly spaced
    or, in poisson mode, placed by seeded exponential gaps renormalised to the
    bucket.

    Args:
        profile (RateProfile): arrival rate over time
        hist (SizeHistogram): payload size distribution
        seed (int): random seed
        arrivals (ArrivalMode, optional): spacing within a bucket. Defaults to EVEN.

    Raises:
        ValidationError: on an invalid profile or histogram

    Returns:
        Trace: the generated trace
    """
    profile.check()
    hist.check()
    arrivals = ArrivalMode(arrivals)
    size_rng, gap_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    chunks = []
    for start, b in zip(profile.starts(), profile.buckets):
        n = bucket_count(b.duration, b.rate)
        if n == 0:
            continue
        start_ms, dur_ms = start * 1000.0, b.duration * 1000.0
        if arrivals == ArrivalMode.POISSON:
            gaps = gap_rng.exponential(1.0, n + 1)
            position = np.cumsum(gaps)[:n] / gaps.sum() * dur_ms
        else:
            position = np.arange(n, dtype=np.float64) * (dur_ms / n)
        chunks.append(np.floor(start_ms + position).astype(np.int64))
    offsets = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    # float noise at bucket joins must not reorder events
    offsets = np.maximum.accumulate(offsets) if len(offsets) else offsets
    sizes = sample_sizes(hist, size_rng, len(offsets))
    metadata = TraceMetadata(seed=int(seed), profile_digest=profile.digest(),
                             histogram_digest=hist.digest(), arrivals=arrivals.value)
    logger.debug('generated %d events over %d buckets', len(offsets), len(profile.buckets))
    return Trace(offsets, sizes, metadata)


def truncate(trace: Trace, cap_s: float) -> Trace:
    """Keeps events whose offset is below ``cap_s`` seconds"""
    keep = int(np.searchsorted(trace.offsets, cap_s * 1000.0, side='left'))
    return Trace(trace.offsets[:keep], trace.sizes[:keep], trace.metadata)


def write_trace(trace: Trace, path):
    """Writes a trace as UTF-8 CSV preceded by ``#`` metadata lines

    Args:
        trace (Trace): trace to write
        path (str or Path): destination file
    """
    with open(path, 'w', encoding='utf-8', newline='\n') as fp:
        fp.write('\n'.join(trace.metadata.lines()) + '\n')
        fp.write(TRACE_HEADER + '\n')
        if len(trace):
            table = np.column_stack((np.arange(len(trace), dtype=np.int64), trace.offsets, trace.sizes))
            np.savetxt(fp, table, fmt='%d', delimiter=',', newline='\n')


def read_trace(path, profile: RateProfile = None, hist: SizeHistogram = None) -> Trace:
    """Reads a trace written by :func:`write_trace`

    Args:
        path (str or Path): trace file
        profile (RateProfile, optional): when given, its digest is compared with the metadata
        hist (SizeHistogram, optional): when given, its digest is compared with the metadata

    Raises:
        TraceFormatError: on a malformed file, naming the offending line

    Returns:
        Trace: the trace read
    """
    meta = {}
    offsets, sizes = [], []
    header_seen = False
    prev_offset = None
    with open(path, 'r', encoding='utf-8') as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.rstrip('\n')
            if not header_seen:
                if line.startswith('#'):
                    key, sep, value = line[1:].strip().partition('=')
                    if not sep:
                        raise TraceFormatError('metadata line without "="', lineno)
                    meta[key.strip()] = value.strip()
                    continue
                if line != TRACE_HEADER:
                    raise TraceFormatError('expected header {0!r}'.format(TRACE_HEADER), lineno)
                header_seen = True
                continue
            if not line:
                continue
            parts = line.split(',')
            if len(parts) != 3:
                raise TraceFormatError('expected 3 fields, found {0}'.format(len(parts)), lineno)
            try:
                event_id, offset, size = (int(p) for p in parts)
            except ValueError:
                raise TraceFormatError('non-integer field in {0!r}'.format(line), lineno)
            if event_id != len(offsets):
                raise TraceFormatError('id {0} out of sequence, expected {1}'.format(event_id, len(offsets)), lineno)
            if prev_offset is not None and offset < prev_offset:
                raise TraceFormatError('offset {0} decreases'.format(offset), lineno)
            if size <= 0:
                raise TraceFormatError('size must be > 0', lineno)
            prev_offset = offset
            offsets.append(offset)
            sizes.append(size)
    if not header_seen:
        raise TraceFormatError('missing header {0!r}'.format(TRACE_HEADER))
    try:
        metadata = TraceMetadata(seed=int(meta['seed']),
                                 profile_digest=meta['profile_digest'],
                                 histogram_digest=meta['histogram_digest'],
                                 generator_version=int(meta['generator_version']),
                                 arrivals=meta.get('arrivals', ArrivalMode.EVEN.value))
    except (KeyError, ValueError) as err:
        raise TraceFormatError('incomplete metadata ({0})'.format(err))
    if profile is not None and profile.digest() != metadata.profile_digest:
        logger.warning('trace %s: profile digest %s does not match the workload (%s)',
                       path, metadata.profile_digest, profile.digest())
    if hist is not None and hist.digest() != metadata.histogram_digest:
        logger.warning('trace %s: histogram digest %s does not match the workload (%s)',
                       path, metadata.histogram_digest, hist.digest())
    return Trace(np.array(offsets, dtype=np.int64), np.array(sizes, dtype=np.int64), metadata)


@dataclass
class ReplayStats:
    """Outcome of a replay

    ``errors_ms`` holds, per event id, emission time minus scheduled time.
    """
    emitted: int
    start: float
    errors_ms: np.ndarray = field(repr=False)
    first_emit: float = 0.0
    last_emit: float = 0.0

    @property
    def span_ms(self) -> float:
        return (self.last_emit - self.first_emit) * 1000.0 if self.emitted else 0.0

    def abs_error_percentile(self, q: float) -> float:
        if not self.emitted:
            return 0.0
        return float(np.percentile(np.abs(self.errors_ms[:self.emitted]), q))

    @property
    def p95_error_ms(self) -> float:
        return self.abs_error_percentile(95)

    @property
    def max_lateness_ms(self) -> float:
        return float(self.errors_ms[:self.emitted].max()) if self.emitted else 0.0


def replay(trace: Trace, time_scale: float, emit: Callable, workers: int = 1,
           stall_budget: float = 5.0, start: Optional[float] = None) -> ReplayStats:
    """Replays a trace at wall-clock speed

    Event ``i`` is emitted at ``start + offset_i / time_scale``. With several
    workers, events are dealt round-robin by id and each worker emits in id order.

    Args:
        trace (Trace): events to replay
        time_scale (float): speed-up factor applied to inter-arrival gaps
        emit (Callable): consumer called as ``emit(record, ingress)``, ingress on the :func:`now` clock
        workers (int, optional): emitter threads. Defaults to 1.
        stall_budget (float, optional): seconds an emission may lag its schedule. Defaults to 5.0.
        start (float, optional): replay epoch on the :func:`now` clock. Defaults to now.

    Raises:
        ValidationError: on a non-positive time scale or worker count
        ReplayStallError: when the consumer holds replay back beyond the stall budget
        Exception: the first exception raised by ``emit``, re-raised once every worker has stopped

    Returns:
        ReplayStats: per-event scheduling error and span
    """
    if not time_scale > 0:
        raise ValidationError('time scale must be > 0 (got {0})'.format(time_scale))
    if workers < 1:
        raise ValidationError('replay needs at least one worker')
    n = len(trace)
    errors = np.zeros(n, dtype=np.float64)
    schedule = trace.offsets.astype(np.float64) / (1000.0 * time_scale)
    origin = now() if start is None else start
    abort = threading.Event()
    failures = []
    raised = []
    emitted = [0] * workers
    first_last = [[math.inf, -math.inf] for _ in range(workers)]

    def run(w: int):
        for i in range(w, n, workers):
            if abort.is_set():
                return
            deadline = origin + schedule[i]
            if now() < deadline:
                sleep_until(deadline)
            ingress = now()
            lateness = ingress - deadline
            if lateness > stall_budget:
                failures.append((i, lateness))
                abort.set()
                return
            try:
                emit(trace[i], ingress)
            except Exception as err:
                raised.append((i, err))
                abort.set()
                return
            errors[i] = lateness * 1000.0
            emitted[w] += 1
            first_last[w][0] = min(first_last[w][0], ingress)
            first_last[w][1] = ingress
            # time spent inside emit counts against the budget too
            held = now() - deadline
            if held > stall_budget:
                failures.append((i, held))
                abort.set()
                return

    if workers == 1:
        run(0)
    else:
        threads = [threading.Thread(target=run, args=(w,), name='replay-{0}'.format(w), daemon=True)
                   for w in range(workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    total = sum(emitted)
    if raised:
        i, err = min(raised, key=lambda r: r[0])
        logger.error('replay aborted: emitting event %d failed after %d emissions: %s', i, total, err)
        raise err
    if failures:
        i, lateness = min(failures)
        report = 'event {0} was {1:.1f} ms behind schedule after {2} emissions (budget {3:.1f} ms)'.format(
            i, lateness * 1000.0, total, stall_budget * 1000.0)
        logger.error('replay aborted: %s', report)
        raise ReplayStallError(report, lateness_ms=lateness * 1000.0, emitted=total)
    stats = ReplayStats(emitted=total, start=origin, errors_ms=errors,
                        first_emit=min(fl[0] for fl in first_last) if total else origin,
                        last_emit=max(fl[1] for fl in first_last) if total else origin)
    logger.info('replayed %d events, p95 scheduling error %.3f ms', total, stats.p95_error_ms)
    return stats
