# -----------------------------------------------------------------------------
# Summary:		Latency recording, SLA accounting, CPU sampling and report export
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Per-event latency samples are attributed to the bucket of their ingress
time. Percentiles use the nearest-rank method so every reported figure can be
recounted from ``latency_samples.csv``.
"""

import csv
import logging
import math
import os
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import psutil

from fastbench.clock import now
from fastbench.errors import ValidationError, VerificationError

logger = logging.getLogger(__name__)

SUMMARY_FILE = 'summary.txt'
SAMPLES_FILE = 'latency_samples.csv'
BUCKETS_FILE = 'buckets.csv'
CPU_FILE = 'cpu.csv'
BACKLOG_FILE = 'backlog.csv'

SAMPLES_HEADER = ['event_id', 'ingress_ms', 'egress_ms', 'sink']
BUCKETS_HEADER = ['bucket', 'start_s', 'in_count', 'out_count', 'min_ms', 'median_ms', 'p95_ms', 'max_ms',
                  'violations']
CPU_HEADER = ['t_s', 'util_pct']
BACKLOG_HEADER = ['t_s', 'in_flight']

EMPTY = 'empty'
CPU_UNAVAILABLE = 'unavailable'


def quantize_ms(value: float) -> float:
    """Rounds a millisecond timestamp to the microsecond resolution written to reports"""
    return round(value, 3)


def fmt_ms(value: float) -> str:
    return '{0:.3f}'.format(value)


@dataclass(frozen=True)
class LatencySample:
    event_id: int
    ingress: float
    egress: float
    sink: str
    size: int = 0

    @property
    def latency(self) -> float:
        return self.egress - self.ingress


def nearest_rank(sorted_values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile of an ascending sequence, q in (0, 100]"""
    n = len(sorted_values)
    rank = max(1, int(math.ceil(q / 100.0 * n)))
    return sorted_values[min(rank, n) - 1]


class MetricsRecorder:
    """Collects latency samples from many threads

    Each thread appends to its own buffer. Buffers are merged, and duplicate
    event ids dropped, when :meth:`samples` is called after the run.
    """
    def __init__(self):
        self._local = threading.local()
        self._buffers: List[list] = []
        self._lock = threading.Lock()
        self._rejected = 0

    def _buffer(self) -> list:
        buf = getattr(self._local, 'buf', None)
        if buf is None:
            buf = self._local.buf = []
            with self._lock:
                self._buffers.append(buf)
        return buf

    def record(self, sample: LatencySample) -> bool:
        """Retains a sample

        Args:
            sample (LatencySample): sample to keep, timestamps in milliseconds

        Returns:
            bool: False when the sample was rejected (egress before ingress)
        """
        if sample.egress < sample.ingress:
            logger.warning('rejected sample for event %d: egress %.3f before ingress %.3f',
                           sample.event_id, sample.egress, sample.ingress)
            with self._lock:
                self._rejected += 1
            return False
        self._buffer().append(sample)
        return True

    @property
    def rejected(self) -> int:
        return self._rejected

    def __len__(self):
        with self._lock:
            return sum(len(b) for b in self._buffers)

    def samples(self) -> List[LatencySample]:
        """Merged samples ordered by event id, each id exactly once"""
        with self._lock:
            merged = [s for b in self._buffers for s in b]
        merged.sort(key=lambda s: s.event_id)
        unique = []
        for s in merged:
            if unique and unique[-1].event_id == s.event_id:
                logger.warning('duplicate sample for event %d dropped', s.event_id)
                continue
            unique.append(s)
        return unique


class CpuSampler:
    """Samples CPU utilisation on a timer thread

    Process mode measures this process and its children, normalised by the
    number of cores so values stay within [0, 100]. Host mode measures the
    whole machine.

    Args:
        interval (float, optional): seconds between samples. Defaults to 1.
        host (bool, optional): measure the whole host. Defaults to False.
        epoch (float, optional): time origin of the sample series on the :func:`now` clock
    """
    def __init__(self, interval: float = 1.0, host: bool = False, epoch: float = None):
        if not interval > 0:
            raise ValidationError('sampling interval must be > 0')
        self.interval = interval
        self.host = host
        self.epoch = epoch
        self.samples: List[Tuple[float, float]] = []
        self.available = True
        self._stop = threading.Event()
        self._thread = None
        self._procs: Dict[int, psutil.Process] = {}
        self._cores = psutil.cpu_count() or 1

    def _prime(self):
        if self.host:
            psutil.cpu_percent(interval=None)
        else:
            self._proc_percent()

    def _proc_percent(self) -> float:
        me = psutil.Process()
        current = [me] + me.children(recursive=True)
        total = 0.0
        for p in current:
            tracked = self._procs.setdefault(p.pid, p)
            try:
                total += tracked.cpu_percent(interval=None)
            except (psutil.NoSuchProcess, psutil.ZombieProcess):
                self._procs.pop(p.pid, None)
        return total / self._cores

    def _read(self) -> float:
        value = psutil.cpu_percent(interval=None) if self.host else self._proc_percent()
        return min(100.0, max(0.0, value))

    def start(self) -> 'CpuSampler':
        if self.epoch is None:
            self.epoch = now()
        try:
            self._prime()
        except (psutil.Error, NotImplementedError, OSError) as err:
            logger.warning('cpu sampling unavailable: %s', err)
            self.available = False
            return self
        self._thread = threading.Thread(target=self._run, name='cpu-sampler', daemon=True)
        self._thread.start()
        return self

    def _run(self):
        tick = 1
        while not self._stop.wait(max(0.0, self.epoch + tick * self.interval - now())):
            try:
                self.samples.append((tick * self.interval, self._read()))
            except (psutil.Error, NotImplementedError, OSError) as err:
                logger.warning('cpu sampling stopped: %s', err)
                self.available = False
                return
            tick += 1

    def stop(self) -> List[Tuple[float, float]]:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        return self.samples


def cpu_sampler(interval: float = 1.0, host: bool = False, epoch: float = None) -> CpuSampler:
    """Starts a :class:`CpuSampler`, stop it to collect the series"""
    return CpuSampler(interval=interval, host=host, epoch=epoch).start()


@dataclass
class BucketSummary:
    index: int
    start_s: float
    in_count: int = 0
    out_count: int = 0
    min_ms: Optional[float] = None
    median_ms: Optional[float] = None
    p95_ms: Optional[float] = None
    max_ms: Optional[float] = None
    violations: int = 0

    def row(self) -> List[str]:
        def cell(v):
            return '' if v is None else fmt_ms(v)
        return [str(self.index), fmt_ms(self.start_s), str(self.in_count), str(self.out_count),
                cell(self.min_ms), cell(self.median_ms), cell(self.p95_ms), cell(self.max_ms),
                str(self.violations)]


@dataclass
class RunReport:
    sla_ms: float
    bucket_s: float
    total: int
    violations: int
    buckets: List[BucketSummary]
    samples: List[LatencySample] = field(repr=False)
    cpu: Optional[List[Tuple[float, float]]] = field(default=None, repr=False)
    backlog: List[Tuple[float, int]] = field(default_factory=list, repr=False)
    backlog_at_injection_end: int = 0
    sink_counts: Dict[str, int] = field(default_factory=dict)
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.total == 0

    @property
    def violation_fraction(self) -> Optional[float]:
        return None if self.empty else self.violations / self.total

    @property
    def violation_pct(self) -> Optional[float]:
        f = self.violation_fraction
        return None if f is None else f * 100.0

    @property
    def min_latency_ms(self) -> Optional[float]:
        return None if self.empty else min(s.latency for s in self.samples)

    def in_flight_halves(self) -> Tuple[int, int]:
        """Max in-flight during the first and second half of injection"""
        if not self.backlog or self.empty:
            return 0, 0
        end = max(s.ingress for s in self.samples) / 1000.0
        first = [d for t, d in self.backlog if t <= end / 2.0]
        second = [d for t, d in self.backlog if end / 2.0 < t <= end]
        return max(first, default=0), max(second, default=0)


def finalize(samples: Sequence[LatencySample], sla: float, bucket: float, span: float = None,
             cpu: Optional[List[Tuple[float, float]]] = None, metadata: Dict[str, str] = None) -> RunReport:
    """Aggregates samples into a report

    Args:
        samples (Sequence[LatencySample]): drained samples, timestamps in ms from the run epoch
        sla (float): SLA threshold in milliseconds, latency above it is a violation
        bucket (float): bucket width in seconds
        span (float, optional): run span in seconds. Defaults to the last ingress.
        cpu (list, optional): ``(t_s, util_pct)`` series, None when not sampled
        metadata (dict, optional): run metadata copied into the summary

    Raises:
        ValidationError: on a non-positive SLA or bucket width

    Returns:
        RunReport: aggregated report, with an explicit empty marker when there are no samples
    """
    if not sla > 0 or not bucket > 0:
        raise ValidationError('sla and bucket width must be > 0')
    # everything is held at the resolution written to disk so recounts match exactly
    sla, bucket = quantize_ms(sla), quantize_ms(bucket)
    samples = sorted((LatencySample(s.event_id, quantize_ms(s.ingress), quantize_ms(s.egress), s.sink, s.size)
                      for s in samples), key=lambda s: s.event_id)
    ingress = np.array([s.ingress for s in samples], dtype=np.float64)
    egress = np.array([s.egress for s in samples], dtype=np.float64)
    latency = egress - ingress
    bucket_ms = bucket * 1000.0
    if span is None:
        span = float(ingress.max()) / 1000.0 if len(samples) else 0.0
    n_buckets = int(math.ceil(span / bucket - 1e-9)) if span > 0 else 0
    if len(samples):
        last = max(float(ingress.max()), float(egress.max()))
        n_buckets = max(n_buckets, int(last // bucket_ms) + 1)
    in_index = (ingress // bucket_ms).astype(np.int64)
    out_index = (egress // bucket_ms).astype(np.int64)

    buckets = []
    for b in range(n_buckets):
        summary = BucketSummary(index=b, start_s=b * bucket)
        mask = in_index == b
        summary.in_count = int(mask.sum())
        summary.out_count = int((out_index == b).sum())
        if summary.in_count:
            values = np.sort(latency[mask])
            summary.min_ms = float(values[0])
            summary.median_ms = float(nearest_rank(values, 50))
            summary.p95_ms = float(nearest_rank(values, 95))
            summary.max_ms = float(values[-1])
            summary.violations = int((values > sla).sum())
        buckets.append(summary)

    violations = int((latency > sla).sum())
    sink_counts: Dict[str, int] = {}
    for s in samples:
        sink_counts[s.sink] = sink_counts.get(s.sink, 0) + 1

    backlog, at_end = _in_flight(ingress, egress)
    report = RunReport(sla_ms=sla, bucket_s=bucket, total=len(samples), violations=violations,
                       buckets=buckets, samples=samples, cpu=cpu, backlog=backlog,
                       backlog_at_injection_end=at_end, sink_counts=sink_counts,
                       metadata=dict(metadata or {}))
    if report.empty:
        logger.warning('run produced no samples, report marked empty')
    return report


def _in_flight(ingress: np.ndarray, egress: np.ndarray) -> Tuple[List[Tuple[float, int]], int]:
    if not len(ingress):
        return [], 0
    ins, outs = np.sort(ingress), np.sort(egress)
    horizon = int(math.ceil(float(outs[-1]) / 1000.0))
    series = []
    for t in range(1, horizon + 1):
        t_ms = t * 1000.0
        arrived = np.searchsorted(ins, t_ms, side='right')
        series.append((float(t), int(arrived - np.searchsorted(outs, t_ms, side='right'))))
    end = float(ins[-1])
    at_end = int(len(ins) - np.searchsorted(outs, end, side='right'))
    return series, at_end


def _summary_lines(report: RunReport) -> List[str]:
    lines = ['fastbench run report', '']
    for key in sorted(report.metadata):
        lines.append('{0}: {1}'.format(key, report.metadata[key]))
    lines.append('sla_ms: {0}'.format(fmt_ms(report.sla_ms)))
    lines.append('bucket_s: {0}'.format(fmt_ms(report.bucket_s)))
    lines.append('buckets: {0}'.format(len(report.buckets)))
    if report.empty:
        lines.append('samples: {0}'.format(EMPTY))
    lines.append('total_samples: {0}'.format(report.total))
    lines.append('violations: {0}'.format(report.violations))
    if report.empty:
        lines.append('violation_pct: {0}'.format(EMPTY))
    else:
        lines.append('violation_pct: {0:.2f}'.format(report.violation_pct))
        lines.append('min_latency_ms: {0}'.format(fmt_ms(report.min_latency_ms)))
    for sink in sorted(report.sink_counts):
        lines.append('sink.{0}: {1}'.format(sink, report.sink_counts[sink]))
    lines.append('backlog_at_injection_end: {0}'.format(report.backlog_at_injection_end))
    first, second = report.in_flight_halves()
    lines.append('max_in_flight_first_half: {0}'.format(first))
    lines.append('max_in_flight_second_half: {0}'.format(second))
    if report.cpu is None:
        lines.append('cpu: {0}'.format(CPU_UNAVAILABLE))
    else:
        values = [u for _, u in report.cpu]
        lines.append('cpu_samples: {0}'.format(len(values)))
        if values:
            lines.append('cpu_mean_pct: {0:.1f}'.format(sum(values) / len(values)))
    return lines


def export(report: RunReport, directory):
    """Writes summary.txt, latency_samples.csv, buckets.csv, cpu.csv and backlog.csv

    Args:
        report (RunReport): finalized report
        directory (str or Path): existing or new output directory

    Raises:
        ValidationError: when the directory cannot be written
    """
    try:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, SUMMARY_FILE), 'w', encoding='utf-8', newline='\n') as fp:
            fp.write('\n'.join(_summary_lines(report)) + '\n')
        with open(os.path.join(directory, SAMPLES_FILE), 'w', encoding='utf-8', newline='') as fp:
            writer = csv.writer(fp, lineterminator='\n')
            writer.writerow(SAMPLES_HEADER)
            for s in report.samples:
                writer.writerow([s.event_id, fmt_ms(s.ingress), fmt_ms(s.egress), s.sink])
        with open(os.path.join(directory, BUCKETS_FILE), 'w', encoding='utf-8', newline='') as fp:
            writer = csv.writer(fp, lineterminator='\n')
            writer.writerow(BUCKETS_HEADER)
            for b in report.buckets:
                writer.writerow(b.row())
        with open(os.path.join(directory, CPU_FILE), 'w', encoding='utf-8', newline='') as fp:
            writer = csv.writer(fp, lineterminator='\n')
            writer.writerow(CPU_HEADER)
            for t, u in report.cpu or ():
                writer.writerow([fmt_ms(t), '{0:.1f}'.format(u)])
        with open(os.path.join(directory, BACKLOG_FILE), 'w', encoding='utf-8', newline='') as fp:
            writer = csv.writer(fp, lineterminator='\n')
            writer.writerow(BACKLOG_HEADER)
            for t, d in report.backlog:
                writer.writerow([fmt_ms(t), d])
    except OSError as err:
        raise ValidationError('cannot write report to {0}: {1}'.format(directory, err))
    logger.info('report written to %s', directory)


def read_summary(directory) -> Dict[str, str]:
    summary = {}
    with open(os.path.join(directory, SUMMARY_FILE), 'r', encoding='utf-8') as fp:
        for line in fp:
            key, sep, value = line.partition(':')
            if sep:
                summary[key.strip()] = value.strip()
    return summary


def verify_report(directory) -> List[str]:
    """Recounts the raw CSVs of a report and compares them with its summary

    Args:
        directory (str or Path): report directory written by :func:`export`

    Returns:
        List[str]: mismatches, empty when the report is consistent
    """
    mismatches = []
    try:
        summary = read_summary(directory)
        sla = float(summary['sla_ms'])
        bucket_ms = float(summary['bucket_s']) * 1000.0
        with open(os.path.join(directory, SAMPLES_FILE), 'r', encoding='utf-8', newline='') as fp:
            reader = csv.reader(fp)
            if next(reader, None) != SAMPLES_HEADER:
                return ['{0}: unexpected header'.format(SAMPLES_FILE)]
            rows = [(float(r[1]), float(r[2])) for r in reader if r]
        with open(os.path.join(directory, BUCKETS_FILE), 'r', encoding='utf-8', newline='') as fp:
            reader = csv.reader(fp)
            if next(reader, None) != BUCKETS_HEADER:
                return ['{0}: unexpected header'.format(BUCKETS_FILE)]
            bucket_rows = [r for r in reader if r]
    except (OSError, KeyError, ValueError, IndexError) as err:
        return ['unreadable report: {0}'.format(err)]

    total = len(rows)
    violations = sum(1 for i, e in rows if e - i > sla)
    if str(total) != summary.get('total_samples'):
        mismatches.append('total_samples: summary {0}, recount {1}'.format(summary.get('total_samples'), total))
    if str(violations) != summary.get('violations'):
        mismatches.append('violations: summary {0}, recount {1}'.format(summary.get('violations'), violations))
    if total and summary.get('violation_pct') != '{0:.2f}'.format(violations / total * 100.0):
        mismatches.append('violation_pct: summary {0}, recount {1:.2f}'.format(
            summary.get('violation_pct'), violations / total * 100.0))
    if str(len(bucket_rows)) != summary.get('buckets'):
        mismatches.append('buckets: summary {0}, {1} rows'.format(summary.get('buckets'), len(bucket_rows)))

    n = len(bucket_rows)
    counts_in, counts_out, counts_viol = [0] * n, [0] * n, [0] * n
    latencies = [[] for _ in range(n)]
    for i, e in rows:
        bi, bo = int(i // bucket_ms), int(e // bucket_ms)
        if bi >= n or bo >= n:
            mismatches.append('sample ({0}, {1}) falls outside the bucket table'.format(fmt_ms(i), fmt_ms(e)))
            continue
        counts_in[bi] += 1
        counts_out[bo] += 1
        latencies[bi].append(e - i)
        if e - i > sla:
            counts_viol[bi] += 1
    for r in bucket_rows:
        b = int(r[0])
        if b >= n:
            continue
        for column, recount in ((2, counts_in), (3, counts_out), (8, counts_viol)):
            if int(r[column]) != recount[b]:
                mismatches.append('bucket {0} {1}: file {2}, recount {3}'.format(
                    b, BUCKETS_HEADER[column], r[column], recount[b]))
        values = sorted(latencies[b])
        stats = ((values[0], nearest_rank(values, 50), nearest_rank(values, 95), values[-1])
                 if values else (None,) * 4)
        for column, value in zip((4, 5, 6, 7), stats):
            expected = '' if value is None else fmt_ms(value)
            if r[column] != expected:
                mismatches.append('bucket {0} {1}: file {2!r}, recount {3!r}'.format(
                    b, BUCKETS_HEADER[column], r[column], expected))
    return mismatches


def ensure_verified(directory):
    """Raises:
        VerificationError: naming every mismatch found by :func:`verify_report`
    """
    mismatches = verify_report(directory)
    if mismatches:
        raise VerificationError('report {0} failed verification'.format(directory), mismatches)
