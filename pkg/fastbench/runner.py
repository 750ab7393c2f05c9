# -----------------------------------------------------------------------------
# Summary:		The full benchmark pipeline as a library call
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Resolve a workload, obtain a trace, size the topology, execute it and write
the report. ``bench run`` is a thin wrapper around :func:`run_benchmark`.
"""

import logging
import os
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Optional

from fastbench import engine
from fastbench.config import AUTO, RunConfig, dump_parallelism, load_parallelism
from fastbench.distributions import SECONDS_PER_HOUR, scale_rate
from fastbench.enums import ResourceClass
from fastbench.errors import FastBenchError, VerificationError
from fastbench.executor import ParallelismMap
from fastbench.generator import GENERATOR_VERSION, ReplayStats, Trace, generate, read_trace, replay, truncate
from fastbench.metrics import MetricsRecorder, RunReport, cpu_sampler, export, finalize
from fastbench.planner import min_parallelism
from fastbench.synthetic import PayloadPool
from fastbench.workloads import WorkloadSpec, resolve

logger = logging.getLogger(__name__)

PARALLELISM_FILE = 'parallelism.json'


@dataclass
class RunOutcome:
    directory: Path
    workload: WorkloadSpec
    parallelism: ParallelismMap
    report: RunReport
    injected: int
    replay: Optional[ReplayStats] = None


def make_report_dir(root) -> Path:
    """Creates a fresh timestamped directory under ``root``, never reusing an existing one"""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now().strftime('%Y%m%d-%H%M%S')
    for k in range(1000):
        candidate = root / (stamp if k == 0 else '{0}-{1}'.format(stamp, k))
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            continue
    raise FileExistsError('no free report directory under {0}'.format(root))


def load_trace(config: RunConfig, spec: WorkloadSpec, profile) -> Trace:
    if config.trace:
        trace = read_trace(config.trace, profile, spec.histogram)
    else:
        trace = generate(profile, spec.histogram, config.seed, config.arrivals)
    if config.duration_cap is not None:
        trace = truncate(trace, config.duration_cap)
    return trace


def plan_parallelism(config: RunConfig, spec: WorkloadSpec, peak_rate: float) -> ParallelismMap:
    if config.parallelism != AUTO:
        return load_parallelism(config.parallelism)
    return min_parallelism(replace(spec.plan_input(config.headroom), peak_rate=peak_rate))


def run_benchmark(config: RunConfig, directory=None) -> RunOutcome:
    """Runs one benchmark end to end

    Args:
        config (RunConfig): run options
        directory (optional): report directory to use, created under ``config.report_dir`` when omitted

    Raises:
        ValidationError: on inconsistent options, parallelism or topology
        WorkloadError: when the workload cannot be resolved
        TraceFormatError: when a given trace file is malformed
        ReplayStallError: when the topology holds replay back beyond the stall budget
        DrainTimeoutError: when in-flight events do not finish within the drain timeout
        VerificationError: when events were lost between the trace and the samples, raised after export

    Returns:
        RunOutcome: the report and where it was written
    """
    config.check()
    spec = resolve(config.workload, config.overrides)
    routing = config.routing or spec.routing
    profile = spec.profile if config.rate_scale == 1 else scale_rate(spec.profile, config.rate_scale)
    trace = load_trace(config, spec, profile)
    par = plan_parallelism(config, spec, profile.peak_rate)
    directory = Path(directory) if directory is not None else make_report_dir(config.report_dir)
    (directory / PARALLELISM_FILE).write_text(dump_parallelism(par) + '\n', encoding='utf-8')

    payloads = None
    if not config.simulate and any(t.resource_class == ResourceClass.CPU for t in spec.topology.tasks):
        payloads = PayloadPool(max(b.hi for b in spec.histogram.bins), config.seed)
    recorder = MetricsRecorder()
    executor = engine.start(spec.topology, par, routing=routing, seed=config.seed,
                            queue_capacity=config.queue_capacity, recorder=recorder,
                            simulate=config.simulate, payloads=payloads)
    logger.info('running %s: %d events, %d threads, %s routing, %s', spec.name, len(trace),
                executor.thread_census, routing.value, 'simulated' if config.simulate else 'threaded')

    stats, cpu = None, None
    if config.simulate:
        for record in trace:
            executor.inject(record, record.offset / config.time_scale)
        executor.drain()
    else:
        epoch = executor.reset_epoch()
        sampler = cpu_sampler(config.cpu_interval, config.host_cpu, epoch)
        try:
            try:
                stats = replay(trace, config.time_scale, executor.inject, workers=config.workers,
                               stall_budget=config.stall_budget, start=epoch)
            except Exception:
                try:
                    executor.drain(config.drain_timeout)
                except FastBenchError as err:
                    logger.error('drain after failed replay: %s', err)
                raise
            executor.drain(config.drain_timeout)
        finally:
            series = sampler.stop()
        cpu = series if sampler.available else None
        logger.info('replay p95 scheduling error %.3f ms, max lateness %.3f ms',
                    stats.p95_error_ms, stats.max_lateness_ms)

    span = profile.span if config.duration_cap is None else min(profile.span, config.duration_cap)
    metadata = {
        'workload': spec.name,
        'workload_digest': spec.digest(),
        'seed': str(config.seed),
        'routing': routing.value,
        'mode': 'simulated' if config.simulate else 'threaded',
        'time_scale': repr(config.time_scale),
        'rate_scale': repr(config.rate_scale),
        'arrivals': trace.metadata.arrivals,
        'generator_version': str(GENERATOR_VERSION),
        'threads': str(executor.thread_census),
        'queue_capacity': str(config.queue_capacity),
    }
    # an empty profile still reports on the hourly grid
    bucket = profile.buckets[0].duration if profile.buckets else SECONDS_PER_HOUR
    report = finalize(recorder.samples(), spec.sla_ms, bucket / config.time_scale,
                      span=span / config.time_scale, cpu=cpu, metadata=metadata)
    export(report, directory)
    lost = []
    if executor.injected != len(trace):
        lost.append('{0} of {1} trace events injected'.format(executor.injected, len(trace)))
    if report.total != executor.injected:
        lost.append('{0} injected, {1} samples recorded'.format(executor.injected, report.total))
    if lost:
        logger.error('conservation broken in %s: %s', os.fspath(directory), '; '.join(lost))
        raise VerificationError('run {0} lost events'.format(directory), lost)
    logger.info('%d events, %d SLA violations, report in %s', report.total, report.violations,
                os.fspath(directory))
    return RunOutcome(directory, spec, par, report, executor.injected, stats)
