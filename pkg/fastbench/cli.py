# -----------------------------------------------------------------------------
# Summary:		bench command line: gen, plan, run and verify
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Every option can also be given as a ``BENCH_*`` environment variable;
options on the command line win. Exit codes: 0 success, 2 configuration
error, 3 drain timeout or replay stall, 4 report verification mismatch or
events lost during a run.
"""

import logging
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import click

from fastbench.__about__ import __version__
from fastbench.config import AUTO, RunConfig, dump_parallelism, parse_override
from fastbench.distributions import scale_rate
from fastbench.engine import DEFAULT_QUEUE_CAPACITY
from fastbench.enums import ArrivalMode, RoutingMode
from fastbench.errors import (DrainTimeoutError, ReplayStallError, TraceFormatError, ValidationError,
                              VerificationError, WorkloadError)
from fastbench.generator import generate, truncate, write_trace
from fastbench.metrics import SUMMARY_FILE, verify_report
from fastbench.planner import format_plan, min_parallelism, slot_allocation
from fastbench.runner import make_report_dir, run_benchmark
from fastbench.workloads import resolve

EXIT_CONFIG = 2
EXIT_DRAIN = 3
EXIT_VERIFY = 4

LOG_FORMAT = '%(asctime)s [%(levelname)s]: %(message)s'
LOG_DATEFMT = '%m/%d/%Y %H:%M:%S'
LOG_FILE = 'bench.log'

logger = logging.getLogger(__name__)


def _formatter() -> logging.Formatter:
    return logging.Formatter(LOG_FORMAT, datefmt=LOG_DATEFMT)


def configure_logging(verbose: bool = False) -> logging.Logger:
    """Console logging for the ``fastbench`` package, replacing handlers of an earlier invocation"""
    root = logging.getLogger('fastbench')
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    root.setLevel(logging.DEBUG)
    ch = logging.StreamHandler()
    ch.setLevel(logging.DEBUG if verbose else logging.INFO)
    ch.setFormatter(_formatter())
    root.addHandler(ch)
    return root


@contextmanager
def _log_file(directory: Path):
    root = logging.getLogger('fastbench')
    fh = logging.FileHandler(str(directory / LOG_FILE), encoding='utf-8')
    fh.setLevel(logging.DEBUG)
    fh.setFormatter(_formatter())
    root.addHandler(fh)
    try:
        yield fh
    finally:
        root.removeHandler(fh)
        fh.close()


def _overrides(values) -> dict:
    return dict(parse_override(v) for v in values)


def _fail(code: int, err: Exception):
    click.echo('error: {0}'.format(err.message if hasattr(err, 'message') else err), err=True)
    raise SystemExit(code)


@contextmanager
def _exit_codes():
    try:
        yield
    except (ValidationError, WorkloadError, TraceFormatError) as err:
        _fail(EXIT_CONFIG, err)
    except (DrainTimeoutError, ReplayStallError) as err:
        _fail(EXIT_DRAIN, err)
    except VerificationError as err:
        _fail(EXIT_VERIFY, err)


workload_option = click.option('--workload', '-w', required=True, envvar='BENCH_WORKLOAD',
                               help='builtin workload name or workload file')
set_option = click.option('--set', 'overrides', multiple=True, envvar='BENCH_SET', metavar='NAME=VALUE',
                          help='override a workload parameter, repeatable')
rate_scale_option = click.option('--rate-scale', type=float, default=1.0, show_default=True,
                                 envvar='BENCH_RATE_SCALE', help='multiply every profile rate')


@click.group()
@click.version_option(__version__, prog_name='bench')
@click.option('--verbose', '-v', is_flag=True, envvar='BENCH_VERBOSE', help='debug output on the console')
def bench(verbose):
    """Fast-data stream benchmark harness"""
    configure_logging(verbose)


@bench.command()
@workload_option
@click.option('--seed', type=int, default=0, show_default=True, envvar='BENCH_SEED')
@click.option('--out', required=True, type=click.Path(dir_okay=False, writable=True), envvar='BENCH_OUT',
              help='trace file to write')
@click.option('--arrivals', type=click.Choice([m.value for m in ArrivalMode]), default=ArrivalMode.EVEN.value,
              show_default=True, envvar='BENCH_ARRIVALS')
@rate_scale_option
@click.option('--duration-cap', type=float, default=None, envvar='BENCH_DURATION_CAP',
              help='seconds of the profile to generate')
@set_option
def gen(workload, seed, out, arrivals, rate_scale, duration_cap, overrides):
    """Generate a trace for a workload"""
    with _exit_codes():
        spec = resolve(workload, _overrides(overrides))
        profile = spec.profile if rate_scale == 1 else scale_rate(spec.profile, rate_scale)
        trace = generate(profile, spec.histogram, seed, ArrivalMode(arrivals))
        if duration_cap is not None:
            trace = truncate(trace, duration_cap)
        write_trace(trace, out)
        click.echo('{0} events written to {1} (sha256 {2})'.format(len(trace), out, trace.content_digest()))


@bench.command()
@workload_option
@click.option('--headroom', type=float, default=None, envvar='BENCH_HEADROOM',
              help='planner headroom, defaults to the workload value')
@rate_scale_option
@click.option('--out', type=click.Path(dir_okay=False, writable=True), default=None, envvar='BENCH_PLAN_OUT',
              help='also write the parallelism file here')
@set_option
def plan(workload, headroom, rate_scale, out, overrides):
    """Print the minimum parallelism for a workload's peak rate"""
    with _exit_codes():
        spec = resolve(workload, _overrides(overrides))
        plan_input = spec.plan_input(headroom)
        if rate_scale != 1:
            plan_input = replace(plan_input, peak_rate=plan_input.peak_rate * rate_scale)
        par = min_parallelism(plan_input)
        click.echo(format_plan(par, plan_input))
        click.echo('')
        click.echo(dump_parallelism(par))
        if out:
            Path(out).write_text(dump_parallelism(par) + '\n', encoding='utf-8')
            logger.info('parallelism written to %s (%d nodes)', out, slot_allocation(par, plan_input))


@bench.command()
@workload_option
@click.option('--seed', type=int, default=0, show_default=True, envvar='BENCH_SEED')
@click.option('--trace', type=click.Path(exists=True, dir_okay=False), default=None, envvar='BENCH_TRACE',
              help='replay this trace instead of generating one')
@click.option('--time-scale', type=float, default=1.0, show_default=True, envvar='BENCH_TIME_SCALE',
              help='divide inter-arrival gaps by this factor')
@rate_scale_option
@click.option('--duration-cap', type=float, default=None, envvar='BENCH_DURATION_CAP',
              help='seconds of the profile to run')
@click.option('--parallelism', default=AUTO, show_default=True, envvar='BENCH_PARALLELISM',
              help='"auto" to plan, or a JSON parallelism file')
@click.option('--headroom', type=float, default=None, envvar='BENCH_HEADROOM')
@click.option('--routing', type=click.Choice([m.value for m in RoutingMode]), default=None,
              envvar='BENCH_ROUTING', help='defaults to the workload value')
@click.option('--sim', is_flag=True, envvar='BENCH_SIM', help='deterministic discrete-event simulation')
@click.option('--report', required=True, type=click.Path(file_okay=False), envvar='BENCH_REPORT',
              help='directory under which a fresh run directory is created')
@click.option('--queue-capacity', type=int, default=DEFAULT_QUEUE_CAPACITY, show_default=True,
              envvar='BENCH_QUEUE_CAPACITY')
@click.option('--drain-timeout', type=float, default=None, envvar='BENCH_DRAIN_TIMEOUT')
@click.option('--workers', type=int, default=1, show_default=True, envvar='BENCH_WORKERS',
              help='replay emitter threads')
@click.option('--host-cpu', is_flag=True, envvar='BENCH_HOST_CPU', help='sample whole-host CPU')
@click.option('--arrivals', type=click.Choice([m.value for m in ArrivalMode]), default=ArrivalMode.EVEN.value,
              show_default=True, envvar='BENCH_ARRIVALS')
@set_option
def run(workload, seed, trace, time_scale, rate_scale, duration_cap, parallelism, headroom, routing, sim,
        report, queue_capacity, drain_timeout, workers, host_cpu, arrivals, overrides):
    """Generate or load a trace, execute it and write a report"""
    with _exit_codes():
        config = RunConfig(workload=workload, report_dir=report, seed=seed, trace=trace, time_scale=time_scale,
                           rate_scale=rate_scale, duration_cap=duration_cap,
                           routing=RoutingMode(routing) if routing else None, parallelism=parallelism,
                           headroom=headroom, queue_capacity=queue_capacity, simulate=sim, host_cpu=host_cpu,
                           workers=workers, drain_timeout=drain_timeout, arrivals=ArrivalMode(arrivals),
                           overrides=_overrides(overrides))
        config.check()
        directory = make_report_dir(report)
        with _log_file(directory):
            outcome = run_benchmark(config, directory)
        r = outcome.report
        pct = 'empty' if r.empty else '{0:.2f}%'.format(r.violation_pct)
        click.echo('{0}: {1} events, {2} violations ({3}), report {4}'.format(
            outcome.workload.name, r.total, r.violations, pct, outcome.directory))


def _report_directory(path: Path) -> Path:
    if (path / SUMMARY_FILE).is_file():
        return path
    runs = sorted(p for p in path.iterdir() if (p / SUMMARY_FILE).is_file()) if path.is_dir() else []
    return runs[-1] if runs else path


@bench.command()
@click.option('--report', required=True, type=click.Path(exists=True, file_okay=False), envvar='BENCH_REPORT',
              help='run directory, or a report root whose latest run is checked')
def verify(report):
    """Recount a report's raw CSVs against its summary"""
    directory = _report_directory(Path(report))
    with _exit_codes():
        mismatches = verify_report(directory)
        if mismatches:
            raise VerificationError('report {0} does not match its samples'.format(directory), mismatches)
        click.echo('{0}: ok'.format(directory))


def main():
    bench(prog_name='bench')


if __name__ == '__main__':
    main()
