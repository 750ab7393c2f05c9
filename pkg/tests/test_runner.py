import json
from pathlib import Path

import pytest

from fastbench import runner, workloads
from fastbench.config import RunConfig, dump_parallelism, load_parallelism, parse_override
from fastbench.enums import RoutingMode
from fastbench.errors import ValidationError, VerificationError, WorkloadError
from fastbench.executor import ParallelismMap
from fastbench.metrics import BUCKETS_FILE, SAMPLES_FILE, MetricsRecorder, read_summary, verify_report
from fastbench.planner import min_parallelism
from fastbench.runner import PARALLELISM_FILE, make_report_dir, run_benchmark
from fastbench.workloads import builtin


def simulated(tmp_path, **kwargs) -> RunConfig:
    options = dict(workload='authentication-desk', report_dir=str(tmp_path), seed=1, simulate=True,
                   duration_cap=20.0)
    options.update(kwargs)
    return RunConfig(**options)


def test_simulated_runs_are_identical(tmp_path):
    first = run_benchmark(simulated(tmp_path))
    second = run_benchmark(simulated(tmp_path))
    assert first.directory != second.directory
    for name in (SAMPLES_FILE, BUCKETS_FILE):
        assert (first.directory / name).read_bytes() == (second.directory / name).read_bytes()


def test_outcome(tmp_path):
    outcome = run_benchmark(simulated(tmp_path))
    assert outcome.injected == outcome.report.total == 3000
    assert outcome.report.sink_counts == {'AuditLogSend': 3000}
    assert load_parallelism(outcome.directory / PARALLELISM_FILE) == outcome.parallelism
    assert outcome.parallelism == ParallelismMap.ones(outcome.workload.topology)
    assert outcome.replay is None
    summary = read_summary(outcome.directory)
    assert summary['routing'] == 'quota'
    assert summary['bucket_s'] == '6.000'
    assert verify_report(outcome.directory) == []


def test_rate_scale(tmp_path):
    outcome = run_benchmark(simulated(tmp_path, rate_scale=2.0, duration_cap=6.0))
    assert outcome.injected == 1800
    assert read_summary(outcome.directory)['rate_scale'] == '2.0'


def test_time_scale_shrinks_buckets(tmp_path):
    outcome = run_benchmark(simulated(tmp_path, time_scale=2.0, duration_cap=12.0))
    assert outcome.report.bucket_s == 3.0
    assert outcome.injected == 1800


def test_given_parallelism(tmp_path):
    path = tmp_path / 'par.json'
    par = ParallelismMap({name: 2 for name in ParallelismMap.ones(builtin('authentication-desk').topology).threads})
    path.write_text(dump_parallelism(par), encoding='utf-8')
    outcome = run_benchmark(simulated(tmp_path, parallelism=str(path), duration_cap=6.0,
                                      routing=RoutingMode.PROBABILISTIC))
    assert outcome.parallelism == par
    assert outcome.report.total == 900
    assert read_summary(outcome.directory)['routing'] == 'prob'


def test_unknown_workload(tmp_path):
    with pytest.raises(WorkloadError):
        run_benchmark(simulated(tmp_path, workload='nightly'))


def test_threaded_run(tmp_path):
    config = RunConfig(workload='authentication-desk', report_dir=str(tmp_path), duration_cap=1.0,
                       cpu_interval=0.25, drain_timeout=30.0)
    outcome = run_benchmark(config)
    assert outcome.report.total == outcome.injected == 150
    assert outcome.replay is not None
    assert outcome.report.cpu is not None
    summary = read_summary(outcome.directory)
    assert summary['mode'] == 'threaded'
    assert int(summary['cpu_samples']) >= 1
    assert verify_report(outcome.directory) == []


@pytest.mark.parametrize('changes, fragment', [
    ({'time_scale': 0}, 'time scale'),
    ({'rate_scale': -1}, 'rate scale'),
    ({'duration_cap': 0}, 'duration cap'),
    ({'headroom': 0.9}, 'headroom'),
    ({'queue_capacity': 0}, 'queue capacity'),
    ({'workers': 0}, 'worker'),
    ({'drain_timeout': 0}, 'drain timeout'),
    ({'stall_budget': 0}, 'stall budget'),
    ({'simulate': True, 'host_cpu': True}, 'CPU'),
    ({'simulate': True, 'workers': 4}, 'threaded runs only'),
])
def test_config_violations(changes, fragment):
    config = RunConfig(workload='enrollment', **changes)
    assert any(fragment in v for v in config.violations())
    with pytest.raises(ValidationError):
        config.check()


def test_default_config_is_valid():
    assert RunConfig(workload='enrollment').violations() == []


def test_parse_override():
    assert parse_override('additional_checks_pass = 0.25') == ('additional_checks_pass', 0.25)
    for text in ('novalue', '=0.5', 'p=high'):
        with pytest.raises(ValidationError):
            parse_override(text)


def test_parallelism_file(tmp_path):
    path = tmp_path / 'par.json'
    par = ParallelismMap({'a': 2, 'b': 3})
    path.write_text(dump_parallelism(par), encoding='utf-8')
    assert load_parallelism(path) == par
    path.write_text(json.dumps([1, 2]), encoding='utf-8')
    with pytest.raises(ValidationError):
        load_parallelism(path)
    with pytest.raises(ValidationError):
        load_parallelism(tmp_path / 'missing.json')


def test_report_dirs_are_never_reused(tmp_path):
    made = {make_report_dir(tmp_path) for _ in range(5)}
    assert len(made) == 5
    assert all(p.parent == tmp_path for p in made)


def test_empty_profile_reports_empty(tmp_path):
    doc = json.loads((Path(workloads.__file__).parent / 'authentication.workload').read_text(encoding='utf-8'))
    doc['name'] = 'quiet'
    doc['rate_profile_hourly'] = []
    path = tmp_path / 'quiet.workload'
    path.write_text(json.dumps(doc), encoding='utf-8')
    outcome = run_benchmark(simulated(tmp_path / 'reports', workload=str(path), duration_cap=None))
    assert outcome.injected == 0
    assert outcome.report.empty
    assert outcome.report.bucket_s == 3600.0
    summary = read_summary(outcome.directory)
    assert summary['samples'] == 'empty'
    assert (outcome.directory / BUCKETS_FILE).is_file()
    assert verify_report(outcome.directory) == []


def test_lost_sample_fails_the_run(tmp_path, monkeypatch):
    kept = MetricsRecorder.samples
    monkeypatch.setattr(MetricsRecorder, 'samples', lambda self: kept(self)[:-1])
    with pytest.raises(VerificationError) as info:
        run_benchmark(simulated(tmp_path, duration_cap=6.0))
    assert '900 injected, 899 samples recorded' in info.value.message
    written = [p for p in tmp_path.iterdir() if (p / SAMPLES_FILE).is_file()]
    assert len(written) == 1


def test_failed_emission_drains_and_propagates(tmp_path, monkeypatch):
    real = runner.replay

    def failing(trace, time_scale, emit, **kwargs):
        def emit_until_five(event, ingress):
            if event.id == 5:
                raise RuntimeError('injection refused')
            emit(event, ingress)
        return real(trace, time_scale, emit_until_five, **kwargs)

    monkeypatch.setattr(runner, 'replay', failing)
    config = RunConfig(workload='authentication-desk', report_dir=str(tmp_path), duration_cap=1.0,
                       cpu_interval=0.25, drain_timeout=30.0)
    with pytest.raises(RuntimeError, match='injection refused'):
        run_benchmark(config)
    assert not any((p / SAMPLES_FILE).exists() for p in tmp_path.iterdir())


@pytest.mark.slow
@pytest.mark.timing
def test_threaded_desk_holds_the_peak_rate(tmp_path):
    desk = builtin('authentication-desk')
    planned = min_parallelism(desk.plan_input())
    assert planned == ParallelismMap.ones(desk.topology)
    path = tmp_path / 'planned.json'
    path.write_text(dump_parallelism(planned), encoding='utf-8')
    # the first 6 s of the desk day lifted from 150 to the 500 events/s peak
    config = RunConfig(workload='authentication-desk', report_dir=str(tmp_path / 'reports'), duration_cap=6.0,
                       rate_scale=10.0 / 3.0, parallelism=str(path), drain_timeout=60.0)
    outcome = run_benchmark(config)
    report = outcome.report
    assert report.total == outcome.injected == 3000
    assert report.violation_fraction <= 0.01
    first, second = report.in_flight_halves()
    assert second <= max(1.5 * first, 10)
    assert outcome.replay.p95_error_ms <= 5.0
    assert verify_report(outcome.directory) == []
