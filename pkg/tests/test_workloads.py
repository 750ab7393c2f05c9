import json
from importlib import resources

import pytest

from fastbench import workloads
from fastbench.enums import RoutingMode
from fastbench.errors import ValidationError, WorkloadError
from fastbench.topology import success_path_latency, terminal_probabilities


def shipped(name: str) -> dict:
    return json.loads(resources.files('fastbench.workloads').joinpath(name + '.workload').read_text(encoding='utf-8'))


def write(path, doc) -> str:
    path.write_text(json.dumps(doc), encoding='utf-8')
    return str(path)


def test_available():
    assert workloads.available() == ['authentication', 'authentication-desk', 'enrollment', 'enrollment-desk']


def test_builtin_matches_file(tmp_path):
    path = write(tmp_path / 'enrollment.workload', shipped('enrollment'))
    assert workloads.load(path) == workloads.builtin('enrollment')
    assert workloads.resolve(path) == workloads.resolve('enrollment')


def test_shipped_values(auth, enrollment):
    assert enrollment.sla_ms == 600000
    assert auth.sla_ms == 1000
    assert enrollment.routing == RoutingMode.QUOTA
    assert enrollment.parameters == {'additional_checks_pass': 0.5}
    assert enrollment.planner.threads_per_node == 53
    assert auth.planner.headroom == 4.1
    assert auth.profile.peak_rate == 500.0
    assert auth.histogram.bins[0].lo == 4096
    assert enrollment.notes


@pytest.mark.parametrize('name, base, sla', [
    ('enrollment-desk', 'enrollment', 6000),
    ('authentication-desk', 'authentication', 10),
])
def test_desk_scaling(name, base, sla):
    desk, full = workloads.builtin(name), workloads.builtin(base)
    assert desk.sla_ms == sla
    assert desk.profile.span == 144.0
    assert desk.profile.peak_rate == full.profile.peak_rate
    assert success_path_latency(desk.topology) == pytest.approx(success_path_latency(full.topology) / 100)
    assert [e.selectivity for e in desk.topology.edges] == [e.selectivity for e in full.topology.edges]
    assert len(desk.notes) > len(full.notes)


def test_desk_planner_settings():
    assert workloads.builtin('enrollment-desk').planner == workloads.builtin('enrollment').planner
    auth_desk = workloads.builtin('authentication-desk')
    assert (auth_desk.planner.headroom, auth_desk.planner.threads_per_node) == (1.3, 28)


def test_parameter_override():
    spec = workloads.builtin('enrollment', {'additional_checks_pass': 0.0})
    assert spec.parameters['additional_checks_pass'] == 0.0
    assert terminal_probabilities(spec.topology)['AadhaarGeneration'] == pytest.approx(0.98 * 0.95 * 0.95 * 0.92)


def test_override_reaches_derived_base():
    spec = workloads.builtin('enrollment-desk', {'additional_checks_pass': 1.0})
    p_ac = [e.selectivity for e in spec.topology.edges if e.src == 'AdditionalChecks' and e.dst == 'Rejected']
    assert p_ac == [0.0]


@pytest.mark.parametrize('overrides, fragment', [
    ({'additional_checks_pass': 1.5}, 'outside [0, 1]'),
    ({'no_such_parameter': 0.5}, 'unknown parameter'),
])
def test_bad_override(overrides, fragment):
    with pytest.raises(WorkloadError) as info:
        workloads.builtin('enrollment', overrides)
    assert any(fragment in e for e in info.value.errors)


def test_selectivity_out_of_range_names_edge(tmp_path):
    doc = shipped('enrollment')
    doc['edges'][2]['selectivity'] = 1.2
    with pytest.raises(WorkloadError) as info:
        workloads.load(write(tmp_path / 'bad.workload', doc))
    assert any('DemographicDedup -> QualityCheck' in e for e in info.value.errors)


def test_selectivity_sum(tmp_path):
    doc = shipped('enrollment')
    doc['edges'][2]['selectivity'] = 0.9
    with pytest.raises(WorkloadError) as info:
        workloads.load(write(tmp_path / 'bad.workload', doc))
    assert any(e.startswith('topology:') and 'DemographicDedup' in e for e in info.value.errors)


def test_missing_field(tmp_path):
    doc = shipped('authentication')
    del doc['sla_ms']
    with pytest.raises(WorkloadError) as info:
        workloads.load(write(tmp_path / 'bad.workload', doc))
    assert any("'sla_ms' is a required property" in e for e in info.value.errors)


def test_invalid_histogram(tmp_path):
    doc = shipped('enrollment')
    doc['size_histogram'][0]['prob'] = 0.5
    with pytest.raises(WorkloadError) as info:
        workloads.load(write(tmp_path / 'bad.workload', doc))
    assert any(e.startswith('size_histogram:') for e in info.value.errors)


def test_not_json(tmp_path):
    path = tmp_path / 'bad.workload'
    path.write_text('{\n  "name": "x",\n  oops\n}', encoding='utf-8')
    with pytest.raises(WorkloadError) as info:
        workloads.load(path)
    assert info.value.errors[0].startswith('line 3 column 3')


def test_unknown_builtin():
    with pytest.raises(WorkloadError) as info:
        workloads.builtin('nightly')
    assert 'enrollment-desk' in info.value.message


def test_resolve_missing_file():
    with pytest.raises(WorkloadError) as info:
        workloads.resolve('no/such/file.workload')
    assert 'authentication' in info.value.message


def test_derived_file(tmp_path):
    write(tmp_path / 'day.workload', shipped('authentication'))
    path = write(tmp_path / 'quick.workload', {
        'name': 'quick', 'base': 'day', 'routing': 'prob',
        'scale': {'latency_divisor': 10, 'time_compression': 3600},
    })
    spec = workloads.load(path)
    assert spec.name == 'quick'
    assert spec.routing == RoutingMode.PROBABILISTIC
    assert spec.sla_ms == 100
    assert spec.profile.span == pytest.approx(24.0)
    assert spec.planner == workloads.builtin('authentication').planner


def test_derived_missing_base(tmp_path):
    path = write(tmp_path / 'orphan.workload', {
        'name': 'orphan', 'base': 'nowhere', 'scale': {'latency_divisor': 10, 'time_compression': 10},
    })
    with pytest.raises(WorkloadError):
        workloads.load(path)


def test_derived_bad_scale(tmp_path):
    path = write(tmp_path / 'zero.workload', {
        'name': 'zero', 'base': 'enrollment', 'scale': {'latency_divisor': 0, 'time_compression': 10},
    })
    with pytest.raises(WorkloadError):
        workloads.load(path)


def test_derive_rejects_non_positive(auth):
    with pytest.raises(ValidationError):
        workloads.derive(auth, 'x', 0, 1)
    with pytest.raises(ValidationError):
        workloads.derive(auth, 'x', 1, -1)


def test_digest_tracks_profile(auth):
    assert auth.digest() == workloads.builtin('authentication').digest()
    assert auth.digest() != workloads.builtin('authentication-desk').digest()
