import math
from dataclasses import replace

import numpy as np
import pytest

from fastbench import workloads
from fastbench.enums import EdgeLabel, TaskKind
from fastbench.errors import ValidationError
from fastbench.topology import (EdgeSpec, TaskSpec, TopologySpec, ensure_valid, reach_probabilities,
                                success_path_latency, terminal_probabilities, validate)
from tests.topologies import fork, linear


def random_dag(rng: np.random.Generator) -> TopologySpec:
    k, m = int(rng.integers(1, 8)), int(rng.integers(1, 4))
    names = ['src'] + ['w{0}'.format(i) for i in range(k)] + ['s{0}'.format(i) for i in range(m)]
    tasks = [TaskSpec('src', 0.0, kind=TaskKind.SOURCE)]
    tasks += [TaskSpec(n, float(rng.integers(0, 50))) for n in names[1:k + 1]]
    tasks += [TaskSpec(n, float(rng.integers(0, 50)), kind=TaskKind.SINK) for n in names[k + 1:]]
    edges = []
    for i in range(k + 1):
        if i == k:
            targets = names[k + 1:]
        else:
            later = names[i + 2:]
            extra = [n for n in later if rng.random() < 0.3]
            targets = [names[i + 1]] + extra
        weights = rng.dirichlet(np.ones(len(targets)))
        weights[-1] = 1.0 - math.fsum(weights[:-1])
        for dst, w in zip(targets, weights):
            edges.append(EdgeSpec(names[i], dst, EdgeLabel.DEFAULT, float(max(w, 0.0))))
    path = tuple(names[:k + 2])
    return TopologySpec(tuple(tasks), tuple(edges), path)


def test_shipped_topologies_are_valid(auth, enrollment):
    assert validate(auth.topology) == []
    assert validate(enrollment.topology) == []


def test_selectivity_sum():
    topo = fork(0.9)
    topo = replace(topo, edges=topo.edges[:2] + (replace(topo.edges[2], selectivity=0.05),))
    found = [str(v) for v in validate(topo)]
    assert any('selectivity sum' in v and v.startswith('w:') for v in found), found


def test_dangling_edge():
    topo = linear(1, 1)
    topo = replace(topo, edges=topo.edges + (EdgeSpec('t0', 'ghost', EdgeLabel.FAIL, 0.0),))
    found = [str(v) for v in validate(topo)]
    assert any('dangling edge' in v and 'ghost' in v for v in found), found


def test_cycle():
    tasks = (TaskSpec('src', 0.0, kind=TaskKind.SOURCE), TaskSpec('a', 1.0), TaskSpec('b', 1.0),
             TaskSpec('sink', 1.0, kind=TaskKind.SINK))
    edges = (EdgeSpec('src', 'a'), EdgeSpec('a', 'b'), EdgeSpec('b', 'a', EdgeLabel.PASS, 0.5),
             EdgeSpec('b', 'sink', EdgeLabel.FAIL, 0.5))
    topo = TopologySpec(tasks, edges, ('src', 'a', 'b', 'sink'))
    assert any('cycle' in str(v) for v in validate(topo))
    with pytest.raises(ValidationError):
        topo.topological_order()


@pytest.mark.parametrize('mutate, fragment', [
    (lambda t: replace(t, tasks=t.tasks + (TaskSpec('src', 0.0, kind=TaskKind.SOURCE),)), 'duplicate'),
    (lambda t: replace(t, tasks=(replace(t.tasks[0], service_latency=3.0),) + t.tasks[1:]), 'source latency'),
    (lambda t: replace(t, tasks=t.tasks[:1] + (replace(t.tasks[1], service_latency=-1.0),) + t.tasks[2:]),
     'latency must be >= 0'),
    (lambda t: replace(t, success_path=('src', 'sink')), 'success_path'),
    (lambda t: replace(t, success_path=()), 'empty'),
])
def test_other_violations(mutate, fragment):
    found = [str(v) for v in validate(mutate(linear(1, 2, 3)))]
    assert any(fragment in v for v in found), found


def test_ensure_valid():
    ensure_valid(linear(1, 2))
    try:
        ensure_valid(fork(1.5))
        assert False, 'invalid topology accepted'
    except ValidationError as err:
        assert 'outside [0, 1]' in err.message


def test_success_path_latency(auth, enrollment):
    assert success_path_latency(auth.topology) == 250
    assert success_path_latency(enrollment.topology) == 21220
    assert success_path_latency(linear(5)) == 5


def test_success_path_latency_ignores_selectivity():
    assert success_path_latency(fork(0.1)) == success_path_latency(fork(0.9))


def test_terminal_probabilities():
    assert terminal_probabilities(linear(1, 2, 3)) == {'sink': 1.0}
    probs = terminal_probabilities(fork(0.3))
    assert probs['A'] == pytest.approx(0.3)
    assert probs['B'] == pytest.approx(0.7)


def test_enrollment_terminal_probabilities():
    spec = workloads.builtin('enrollment', {'additional_checks_pass': 0.0})
    probs = terminal_probabilities(spec.topology)
    success = 0.98 * 0.95 * 0.95 * 0.92
    assert probs['AadhaarGeneration'] == pytest.approx(success, abs=1e-9)
    assert probs['Rejected'] == pytest.approx(1 - success, abs=1e-9)


def test_reach_probabilities(enrollment):
    reach = reach_probabilities(enrollment.topology)
    assert reach['Input'] == 1.0
    assert reach['PacketExtraction'] == 1.0
    assert reach['BiometricDedup'] == pytest.approx(0.98 * 0.95 * 0.95)
    assert reach['AdditionalChecks'] == pytest.approx(0.98 * 0.95 * 0.95 * 0.08)


@pytest.mark.parametrize('seed', range(25))
def test_random_dags(seed):
    topo = random_dag(np.random.default_rng(seed))
    assert validate(topo) == []
    # validate neither mutates nor changes its answer
    assert validate(topo) == validate(topo)
    assert math.fsum(terminal_probabilities(topo).values()) == pytest.approx(1.0, abs=1e-9)
