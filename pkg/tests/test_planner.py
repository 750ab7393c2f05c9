from dataclasses import replace

import pytest

from fastbench.errors import ValidationError
from fastbench.executor import ParallelismMap
from fastbench.planner import PlanInput, format_plan, min_parallelism, slot_allocation, task_threads
from tests.topologies import fork, linear


def test_single_task():
    par = min_parallelism(PlanInput(linear(10), 100.0, headroom=1.0))
    assert par.threads == {'sink': 1}


def test_every_task_gets_a_thread():
    par = min_parallelism(PlanInput(linear(0, 0.001, 5), 1.0))
    assert set(par.threads.values()) == {1}


def test_exact_products_do_not_round_up():
    assert task_threads(500.0, 1.0, 40.0, 4.1) == 82
    assert task_threads(500.0, 1.0, 30.0, 4.1) == 62
    assert task_threads(100.0, 1.0, 10.0, 1.0) == 1


def test_authentication_at_full_rate(auth):
    par = min_parallelism(auth.plan_input(1.0))
    assert par.total == 125
    assert par.threads['PacketValidation'] == 20
    assert par.threads['AuditLogSend'] == 10


def test_authentication_with_headroom(auth):
    plan = auth.plan_input()
    assert plan.headroom == 4.1
    par = min_parallelism(plan)
    assert par.total == 514
    assert slot_allocation(par, plan) == 19


def test_authentication_default_headroom(auth):
    assert min_parallelism(auth.plan_input(1.3)).total == 164


def test_enrollment(enrollment):
    plan = enrollment.plan_input()
    par = min_parallelism(plan)
    assert par.total == 475
    assert slot_allocation(par, plan) == 9
    assert 'Input' not in par.threads


def test_rejection_reach(enrollment):
    par = min_parallelism(replace(enrollment.plan_input(1.0), peak_rate=100.0))
    assert par.threads['Rejected'] >= 1
    assert par.threads['BiometricDedup'] > par.threads['PacketValidation']


def test_monotonic_in_rate_and_headroom(auth):
    base = auth.plan_input(1.0)
    totals = [min_parallelism(replace(base, peak_rate=r)).total for r in (10.0, 100.0, 500.0, 1000.0)]
    assert totals == sorted(totals)
    totals = [min_parallelism(auth.plan_input(h)).total for h in (1.0, 1.3, 2.0, 4.1)]
    assert totals == sorted(totals)


def test_fork_thinning():
    par = min_parallelism(PlanInput(fork(0.9, latency=100.0), 100.0, headroom=1.0))
    assert par.threads == {'w': 10, 'A': 9, 'B': 1}


@pytest.mark.parametrize('total, per_node, nodes', [(8, 8, 1), (9, 8, 2), (0, 8, 0), (514, 28, 19)])
def test_slot_allocation(total, per_node, nodes):
    par = ParallelismMap({'t{0}'.format(i): 1 for i in range(total)})
    assert slot_allocation(par, PlanInput(linear(1), 1.0, threads_per_node=per_node)) == nodes


def test_format_plan(auth):
    plan = auth.plan_input()
    text = format_plan(min_parallelism(plan), plan)
    assert 'total threads: 514' in text
    assert 'nodes: 19 (152 cores)' in text
    assert 'AuditLogSend' in text
    assert 'headroom 4.1' in text


@pytest.mark.parametrize('changes', [
    {'peak_rate': -1.0},
    {'headroom': 0.5},
    {'threads_per_node': 0},
    {'slots_per_node': 0},
])
def test_invalid_plan_input(changes):
    with pytest.raises(ValidationError):
        min_parallelism(replace(PlanInput(linear(1), 1.0), **changes))
