# -----------------------------------------------------------------------------
# Summary:		Degree-of-parallelism and node allocation planning
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Sizes each task with Little's law: the threads a task needs equal the
arrival rate it sees times its service time, inflated by a headroom factor.
The rate a task sees is the peak rate thinned by the probability that an event
reaches it.
"""

import math
from dataclasses import dataclass
from typing import List

from fastbench.errors import ValidationError
from fastbench.executor import ParallelismMap
from fastbench.topology import TopologySpec, ensure_valid, reach_probabilities

DEFAULT_HEADROOM = 1.3
DEFAULT_SLOTS_PER_NODE = 8

# absorbs float noise so exact products such as 82.0 do not ceil to 83
_CEIL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PlanInput:
    topology: TopologySpec
    peak_rate: float
    headroom: float = DEFAULT_HEADROOM
    threads_per_node: int = DEFAULT_SLOTS_PER_NODE
    slots_per_node: int = DEFAULT_SLOTS_PER_NODE

    def violations(self) -> List[str]:
        problems = []
        if not self.peak_rate >= 0:
            problems.append('peak rate must be >= 0')
        if not self.headroom >= 1:
            problems.append('headroom must be >= 1')
        if self.threads_per_node < 1:
            problems.append('threads per node must be >= 1')
        if self.slots_per_node < 1:
            problems.append('slots per node must be >= 1')
        return problems

    def check(self):
        problems = self.violations()
        if problems:
            raise ValidationError('invalid plan input: ' + '; '.join(problems))
        ensure_valid(self.topology)


def task_threads(peak_rate: float, reach: float, latency: float, headroom: float) -> int:
    """Threads for one task, ``max(1, ceil(rate x reach x latency_ms / 1000 x headroom))``"""
    offered = peak_rate * reach * latency / 1000.0 * headroom
    return max(1, int(math.ceil(offered - _CEIL_TOLERANCE)))


def min_parallelism(plan: PlanInput) -> ParallelismMap:
    """Minimum thread count per processing task to sustain the peak rate

    Args:
        plan (PlanInput): topology, peak rate and headroom

    Raises:
        ValidationError: on an invalid plan input or topology

    Returns:
        ParallelismMap: threads per worker and sink task
    """
    plan.check()
    reach = reach_probabilities(plan.topology)
    return ParallelismMap({t.name: task_threads(plan.peak_rate, reach[t.name], t.service_latency, plan.headroom)
                           for t in plan.topology.processing_tasks})


def slot_allocation(par: ParallelismMap, plan: PlanInput) -> int:
    """Nodes needed to host the planned threads, ``ceil(total / threads_per_node)``"""
    if plan.threads_per_node < 1:
        raise ValidationError('threads per node must be >= 1')
    return int(math.ceil(par.total / plan.threads_per_node))


def format_plan(par: ParallelismMap, plan: PlanInput) -> str:
    """Renders a plan as a table followed by its totals"""
    reach = reach_probabilities(plan.topology)
    width = max([len(n) for n in par.threads] + [4])
    lines = ['{0:<{w}}  {1:>10}  {2:>8}  {3:>7}'.format('task', 'latency_ms', 'reach', 'threads', w=width)]
    for name, count in par.threads.items():
        task = plan.topology.task(name)
        lines.append('{0:<{w}}  {1:>10.3f}  {2:>8.5f}  {3:>7d}'.format(name, task.service_latency, reach[name],
                                                                       count, w=width))
    nodes = slot_allocation(par, plan)
    lines.append('')
    lines.append('peak rate: {0:.3f} events/s, headroom {1}'.format(plan.peak_rate, plan.headroom))
    lines.append('total threads: {0}'.format(par.total))
    lines.append('nodes: {0} ({1} cores)'.format(nodes, nodes * plan.slots_per_node))
    return '\n'.join(lines)
