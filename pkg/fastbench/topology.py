# -----------------------------------------------------------------------------
# Summary:		Dataflow topology model, validation and path queries
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Declarative streaming dataflow: tasks with service latencies, edges with
selectivities. Selectivity is routing: every event leaving a task takes exactly
one outgoing edge.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

from fastbench.enums import EdgeLabel, ResourceClass, TaskKind
from fastbench.errors import ValidationError

SELECTIVITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TaskSpec:
    name: str
    service_latency: float
    resource_class: ResourceClass = ResourceClass.CPU
    kind: TaskKind = TaskKind.WORKER


@dataclass(frozen=True)
class EdgeSpec:
    src: str
    dst: str
    label: EdgeLabel = EdgeLabel.DEFAULT
    selectivity: float = 1.0

    def __str__(self):
        return '{0} -{1}-> {2}'.format(self.src, self.label.value, self.dst)


@dataclass(frozen=True)
class Violation:
    subject: str
    message: str

    def __str__(self):
        return '{0}: {1}'.format(self.subject, self.message)


@dataclass(frozen=True)
class TopologySpec:
    tasks: Tuple[TaskSpec, ...]
    edges: Tuple[EdgeSpec, ...]
    success_path: Tuple[str, ...]

    @cached_property
    def by_name(self) -> Dict[str, TaskSpec]:
        return {t.name: t for t in self.tasks}

    @cached_property
    def outgoing(self) -> Dict[str, Tuple[EdgeSpec, ...]]:
        out = {t.name: [] for t in self.tasks}
        for e in self.edges:
            out.setdefault(e.src, []).append(e)
        return {k: tuple(v) for k, v in out.items()}

    @property
    def sources(self) -> List[TaskSpec]:
        return [t for t in self.tasks if t.kind == TaskKind.SOURCE]

    @property
    def source(self) -> TaskSpec:
        sources = self.sources
        if len(sources) != 1:
            raise ValidationError('topology must have exactly one source, found {0}'.format(len(sources)))
        return sources[0]

    @property
    def sinks(self) -> List[TaskSpec]:
        return [t for t in self.tasks if t.kind == TaskKind.SINK]

    @property
    def processing_tasks(self) -> List[TaskSpec]:
        """Tasks that consume events: workers and sinks"""
        return [t for t in self.tasks if t.kind != TaskKind.SOURCE]

    def task(self, name: str) -> TaskSpec:
        try:
            return self.by_name[name]
        except KeyError:
            raise ValidationError('unknown task {0!r}'.format(name))

    def topological_order(self) -> List[str]:
        """Kahn's order with declaration order as tie-break

        Raises:
            ValidationError: when the graph has a cycle
        """
        names = [t.name for t in self.tasks]
        indegree = {n: 0 for n in names}
        for e in self.edges:
            if e.src in indegree and e.dst in indegree:
                indegree[e.dst] += 1
        ready = [n for n in names if indegree[n] == 0]
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for e in self.outgoing.get(n, ()):
                if e.dst not in indegree:
                    continue
                indegree[e.dst] -= 1
                if indegree[e.dst] == 0:
                    ready.append(e.dst)
        if len(order) != len(names):
            raise ValidationError('topology has a cycle through {0}'.format(
                ', '.join(n for n in names if n not in order)))
        return order


def validate(topo: TopologySpec) -> List[Violation]:
    """Checks every topology invariant

    Args:
        topo (TopologySpec): topology to check

    Returns:
        List[Violation]: every violation found, empty when valid
    """
    found = []
    seen = set()
    for t in topo.tasks:
        if t.name in seen:
            found.append(Violation(t.name, 'duplicate task name'))
        seen.add(t.name)
        if not t.service_latency >= 0:
            found.append(Violation(t.name, 'service latency must be >= 0'))
        if t.kind == TaskKind.SOURCE and t.service_latency != 0:
            found.append(Violation(t.name, 'source latency must be 0'))

    if len(topo.sources) != 1:
        found.append(Violation('topology', 'exactly one source required, found {0}'.format(len(topo.sources))))
    if not topo.sinks:
        found.append(Violation('topology', 'at least one sink required'))

    dangling = False
    for e in topo.edges:
        for end in (e.src, e.dst):
            if end not in seen:
                found.append(Violation(str(e), 'dangling edge, unknown task {0!r}'.format(end)))
                dangling = True
        if not 0.0 <= e.selectivity <= 1.0:
            found.append(Violation(str(e), 'selectivity {0} outside [0, 1]'.format(e.selectivity)))
        if e.dst in topo.by_name and topo.by_name[e.dst].kind == TaskKind.SOURCE:
            found.append(Violation(str(e), 'edge into the source'))

    for t in topo.tasks:
        edges = topo.outgoing.get(t.name, ())
        if t.kind == TaskKind.SINK:
            if edges:
                found.append(Violation(t.name, 'sink has outgoing edges'))
            continue
        if not edges:
            found.append(Violation(t.name, 'non-sink task has no outgoing edges'))
            continue
        total = math.fsum(e.selectivity for e in edges)
        if abs(total - 1.0) > SELECTIVITY_TOLERANCE:
            found.append(Violation(t.name, 'selectivity sum {0!r} != 1'.format(total)))

    acyclic = True
    try:
        topo.topological_order()
    except ValidationError as err:
        found.append(Violation('topology', err.message))
        acyclic = False

    if acyclic and not dangling and len(topo.sources) == 1:
        reached = _reachable(topo, topo.sources[0].name)
        for t in topo.tasks:
            if t.name not in reached:
                found.append(Violation(t.name, 'unreachable from the source'))

    found.extend(_success_path_violations(topo))
    return found


def _reachable(topo: TopologySpec, start: str) -> set:
    stack, reached = [start], {start}
    while stack:
        for e in topo.outgoing.get(stack.pop(), ()):
            if e.dst not in reached:
                reached.add(e.dst)
                stack.append(e.dst)
    return reached


def _success_path_violations(topo: TopologySpec) -> List[Violation]:
    path = topo.success_path
    if not path:
        return [Violation('success_path', 'empty')]
    found = []
    for name in path:
        if name not in topo.by_name:
            found.append(Violation('success_path', 'unknown task {0!r}'.format(name)))
    if found:
        return found
    if topo.by_name[path[0]].kind != TaskKind.SOURCE:
        found.append(Violation('success_path', 'must start at the source'))
    if topo.by_name[path[-1]].kind != TaskKind.SINK:
        found.append(Violation('success_path', 'must end at a sink'))
    for a, b in zip(path, path[1:]):
        if not any(e.dst == b and e.label != EdgeLabel.FAIL for e in topo.outgoing.get(a, ())):
            found.append(Violation('success_path', 'no P/default edge {0} -> {1}'.format(a, b)))
    return found


def ensure_valid(topo: TopologySpec):
    """Raises:
        ValidationError: listing every violation of an invalid topology
    """
    found = validate(topo)
    if found:
        raise ValidationError('invalid topology: ' + '; '.join(str(v) for v in found))


def success_path_latency(topo: TopologySpec) -> float:
    """Sum of service latencies in milliseconds along the designated success path"""
    return math.fsum(topo.task(name).service_latency for name in topo.success_path)


def reach_probabilities(topo: TopologySpec) -> Dict[str, float]:
    """Probability that an event injected at the source reaches each task

    Forward propagation of edge selectivities in topological order.
    """
    order = topo.topological_order()
    inflow = {name: [] for name in order}
    inflow[topo.source.name].append(1.0)
    reach = {}
    for name in order:
        reach[name] = math.fsum(inflow[name])
        for e in topo.outgoing.get(name, ()):
            inflow[e.dst].append(reach[name] * e.selectivity)
    return reach


def terminal_probabilities(topo: TopologySpec) -> Dict[str, float]:
    """Probability that an event terminates at each sink"""
    reach = reach_probabilities(topo)
    return {t.name: reach[t.name] for t in topo.sinks}
