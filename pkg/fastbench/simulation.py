# -----------------------------------------------------------------------------
# Summary:		Deterministic discrete-event simulation of a topology
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Virtual-clock execution of a topology.

Every processing task is a FIFO station with as many servers as its thread
count. A server holds an event for the task's service latency; transfers between
tasks take no time. The clock counts integer microseconds, so latencies along an
uncontended path add up exactly. Station queues are unbounded.
"""

import heapq
import logging
from collections import deque
from typing import Dict, List

from fastbench.enums import TaskKind
from fastbench.errors import InjectionClosedError
from fastbench.executor import EventEnvelope, ParallelismMap, TopologyExecutor
from fastbench.generator import EventRecord
from fastbench.metrics import LatencySample, MetricsRecorder
from fastbench.routing import Router
from fastbench.topology import TopologySpec

logger = logging.getLogger(__name__)


def ms_to_us(value: float) -> int:
    return int(round(value * 1000.0))


class _Station:
    __slots__ = ('name', 'service_us', 'free', 'waiting', 'is_sink', 'router')

    def __init__(self, name: str, service_us: int, servers: int, is_sink: bool, router: Router):
        self.name = name
        self.service_us = service_us
        self.free = servers
        self.waiting = deque()
        self.is_sink = is_sink
        self.router = router


class SimulatedTopology(TopologyExecutor):
    """Discrete-event executor, created through :func:`fastbench.engine.start` with ``simulate=True``

    Events are collected by :meth:`inject` and the simulation runs in :meth:`drain`.
    Ingress times are virtual milliseconds from the run epoch.
    """
    def __init__(self, topo: TopologySpec, par: ParallelismMap, routers: Dict[str, Router],
                 recorder: MetricsRecorder, trace_paths: bool = False):
        self.topo = topo
        self.par = par
        self.recorder = recorder
        self._routers = routers
        self._trace_paths = trace_paths
        self._pending: List[tuple] = []
        self._closed = False
        self._sink_counts = {t.name: 0 for t in topo.sinks}
        self._paths: List[tuple] = []
        self._backlog_at_close = 0
        self.max_waiting: Dict[str, int] = {t.name: 0 for t in topo.processing_tasks}
        self._stations = {t.name: _Station(t.name, ms_to_us(t.service_latency), par.threads_for(t.name),
                                           t.kind == TaskKind.SINK, routers.get(t.name))
                          for t in topo.processing_tasks}

    @property
    def thread_census(self) -> int:
        return self.par.census(self.topo)

    @property
    def injected(self) -> int:
        return len(self._pending)

    @property
    def closed(self) -> bool:
        return self._closed

    @property
    def backlog_at_close(self) -> int:
        return self._backlog_at_close

    @property
    def sink_counts(self) -> Dict[str, int]:
        return dict(self._sink_counts)

    @property
    def paths(self) -> List[tuple]:
        return list(self._paths)

    def queue_depths(self) -> Dict[str, int]:
        return {name: len(s.waiting) for name, s in self._stations.items()}

    def inject(self, event: EventRecord, ingress: float = None):
        """Schedules an event to arrive at the source

        Args:
            event (EventRecord): event to inject
            ingress (float, optional): virtual arrival in ms. Defaults to the event offset.

        Raises:
            InjectionClosedError: once drain has been initiated
        """
        if self._closed:
            raise InjectionClosedError('event {0} injected after drain was initiated'.format(event.id))
        at = event.offset if ingress is None else ingress
        self._pending.append((ms_to_us(at), len(self._pending), event))

    def drain(self, timeout: float = None) -> Dict[str, int]:
        """Runs the simulation to completion

        Args:
            timeout (float, optional): ignored, the simulation always terminates

        Returns:
            Dict[str, int]: events terminated per sink
        """
        self._closed = True
        self._pending.sort(key=lambda p: (p[0], p[1]))
        source = self.topo.source.name
        source_router = self._routers[source]
        stations = self._stations
        heap = []
        seq = 0
        last_ingress = self._pending[-1][0] if self._pending else 0
        completed_by_last_ingress = 0

        def arrive(station: _Station, envelope: EventEnvelope, t: int):
            nonlocal seq
            if station.free:
                station.free -= 1
                seq += 1
                heapq.heappush(heap, (t + station.service_us, seq, station, envelope))
            else:
                station.waiting.append(envelope)
                if len(station.waiting) > self.max_waiting[station.name]:
                    self.max_waiting[station.name] = len(station.waiting)

        i, n = 0, len(self._pending)
        while i < n or heap:
            if heap and (i >= n or heap[0][0] <= self._pending[i][0]):
                t, _, station, envelope = heapq.heappop(heap)
                envelope.path.append(station.name)
                if station.is_sink:
                    self._finish(station.name, envelope, t)
                    if t <= last_ingress:
                        completed_by_last_ingress += 1
                else:
                    edge = station.router.route(envelope)
                    arrive(stations[edge.dst], envelope, t)
                if station.waiting:
                    seq += 1
                    heapq.heappush(heap, (t + station.service_us, seq, station, station.waiting.popleft()))
                else:
                    station.free += 1
            else:
                t, _, event = self._pending[i]
                i += 1
                envelope = EventEnvelope(event, t, [source])
                edge = source_router.route(envelope)
                arrive(stations[edge.dst], envelope, t)
        self._backlog_at_close = n - completed_by_last_ingress
        logger.info('simulated %d events: %s', n, self._sink_counts)
        return self.sink_counts

    def _finish(self, sink: str, envelope: EventEnvelope, t: int):
        envelope.sink = sink
        self.recorder.record(LatencySample(envelope.event.id, envelope.ingress / 1000.0, t / 1000.0, sink,
                                           envelope.event.size))
        self._sink_counts[sink] += 1
        if self._trace_paths:
            self._paths.append((envelope.event.id, tuple(envelope.path)))
