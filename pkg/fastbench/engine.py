# -----------------------------------------------------------------------------
# Summary:		Multi-threaded pipeline engine with bounded queues
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Executes a topology with a pool of worker threads per task.

Each processing task owns one bounded FIFO inbox shared by all of its incoming
edges. A full inbox blocks the producer, so backpressure travels upstream to the
replayer. Workers perform synthetic work for the task's service latency, then
route the event along one outgoing edge or, at a sink, record its latency.
"""

import logging
import queue
import threading
from typing import Dict, List

from fastbench.clock import now
from fastbench.enums import ResourceClass, RoutingMode, TaskKind
from fastbench.errors import DrainTimeoutError, InjectionClosedError, ValidationError
from fastbench.executor import EventEnvelope, ParallelismMap, TopologyExecutor
from fastbench.generator import EventRecord
from fastbench.metrics import LatencySample, MetricsRecorder
from fastbench.routing import Router, make_routers
from fastbench.simulation import SimulatedTopology
from fastbench.synthetic import PayloadPool, synthetic_work
from fastbench.topology import TaskSpec, TopologySpec, validate

logger = logging.getLogger(__name__)

DEFAULT_QUEUE_CAPACITY = 10000

_STOP = object()


class RunningTopology(TopologyExecutor):
    """Threaded executor, created through :func:`start`

    Args:
        topo (TopologySpec): validated topology
        par (ParallelismMap): validated thread counts
        routers (Dict[str, Router]): one router per task with outgoing edges
        queue_capacity (int): capacity of every task inbox
        recorder (MetricsRecorder): latency sink
        payloads (PayloadPool, optional): payload source for CPU work
        trace_paths (bool, optional): keep every completed path. Defaults to False.
    """
    def __init__(self, topo: TopologySpec, par: ParallelismMap, routers: Dict[str, Router], queue_capacity: int,
                 recorder: MetricsRecorder, payloads: PayloadPool = None, trace_paths: bool = False):
        self.topo = topo
        self.par = par
        self.recorder = recorder
        self._routers = routers
        self._payloads = payloads
        self._trace_paths = trace_paths
        self._source = topo.source.name
        self._inboxes = {t.name: queue.Queue(maxsize=queue_capacity) for t in topo.processing_tasks}
        self._lock = threading.Lock()
        self._done = threading.Condition()
        self._injected = 0
        self._completed = 0
        self._closed = False
        self._backlog_at_close = 0
        self._sink_counts = {t.name: 0 for t in topo.sinks}
        self._paths: List[tuple] = []
        self.epoch = now()
        self._threads = []
        for t in topo.processing_tasks:
            for k in range(par.threads_for(t.name)):
                thread = threading.Thread(target=self._work, args=(t,), name='{0}-{1}'.format(t.name, k),
                                          daemon=True)
                self._threads.append((t.name, thread))
        for _, thread in self._threads:
            thread.start()
        logger.info('started %d worker threads over %d tasks', len(self._threads), len(self._inboxes))

    def reset_epoch(self) -> float:
        """Sets the time origin of recorded samples to now, call before injecting"""
        self.epoch = now()
        return self.epoch

    @property
    def thread_census(self) -> int:
        return len(self._threads)

    @property
    def injected(self) -> int:
        return self._injected

    @property
    def completed(self) -> int:
        return self._completed

    @property
    def closed(self) -> bool:
        return self._closed

    @property
    def backlog_at_close(self) -> int:
        return self._backlog_at_close

    @property
    def sink_counts(self) -> Dict[str, int]:
        with self._lock:
            return dict(self._sink_counts)

    @property
    def paths(self) -> List[tuple]:
        with self._lock:
            return list(self._paths)

    def queue_depths(self) -> Dict[str, int]:
        return {name: q.qsize() for name, q in self._inboxes.items()}

    def inject(self, event: EventRecord, ingress: float = None):
        """Enqueues an event on the source's outgoing edge, blocking while the target inbox is full

        Args:
            event (EventRecord): event to inject
            ingress (float, optional): ingress time on the :func:`now` clock. Defaults to now.

        Raises:
            InjectionClosedError: once drain has been initiated
        """
        envelope = EventEnvelope(event, now() if ingress is None else ingress, [self._source])
        if self._payloads is not None:
            envelope.payload = self._payloads.payload(event.size)
        # admission and the injected count change under one lock
        with self._lock:
            if self._closed:
                raise InjectionClosedError('event {0} injected after drain was initiated'.format(event.id))
            self._injected += 1
        edge = self._routers[self._source].route(envelope)
        self._inboxes[edge.dst].put(envelope)

    def _work(self, task: TaskSpec):
        inbox = self._inboxes[task.name]
        router = self._routers.get(task.name)
        while True:
            envelope = inbox.get()
            if envelope is _STOP:
                return
            payload = envelope.payload if task.resource_class == ResourceClass.CPU else None
            synthetic_work(task.service_latency, task.resource_class, payload)
            envelope.path.append(task.name)
            if task.kind == TaskKind.SINK:
                self._complete(task, envelope, now())
            else:
                edge = router.route(envelope)
                self._inboxes[edge.dst].put(envelope)

    def _complete(self, task: TaskSpec, envelope: EventEnvelope, egress: float):
        envelope.sink = task.name
        self.recorder.record(LatencySample(envelope.event.id, (envelope.ingress - self.epoch) * 1000.0,
                                           (egress - self.epoch) * 1000.0, task.name, envelope.event.size))
        with self._lock:
            self._sink_counts[task.name] += 1
            if self._trace_paths:
                self._paths.append((envelope.event.id, tuple(envelope.path)))
        with self._done:
            self._completed += 1
            self._done.notify_all()

    def drain(self, timeout: float = None) -> Dict[str, int]:
        """Closes injection, waits for in-flight events and joins every worker

        Args:
            timeout (float, optional): watchdog in seconds. Defaults to no limit.

        Raises:
            DrainTimeoutError: with the inbox depths when the watchdog fires

        Returns:
            Dict[str, int]: events terminated per sink
        """
        with self._lock:
            self._closed = True
            self._backlog_at_close = self._injected - self._completed
        logger.info('draining, %d events in flight', self._backlog_at_close)
        with self._done:
            finished = self._done.wait_for(lambda: self._completed >= self._injected, timeout)
        if not finished:
            depths = self.queue_depths()
            logger.error('drain timed out after %s s, inbox depths %s', timeout, depths)
            raise DrainTimeoutError('{0} of {1} events still in flight after {2} s'.format(
                self._injected - self._completed, self._injected, timeout), depths)
        for name, _ in self._threads:
            self._inboxes[name].put(_STOP)
        for _, thread in self._threads:
            thread.join()
        counts = self.sink_counts
        logger.info('drained %d events: %s', self._completed, counts)
        return counts


def start(topo: TopologySpec, par: ParallelismMap = None, routing: RoutingMode = RoutingMode.QUOTA, seed: int = 0,
          queue_capacity: int = DEFAULT_QUEUE_CAPACITY, recorder: MetricsRecorder = None,
          simulate: bool = False, payloads: PayloadPool = None, trace_paths: bool = False) -> TopologyExecutor:
    """Starts an executor for a topology

    Args:
        topo (TopologySpec): topology to run
        par (ParallelismMap, optional): threads per task. Defaults to one per task.
        routing (RoutingMode, optional): quota or probabilistic routing. Defaults to QUOTA.
        seed (int, optional): seed for probabilistic routing. Defaults to 0.
        queue_capacity (int, optional): inbox capacity per task. Defaults to 10,000.
        recorder (MetricsRecorder, optional): latency recorder. Defaults to a new one.
        simulate (bool, optional): run as a deterministic discrete-event simulation. Defaults to False.
        payloads (PayloadPool, optional): payload source for CPU work in the threaded engine
        trace_paths (bool, optional): keep the path of every completed event. Defaults to False.

    Raises:
        ValidationError: on an invalid topology, parallelism map or queue capacity

    Returns:
        TopologyExecutor: a running topology, quiescent until events are injected
    """
    violations = [str(v) for v in validate(topo)]
    if violations:
        raise ValidationError('invalid topology: ' + '; '.join(violations))
    par = par if par is not None else ParallelismMap.ones(topo)
    problems = par.violations(topo)
    if problems:
        raise ValidationError('invalid parallelism map: ' + '; '.join(problems))
    if queue_capacity is None or queue_capacity < 1:
        raise ValidationError('queue capacity must be >= 1 (got {0})'.format(queue_capacity))
    recorder = recorder if recorder is not None else MetricsRecorder()
    routers = make_routers(topo, routing, seed)
    if simulate:
        return SimulatedTopology(topo, par, routers, recorder, trace_paths=trace_paths)
    return RunningTopology(topo, par, routers, queue_capacity, recorder, payloads=payloads, trace_paths=trace_paths)
