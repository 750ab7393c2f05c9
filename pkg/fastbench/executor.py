# -----------------------------------------------------------------------------
# Summary:		Interface for topology executors and the types they share
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
#

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from fastbench.enums import TaskKind
from fastbench.generator import EventRecord
from fastbench.topology import TopologySpec


@dataclass
class EventEnvelope:
    """An event travelling through a topology, path starts at the source"""
    event: EventRecord
    ingress: float
    path: List[str] = field(default_factory=list)
    sink: Optional[str] = None
    payload: object = field(default=None, repr=False)


@dataclass(frozen=True)
class ParallelismMap:
    """Thread count per processing task

    Every worker task must be present. Sinks default to one thread when absent.
    """
    threads: Dict[str, int]

    @classmethod
    def uniform(cls, topo: TopologySpec, total: int) -> 'ParallelismMap':
        """Spreads ``total`` threads as evenly as possible over the processing tasks"""
        names = [t.name for t in topo.processing_tasks]
        if not names:
            return cls({})
        base, extra = divmod(max(total, len(names)), len(names))
        return cls({n: base + (1 if i < extra else 0) for i, n in enumerate(names)})

    @classmethod
    def ones(cls, topo: TopologySpec) -> 'ParallelismMap':
        return cls({t.name: 1 for t in topo.processing_tasks})

    def threads_for(self, name: str) -> int:
        return self.threads.get(name, 1)

    def census(self, topo: TopologySpec) -> int:
        return sum(self.threads_for(t.name) for t in topo.processing_tasks)

    @property
    def total(self) -> int:
        return sum(self.threads.values())

    def halved(self) -> 'ParallelismMap':
        return ParallelismMap({k: max(1, v // 2) for k, v in self.threads.items()})

    def violations(self, topo: TopologySpec) -> List[str]:
        problems = []
        for t in topo.tasks:
            if t.kind == TaskKind.WORKER and t.name not in self.threads:
                problems.append('{0}: missing from the parallelism map'.format(t.name))
        for name, count in self.threads.items():
            if name not in topo.by_name:
                problems.append('{0}: not a task of the topology'.format(name))
            elif topo.by_name[name].kind == TaskKind.SOURCE:
                problems.append('{0}: the source takes no worker threads'.format(name))
            if not isinstance(count, int) or count < 1:
                problems.append('{0}: thread count must be an integer >= 1 (got {1!r})'.format(name, count))
        return problems


class TopologyExecutor:
    """Interface for executors. Both the threaded engine and the simulator implement it.

    Timestamps passed to :meth:`inject` and recorded in samples are relative to
    the executor's epoch, in milliseconds for the simulator and on the
    :func:`fastbench.clock.now` clock for the threaded engine.
    """
    @property
    def thread_census(self) -> int:
        pass

    @property
    def injected(self) -> int:
        pass

    @property
    def closed(self) -> bool:
        pass

    @property
    def backlog_at_close(self) -> int:
        pass

    @property
    def sink_counts(self) -> Dict[str, int]:
        pass

    @property
    def paths(self) -> List[tuple]:
        """``(event_id, path)`` for every completed event, when path tracing is enabled"""
        pass

    def inject(self, event: EventRecord, ingress: float = None):
        pass

    def drain(self, timeout: float = None) -> Dict[str, int]:
        pass

    def queue_depths(self) -> Dict[str, int]:
        pass
