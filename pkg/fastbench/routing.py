# -----------------------------------------------------------------------------
# Summary:		Selectivity-based edge routing
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Routers choose the outgoing edge every event takes when it leaves a task.

Quota routing is an error-diffusion accumulator: after ``N`` events each edge
has been taken within one event of ``N x selectivity``. Probabilistic routing
draws from a seeded random source.
"""

import threading
from typing import Dict, List, Sequence

import numpy as np

from fastbench.enums import RoutingMode
from fastbench.topology import EdgeSpec, TopologySpec


class Router:
    """Interface for routers, one instance per task"""
    def __init__(self, edges: Sequence[EdgeSpec]):
        self.edges = tuple(edges)
        self._counts = [0] * len(self.edges)
        self._lock = threading.Lock()

    def route(self, envelope=None) -> EdgeSpec:
        """Chooses the edge for the next event leaving the task"""
        with self._lock:
            i = self._choose() if len(self.edges) > 1 else 0
            self._counts[i] += 1
        return self.edges[i]

    def _choose(self) -> int:
        raise NotImplementedError

    @property
    def total(self) -> int:
        return sum(self._counts)

    def counts(self) -> Dict[str, int]:
        """Events routed so far, keyed by destination task"""
        with self._lock:
            return {e.dst: c for e, c in zip(self.edges, self._counts)}


class QuotaRouter(Router):
    """Deterministic router tracking ``N x selectivity`` per edge

    The edge with the largest deficit ``N x s - count`` is taken, earlier
    declared edges win ties.
    """
    def _choose(self) -> int:
        n = sum(self._counts) + 1
        best, best_deficit = 0, None
        for i, e in enumerate(self.edges):
            deficit = n * e.selectivity - self._counts[i]
            if best_deficit is None or deficit > best_deficit:
                best, best_deficit = i, deficit
        return best


class ProbabilisticRouter(Router):
    """Router drawing each edge with probability equal to its selectivity

    Args:
        edges (Sequence[EdgeSpec]): outgoing edges of the task
        rng (np.random.Generator): random source owned by this router
    """
    def __init__(self, edges: Sequence[EdgeSpec], rng: np.random.Generator):
        super().__init__(edges)
        self._rng = rng
        cum = np.cumsum([e.selectivity for e in self.edges])
        if len(cum):
            cum[-1] = 1.0
        self._cum = cum

    def _choose(self) -> int:
        i = int(np.searchsorted(self._cum, self._rng.random(), side='right'))
        return min(i, len(self.edges) - 1)


def make_routers(topo: TopologySpec, mode: RoutingMode, seed: int = 0) -> Dict[str, Router]:
    """Builds one router for every task with outgoing edges

    Per-task random streams are spawned from ``seed`` so each task's routing
    sequence is independent of how other tasks interleave.
    """
    mode = RoutingMode(mode)
    names: List[str] = [t.name for t in topo.tasks if topo.outgoing.get(t.name)]
    streams = np.random.SeedSequence(seed).spawn(len(names))
    routers = {}
    for name, stream in zip(names, streams):
        edges = topo.outgoing[name]
        if mode == RoutingMode.QUOTA:
            routers[name] = QuotaRouter(edges)
        else:
            routers[name] = ProbabilisticRouter(edges, np.random.default_rng(stream))
    return routers
