"""Fast-data stream benchmark harness

Models streaming dataflows as task graphs, generates distribution-shaped
event traces, executes them on an embedded multi-threaded pipeline engine or a
deterministic simulator, and reports per-event latency against an SLA.
"""
# Copyright (c) FastBench Authors. All Rights Reserved.
#
# This file is part of FastBench, distributed under the MIT License.

from importlib.metadata import PackageNotFoundError, version

from fastbench.errors import (DrainTimeoutError, FastBenchError, InjectionClosedError, OutOfRangeError,  # noqa
                              ReplayStallError, TraceFormatError, ValidationError, VerificationError,
                              WorkloadError)
from fastbench.enums import ArrivalMode, EdgeLabel, ResourceClass, RoutingMode, TaskKind  # noqa
from fastbench.distributions import RateProfile, SizeHistogram  # noqa
from fastbench.topology import EdgeSpec, TaskSpec, TopologySpec  # noqa
from fastbench.generator import EventRecord, Trace, generate, read_trace, replay, write_trace  # noqa
from fastbench.executor import ParallelismMap, TopologyExecutor  # noqa
from fastbench.engine import start  # noqa
from fastbench.metrics import RunReport, export, finalize, verify_report  # noqa
from fastbench.planner import PlanInput, min_parallelism, slot_allocation  # noqa
from fastbench.workloads import WorkloadSpec, builtin, load  # noqa
from fastbench.config import RunConfig  # noqa
from fastbench.runner import RunOutcome, run_benchmark  # noqa

__version__ = "unknown"
try:
    __version__ = version(__name__)
except PackageNotFoundError:
    # package is not installed
    pass
