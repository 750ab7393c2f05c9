# -----------------------------------------------------------------------------
# Summary:		Run configuration and parallelism files
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
#

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from fastbench.engine import DEFAULT_QUEUE_CAPACITY
from fastbench.enums import ArrivalMode, RoutingMode
from fastbench.errors import ValidationError
from fastbench.executor import ParallelismMap

logger = logging.getLogger(__name__)

AUTO = 'auto'


@dataclass
class RunConfig:
    """Everything ``bench run`` needs, one field per command line option

    Attributes:
        workload (str): builtin workload name or workload file
        report_dir (str): root under which a fresh run directory is created
        seed (int): generator and routing seed
        trace (str, optional): replay this trace instead of generating one
        time_scale (float): inter-arrival gaps are divided by this factor
        rate_scale (float): every rate of the profile is multiplied by this factor
        duration_cap (float, optional): seconds of the profile to run
        routing (RoutingMode, optional): overrides the workload's routing mode
        parallelism (str): ``auto`` to plan, or a JSON parallelism file
        headroom (float, optional): planner headroom, defaults to the workload's
        queue_capacity (int): capacity of every task inbox
        simulate (bool): deterministic discrete-event simulation instead of threads
        host_cpu (bool): sample whole-host CPU instead of this process
        cpu_interval (float): seconds between CPU samples
        workers (int): replay emitter threads
        drain_timeout (float, optional): drain watchdog in seconds
        stall_budget (float): seconds an emission may lag before replay aborts
        arrivals (ArrivalMode): spacing of generated events within a bucket
        overrides (Dict[str, float]): workload parameter values
    """
    workload: str
    report_dir: str = 'reports'
    seed: int = 0
    trace: Optional[str] = None
    time_scale: float = 1.0
    rate_scale: float = 1.0
    duration_cap: Optional[float] = None
    routing: Optional[RoutingMode] = None
    parallelism: str = AUTO
    headroom: Optional[float] = None
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    simulate: bool = False
    host_cpu: bool = False
    cpu_interval: float = 1.0
    workers: int = 1
    drain_timeout: Optional[float] = None
    stall_budget: float = 5.0
    arrivals: ArrivalMode = ArrivalMode.EVEN
    overrides: Dict[str, float] = field(default_factory=dict)

    def violations(self) -> List[str]:
        problems = []
        if not self.time_scale > 0:
            problems.append('time scale must be > 0')
        if not self.rate_scale > 0:
            problems.append('rate scale must be > 0')
        if self.duration_cap is not None and not self.duration_cap > 0:
            problems.append('duration cap must be > 0')
        if self.headroom is not None and not self.headroom >= 1:
            problems.append('headroom must be >= 1')
        if self.queue_capacity < 1:
            problems.append('queue capacity must be >= 1')
        if self.workers < 1:
            problems.append('replay needs at least one worker')
        if self.drain_timeout is not None and not self.drain_timeout > 0:
            problems.append('drain timeout must be > 0')
        if not self.stall_budget > 0:
            problems.append('stall budget must be > 0')
        if not self.cpu_interval > 0:
            problems.append('cpu sampling interval must be > 0')
        if self.simulate and self.host_cpu:
            problems.append('a simulated run takes no CPU measurements, drop --host-cpu')
        if self.simulate and self.workers > 1:
            problems.append('replay workers apply to threaded runs only')
        return problems

    def check(self):
        """Raises:
            ValidationError: listing every inconsistent option
        """
        problems = self.violations()
        if problems:
            raise ValidationError('invalid run configuration: ' + '; '.join(problems))


def parse_override(text: str) -> tuple:
    """Parses ``NAME=VALUE`` into a parameter override"""
    name, sep, value = text.partition('=')
    if not sep or not name.strip():
        raise ValidationError('override {0!r} is not NAME=VALUE'.format(text))
    try:
        return name.strip(), float(value)
    except ValueError:
        raise ValidationError('override {0!r}: {1!r} is not a number'.format(text, value))


def load_parallelism(path) -> ParallelismMap:
    """Reads a JSON object mapping task names to thread counts

    Raises:
        ValidationError: when the file is unreadable or not such an object
    """
    try:
        doc = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as err:
        raise ValidationError('cannot read parallelism file {0}: {1}'.format(path, err))
    if not isinstance(doc, dict) or not all(isinstance(k, str) for k in doc):
        raise ValidationError('parallelism file {0} must hold an object of task: threads'.format(path))
    return ParallelismMap(dict(doc))


def dump_parallelism(par: ParallelismMap) -> str:
    return json.dumps(par.threads, indent=2)
