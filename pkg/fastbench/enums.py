# -----------------------------------------------------------------------------
# Summary:		Enumerations shared across the harness
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
#

import enum


class ResourceClass(str, enum.Enum):
    CPU = 'cpu'
    IDLE = 'idle'


class TaskKind(str, enum.Enum):
    SOURCE = 'source'
    WORKER = 'worker'
    SINK = 'sink'


class EdgeLabel(str, enum.Enum):
    PASS = 'P'
    FAIL = 'F'
    DEFAULT = 'default'


class RoutingMode(str, enum.Enum):
    QUOTA = 'quota'
    PROBABILISTIC = 'prob'


class ArrivalMode(str, enum.Enum):
    EVEN = 'even'
    POISSON = 'poisson'
