# -----------------------------------------------------------------------------
# Summary:		Workload files: schema, loader and the shipped workloads
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""A workload binds a topology to its input distributions, SLA and planner
inputs. Workloads are UTF-8 JSON files checked against ``workload.schema.json``
and then semantically.

A derived workload names a ``base`` and a ``scale`` block; every latency and
the SLA are divided by ``latency_divisor`` and the rate profile is compressed
by ``time_compression``.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from jsonschema import Draft202012Validator

from fastbench.distributions import RateProfile, SizeHistogram, compress_time
from fastbench.enums import EdgeLabel, ResourceClass, RoutingMode, TaskKind
from fastbench.errors import ValidationError, WorkloadError
from fastbench.planner import DEFAULT_HEADROOM, DEFAULT_SLOTS_PER_NODE, PlanInput
from fastbench.topology import EdgeSpec, TaskSpec, TopologySpec, validate

logger = logging.getLogger(__name__)

WORKLOAD_SUFFIX = '.workload'
SCHEMA_FILE = 'workload.schema.json'

# derived workloads may chain, but not indefinitely
_MAX_BASE_DEPTH = 4


@dataclass(frozen=True)
class PlannerSettings:
    headroom: float = DEFAULT_HEADROOM
    threads_per_node: int = DEFAULT_SLOTS_PER_NODE
    slots_per_node: int = DEFAULT_SLOTS_PER_NODE


@dataclass(frozen=True)
class WorkloadSpec:
    """A fully validated workload

    Attributes:
        name (str): workload name
        topology (TopologySpec): the dataflow
        profile (RateProfile): input rate over time
        histogram (SizeHistogram): payload sizes
        sla_ms (float): latency contract in milliseconds
        routing (RoutingMode): default routing mode
        planner (PlannerSettings): planner inputs
        parameters (Dict[str, float]): values bound to parametrised selectivities
        notes (Tuple[str, ...]): provenance notes carried from the file
    """
    name: str
    topology: TopologySpec
    profile: RateProfile
    histogram: SizeHistogram
    sla_ms: float
    routing: RoutingMode = RoutingMode.QUOTA
    planner: PlannerSettings = PlannerSettings()
    parameters: Dict[str, float] = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    def plan_input(self, headroom: float = None) -> PlanInput:
        return PlanInput(self.topology, self.profile.peak_rate,
                         self.planner.headroom if headroom is None else headroom,
                         self.planner.threads_per_node, self.planner.slots_per_node)

    def digest(self) -> str:
        return '{0}:{1}'.format(self.profile.digest(), self.histogram.digest())


def _schema() -> dict:
    return json.loads(resources.files(__name__).joinpath(SCHEMA_FILE).read_text(encoding='utf-8'))


def _location(error) -> str:
    return '/'.join(str(p) for p in error.absolute_path) or '<root>'


def _edge_name(doc: dict, index) -> Optional[str]:
    try:
        edge = doc['edges'][index]
        return '{0} -> {1}'.format(edge.get('from'), edge.get('to'))
    except (KeyError, IndexError, TypeError, AttributeError):
        return None


def _schema_errors(doc, schema: dict) -> List[str]:
    errors = []
    for error in sorted(Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        where = _location(error)
        path = list(error.absolute_path)
        if len(path) >= 2 and path[0] == 'edges':
            edge = _edge_name(doc, path[1])
            if edge:
                where = '{0} (edge {1})'.format(where, edge)
        errors.append('{0}: {1}'.format(where, error.message))
    return errors


def _read_json(path: Path) -> dict:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise WorkloadError('cannot read workload {0}'.format(path), [str(e)])
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise WorkloadError('workload {0} is not valid JSON'.format(path),
                            ['line {0} column {1}: {2}'.format(e.lineno, e.colno, e.msg)])


def _selectivity(raw, parameters: Mapping[str, float], where: str, errors: List[str]) -> float:
    if isinstance(raw, dict):
        name = raw['param']
        if name not in parameters:
            errors.append('{0}: unknown parameter {1!r}'.format(where, name))
            return 0.0
        value = float(parameters[name])
        return 1.0 - value if raw.get('complement', False) else value
    return float(raw)


def _build(doc: dict, path, overrides: Mapping[str, float]) -> WorkloadSpec:
    errors = []
    parameters = dict(doc.get('parameters', {}))
    for name, value in overrides.items():
        if name not in parameters:
            errors.append('parameters: unknown parameter {0!r}'.format(name))
        elif not 0.0 <= value <= 1.0:
            errors.append('parameters/{0}: {1} outside [0, 1]'.format(name, value))
        else:
            parameters[name] = float(value)

    tasks = tuple(TaskSpec(t['name'], float(t['latency_ms']), ResourceClass(t.get('resource_class', 'cpu')),
                           TaskKind(t['kind'])) for t in doc['tasks'])
    edges = []
    for i, e in enumerate(doc['edges']):
        where = 'edges/{0} (edge {1} -> {2})'.format(i, e['from'], e['to'])
        edges.append(EdgeSpec(e['from'], e['to'], EdgeLabel(e.get('label', 'default')),
                              _selectivity(e['selectivity'], parameters, where, errors)))
    topology = TopologySpec(tasks, tuple(edges), tuple(doc['success_path']))
    errors.extend('topology: {0}'.format(v) for v in validate(topology))

    profile = RateProfile.from_hourly(doc['rate_profile_hourly'])
    errors.extend('rate_profile_hourly: {0}'.format(p) for p in profile.violations())
    histogram = SizeHistogram.from_triples((b['lo'], b['hi'], b['prob']) for b in doc['size_histogram'])
    errors.extend('size_histogram: {0}'.format(p) for p in histogram.violations())

    if errors:
        raise WorkloadError('workload {0} is invalid'.format(path), errors)
    return WorkloadSpec(name=doc['name'], topology=topology, profile=profile, histogram=histogram,
                        sla_ms=float(doc['sla_ms']), routing=RoutingMode(doc.get('routing', 'quota')),
                        planner=PlannerSettings(**doc.get('planner', {})), parameters=parameters,
                        notes=tuple(doc.get('notes', ())))


def derive(base: WorkloadSpec, name: str, latency_divisor: float, time_compression: float) -> WorkloadSpec:
    """Scales a workload down for a desk run

    Every task latency and the SLA are divided by ``latency_divisor``; the rate
    profile keeps its rates while its durations shrink by ``time_compression``.
    Topology shape and selectivities are unchanged.

    Raises:
        ValidationError: when either factor is not positive
    """
    if not latency_divisor > 0:
        raise ValidationError('latency divisor must be > 0 (got {0})'.format(latency_divisor))
    topo = base.topology
    tasks = tuple(replace(t, service_latency=t.service_latency / latency_divisor) for t in topo.tasks)
    return replace(base, name=name, topology=TopologySpec(tasks, topo.edges, topo.success_path),
                   profile=compress_time(base.profile, time_compression), sla_ms=base.sla_ms / latency_divisor)


def _resolve_base(name: str, path: Path) -> Path:
    sibling = path.parent / (name + WORKLOAD_SUFFIX)
    if sibling.is_file():
        return sibling
    if Path(name).is_file():
        return Path(name)
    raise WorkloadError('workload {0}: base {1!r} not found'.format(path, name))


def _load(path: Path, overrides: Mapping[str, float], depth: int) -> WorkloadSpec:
    if depth > _MAX_BASE_DEPTH:
        raise WorkloadError('workload {0}: base chain deeper than {1}'.format(path, _MAX_BASE_DEPTH))
    doc = _read_json(path)
    schema = _schema()
    if isinstance(doc, dict) and 'base' in doc:
        errors = _schema_errors(doc, {'$ref': '#/$defs/derived', '$defs': schema['$defs']})
        if errors:
            raise WorkloadError('workload {0} does not match the schema'.format(path), errors)
        own = dict(doc.get('parameters', {}))
        own.update(overrides)
        base = _load(_resolve_base(doc['base'], path), own, depth + 1)
        scale = doc['scale']
        spec = derive(base, doc['name'], scale['latency_divisor'], scale['time_compression'])
        if 'routing' in doc:
            spec = replace(spec, routing=RoutingMode(doc['routing']))
        if 'planner' in doc:
            spec = replace(spec, planner=replace(spec.planner, **doc['planner']))
        return replace(spec, notes=base.notes + tuple(doc.get('notes', ())))
    errors = _schema_errors(doc, schema)
    if errors:
        raise WorkloadError('workload {0} does not match the schema'.format(path), errors)
    return _build(doc, path, overrides)


def load(path, overrides: Mapping[str, float] = None) -> WorkloadSpec:
    """Loads and validates a workload file

    Args:
        path: workload file
        overrides (Mapping[str, float], optional): values for the workload's named parameters

    Raises:
        WorkloadError: listing every schema or semantic problem with the field it concerns

    Returns:
        WorkloadSpec: the validated workload
    """
    spec = _load(Path(path), dict(overrides or {}), 0)
    logger.debug('loaded workload %s from %s', spec.name, path)
    return spec


def available() -> List[str]:
    """Names of the shipped workloads"""
    return sorted(p.name[:-len(WORKLOAD_SUFFIX)] for p in resources.files(__name__).iterdir()
                  if p.name.endswith(WORKLOAD_SUFFIX))


def builtin(name: str, overrides: Mapping[str, float] = None) -> WorkloadSpec:
    """Loads a shipped workload by name

    Raises:
        WorkloadError: when the name is unknown, listing the available workloads
    """
    names = available()
    if name not in names:
        raise WorkloadError('unknown workload {0!r}, available: {1}'.format(name, ', '.join(names)))
    with resources.as_file(resources.files(__name__).joinpath(name + WORKLOAD_SUFFIX)) as path:
        return load(path, overrides)


def resolve(name_or_path: str, overrides: Mapping[str, float] = None) -> WorkloadSpec:
    """A builtin name or a path to a workload file"""
    if name_or_path in available():
        return builtin(name_or_path, overrides)
    if not Path(name_or_path).exists():
        raise WorkloadError('no workload file {0!r} and no builtin of that name, available: {1}'.format(
            name_or_path, ', '.join(available())))
    return load(name_or_path, overrides)
