"""Stochastic timed Petri nets with continuous resources.

Build a :class:`Net`, run it with :func:`simulate`, batch it with
:func:`run_batch`, and analyse capability availability with the functions in
:mod:`petrisim.reliability`.
"""
__version__ = "0.1.0"

from .compose import FusionError, FusionGroup, FusionMap, levels_report, merge_nets
from .engine import SimConfig, SimState, Trace, enabled_instances, replay, resource_feasible, select_firing, simulate
from .fileformat import FormatError, parse_net, serialize_net
from .montecarlo import (
    BatchResult,
    CorrelationMatrix,
    Distribution,
    SamplingEntry,
    SamplingSpec,
    Target,
    correlation_matrix,
    instantiate,
    run_batch,
    summarize,
)
from .net import (
    Duration,
    Goal,
    InvalidNetError,
    Net,
    Place,
    Resource,
    ResourceCondition,
    TokenCondition,
    Transition,
    untimed_skeleton,
    validate_net,
)
from .reach import reachable_markings
from .reliability import (
    AvailabilityModel,
    Capability,
    Device,
    capability_rollup,
    device_availability,
    mission_availability,
    redundancy_sweep,
    reliability_mc,
)

__all__ = [
    "AvailabilityModel",
    "BatchResult",
    "Capability",
    "CorrelationMatrix",
    "Device",
    "Distribution",
    "Duration",
    "FormatError",
    "FusionError",
    "FusionGroup",
    "FusionMap",
    "Goal",
    "InvalidNetError",
    "Net",
    "Place",
    "Resource",
    "ResourceCondition",
    "SamplingEntry",
    "SamplingSpec",
    "SimConfig",
    "SimState",
    "Target",
    "TokenCondition",
    "Trace",
    "Transition",
    "capability_rollup",
    "correlation_matrix",
    "device_availability",
    "enabled_instances",
    "instantiate",
    "levels_report",
    "merge_nets",
    "mission_availability",
    "parse_net",
    "reachable_markings",
    "redundancy_sweep",
    "reliability_mc",
    "replay",
    "resource_feasible",
    "run_batch",
    "select_firing",
    "serialize_net",
    "simulate",
    "summarize",
    "untimed_skeleton",
    "validate_net",
]
