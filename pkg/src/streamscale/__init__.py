"""Desk-scale simulator and policy library for hybrid CPU/memory elastic
scaling of distributed streaming dataflows."""

from .backend import (
    BackendCalibration,
    MemorySplit,
    cache_hit_rate,
    per_event_service_time,
    split_managed_memory,
    state_access_latency,
)
from .ds2 import PolicyParams, ds2_scale, should_trigger
from .hybrid import decide, hybrid_scale
from .metrics import DecisionHistory, MetricWindow, OperatorWindow, aggregate, improvement
from .model import (
    ConfigEntry,
    Configuration,
    MemoryLevelScheme,
    OperatorSpec,
    QueryGraph,
    TaskManagerSpec,
    memory_for_level,
    total_resources,
    validate_graph,
)
from .placement import ClusterState, TaskDemand, fleet_resources, pack
from .simulator import TimingParams, Trace, TracePoint, apply_configuration, run, step
from .workload import Scenario, microbenchmark, nexmark_like

__version__ = "0.1.0"

__all__ = [
    "BackendCalibration",
    "ClusterState",
    "ConfigEntry",
    "Configuration",
    "DecisionHistory",
    "MemoryLevelScheme",
    "MemorySplit",
    "MetricWindow",
    "OperatorSpec",
    "OperatorWindow",
    "PolicyParams",
    "QueryGraph",
    "Scenario",
    "TaskDemand",
    "TaskManagerSpec",
    "TimingParams",
    "Trace",
    "TracePoint",
    "aggregate",
    "apply_configuration",
    "cache_hit_rate",
    "decide",
    "ds2_scale",
    "fleet_resources",
    "hybrid_scale",
    "improvement",
    "memory_for_level",
    "microbenchmark",
    "nexmark_like",
    "pack",
    "per_event_service_time",
    "run",
    "should_trigger",
    "split_managed_memory",
    "state_access_latency",
    "step",
    "total_resources",
    "validate_graph",
]
