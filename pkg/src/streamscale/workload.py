"""Scenario builders: state-access microbenchmarks and benchmark-style queries.

Operator costs, selectivities, and state sizes for the query scenarios are
free parameters. The defaults below are tuned so the control loop reproduces
the decision structure the scenarios are meant to exercise (which operators
are memory-bound at level 0, which converge with plain scale-out, and how the
two policies' resource totals compare); they are not measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .backend import BackendCalibration
from .errors import ConfigError, GraphValidationError
from .model import (
    ConfigEntry,
    Configuration,
    MemoryLevelScheme,
    OperatorSpec,
    QueryGraph,
    TaskManagerSpec,
    validate_graph,
)

MIB = 1024 * 1024

# Microbenchmark stream: 1,000,001 distinct keys of 1,000 B each, accessed
# uniformly at random, backend pre-populated.
MICROBENCH_STATE_BYTES = 1_000_001 * 1_000
MICROBENCH_MEMORY_MB = (128, 256, 512, 1024, 2048)
MICROBENCH_TARGETS = {"read": 50_000.0, "write": 50_000.0, "update": 30_000.0}
MICROBENCH_CPU_COST = {"read": 50e-6, "write": 78.5e-6, "update": 140e-6}
MICROBENCH_ACCESS = {"read": (1.0, 0.0), "write": (0.0, 1.0), "update": (1.0, 1.0)}

NEXMARK_QUERIES = ("q1", "q2", "q3", "q5", "q8", "q11")
DEFAULT_QUERY_RATES = {
    "q1": 2_250_000.0,
    "q2": 2_250_000.0,
    "q3": 200_000.0,
    "q5": 150_000.0,
    "q8": 22_750.0,
    "q11": 13_000.0,
}


@dataclass(frozen=True)
class Scenario:
    """Everything one simulation run needs, minus the policy."""

    graph: QueryGraph
    initial_config: Configuration
    tm_spec: TaskManagerSpec = field(default_factory=TaskManagerSpec)
    scheme: MemoryLevelScheme = field(default_factory=MemoryLevelScheme)
    calibration: BackendCalibration = field(default_factory=BackendCalibration)
    horizon: float = 90.0
    label: str = "scenario"
    autoscaling: bool = True
    provisioning_limit: int = 16

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        problems = validate_graph(self.graph)
        if problems:
            raise GraphValidationError(problems)
        graph_ids = {op.id for op in self.graph.operators}
        if set(self.initial_config.entries) != graph_ids:
            raise ValueError("initial configuration must cover exactly the graph's operators")


def _uniform_config(graph: QueryGraph, level: int | None = 0) -> Configuration:
    entries = {
        op.id: ConfigEntry(parallelism=1, memory_level=level) for op in graph.operators
    }
    return Configuration(entries=entries, timestamp=0)


def microbenchmark(kind: str, parallelism: int, memory_mb: int) -> Scenario:
    """Single stateful operator driven at a fixed rate with a fixed allocation.

    ``memory_mb`` selects the per-task managed memory; autoscaling is off so
    the run measures the configuration as-is.
    """
    if kind not in MICROBENCH_TARGETS:
        raise ConfigError(f"unknown microbenchmark kind {kind!r}")
    if not 1 <= parallelism <= 8:
        raise ConfigError("microbenchmark parallelism must be in 1..8")
    if memory_mb not in MICROBENCH_MEMORY_MB:
        raise ConfigError(
            f"memory_mb must be one of {MICROBENCH_MEMORY_MB}, got {memory_mb}"
        )
    reads, writes = MICROBENCH_ACCESS[kind]
    graph = QueryGraph(
        operators=(
            OperatorSpec("source", "source"),
            OperatorSpec(
                "bench",
                "stateful",
                cpu_cost_per_event=MICROBENCH_CPU_COST[kind],
                selectivity=1.0,
                reads_per_event=reads,
                writes_per_event=writes,
                total_state_bytes=MICROBENCH_STATE_BYTES,
            ),
            OperatorSpec("sink", "sink", selectivity=0.0),
        ),
        edges=(("source", "bench"), ("bench", "sink")),
        sources=frozenset({"source"}),
        target_rate=MICROBENCH_TARGETS[kind],
    )
    scheme = MemoryLevelScheme(base_mb=128.0, max_level=4)
    level = int(math.log2(memory_mb / 128))
    config = Configuration(
        entries={
            "source": ConfigEntry(1, 0),
            "bench": ConfigEntry(parallelism, level),
            "sink": ConfigEntry(1, 0),
        },
        timestamp=0,
    )
    # Task managers sized so even the largest per-task allocation in the grid
    # fits four to a box.
    tm_spec = TaskManagerSpec(
        cores=4, total_memory_mb=9344.0, slots=4, managed_memory_budget_mb=8192.0
    )
    return Scenario(
        graph=graph,
        initial_config=config,
        tm_spec=tm_spec,
        scheme=scheme,
        horizon=60.0,
        label=f"micro_{kind}_{parallelism}x{memory_mb}",
        autoscaling=False,
    )


def nexmark_like(query: str, target_rate: float | None = None) -> Scenario:
    """Benchmark-style query topologies with tuned synthetic operator costs."""
    if query not in NEXMARK_QUERIES:
        raise ConfigError(f"unsupported query {query!r}")
    rate = DEFAULT_QUERY_RATES[query] if target_rate is None else float(target_rate)
    source = OperatorSpec("source", "source")
    sink = OperatorSpec("sink", "sink", selectivity=0.0)

    if query == "q1":
        ops = (source, OperatorSpec("map", "stateless", cpu_cost_per_event=2e-6), sink)
        edges = (("source", "map"), ("map", "sink"))
    elif query == "q2":
        ops = (
            source,
            OperatorSpec("filter", "stateless", cpu_cost_per_event=2e-6, selectivity=0.5),
            sink,
        )
        edges = (("source", "filter"), ("filter", "sink"))
    elif query == "q3":
        # Unbounded incremental join over two filtered inputs; the join's
        # state stays small, so vertical scaling never pays off.
        ops = (
            source,
            OperatorSpec("filter_a", "stateless", cpu_cost_per_event=2e-6, selectivity=0.5),
            OperatorSpec("filter_b", "stateless", cpu_cost_per_event=2.5e-6, selectivity=0.3),
            OperatorSpec(
                "join",
                "stateful",
                cpu_cost_per_event=15e-6,
                reads_per_event=1.0,
                writes_per_event=1.0,
                total_state_bytes=8 * MIB,
            ),
            sink,
        )
        edges = (
            ("source", "filter_a"),
            ("source", "filter_b"),
            ("filter_a", "join"),
            ("filter_b", "join"),
            ("join", "sink"),
        )
    elif query == "q5":
        ops = (
            source,
            OperatorSpec(
                "window_agg",
                "stateful",
                cpu_cost_per_event=30e-6,
                reads_per_event=1.0,
                writes_per_event=1.0,
                total_state_bytes=10 * MIB,
            ),
            sink,
        )
        edges = (("source", "window_agg"), ("window_agg", "sink"))
    elif query == "q8":
        # Tumbling-window join with a working set far above the level-0 cache:
        # the first decision should be vertical.
        ops = (
            source,
            OperatorSpec(
                "window_join",
                "stateful",
                cpu_cost_per_event=8e-6,
                reads_per_event=1.0,
                writes_per_event=2.0,
                total_state_bytes=int(162.5 * MIB),
            ),
            sink,
        )
        edges = (("source", "window_join"), ("window_join", "sink"))
    else:  # q11
        # Session-window aggregation: read-heavy against a large working set.
        ops = (
            source,
            OperatorSpec(
                "session_agg",
                "stateful",
                cpu_cost_per_event=10e-6,
                reads_per_event=2.0,
                writes_per_event=1.0,
                total_state_bytes=int(162.5 * MIB),
            ),
            sink,
        )
        edges = (("source", "session_agg"), ("session_agg", "sink"))

    graph = QueryGraph(
        operators=ops,
        edges=edges,
        sources=frozenset({"source"}),
        target_rate=rate,
    )
    return Scenario(
        graph=graph,
        initial_config=_uniform_config(graph),
        horizon=90.0,
        label=query,
    )
