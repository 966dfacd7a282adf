"""Core domain types: operators, query graphs, configurations, cluster specs.

All types are immutable values; the operations below are pure functions, so
everything in this module is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidLevelError

OPERATOR_KINDS = ("source", "sink", "stateless", "stateful")

# Non-managed memory share attributed to every occupied task slot when
# accounting resource totals (framework/heap/network overhead). Calibrated so
# that slot arithmetic lands on the reference cluster's reported totals; the
# raw task-manager spec (2048 MB / 4 slots) is intentionally not used here
# because resource reports exclude part of the JVM footprint.
SLOT_OVERHEAD_MB = 188.0


@dataclass(frozen=True)
class OperatorSpec:
    """One vertex of the dataflow graph and its cost/state profile.

    ``selectivity`` is output events per input event. ``reads_per_event`` and
    ``writes_per_event`` describe state-backend traffic and must be zero for
    anything that is not stateful. ``total_state_bytes`` is the working set
    over all keys, spread evenly across the operator's tasks.
    """

    id: str
    kind: str
    cpu_cost_per_event: float = 0.0
    selectivity: float = 1.0
    reads_per_event: float = 0.0
    writes_per_event: float = 0.0
    total_state_bytes: int = 0

    def __post_init__(self) -> None:
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.cpu_cost_per_event < 0 or self.selectivity < 0:
            raise ValueError(f"operator {self.id}: negative cost or selectivity")
        if self.reads_per_event < 0 or self.writes_per_event < 0:
            raise ValueError(f"operator {self.id}: negative state access counts")
        if self.kind != "stateful":
            if self.reads_per_event or self.writes_per_event or self.total_state_bytes:
                raise ValueError(
                    f"operator {self.id}: {self.kind} operators must not declare state"
                )
        else:
            if self.reads_per_event + self.writes_per_event <= 0:
                raise ValueError(
                    f"operator {self.id}: stateful operators need reads or writes"
                )
        if self.kind == "sink" and self.selectivity != 0:
            raise ValueError(f"operator {self.id}: sinks must have selectivity 0")

    @property
    def stateful(self) -> bool:
        return self.kind == "stateful"


@dataclass(frozen=True)
class QueryGraph:
    """A DAG of operators with explicit source set and per-source target rate."""

    operators: tuple[OperatorSpec, ...]
    edges: tuple[tuple[str, str], ...]
    sources: frozenset[str]
    target_rate: float

    def operator(self, op_id: str) -> OperatorSpec:
        for op in self.operators:
            if op.id == op_id:
                return op
        raise KeyError(op_id)

    def upstream(self, op_id: str) -> tuple[str, ...]:
        return tuple(u for u, d in self.edges if d == op_id)

    def downstream(self, op_id: str) -> tuple[str, ...]:
        return tuple(d for u, d in self.edges if u == op_id)

    def topological_order(self) -> list[str]:
        """Kahn's algorithm; raises ValueError if the graph has a cycle."""
        indeg = {op.id: 0 for op in self.operators}
        for _, d in self.edges:
            indeg[d] += 1
        ready = [op_id for op_id, n in sorted(indeg.items()) if n == 0]
        order: list[str] = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for nxt in sorted(self.downstream(node)):
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if len(order) != len(self.operators):
            raise ValueError("graph has a cycle")
        return order


@dataclass(frozen=True)
class ConfigEntry:
    """Per-operator slice of a configuration.

    ``memory_level`` is None for operators the policy classified stateless
    (no managed memory at all). ``scaled_up`` records whether the decision
    that produced this entry was a vertical scale-up.
    """

    parallelism: int
    memory_level: int | None
    scaled_up: bool = False

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.memory_level is not None and self.memory_level < 0:
            raise ValueError("memory level must be >= 0")
        if self.scaled_up and self.memory_level is None:
            raise ValueError("scaled_up requires a memory level")


@dataclass(frozen=True)
class Configuration:
    """Map operator id -> (parallelism, memory level, scaled-up flag)."""

    entries: dict[str, ConfigEntry]
    timestamp: int = 0

    def entry(self, op_id: str) -> ConfigEntry:
        return self.entries[op_id]

    def same_allocation(self, other: "Configuration") -> bool:
        """True when parallelism and memory match per operator (flags ignored)."""
        if self.entries.keys() != other.entries.keys():
            return False
        return all(
            (e.parallelism, e.memory_level)
            == (other.entries[k].parallelism, other.entries[k].memory_level)
            for k, e in self.entries.items()
        )


@dataclass(frozen=True)
class TaskManagerSpec:
    """Worker process hosting identical task slots with shared budgets."""

    cores: int = 4
    total_memory_mb: float = 2048.0
    slots: int = 4
    managed_memory_budget_mb: float = 632.0

    def __post_init__(self) -> None:
        if self.slots > self.cores:
            raise ValueError("one-core-per-task model requires slots <= cores")
        if self.managed_memory_budget_mb > self.total_memory_mb:
            raise ValueError("managed budget exceeds total memory")


@dataclass(frozen=True)
class MemoryLevelScheme:
    """Discrete managed-memory tiers: level x allocates base * 2^x MB per task."""

    base_mb: float = 158.0
    max_level: int = 3

    def __post_init__(self) -> None:
        if self.base_mb <= 0:
            raise ValueError("base_mb must be positive")
        if self.max_level < 1:
            raise ValueError("max_level must be >= 1")


def memory_for_level(scheme: MemoryLevelScheme, level: int | None) -> float:
    """Managed MB per task at a memory level; None (stateless) gets nothing."""
    if level is None:
        return 0.0
    if level < 0 or level > scheme.max_level:
        raise InvalidLevelError(
            f"level {level} outside [0, {scheme.max_level}]"
        )
    return scheme.base_mb * (2 ** level)


def validate_graph(graph: QueryGraph) -> list[str]:
    """Check all structural invariants; returns the list of violations (empty if ok)."""
    problems: list[str] = []
    ids = [op.id for op in graph.operators]
    if len(set(ids)) != len(ids):
        problems.append("duplicate operator ids")
    known = set(ids)
    for u, d in graph.edges:
        if u not in known or d not in known:
            problems.append(f"edge ({u}, {d}) references unknown operator")
    if problems:
        return problems

    for src in graph.sources:
        if src not in known:
            problems.append(f"source {src} is not an operator")
    for op in graph.operators:
        declared = op.id in graph.sources
        if declared != (op.kind == "source"):
            problems.append(f"operator {op.id}: source set and kind disagree")
        if op.kind == "source" and graph.upstream(op.id):
            problems.append(f"source {op.id} has incoming edges")
        if op.kind == "sink" and graph.downstream(op.id):
            problems.append(f"sink {op.id} has outgoing edges")

    try:
        graph.topological_order()
    except ValueError:
        problems.append("cycle detected")
        return problems

    # Reachability from sources.
    reached = set(graph.sources)
    frontier = list(graph.sources)
    while frontier:
        node = frontier.pop()
        for nxt in graph.downstream(node):
            if nxt not in reached:
                reached.add(nxt)
                frontier.append(nxt)
    for op in graph.operators:
        if op.id not in reached and op.kind != "source":
            problems.append(f"operator {op.id} unreachable from any source")

    if graph.target_rate <= 0:
        problems.append("target_rate must be positive")
    return problems


def total_resources(
    config: Configuration,
    graph: QueryGraph,
    scheme: MemoryLevelScheme,
    slot_overhead_mb: float = SLOT_OVERHEAD_MB,
) -> tuple[int, float]:
    """Aggregate (cores, memory MB) attributable to a configuration.

    Sources are excluded from the count; sinks are included. Every counted
    slot carries a fixed non-managed share plus its managed allocation.
    """
    cores = 0
    memory = 0.0
    for op in graph.operators:
        if op.kind == "source":
            continue
        entry = config.entries.get(op.id)
        if entry is None:
            continue
        cores += entry.parallelism
        managed = memory_for_level(scheme, entry.memory_level)
        memory += entry.parallelism * (slot_overhead_mb + managed)
    return cores, memory
