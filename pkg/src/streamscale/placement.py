"""Task placement: first-fit-decreasing bin packing onto task managers.

Tasks are one core each; managed memory is the heterogeneous dimension. A
task manager accepts a task while it has a free slot and enough managed
budget left. New managers are provisioned on demand up to a hard limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CapacityExhaustedError, UnsatisfiableDemandError
from .model import (
    Configuration,
    MemoryLevelScheme,
    QueryGraph,
    TaskManagerSpec,
    memory_for_level,
)

DEFAULT_PROVISIONING_LIMIT = 16


@dataclass(frozen=True)
class TaskDemand:
    operator_id: str
    task_index: int
    managed_mb: float
    cores: int = 1

    def __post_init__(self) -> None:
        if self.cores != 1:
            raise ValueError("one-core-per-task model requires cores == 1")
        if self.managed_mb < 0:
            raise ValueError("managed_mb must be >= 0")


@dataclass
class TaskManagerBin:
    spec: TaskManagerSpec
    demands: list[TaskDemand] = field(default_factory=list)

    @property
    def used_slots(self) -> int:
        return len(self.demands)

    @property
    def used_managed_mb(self) -> float:
        return sum(d.managed_mb for d in self.demands)

    def fits(self, demand: TaskDemand) -> bool:
        return (
            self.used_slots + 1 <= self.spec.slots
            and self.used_managed_mb + demand.managed_mb
            <= self.spec.managed_memory_budget_mb
        )


@dataclass
class ClusterState:
    tms: list[TaskManagerBin] = field(default_factory=list)
    provisioning_limit: int = DEFAULT_PROVISIONING_LIMIT

    def task_count(self) -> int:
        return sum(tm.used_slots for tm in self.tms)


def demands_from_config(
    config: Configuration, graph: QueryGraph, scheme: MemoryLevelScheme
) -> list[TaskDemand]:
    """Expand a configuration into one demand per task."""
    demands = []
    for op in graph.operators:
        entry = config.entries[op.id]
        managed = memory_for_level(scheme, entry.memory_level)
        for idx in range(entry.parallelism):
            demands.append(TaskDemand(op.id, idx, managed))
    return demands


def pack(
    demands: list[TaskDemand],
    tm_spec: TaskManagerSpec,
    existing: ClusterState | None = None,
    provisioning_limit: int = DEFAULT_PROVISIONING_LIMIT,
) -> ClusterState:
    """First-fit-decreasing by managed memory, deterministic tie-breaking.

    Existing task managers are reused before new ones are provisioned.
    Raises UnsatisfiableDemandError when a single demand can never fit and
    CapacityExhaustedError when the provisioning limit would be exceeded.
    """
    state = existing if existing is not None else ClusterState(
        provisioning_limit=provisioning_limit
    )
    for demand in demands:
        if demand.managed_mb > tm_spec.managed_memory_budget_mb:
            raise UnsatisfiableDemandError(
                f"task {demand.operator_id}[{demand.task_index}] needs "
                f"{demand.managed_mb} MB managed, budget is "
                f"{tm_spec.managed_memory_budget_mb} MB"
            )

    ordered = sorted(
        demands, key=lambda d: (-d.managed_mb, d.operator_id, d.task_index)
    )
    for demand in ordered:
        placed = False
        for tm in state.tms:
            if tm.fits(demand):
                tm.demands.append(demand)
                placed = True
                break
        if not placed:
            if len(state.tms) >= state.provisioning_limit:
                raise CapacityExhaustedError(
                    f"needed more than {state.provisioning_limit} task managers"
                )
            fresh = TaskManagerBin(spec=tm_spec)
            fresh.demands.append(demand)
            state.tms.append(fresh)
    return state


def fleet_resources(state: ClusterState) -> tuple[int, float]:
    """(cores, memory MB) provisioned across the whole fleet."""
    cores = sum(tm.spec.cores for tm in state.tms)
    memory = sum(tm.spec.total_memory_mb for tm in state.tms)
    return cores, memory
