"""Analytical model of an LSM-tree state backend.

Managed memory is split between a write buffer (MemTable) and a block cache;
reads hit the cache with a probability proportional to how much of the
effective working set fits, and misses pay a disk lookup. Writes only care
about the MemTable size. The constants in ``BackendCalibration`` are
calibration knobs, not measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InsufficientMemoryError, ModelError
from .model import MemoryLevelScheme, OperatorSpec, memory_for_level

MIB = 1024 * 1024

# Full-size first-level write buffer; allocations below this use a smaller,
# slightly slower power-of-two buffer.
MEMTABLE_CAP_MB = 64


@dataclass(frozen=True)
class MemorySplit:
    memtable_mb: float
    cache_mb: float


@dataclass(frozen=True)
class BackendCalibration:
    """Latency and working-set constants for the state-access model.

    ``working_set_overhead`` inflates raw state bytes into effective cache
    demand (index/metadata blocks, fragmentation). Defaults are tuned so the
    read/write/update microbenchmark grid shows the expected qualitative
    orderings; they are not hardware measurements.
    """

    mem_hit_latency: float = 1e-6
    disk_miss_latency: float = 200e-6
    memtable_write_latency: float = 2e-6
    small_memtable_write_penalty: float = 1.3
    working_set_overhead: float = 4.0

    def __post_init__(self) -> None:
        if min(self.mem_hit_latency, self.disk_miss_latency,
               self.memtable_write_latency) <= 0:
            raise ValueError("latencies must be positive")
        if self.disk_miss_latency <= self.mem_hit_latency:
            raise ValueError("disk misses must cost more than memory hits")
        if self.working_set_overhead < 1:
            raise ValueError("working_set_overhead must be >= 1")


def split_managed_memory(total_mb: float) -> MemorySplit:
    """Split managed memory into MemTable and cache.

    The MemTable gets the largest power of two strictly below half the total,
    capped at 64 MB; the cache takes the rest (always at least half).
    """
    if total_mb < 64:
        raise InsufficientMemoryError(
            f"managed memory {total_mb} MB below the 64 MB minimum"
        )
    half = total_mb / 2
    power = 1
    while power * 2 < half:
        power *= 2
    memtable = float(min(MEMTABLE_CAP_MB, power))
    return MemorySplit(memtable_mb=memtable, cache_mb=total_mb - memtable)


def cache_hit_rate(
    cache_mb: float,
    per_task_state_bytes: float,
    reads_per_event: float,
    cal: BackendCalibration,
) -> float:
    """Fraction of reads served from the cache under uniform key access."""
    if cache_mb < 0:
        raise ValueError("cache_mb must be >= 0")
    if reads_per_event <= 0 or per_task_state_bytes <= 0:
        return 1.0
    demand = cal.working_set_overhead * per_task_state_bytes
    return min(1.0, cache_mb * MIB / demand)


def state_access_latency(
    hit_rate: float,
    split: MemorySplit,
    reads_per_event: float,
    writes_per_event: float,
    cal: BackendCalibration,
) -> float:
    """Seconds per event spent in the state backend."""
    if not 0 <= hit_rate <= 1:
        raise ValueError("hit_rate must be in [0, 1]")
    read = reads_per_event * (
        hit_rate * cal.mem_hit_latency + (1 - hit_rate) * cal.disk_miss_latency
    )
    write_unit = cal.memtable_write_latency
    if split.memtable_mb < MEMTABLE_CAP_MB:
        write_unit *= cal.small_memtable_write_penalty
    return read + writes_per_event * write_unit


def backend_metrics(
    op: OperatorSpec,
    memory_level: int | None,
    parallelism: int,
    scheme: MemoryLevelScheme,
    cal: BackendCalibration,
) -> tuple[float, float]:
    """(cache hit rate, state access latency) for a stateful operator's tasks."""
    if not op.stateful:
        raise ModelError(f"operator {op.id} has no state backend")
    if memory_level is None:
        raise ModelError(f"stateful operator {op.id} has no memory level")
    managed = memory_for_level(scheme, memory_level)
    split = split_managed_memory(managed)
    per_task_state = op.total_state_bytes / parallelism
    theta = cache_hit_rate(split.cache_mb, per_task_state, op.reads_per_event, cal)
    tau = state_access_latency(
        theta, split, op.reads_per_event, op.writes_per_event, cal
    )
    return theta, tau


def per_event_service_time(
    op: OperatorSpec,
    memory_level: int | None,
    parallelism: int,
    scheme: MemoryLevelScheme,
    cal: BackendCalibration,
) -> float:
    """Seconds one task needs per event: CPU cost plus state-access time."""
    if not op.stateful:
        return op.cpu_cost_per_event
    _, tau = backend_metrics(op, memory_level, parallelism, scheme, cal)
    return op.cpu_cost_per_event + tau


def task_capacity(
    op: OperatorSpec,
    memory_level: int | None,
    parallelism: int,
    scheme: MemoryLevelScheme,
    cal: BackendCalibration,
) -> float:
    """Events per second one task can process; infinite for zero-cost operators."""
    service = per_event_service_time(op, memory_level, parallelism, scheme, cal)
    if service <= 0:
        return math.inf
    return 1.0 / service
