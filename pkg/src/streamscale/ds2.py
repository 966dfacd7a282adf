"""CPU-only baseline autoscaling: busyness trigger and true-rate scaling.

The per-task true processing rate is the observed rate normalized by how busy
the task was; required rates are propagated from the sources through the
graph with the observed selectivities, and each operator gets the smallest
parallelism whose predicted busyness stays at or below the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import TrueRateError
from .metrics import MetricWindow
from .model import ConfigEntry, Configuration, QueryGraph


@dataclass(frozen=True)
class PolicyParams:
    """Thresholds shared by the baseline and the hybrid policy.

    The busyness band drives triggering; the cache-hit and latency thresholds
    plus the improvement hysteresis drive the hybrid policy's vertical
    decisions. ``max_level`` caps vertical scaling: levels above
    ``max_level - 1`` are never assigned.
    """

    busy_high: float = 0.8
    busy_low: float = 0.2
    delta_theta: float = 0.8
    delta_tau: float = 1e-3
    max_level: int = 3
    hysteresis: float = 0.05
    hybrid_enabled: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.busy_low < self.busy_high <= 1:
            raise ValueError("need 0 < busy_low < busy_high <= 1")
        if not 0 < self.delta_theta < 1:
            raise ValueError("delta_theta must be in (0, 1)")
        if self.delta_tau <= 0:
            raise ValueError("delta_tau must be positive")


def should_trigger(
    window: MetricWindow, graph: QueryGraph, params: PolicyParams
) -> bool:
    """Reconfigure when a scalable operator is saturated or badly underused.

    Scale-out needs high busyness together with backpressure on an upstream
    operator; dipping below the low-busyness bound triggers a scale-in pass.
    Sources and sinks never trigger.
    """
    for op in graph.operators:
        if op.kind in ("source", "sink"):
            continue
        stats = window.operators.get(op.id)
        if stats is None:
            continue
        if stats.busyness > params.busy_high:
            upstream = graph.upstream(op.id)
            if any(
                window.operators[u].backpressured
                for u in upstream
                if u in window.operators
            ):
                return True
        if stats.busyness < params.busy_low:
            return True
    return False


def ds2_scale(
    window: MetricWindow,
    graph: QueryGraph,
    config: Configuration,
    params: PolicyParams,
) -> Configuration:
    """New parallelisms from observed true rates; memory fields pass through.

    Sources and sinks keep their parallelism. Operators that processed
    nothing keep theirs too (no rate estimate to work from).
    """
    # Required offered rate per operator, propagated with observed selectivities.
    required: dict[str, float] = {}
    outgoing: dict[str, float] = {}
    for op_id in graph.topological_order():
        op = graph.operator(op_id)
        if op.kind == "source":
            required[op_id] = graph.target_rate
            outgoing[op_id] = graph.target_rate * op.selectivity
            continue
        required[op_id] = sum(outgoing[u] for u in graph.upstream(op_id))
        stats = window.operators.get(op_id)
        if stats is not None and stats.processed_rate > 0:
            selectivity = stats.output_rate / stats.processed_rate
        else:
            selectivity = op.selectivity
        outgoing[op_id] = required[op_id] * selectivity

    entries: dict[str, ConfigEntry] = {}
    for op in graph.operators:
        current = config.entries[op.id]
        if op.kind in ("source", "sink"):
            entries[op.id] = current
            continue
        stats = window.operators.get(op.id)
        if stats is None or stats.processed_rate == 0:
            entries[op.id] = current
            continue
        if stats.busyness == 0:
            raise TrueRateError(
                f"operator {op.id}: nonzero rate at zero busyness"
            )
        true_rate = stats.processed_rate / (current.parallelism * stats.busyness)
        new_p = max(1, math.ceil(required[op.id] / (true_rate * params.busy_high)))
        entries[op.id] = replace(current, parallelism=new_p)
    return Configuration(entries=entries, timestamp=config.timestamp + 1)
