"""Windowed aggregation of trace points and the decision history store."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import Configuration


@dataclass(frozen=True)
class OperatorWindow:
    """Per-operator averages over one decision window.

    ``cache_hit_rate`` and ``access_latency_s`` are None for operators without
    a state backend; their absence is the statelessness signal the hybrid
    policy relies on.
    """

    busyness: float
    processed_rate: float
    output_rate: float
    cache_hit_rate: float | None
    access_latency_s: float | None
    backpressured: bool


@dataclass(frozen=True)
class MetricWindow:
    window_start: float
    window_end: float
    operators: dict[str, OperatorWindow]

    def __post_init__(self) -> None:
        if self.window_end <= self.window_start:
            raise ValueError("window_end must be after window_start")


def aggregate(points: list, window_start: float, window_end: float) -> MetricWindow:
    """Arithmetic means of the samples per operator; backpressure is OR-ed.

    ``points`` are TracePoints (simulator module) whose time falls within
    [window_start, window_end).
    """
    if window_end <= window_start:
        raise ValueError("empty window")
    per_op: dict[str, list] = {}
    for pt in points:
        if window_start <= pt.time_s < window_end:
            per_op.setdefault(pt.operator, []).append(pt)
    if not per_op:
        raise ValueError("no samples in window")

    stats: dict[str, OperatorWindow] = {}
    for op_id, samples in per_op.items():
        n = len(samples)
        thetas = [s.cache_hit_rate for s in samples if s.cache_hit_rate is not None]
        taus = [s.access_latency_s for s in samples if s.access_latency_s is not None]
        stats[op_id] = OperatorWindow(
            busyness=sum(s.busyness for s in samples) / n,
            processed_rate=sum(s.processed_rate for s in samples) / n,
            output_rate=sum(s.output_rate for s in samples) / n,
            cache_hit_rate=sum(thetas) / len(thetas) if thetas else None,
            access_latency_s=sum(taus) / len(taus) if taus else None,
            backpressured=any(s.backpressured for s in samples),
        )
    return MetricWindow(window_start=window_start, window_end=window_end, operators=stats)


@dataclass
class HistoryEntry:
    configuration: Configuration
    window: MetricWindow


@dataclass
class DecisionHistory:
    """Ordered (configuration, window) pairs, one per scaling decision.

    Entry t pairs the configuration that was active with the window measured
    under it, so consecutive entries compare metrics across a reconfiguration.
    """

    entries: list[HistoryEntry] = field(default_factory=list)

    def append(self, configuration: Configuration, window: MetricWindow) -> None:
        if self.entries and window.window_start < self.entries[-1].window.window_start:
            raise ValueError("history windows must be appended in time order")
        self.entries.append(HistoryEntry(configuration, window))

    def __len__(self) -> int:
        return len(self.entries)


def improvement(history: DecisionHistory, op_id: str, hysteresis: float) -> bool:
    """Did the operator's backend metrics improve between the last two entries?

    True when the cache hit rate rose by more than the hysteresis fraction or
    the access latency fell by more than it. With hysteresis 0 this is the
    plain strict-inequality comparison.
    """
    if len(history) < 2:
        raise ValueError("improvement needs at least two history entries")
    cur = history.entries[-1].window.operators.get(op_id)
    prev = history.entries[-2].window.operators.get(op_id)
    if cur is None or prev is None:
        raise KeyError(f"operator {op_id} missing from history windows")
    if cur.cache_hit_rate is None or prev.cache_hit_rate is None:
        raise ValueError(f"operator {op_id} has no backend metrics to compare")
    theta_better = cur.cache_hit_rate > prev.cache_hit_rate * (1 + hysteresis)
    tau_better = cur.access_latency_s < prev.access_latency_s * (1 - hysteresis)
    return theta_better or tau_better
