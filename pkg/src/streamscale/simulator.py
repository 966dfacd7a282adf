"""Closed-loop, time-stepped execution of a scenario under a scaling policy.

The flow model is fluid: per-step rates are the steady-state solution at the
current configuration, offered rates propagate in topological order, and a
saturated operator caps its throughput at capacity while flagging its
upstream operators as backpressured. There are no queues; excess offered rate
simply does not materialize downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .backend import backend_metrics, task_capacity
from .errors import (
    CapacityExhaustedError,
    ReconfigurationError,
    StreamScaleError,
    UnsatisfiableDemandError,
)
from .ds2 import PolicyParams
from .hybrid import decide
from .metrics import DecisionHistory, aggregate
from .model import Configuration, QueryGraph, total_resources
from .placement import ClusterState, demands_from_config, pack
from .workload import Scenario

POLICIES = ("ds2", "hybrid", "none")


@dataclass(frozen=True)
class TimingParams:
    """Control-loop timing, desk-scale defaults (reference timings shrunk 10x:
    5 s metric granularity, 2 min windows, 1 min stabilization)."""

    dt: float = 0.5
    window: float = 12.0
    stabilization: float = 6.0
    pause: float = 1.0

    def __post_init__(self) -> None:
        if min(self.dt, self.window) <= 0 or self.stabilization < 0 or self.pause < 0:
            raise ValueError("timing values must be positive (stabilization/pause >= 0)")
        steps = self.window / self.dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ValueError("window must be a whole number of dt steps")


@dataclass(frozen=True)
class TracePoint:
    time_s: float
    operator: str
    parallelism: int
    mem_level: int | None
    offered_rate: float
    processed_rate: float
    output_rate: float
    busyness: float
    cache_hit_rate: float | None
    access_latency_s: float | None
    backpressured: bool
    total_cores: int
    total_memory_mb: float


@dataclass
class SimState:
    clock: float
    config: Configuration
    cluster: ClusterState
    stabilizing_until: float = 0.0
    pause_until: float = 0.0


@dataclass
class Trace:
    label: str
    policy: str
    seed: int
    target_rate: float
    points: list[TracePoint] = field(default_factory=list)
    config_history: list[Configuration] = field(default_factory=list)
    reconfig_times: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def final_config(self) -> Configuration:
        return self.config_history[-1]

    @property
    def reconfigurations(self) -> int:
        return len(self.config_history) - 1

    @property
    def convergence_time_s(self) -> float:
        return self.reconfig_times[-1] if self.reconfig_times else 0.0


def _steady_rates(scenario: Scenario, config: Configuration) -> dict[str, dict]:
    """Steady-state flow solution for one configuration.

    Returns per operator: offered, processed, output, busyness, capacity,
    backpressured flag, and backend metrics (None for operators without a
    state backend).
    """
    graph = scenario.graph
    out: dict[str, dict] = {}
    for op_id in graph.topological_order():
        op = graph.operator(op_id)
        entry = config.entries[op_id]
        if op.kind == "source":
            offered = graph.target_rate
            capacity = math.inf
        else:
            offered = sum(out[u]["output"] for u in graph.upstream(op_id))
            capacity = entry.parallelism * task_capacity(
                op, entry.memory_level, entry.parallelism,
                scenario.scheme, scenario.calibration,
            )
        processed = min(offered, capacity)
        busyness = 0.0 if math.isinf(capacity) else (
            processed / capacity if capacity > 0 else 0.0
        )
        if op.stateful:
            theta, tau = backend_metrics(
                op, entry.memory_level, entry.parallelism,
                scenario.scheme, scenario.calibration,
            )
        else:
            theta, tau = None, None
        out[op_id] = {
            "offered": offered,
            "processed": processed,
            "output": processed * op.selectivity,
            "busyness": busyness,
            "capacity": capacity,
            "theta": theta,
            "tau": tau,
            "backpressured": False,
        }
    # An operator that cannot keep up backpressures everything feeding it.
    for op_id, stats in out.items():
        if stats["offered"] > stats["capacity"]:
            for up in graph.upstream(op_id):
                out[up]["backpressured"] = True
    return out


def expected_sink_rate(graph: QueryGraph) -> float:
    """Aggregate sink input rate if every operator had unlimited capacity."""
    output: dict[str, float] = {}
    sink_in = 0.0
    for op_id in graph.topological_order():
        op = graph.operator(op_id)
        if op.kind == "source":
            offered = graph.target_rate
        else:
            offered = sum(output[u] for u in graph.upstream(op_id))
        output[op_id] = offered * op.selectivity
        if op.kind == "sink":
            sink_in += offered
    return sink_in


def achieved_rate(scenario: Scenario, config: Configuration) -> float:
    """Steady-state source-equivalent throughput under a configuration."""
    expected = expected_sink_rate(scenario.graph)
    if expected <= 0:
        return 0.0
    rates = _steady_rates(scenario, config)
    actual = sum(
        rates[op.id]["offered"]
        for op in scenario.graph.operators
        if op.kind == "sink"
    )
    return actual / expected * scenario.graph.target_rate


def step(state: SimState, scenario: Scenario, dt: float) -> tuple[SimState, list[TracePoint]]:
    """Emit one sample per operator at the current clock, then advance it."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    paused = state.clock < state.pause_until
    rates = None if paused else _steady_rates(scenario, state.config)
    cores, memory = total_resources(state.config, scenario.graph, scenario.scheme)
    points = []
    for op in scenario.graph.operators:
        entry = state.config.entries[op.id]
        if paused:
            stats = {
                "offered": 0.0, "processed": 0.0, "output": 0.0,
                "busyness": 0.0, "theta": None, "tau": None,
                "backpressured": False,
            }
            if op.stateful:
                stats["theta"], stats["tau"] = backend_metrics(
                    op, entry.memory_level, entry.parallelism,
                    scenario.scheme, scenario.calibration,
                )
        else:
            stats = rates[op.id]
        points.append(TracePoint(
            time_s=state.clock,
            operator=op.id,
            parallelism=entry.parallelism,
            mem_level=entry.memory_level,
            offered_rate=stats["offered"],
            processed_rate=stats["processed"],
            output_rate=stats["output"],
            busyness=stats["busyness"],
            cache_hit_rate=stats["theta"],
            access_latency_s=stats["tau"],
            backpressured=stats["backpressured"],
            total_cores=cores,
            total_memory_mb=memory,
        ))
    state.clock += dt
    return state, points


def apply_configuration(
    state: SimState,
    scenario: Scenario,
    new_config: Configuration,
    timing: TimingParams,
) -> SimState:
    """Enact a configuration: repack placement, pause flows, restart stabilization."""
    demands = demands_from_config(new_config, scenario.graph, scenario.scheme)
    try:
        cluster = pack(
            demands, scenario.tm_spec,
            ClusterState(provisioning_limit=scenario.provisioning_limit),
        )
    except (CapacityExhaustedError, UnsatisfiableDemandError) as exc:
        raise ReconfigurationError(str(exc)) from exc
    state.config = new_config
    state.cluster = cluster
    state.pause_until = state.clock + timing.pause
    state.stabilizing_until = state.clock + timing.pause + timing.stabilization
    return state


def run(
    scenario: Scenario,
    policy: str = "hybrid",
    params: PolicyParams | None = None,
    timing: TimingParams | None = None,
    seed: int = 0,
) -> Trace:
    """Simulate a scenario under a policy until the horizon.

    The run is deterministic in (scenario, policy, params, seed); the seed is
    recorded for reproducibility bookkeeping. Placement failures terminate
    the trace with an error instead of raising.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    params = params or PolicyParams()
    timing = timing or TimingParams()
    if policy == "ds2":
        params = replace(params, hybrid_enabled=False)
    active_policy = policy if scenario.autoscaling else "none"

    trace = Trace(
        label=scenario.label, policy=policy, seed=seed,
        target_rate=scenario.graph.target_rate,
    )
    trace.config_history.append(scenario.initial_config)
    try:
        cluster = pack(
            demands_from_config(scenario.initial_config, scenario.graph, scenario.scheme),
            scenario.tm_spec,
            ClusterState(provisioning_limit=scenario.provisioning_limit),
        )
    except StreamScaleError as exc:
        trace.error = f"initial placement failed: {exc}"
        return trace

    state = SimState(clock=0.0, config=scenario.initial_config, cluster=cluster)
    history = DecisionHistory()
    steps_per_window = round(timing.window / timing.dt)
    n_steps = math.ceil(scenario.horizon / timing.dt)

    for i in range(n_steps):
        state, points = step(state, scenario, timing.dt)
        trace.points.extend(points)
        if active_policy == "none" or (i + 1) % steps_per_window != 0:
            continue
        boundary = (i + 1) * timing.dt
        eff_start = max(boundary - timing.window, state.stabilizing_until)
        if eff_start >= boundary:
            continue
        window_points = [p for p in trace.points if eff_start <= p.time_s < boundary]
        if not window_points:
            continue
        window = aggregate(window_points, eff_start, boundary)
        try:
            proposal = decide(window, scenario.graph, state.config, history, params)
        except StreamScaleError as exc:
            trace.error = f"policy failed at t={boundary}: {exc}"
            break
        if proposal is None or proposal.same_allocation(state.config):
            continue
        try:
            state = apply_configuration(state, scenario, proposal, timing)
        except ReconfigurationError as exc:
            trace.error = f"reconfiguration failed at t={boundary}: {exc}"
            break
        trace.config_history.append(proposal)
        trace.reconfig_times.append(boundary)
    return trace


TRACE_CSV_COLUMNS = (
    "time_s", "operator", "parallelism", "mem_level", "offered_rate",
    "processed_rate", "busyness", "cache_hit_rate", "access_latency_s",
    "backpressured", "total_cores", "total_memory_mb",
)


def trace_csv_lines(trace: Trace) -> list[str]:
    """Render a trace in the stable on-disk CSV schema (one row per sample)."""
    lines = [",".join(TRACE_CSV_COLUMNS)]
    for p in trace.points:
        lines.append(",".join((
            f"{p.time_s:.3f}",
            p.operator,
            str(p.parallelism),
            "none" if p.mem_level is None else str(p.mem_level),
            f"{p.offered_rate:.3f}",
            f"{p.processed_rate:.3f}",
            f"{p.busyness:.6f}",
            "" if p.cache_hit_rate is None else f"{p.cache_hit_rate:.6f}",
            "" if p.access_latency_s is None else f"{p.access_latency_s:.9f}",
            "true" if p.backpressured else "false",
            str(p.total_cores),
            f"{p.total_memory_mb:.1f}",
        )))
    return lines


def write_trace_csv(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(trace_csv_lines(trace)) + "\n")
