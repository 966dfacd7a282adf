"""Hybrid CPU/memory scaling: post-processes the baseline proposal per operator.

For each operator the policy picks exactly one of: strip managed memory
(stateless), keep the entry (capacity sufficient), trade the proposed
scale-out for another memory step (previous scale-up helped, or backend
metrics look memory-bound), roll a failed scale-up back while accepting the
new parallelism, or accept the proposal unchanged.
"""

from __future__ import annotations

from .ds2 import PolicyParams, ds2_scale, should_trigger
from .metrics import DecisionHistory, MetricWindow, improvement
from .model import ConfigEntry, Configuration, QueryGraph


def hybrid_scale(
    ds2_proposal: Configuration,
    previous: Configuration,
    history: DecisionHistory,
    window: MetricWindow,
    params: PolicyParams,
) -> Configuration:
    """Apply the per-operator branch table to the baseline proposal."""
    if ds2_proposal.entries.keys() != previous.entries.keys():
        raise ValueError("proposal and previous configuration cover different operators")
    if history.entries and history.entries[-1].configuration is not previous:
        if not history.entries[-1].configuration.same_allocation(previous):
            raise ValueError("history's last entry does not match the previous configuration")

    entries: dict[str, ConfigEntry] = {}
    for op_id, proposed in ds2_proposal.entries.items():
        prev = previous.entries[op_id]
        stats = window.operators.get(op_id)
        stateless = stats is None or stats.cache_hit_rate is None

        if stateless:
            # No backend metrics: drop managed memory, keep the proposed tasks.
            entries[op_id] = ConfigEntry(proposed.parallelism, None, False)
            continue
        if proposed.parallelism == prev.parallelism:
            # Capacity deemed sufficient; nothing to rethink.
            entries[op_id] = ConfigEntry(prev.parallelism, prev.memory_level, False)
            continue
        if prev.scaled_up:
            if improvement(history, op_id, params.hysteresis):
                if prev.memory_level + 1 < params.max_level:
                    # The scale-up paid off and there is headroom: go further
                    # vertically instead of scaling out.
                    entries[op_id] = ConfigEntry(
                        prev.parallelism, prev.memory_level + 1, True
                    )
                else:
                    # Improved but out of vertical headroom: fall through to
                    # the proposed parallelism at the current level.
                    entries[op_id] = ConfigEntry(
                        proposed.parallelism, prev.memory_level, False
                    )
            else:
                # The scale-up bought nothing: give the memory back and let
                # the proposed parallelism apply.
                entries[op_id] = ConfigEntry(
                    proposed.parallelism, prev.memory_level - 1, False
                )
            continue
        memory_bound = (
            stats.cache_hit_rate < params.delta_theta
            or stats.access_latency_s > params.delta_tau
        )
        if memory_bound and prev.memory_level + 1 < params.max_level:
            entries[op_id] = ConfigEntry(prev.parallelism, prev.memory_level + 1, True)
        else:
            entries[op_id] = ConfigEntry(proposed.parallelism, prev.memory_level, False)

    return Configuration(entries=entries, timestamp=ds2_proposal.timestamp)


def decide(
    window: MetricWindow,
    graph: QueryGraph,
    config: Configuration,
    history: DecisionHistory,
    params: PolicyParams,
) -> Configuration | None:
    """One control-loop evaluation: None when no reconfiguration is needed.

    When triggered, the measured window is recorded against the active
    configuration, the baseline proposal is computed, and (if enabled) the
    hybrid branch table rewrites it.
    """
    if not should_trigger(window, graph, params):
        return None
    history.append(config, window)
    proposal = ds2_scale(window, graph, config, params)
    if not params.hybrid_enabled:
        return proposal
    return hybrid_scale(proposal, config, history, window, params)
