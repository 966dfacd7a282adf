from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from streamscale.ds2 import PolicyParams, ds2_scale, should_trigger
from streamscale.errors import TrueRateError
from streamscale.metrics import MetricWindow, OperatorWindow
from streamscale.model import ConfigEntry, Configuration, OperatorSpec, QueryGraph

PARAMS = PolicyParams()


def simple_graph(target=50_000.0, selectivity=1.0) -> QueryGraph:
    return QueryGraph(
        operators=(
            OperatorSpec("source", "source"),
            OperatorSpec("op", "stateless", cpu_cost_per_event=1e-5, selectivity=selectivity),
            OperatorSpec("sink", "sink", selectivity=0.0),
        ),
        edges=(("source", "op"), ("op", "sink")),
        sources=frozenset({"source"}),
        target_rate=target,
    )


def stats(busyness, processed, output=None, backpressured=False, theta=None, tau=None):
    return OperatorWindow(
        busyness=busyness,
        processed_rate=processed,
        output_rate=processed if output is None else output,
        cache_hit_rate=theta,
        access_latency_s=tau,
        backpressured=backpressured,
    )


def window(ops: dict) -> MetricWindow:
    return MetricWindow(0.0, 12.0, ops)


def config_for(graph: QueryGraph, parallelisms: dict) -> Configuration:
    return Configuration(entries={
        op.id: ConfigEntry(parallelisms.get(op.id, 1), 0) for op in graph.operators
    })


class TestShouldTrigger:
    def test_quiet_band_no_backpressure(self):
        graph = simple_graph()
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(0.5, 50_000),
            "sink": stats(0.0, 50_000),
        })
        assert should_trigger(win, graph, PARAMS) is False

    def test_saturated_with_upstream_backpressure(self):
        graph = simple_graph()
        win = window({
            "source": stats(0.0, 50_000, backpressured=True),
            "op": stats(0.95, 40_000),
            "sink": stats(0.0, 40_000),
        })
        assert should_trigger(win, graph, PARAMS) is True

    def test_high_busyness_alone_is_not_enough(self):
        graph = simple_graph()
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(0.95, 50_000),
            "sink": stats(0.0, 50_000),
        })
        assert should_trigger(win, graph, PARAMS) is False

    def test_underused_operator_triggers_scale_in(self):
        graph = simple_graph()
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(0.1, 50_000),
            "sink": stats(0.0, 50_000),
        })
        assert should_trigger(win, graph, PARAMS) is True

    def test_sources_and_sinks_never_trigger(self):
        graph = simple_graph()
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(0.5, 50_000),
            "sink": stats(0.0, 50_000),  # busyness 0 < busy_low, but sinks are exempt
        })
        assert should_trigger(win, graph, PARAMS) is False


class TestDs2Scale:
    def test_true_rate_closed_form(self):
        # 10k processed at busyness 0.8 on one task: true rate 12.5k;
        # 50k required at 80% target utilization -> 5 tasks.
        graph = simple_graph(target=50_000)
        config = config_for(graph, {"op": 1})
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(0.8, 10_000),
            "sink": stats(0.0, 10_000),
        })
        out = ds2_scale(win, graph, config, PARAMS)
        assert out.entries["op"].parallelism == 5

    def test_fixed_point_unchanged(self):
        graph = simple_graph(target=50_000)
        config = config_for(graph, {"op": 5})
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(0.8, 50_000),
            "sink": stats(0.0, 50_000),
        })
        out = ds2_scale(win, graph, config, PARAMS)
        assert out.entries["op"].parallelism == 5

    def test_observed_selectivity_doubles_downstream_demand(self):
        graph = QueryGraph(
            operators=(
                OperatorSpec("source", "source"),
                OperatorSpec("flatmap", "stateless", cpu_cost_per_event=1e-6, selectivity=2.0),
                OperatorSpec("op", "stateless", cpu_cost_per_event=1e-5),
                OperatorSpec("sink", "sink", selectivity=0.0),
            ),
            edges=(("source", "flatmap"), ("flatmap", "op"), ("op", "sink")),
            sources=frozenset({"source"}),
            target_rate=10_000.0,
        )
        config = config_for(graph, {})
        win = window({
            "source": stats(0.0, 10_000),
            "flatmap": stats(0.2, 10_000, output=20_000),
            "op": stats(1.0, 5_000, output=5_000),
            "sink": stats(0.0, 5_000),
        })
        out = ds2_scale(win, graph, config, PARAMS)
        # true rate 5k/task; required 20k at 0.8 -> ceil(5) = 5
        assert out.entries["op"].parallelism == 5

    def test_memory_and_flags_pass_through(self):
        graph = simple_graph()
        config = Configuration(entries={
            "source": ConfigEntry(1, 0),
            "op": ConfigEntry(1, 2, scaled_up=True),
            "sink": ConfigEntry(1, None),
        })
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(1.0, 10_000),
            "sink": stats(0.0, 10_000),
        })
        out = ds2_scale(win, graph, config, PARAMS)
        assert out.entries["op"].memory_level == 2
        assert out.entries["op"].scaled_up is True
        assert out.entries["sink"].memory_level is None

    def test_sinks_and_sources_untouched(self):
        graph = simple_graph()
        config = config_for(graph, {"source": 1, "op": 1, "sink": 1})
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(1.0, 10_000),
            "sink": stats(0.9, 10_000),
        })
        out = ds2_scale(win, graph, config, PARAMS)
        assert out.entries["source"].parallelism == 1
        assert out.entries["sink"].parallelism == 1

    def test_zero_busyness_with_throughput_rejected(self):
        graph = simple_graph()
        config = config_for(graph, {})
        win = window({
            "source": stats(0.0, 50_000),
            "op": stats(0.0, 10_000),
            "sink": stats(0.0, 10_000),
        })
        with pytest.raises(TrueRateError):
            ds2_scale(win, graph, config, PARAMS)

    def test_idle_operator_keeps_parallelism(self):
        graph = simple_graph()
        config = config_for(graph, {"op": 3})
        win = window({
            "source": stats(0.0, 0.0),
            "op": stats(0.0, 0.0),
            "sink": stats(0.0, 0.0),
        })
        out = ds2_scale(win, graph, config, PARAMS)
        assert out.entries["op"].parallelism == 3


@given(
    processed=st.floats(min_value=100, max_value=1e6),
    busyness=st.floats(min_value=0.05, max_value=1.0),
    target=st.floats(min_value=100, max_value=1e6),
    parallelism=st.integers(min_value=1, max_value=64),
)
def test_predicted_busyness_at_or_below_target(processed, busyness, target, parallelism):
    graph = simple_graph(target=target)
    config = config_for(graph, {"op": parallelism})
    win = window({
        "source": stats(0.0, target),
        "op": stats(busyness, processed),
        "sink": stats(0.0, processed),
    })
    out = ds2_scale(win, graph, config, PARAMS)
    true_rate = processed / (parallelism * busyness)
    new_p = out.entries["op"].parallelism
    predicted = target / (new_p * true_rate)
    assert predicted <= PARAMS.busy_high + 1e-9 or new_p == 1
