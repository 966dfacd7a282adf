from __future__ import annotations

import pytest

from streamscale.backend import split_managed_memory
from streamscale.errors import ConfigError
from streamscale.model import memory_for_level, validate_graph
from streamscale.workload import (
    MICROBENCH_STATE_BYTES,
    NEXMARK_QUERIES,
    microbenchmark,
    nexmark_like,
)


class TestMicrobenchmark:
    def test_read_and_write_target_rate(self):
        assert microbenchmark("read", 1, 128).graph.target_rate == 50_000
        assert microbenchmark("write", 4, 512).graph.target_rate == 50_000

    def test_update_target_rate(self):
        assert microbenchmark("update", 8, 256).graph.target_rate == 30_000

    def test_write_at_128_gets_small_memtable(self):
        scenario = microbenchmark("write", 1, 128)
        level = scenario.initial_config.entries["bench"].memory_level
        managed = memory_for_level(scenario.scheme, level)
        assert managed == 128
        assert split_managed_memory(managed).memtable_mb == 32

    def test_state_profile(self):
        scenario = microbenchmark("update", 2, 256)
        bench = scenario.graph.operator("bench")
        assert bench.total_state_bytes == MICROBENCH_STATE_BYTES
        assert (bench.reads_per_event, bench.writes_per_event) == (1, 1)
        read = microbenchmark("read", 2, 256).graph.operator("bench")
        assert (read.reads_per_event, read.writes_per_event) == (1, 0)
        write = microbenchmark("write", 2, 256).graph.operator("bench")
        assert (write.reads_per_event, write.writes_per_event) == (0, 1)

    def test_autoscaling_disabled(self):
        assert microbenchmark("read", 1, 128).autoscaling is False

    def test_single_scalable_operator(self):
        scenario = microbenchmark("read", 4, 512)
        scalable = [
            op for op in scenario.graph.operators if op.kind not in ("source", "sink")
        ]
        assert len(scalable) == 1

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            microbenchmark("scan", 1, 128)

    def test_memory_outside_grid_rejected(self):
        with pytest.raises(ConfigError):
            microbenchmark("read", 1, 200)

    def test_parallelism_bounds(self):
        with pytest.raises(ConfigError):
            microbenchmark("read", 0, 128)
        with pytest.raises(ConfigError):
            microbenchmark("read", 9, 128)

    @pytest.mark.parametrize("kind", ["read", "write", "update"])
    @pytest.mark.parametrize("memory", [128, 2048])
    def test_graphs_validate(self, kind, memory):
        assert validate_graph(microbenchmark(kind, 8, memory).graph) == []


class TestNexmarkLike:
    @pytest.mark.parametrize("query", NEXMARK_QUERIES)
    def test_graphs_validate(self, query):
        assert validate_graph(nexmark_like(query).graph) == []

    def test_q1_has_exactly_one_stateless_middle_operator(self):
        graph = nexmark_like("q1").graph
        middle = [op for op in graph.operators if op.kind not in ("source", "sink")]
        assert len(middle) == 1
        assert middle[0].kind == "stateless"

    def test_q3_join_state_is_small(self):
        graph = nexmark_like("q3").graph
        join = graph.operator("join")
        assert join.stateful
        assert join.total_state_bytes == pytest.approx(8 * 1024 * 1024)

    def test_q5_state_is_small(self):
        agg = nexmark_like("q5").graph.operator("window_agg")
        assert agg.total_state_bytes == pytest.approx(10 * 1024 * 1024)

    def test_q8_q11_state_exceeds_level0_cache_demand(self):
        # Working set demand at level 0 must dwarf the level-0 cache so the
        # first decision is vertical.
        for query, op_id in (("q8", "window_join"), ("q11", "session_agg")):
            scenario = nexmark_like(query)
            op = scenario.graph.operator(op_id)
            cache_bytes = split_managed_memory(scenario.scheme.base_mb).cache_mb * 1024 * 1024
            demand = scenario.calibration.working_set_overhead * op.total_state_bytes
            assert demand >= 4 * cache_bytes

    def test_sinks_fixed_at_parallelism_one(self):
        for query in NEXMARK_QUERIES:
            scenario = nexmark_like(query)
            assert scenario.initial_config.entries["sink"].parallelism == 1

    def test_initial_configuration_is_uniform_level_zero(self):
        scenario = nexmark_like("q8")
        for entry in scenario.initial_config.entries.values():
            assert entry.parallelism == 1
            assert entry.memory_level == 0
            assert entry.scaled_up is False

    def test_target_rate_override(self):
        assert nexmark_like("q1", target_rate=123.0).graph.target_rate == 123.0

    def test_unsupported_query_rejected(self):
        with pytest.raises(ConfigError):
            nexmark_like("q7")
