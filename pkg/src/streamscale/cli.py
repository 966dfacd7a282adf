"""Scenario runner: single runs, policy comparisons, and benchmark grid sweeps.

Every flag has a config-file equivalent (JSON, same key with underscores);
flags override file values. Exit codes: 0 success, 1 simulation error,
2 configuration error. The output directory falls back to the
STREAMSCALE_OUTPUT_DIR environment variable, then the current directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .backend import BackendCalibration
from .ds2 import PolicyParams
from .errors import ConfigError, StreamScaleError
from .model import (
    ConfigEntry,
    Configuration,
    MemoryLevelScheme,
    OperatorSpec,
    QueryGraph,
    TaskManagerSpec,
    total_resources,
)
from .placement import ClusterState, demands_from_config, pack
from .simulator import (
    POLICIES,
    TimingParams,
    Trace,
    achieved_rate,
    run,
    write_trace_csv,
)
from .workload import (
    MICROBENCH_MEMORY_MB,
    MICROBENCH_TARGETS,
    NEXMARK_QUERIES,
    Scenario,
    microbenchmark,
    nexmark_like,
)

SUMMARY_COLUMNS = (
    "label", "policy", "seed", "target_rate", "achieved_rate",
    "reconfigurations", "convergence_time_s", "final_cores",
    "final_memory_mb", "task_managers", "tm_occupancy", "final_config", "error",
)

COMPARE_COLUMNS = (
    "label", "target_rate", "seed",
    "ds2_reconfigurations", "hybrid_reconfigurations",
    "ds2_convergence_time_s", "hybrid_convergence_time_s",
    "ds2_final_cores", "hybrid_final_cores",
    "ds2_final_memory_mb", "hybrid_final_memory_mb",
    "cores_ratio", "memory_ratio",
    "ds2_achieved_rate", "hybrid_achieved_rate",
)

_PARAM_KEYS = ("busy_high", "busy_low", "delta_theta", "delta_tau",
               "max_level", "hysteresis", "hybrid_enabled")
_TIMING_KEYS = ("dt", "window", "stabilization", "pause")


@dataclass
class RunConfig:
    scenario: str | None = None
    graph: dict | None = None
    policy: str = "hybrid"
    target_rate: float | None = None
    horizon: float | None = None
    seed: int = 0
    out: str | None = None
    dt: float | None = None
    window: float | None = None
    stabilization: float | None = None
    pause: float | None = None
    busy_high: float | None = None
    busy_low: float | None = None
    delta_theta: float | None = None
    delta_tau: float | None = None
    max_level: int | None = None
    hysteresis: float | None = None
    hybrid_enabled: bool | None = None
    kind: str | None = None
    parallelism: list[int] | None = None
    memory: list[int] | None = None


def _dataclass_from_dict(cls, data: dict, what: str):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**data)


def scenario_from_dict(spec: dict) -> Scenario:
    """Build a scenario from an inline JSON graph definition."""
    try:
        operators = tuple(
            OperatorSpec(**op) for op in spec["operators"]
        )
        edges = tuple((u, d) for u, d in spec["edges"])
        graph = QueryGraph(
            operators=operators,
            edges=edges,
            sources=frozenset(spec["sources"]),
            target_rate=float(spec["target_rate"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad inline graph definition: {exc}") from exc

    initial = spec.get("initial", {})
    entries = {}
    for op in operators:
        raw = initial.get(op.id, {})
        entries[op.id] = ConfigEntry(
            parallelism=int(raw.get("parallelism", 1)),
            memory_level=raw.get("memory_level", 0),
        )
    kwargs = {}
    if "tm" in spec:
        kwargs["tm_spec"] = _dataclass_from_dict(TaskManagerSpec, spec["tm"], "tm")
    if "scheme" in spec:
        kwargs["scheme"] = _dataclass_from_dict(MemoryLevelScheme, spec["scheme"], "scheme")
    if "calibration" in spec:
        kwargs["calibration"] = _dataclass_from_dict(
            BackendCalibration, spec["calibration"], "calibration")
    if "provisioning_limit" in spec:
        kwargs["provisioning_limit"] = int(spec["provisioning_limit"])
    return Scenario(
        graph=graph,
        initial_config=Configuration(entries=entries, timestamp=0),
        horizon=float(spec.get("horizon", 90.0)),
        label=str(spec.get("label", "inline")),
        **kwargs,
    )


def build_scenario(cfg: RunConfig) -> Scenario:
    if cfg.graph is not None:
        scenario = scenario_from_dict(cfg.graph)
    elif cfg.scenario is not None:
        if cfg.scenario not in NEXMARK_QUERIES:
            raise ConfigError(
                f"unknown scenario {cfg.scenario!r}; built-ins: {', '.join(NEXMARK_QUERIES)}"
            )
        scenario = nexmark_like(cfg.scenario, target_rate=cfg.target_rate)
    else:
        raise ConfigError("no scenario given (use --scenario or a graph definition)")
    if cfg.horizon is not None:
        scenario = replace(scenario, horizon=cfg.horizon)
    return scenario


def build_params(cfg: RunConfig) -> PolicyParams:
    overrides = {
        key: getattr(cfg, key)
        for key in _PARAM_KEYS
        if getattr(cfg, key) is not None
    }
    try:
        return replace(PolicyParams(), **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_timing(cfg: RunConfig) -> TimingParams:
    overrides = {
        key: getattr(cfg, key)
        for key in _TIMING_KEYS
        if getattr(cfg, key) is not None
    }
    try:
        return replace(TimingParams(), **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def output_dir(cfg: RunConfig) -> Path:
    out = cfg.out or os.environ.get("STREAMSCALE_OUTPUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config_string(trace: Trace) -> str:
    parts = []
    for op_id, entry in trace.final_config.entries.items():
        level = "none" if entry.memory_level is None else str(entry.memory_level)
        parts.append(f"{op_id}={entry.parallelism}:{level}")
    return ";".join(parts)


def _final_fleet(trace: Trace, scenario: Scenario) -> tuple[int, str]:
    """TM count and per-TM occupancy (used slots / used managed MB) at the end."""
    if trace.error:
        return 0, ""
    cluster = pack(
        demands_from_config(trace.final_config, scenario.graph, scenario.scheme),
        scenario.tm_spec,
        ClusterState(provisioning_limit=scenario.provisioning_limit),
    )
    occupancy = "|".join(
        f"{tm.used_slots}/{tm.used_managed_mb:.0f}" for tm in cluster.tms
    )
    return len(cluster.tms), occupancy


def summarize(trace: Trace, scenario: Scenario) -> dict:
    cores, memory = total_resources(trace.final_config, scenario.graph, scenario.scheme)
    achieved = 0.0 if trace.error else achieved_rate(scenario, trace.final_config)
    tm_count, occupancy = _final_fleet(trace, scenario)
    return {
        "label": trace.label,
        "policy": trace.policy,
        "seed": trace.seed,
        "target_rate": trace.target_rate,
        "achieved_rate": achieved,
        "reconfigurations": trace.reconfigurations,
        "convergence_time_s": trace.convergence_time_s,
        "final_cores": cores,
        "final_memory_mb": memory,
        "task_managers": tm_count,
        "tm_occupancy": occupancy,
        "final_config": _config_string(trace),
        "error": trace.error or "",
    }


def _summary_row(summary: dict) -> str:
    return ",".join((
        summary["label"],
        summary["policy"],
        str(summary["seed"]),
        f"{summary['target_rate']:.1f}",
        f"{summary['achieved_rate']:.1f}",
        str(summary["reconfigurations"]),
        f"{summary['convergence_time_s']:.1f}",
        str(summary["final_cores"]),
        f"{summary['final_memory_mb']:.1f}",
        str(summary["task_managers"]),
        summary["tm_occupancy"],
        summary["final_config"],
        summary["error"],
    ))


def _append_summary(out: Path, summaries: list[dict]) -> None:
    path = out / "summary.csv"
    fresh = not path.exists()
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        if fresh:
            fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for summary in summaries:
            fh.write(_summary_row(summary) + "\n")


def _print_summary(summary: dict) -> None:
    print(
        f"{summary['label']} [{summary['policy']}] "
        f"achieved {summary['achieved_rate']:.0f}/{summary['target_rate']:.0f} ev/s, "
        f"{summary['reconfigurations']} reconfigurations, "
        f"converged at {summary['convergence_time_s']:.0f} s, "
        f"{summary['final_cores']} cores, {summary['final_memory_mb']:.0f} MB, "
        f"{summary['task_managers']} TMs ({summary['final_config']})"
        + (f" ERROR: {summary['error']}" if summary["error"] else "")
    )


def _execute(cfg: RunConfig, scenario: Scenario, policy: str) -> tuple[Trace, dict]:
    trace = run(
        scenario,
        policy=policy,
        params=build_params(cfg),
        timing=build_timing(cfg),
        seed=cfg.seed,
    )
    return trace, summarize(trace, scenario)


def cmd_run(cfg: RunConfig) -> int:
    if cfg.policy not in POLICIES:
        raise ConfigError(f"unknown policy {cfg.policy!r}; choose from {POLICIES}")
    scenario = build_scenario(cfg)
    out = output_dir(cfg)
    trace, summary = _execute(cfg, scenario, cfg.policy)
    write_trace_csv(trace, out / f"{scenario.label}_{cfg.policy}.csv")
    _append_summary(out, [summary])
    _print_summary(summary)
    if trace.error:
        print(f"error: {trace.error}", file=sys.stderr)
        return 1
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    scenario = build_scenario(cfg)
    out = output_dir(cfg)
    results = {}
    summaries = []
    for policy in ("ds2", "hybrid"):
        trace, summary = _execute(cfg, scenario, policy)
        write_trace_csv(trace, out / f"{scenario.label}_{policy}.csv")
        results[policy] = (trace, summary)
        summaries.append(summary)
        _print_summary(summary)
    _append_summary(out, summaries)

    ds2_s, hyb_s = results["ds2"][1], results["hybrid"][1]
    cores_ratio = (
        hyb_s["final_cores"] / ds2_s["final_cores"] if ds2_s["final_cores"] else 0.0
    )
    memory_ratio = (
        hyb_s["final_memory_mb"] / ds2_s["final_memory_mb"]
        if ds2_s["final_memory_mb"] else 0.0
    )
    row = ",".join((
        scenario.label,
        f"{scenario.graph.target_rate:.1f}",
        str(cfg.seed),
        str(ds2_s["reconfigurations"]), str(hyb_s["reconfigurations"]),
        f"{ds2_s['convergence_time_s']:.1f}", f"{hyb_s['convergence_time_s']:.1f}",
        str(ds2_s["final_cores"]), str(hyb_s["final_cores"]),
        f"{ds2_s['final_memory_mb']:.1f}", f"{hyb_s['final_memory_mb']:.1f}",
        f"{cores_ratio:.4f}", f"{memory_ratio:.4f}",
        f"{ds2_s['achieved_rate']:.1f}", f"{hyb_s['achieved_rate']:.1f}",
    ))
    with open(out / f"{scenario.label}_compare.csv", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(",".join(COMPARE_COLUMNS) + "\n" + row + "\n")
    print(
        f"{scenario.label}: hybrid/ds2 cores {cores_ratio:.2f}, "
        f"memory {memory_ratio:.2f}, steps {hyb_s['reconfigurations']} vs "
        f"{ds2_s['reconfigurations']}"
    )
    if results["ds2"][0].error or results["hybrid"][0].error:
        return 1
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.kind not in MICROBENCH_TARGETS:
        raise ConfigError(
            f"unknown sweep kind {cfg.kind!r}; choose from {tuple(MICROBENCH_TARGETS)}"
        )
    parallelisms = cfg.parallelism if cfg.parallelism is not None else [1, 2, 4, 8]
    memories = cfg.memory if cfg.memory is not None else list(MICROBENCH_MEMORY_MB)
    if not parallelisms or not memories:
        raise ConfigError("parallelism and memory sets must be non-empty")
    out = output_dir(cfg)
    lines = ["kind,parallelism,memory_mb,achieved_rate,target_rate"]
    for p in parallelisms:
        for mem in memories:
            scenario = microbenchmark(cfg.kind, p, mem)
            trace = run(scenario, policy="none", timing=build_timing(cfg), seed=cfg.seed)
            if trace.error:
                print(f"error: {trace.error}", file=sys.stderr)
                return 1
            achieved = achieved_rate(scenario, trace.final_config)
            lines.append(
                f"{cfg.kind},{p},{mem},{achieved:.3f},{scenario.graph.target_rate:.1f}"
            )
    path = out / f"sweep_{cfg.kind}.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(lines) - 1} configurations)")
    return 0


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {value!r}")


def _parse_int_list(value: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints: {value!r}") from exc


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--scenario", help=f"built-in scenario: {', '.join(NEXMARK_QUERIES)}")
    parser.add_argument("--target-rate", type=float, dest="target_rate")
    parser.add_argument("--horizon", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory (or STREAMSCALE_OUTPUT_DIR)")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--window", type=float)
    parser.add_argument("--stabilization", type=float)
    parser.add_argument("--pause", type=float)
    parser.add_argument("--busy-high", type=float, dest="busy_high")
    parser.add_argument("--busy-low", type=float, dest="busy_low")
    parser.add_argument("--delta-theta", type=float, dest="delta_theta")
    parser.add_argument("--delta-tau", type=float, dest="delta_tau")
    parser.add_argument("--max-level", type=int, dest="max_level")
    parser.add_argument("--hysteresis", type=float)
    parser.add_argument("--hybrid-enabled", type=_parse_bool, dest="hybrid_enabled")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamscale",
        description="Simulate elastic scaling of streaming dataflows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario under one policy")
    _add_common(p_run)
    p_run.add_argument("--policy", help=f"one of {', '.join(POLICIES)}")

    p_cmp = sub.add_parser("compare", help="run a scenario under ds2 and hybrid")
    _add_common(p_cmp)

    p_sweep = sub.add_parser("sweep", help="microbenchmark grid sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--kind", help="read, write, or update")
    p_sweep.add_argument("--parallelism", type=_parse_int_list)
    p_sweep.add_argument("--memory", type=_parse_int_list)
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_values = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError("config file must contain a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(file_values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, value in file_values.items():
            setattr(cfg, key, value)
    for key in vars(cfg):
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            setattr(cfg, key, flag_value)
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_sweep(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StreamScaleError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
