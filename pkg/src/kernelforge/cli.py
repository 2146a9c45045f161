"""Command line surface.

Subcommands: `optimize` runs the full loop, `evaluate` checks one candidate
against a task's oracle and times it, `bench` is evaluate restricted to
timing, `report` renders tables from saved logs.

Exit codes: 0 success, 1 candidate incorrect, 2 configuration error,
3 agent-backend error, 4 executor/toolchain error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import agents, oracles, report
from .agents import AgentBackendConfig, RetryPolicy, load_script
from .errors import (
    BackendError,
    ConfigError,
    ExecutorError,
    KernelForgeError,
    LogFormatError,
)
from .executor import ExecBackendConfig, SimBehavior, TimingProtocol, ToolchainConfig, execute_suite, profile_pair
from .metrics import DiscrepancyMetric
from .optlog import Candidate, load_log
from .orchestrator import RunConfig, optimize, summarize
from .task import KernelTask, load_task

EXIT_OK = 0
EXIT_INCORRECT = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_EXECUTOR = 4


def _load_config_file(path: Optional[str]) -> tuple:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    try:
        return tomllib.loads(p.read_text()), p.parent
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc


def _exec_cfg(raw: dict, base_dir: Path, kind_override: Optional[str]) -> ExecBackendConfig:
    section = raw.get("executor", {})
    kind = kind_override or section.get("kind", "simulated")
    if kind == "sim":
        kind = "simulated"
    if kind == "simulated":
        cfg = ExecBackendConfig(kind="simulated", noise_seed=int(section.get("noise_seed", 0)))
        for entry in section.get("behaviors", []):
            if "source" in entry:
                source = str(entry["source"])
            elif "source_file" in entry:
                src_path = base_dir / entry["source_file"]
                try:
                    source = src_path.read_text()
                except OSError as exc:
                    raise ConfigError(f"cannot read behavior source {src_path}: {exc}") from exc
            else:
                raise ConfigError("behavior entry needs 'source' or 'source_file'")
            cfg.register(
                source,
                SimBehavior(
                    kind=str(entry.get("behavior", "oracle")),
                    latency_us={str(k): float(v) for k, v in entry.get("latency_us", {}).items()},
                    output=entry.get("output") or None,
                    index=int(entry.get("index", 0)),
                    delta=float(entry.get("delta", 0.0)),
                    noise_pct=float(entry.get("noise_pct", 0.0)),
                ),
            )
        return cfg
    tc = section.get("toolchain")
    if not tc:
        raise ConfigError("subprocess executor requires an [executor.toolchain] section")
    toolchain = ToolchainConfig(
        compile_cmd=tuple(str(c) for c in tc["compile_cmd"]),
        harness_source=str((base_dir / tc["harness_source"]).resolve()),
        arch=str(tc.get("arch", "")),
        source_suffix=str(tc.get("source_suffix", ".cu")),
        compile_timeout_s=float(tc.get("compile_timeout_s", 120.0)),
        run_timeout_s=float(tc.get("run_timeout_s", 120.0)),
    )
    work_dir = section.get("work_dir", "kernelforge-work")
    return ExecBackendConfig(kind="subprocess", toolchain=toolchain, work_dir=str(work_dir))


def _agent_cfg(raw: dict, base_dir: Path, args) -> AgentBackendConfig:
    section = dict(raw.get("agents", {}))
    kind = getattr(args, "agents", None) or section.get("kind", "scripted")
    cfg = AgentBackendConfig(
        kind=kind,
        endpoint=str(section.get("endpoint", "")),
        model=str(section.get("model", "")),
        credential_env=str(section.get("credential_env", "KERNELFORGE_API_KEY")),
        temperature=float(section.get("temperature", 0.2)),
        max_tokens=int(section.get("max_tokens", 4096)),
        request_timeout_s=float(section.get("request_timeout_s", 120.0)),
        retry=RetryPolicy(attempts=int(section.get("retry_attempts", 3))),
    )
    script = getattr(args, "script", None) or section.get("script")
    if script is not None:
        script_path = Path(script)
        if not script_path.is_absolute() and not script_path.exists():
            script_path = base_dir / script
        cfg.script_path = str(script_path)
        if kind == "scripted":
            cfg.transcript = load_script(script_path)
    return cfg


def _run_config(args, task: KernelTask) -> RunConfig:
    raw, base_dir = _load_config_file(args.config)
    run = raw.get("run", {})
    protocol_raw = raw.get("protocol", {})
    output = raw.get("output", {})
    metric_kind = run.get("metric", "max-abs")
    rounds = args.rounds if args.rounds is not None else int(run.get("rounds", 5))
    seeds = [args.seed] if args.seed is not None else [int(s) for s in run.get("seeds", agents.DEFAULT_SEEDS)]
    epsilon = args.epsilon if args.epsilon is not None else run.get("epsilon")
    mode = args.mode or run.get("mode", "multi-agent")
    log_path = args.log or output.get("log") or f"{task.name}-log.jsonl"
    summary_path = args.summary or output.get("summary") or str(
        Path(log_path).with_suffix("")
    ) + "-summary.txt"
    return RunConfig(
        rounds=rounds,
        mode=mode,
        exec_cfg=_exec_cfg(raw, base_dir, _backend_kind(args)),
        agent_cfg=_agent_cfg(raw, base_dir, args),
        protocol=TimingProtocol(
            warmup_runs=int(protocol_raw.get("warmup_runs", 20)),
            timed_runs=int(protocol_raw.get("timed_runs", 100)),
        ),
        epsilon=float(epsilon) if epsilon is not None else None,
        metric=DiscrepancyMetric(kind=metric_kind),
        seeds=seeds,
        budget=int(run.get("budget", agents.DEFAULT_ELEMENT_BUDGET)),
        log_path=str(log_path),
        summary_path=str(summary_path),
    )


def _backend_kind(args) -> Optional[str]:
    backend = getattr(args, "backend", None)
    return {"sim": "simulated"}.get(backend, backend)


def cmd_optimize(args) -> int:
    task = load_task(args.task)
    cfg = _run_config(args, task)
    log = optimize(task, cfg)
    summary = summarize(log)
    rendered = report.render([summary], fmt="text")
    if cfg.summary_path:
        Path(cfg.summary_path).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.summary_path).write_text(rendered)
    print(rendered, end="")
    print(f"log written to {cfg.log_path}")
    return EXIT_OK


def _evaluate_suite(args, task: KernelTask):
    raw, base_dir = _load_config_file(args.config)
    exec_cfg = _exec_cfg(raw, base_dir, _backend_kind(args))
    epsilon = args.epsilon if args.epsilon is not None else oracles.default_epsilon(task)
    seeds = [args.seed] if args.seed is not None else list(agents.DEFAULT_SEEDS)
    labels = None
    if args.shapes:
        labels = [s.strip() for s in args.shapes.split(",") if s.strip()]
        for label in labels:
            if label not in task.shape_families:
                raise ConfigError(f"unknown shape label {label!r}; task defines "
                                  f"{sorted(task.shape_families)}")
    suite = oracles.build_suite(task, seeds, epsilon, DiscrepancyMetric(), shape_labels=labels)
    protocol = TimingProtocol(
        warmup_runs=int(raw.get("protocol", {}).get("warmup_runs", 20)),
        timed_runs=int(raw.get("protocol", {}).get("timed_runs", 100)),
    )
    return suite, exec_cfg, protocol


def _read_source(path: Optional[str], fallback: str) -> str:
    if path is None:
        return fallback
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read kernel source {path}: {exc}") from exc


def cmd_evaluate(args) -> int:
    task = load_task(args.task)
    suite, exec_cfg, protocol = _evaluate_suite(args, task)
    baseline = Candidate(round=0, source=_read_source(args.baseline, task.baseline_source))
    candidate = Candidate(round=1, source=_read_source(args.candidate, task.baseline_source))

    base_outcome = execute_suite(baseline, suite, task, exec_cfg, protocol)
    if not base_outcome.ok:
        print(f"baseline failed to execute ({base_outcome.status})", file=sys.stderr)
        print(base_outcome.diagnostics, file=sys.stderr)
        return EXIT_EXECUTOR

    cand_outcome = execute_suite(candidate, suite, task, exec_cfg, protocol)
    passed, creport = agents.correctness_from_outcome(cand_outcome, suite)
    print(f"correctness: {'PASS' if passed else 'FAIL'} "
          f"(max discrepancy {creport.max_discrepancy:.3g}, epsilon {suite.epsilon:.3g}, "
          f"failure kind {creport.failure_kind})")
    for case_id, value in creport.per_case.items():
        print(f"  {case_id}: {value:.3g}")
    if not passed:
        if creport.per_case:
            worst = max(creport.per_case, key=creport.per_case.get)
            print(f"worst case: {worst}", file=sys.stderr)
        if not cand_outcome.ok:
            print(cand_outcome.diagnostics, file=sys.stderr)
        return EXIT_INCORRECT

    perf = profile_pair(baseline, candidate, suite, task, exec_cfg, protocol)
    _print_perf(perf)
    return EXIT_OK


def cmd_bench(args) -> int:
    if not args.unsafe_skip_correctness:
        raise ConfigError("bench skips correctness checks; pass --unsafe-skip-correctness "
                          "to confirm, or use evaluate")
    task = load_task(args.task)
    suite, exec_cfg, protocol = _evaluate_suite(args, task)
    baseline = Candidate(round=0, source=_read_source(args.baseline, task.baseline_source))
    candidate = Candidate(round=1, source=_read_source(args.candidate, task.baseline_source))
    perf = profile_pair(baseline, candidate, suite, task, exec_cfg, protocol)
    _print_perf(perf)
    return EXIT_OK


def _print_perf(perf) -> None:
    print("shape timings (microseconds):")
    for label, st in perf.per_shape.items():
        print(f"  {label}: baseline {st.baseline_us:.2f}, candidate {st.candidate_us:.2f}, "
              f"speedup {perf.speedups[label]:.3f}")
    print(f"geometric mean speedup: {perf.geo_mean:.3f}")


def cmd_report(args) -> int:
    summaries = []
    for path in args.logs:
        try:
            log = load_log(path)
        except (OSError, LogFormatError) as exc:
            print(f"cannot load log {path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        summaries.append(summarize(log))
    print(report.render(summaries, fmt=args.format), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelforge",
        description="Agent-driven GPU kernel optimization harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common_eval(p):
        p.add_argument("--task", required=True, help="task manifest (TOML)")
        p.add_argument("--config", help="run configuration file (TOML)")
        p.add_argument("--backend", choices=["sim", "simulated", "subprocess"],
                       help="executor backend override")
        p.add_argument("--epsilon", type=float, help="correctness tolerance override")
        p.add_argument("--seed", type=int, help="input-generation seed override")
        p.add_argument("--shapes", help="comma-separated shape labels to evaluate")

    p_opt = sub.add_parser("optimize", help="run the full optimization loop")
    p_opt.add_argument("--task", required=True)
    p_opt.add_argument("--config")
    p_opt.add_argument("--rounds", type=int, help="number of optimization rounds")
    p_opt.add_argument("--backend", choices=["sim", "simulated", "subprocess"])
    p_opt.add_argument("--agents", choices=["scripted", "llm"])
    p_opt.add_argument("--script", help="scripted transcript file")
    p_opt.add_argument("--mode", choices=["multi-agent", "single-agent"])
    p_opt.add_argument("--seed", type=int)
    p_opt.add_argument("--epsilon", type=float)
    p_opt.add_argument("--log", help="log output path")
    p_opt.add_argument("--summary", help="summary output path")
    p_opt.set_defaults(func=cmd_optimize)

    p_eval = sub.add_parser("evaluate", help="validate and time one candidate")
    common_eval(p_eval)
    p_eval.add_argument("--candidate", required=True, help="candidate kernel source file")
    p_eval.add_argument("--baseline", help="baseline source (defaults to the task's)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_bench = sub.add_parser("bench", help="time a candidate without correctness checks")
    common_eval(p_bench)
    p_bench.add_argument("--candidate", required=True)
    p_bench.add_argument("--baseline")
    p_bench.add_argument("--unsafe-skip-correctness", action="store_true")
    p_bench.set_defaults(func=cmd_bench)

    p_rep = sub.add_parser("report", help="render tables from saved logs")
    p_rep.add_argument("logs", nargs="+", help="one or more optimization logs")
    p_rep.add_argument("--format", choices=["text", "md", "csv"], default="text")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"agent backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ExecutorError as exc:
        print(f"executor error: {exc}", file=sys.stderr)
        return EXIT_EXECUTOR
    except LogFormatError as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KernelForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCORRECT


if __name__ == "__main__":
    sys.exit(main())
