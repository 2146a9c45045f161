"""The optimization loop: suite setup, baseline profile, then R rounds of
suggest, apply, validate, profile, append.

The newest candidate is carried into the next round even when it fails
correctness; the planner is told and directed to restore correctness first.
If the planner or coder produces nothing usable the round is recorded as
failed and the previous candidate is kept. A broken scripted transcript or
dead backend aborts the run with an error marker; completed rounds stay on
disk and the partial log remains loadable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from . import agents, oracles
from .agents import AgentBackendConfig, AgentSession
from .errors import (
    CodingError,
    ConfigError,
    ExecutorError,
    KernelForgeError,
    PlanningError,
    ScriptingError,
)
from .executor import ExecBackendConfig, TimingProtocol, execute_suite
from .metrics import DiscrepancyMetric, correctness_pass, make_perf_report
from .optlog import Candidate, LogWriter, OptimizationLog, RoundRecord
from .task import KernelTask


@dataclass
class RunConfig:
    rounds: int = 5
    mode: str = "multi-agent"
    exec_cfg: ExecBackendConfig = field(default_factory=ExecBackendConfig)
    agent_cfg: AgentBackendConfig = field(default_factory=AgentBackendConfig)
    protocol: TimingProtocol = field(default_factory=TimingProtocol)
    epsilon: Optional[float] = None
    metric: DiscrepancyMetric = field(default_factory=DiscrepancyMetric)
    seeds: Sequence[int] = agents.DEFAULT_SEEDS
    budget: int = agents.DEFAULT_ELEMENT_BUDGET
    log_path: str = "optimization-log.jsonl"
    summary_path: Optional[str] = None

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.mode not in ("multi-agent", "single-agent"):
            raise ConfigError(f"unknown mode {self.mode!r}")

    def resolved_epsilon(self, task: KernelTask) -> float:
        return self.epsilon if self.epsilon is not None else oracles.default_epsilon(task)

    def to_dict(self, task: Optional[KernelTask] = None) -> dict:
        eps = self.resolved_epsilon(task) if task is not None else self.epsilon
        return {
            "rounds": self.rounds,
            "mode": self.mode,
            "executor": self.exec_cfg.to_dict(),
            "agents": self.agent_cfg.to_dict(),
            "protocol": {
                "warmup_runs": self.protocol.warmup_runs,
                "timed_runs": self.protocol.timed_runs,
            },
            "epsilon": eps,
            "metric": {"kind": self.metric.kind, "rel_floor": self.metric.rel_floor},
            "seeds": list(self.seeds),
            "budget": self.budget,
            "log_path": str(self.log_path),
            "summary_path": str(self.summary_path) if self.summary_path else None,
        }


def optimize(task: KernelTask, cfg: RunConfig) -> OptimizationLog:
    """Run the full loop and return the log (also flushed to cfg.log_path)."""
    oracles.check_task_signature(task)
    cfg.agent_cfg.validate()
    epsilon = cfg.resolved_epsilon(task)

    writer = LogWriter(cfg.log_path, task.name, cfg.to_dict(task))
    try:
        session = AgentSession(cfg.agent_cfg, cfg.mode, recorder=writer.add_transcript)

        # Suite and baseline profile.
        baseline = Candidate(round=0, source=task.baseline_source, provenance="baseline")
        try:
            suite, suite_note = agents.testing_generate_tests(
                baseline,
                task,
                session,
                epsilon=epsilon,
                metric=cfg.metric,
                seeds=cfg.seeds,
                budget=cfg.budget,
            )
        except ScriptingError as exc:
            writer.add_error(0, "testing", str(exc))
            raise

        outcome0 = execute_suite(baseline, suite, task, cfg.exec_cfg, cfg.protocol)
        if not outcome0.ok:
            message = f"baseline failed to execute ({outcome0.status}): {outcome0.diagnostics}"
            writer.add_error(0, "executor", message)
            raise ExecutorError(message)
        report0 = correctness_pass(suite, outcome0.outputs)
        if not report0.passed:
            message = (
                f"baseline does not reproduce its oracle within epsilon={epsilon} "
                f"(max discrepancy {report0.max_discrepancy}); check the task binding"
            )
            writer.add_error(0, "executor", message)
            raise ExecutorError(message)
        perf0 = make_perf_report(outcome0.timings, outcome0.timings)
        writer.add_record(
            RoundRecord(
                round=0,
                code=task.baseline_source,
                correctness=True,
                performance=perf0,
                note=suite_note,
            )
        )

        prev = baseline
        pass_prev = True
        perf_prev = perf0
        diag_prev = ""

        for r in range(1, cfg.rounds + 1):
            try:
                suggestion = agents.planning_suggest(
                    prev, pass_prev, perf_prev, writer.log, session, task, r, diag_prev
                )
                candidate = agents.coding_apply(prev, suggestion, session, task, round_no=r)
            except ScriptingError as exc:
                writer.add_error(r, "agents", str(exc))
                raise
            except (PlanningError, CodingError) as exc:
                writer.add_record(
                    RoundRecord(
                        round=r,
                        code=prev.source,
                        correctness=False,
                        performance=None,
                        note=f"round failed before execution: {exc}",
                    )
                )
                continue

            outcome = execute_suite(candidate, suite, task, cfg.exec_cfg, cfg.protocol)
            pass_new, report = agents.correctness_from_outcome(outcome, suite)
            perf_new = (
                make_perf_report(outcome0.timings, outcome.timings) if outcome.ok else None
            )
            note = None if outcome.ok else f"execution {outcome.status}"
            writer.add_record(
                RoundRecord(
                    round=r,
                    code=candidate.source,
                    correctness=pass_new,
                    performance=perf_new,
                    note=note,
                )
            )
            prev, pass_prev, perf_prev = candidate, pass_new, perf_new
            diag_prev = outcome.diagnostics if not outcome.ok else ""
        return writer.log
    finally:
        writer.close()


def select_best(log: OptimizationLog) -> RoundRecord:
    """Best correct record by geometric-mean speedup; ties go to the earlier round.

    Record 0 is always correct with speedup 1.0, so a result always exists.
    """
    best: Optional[RoundRecord] = None
    for rec in log.records:
        if not rec.correctness or rec.performance is None:
            continue
        if best is None or rec.performance.geo_mean > best.performance.geo_mean:
            best = rec
    if best is None:
        raise KernelForgeError("log contains no correct record with a performance report")
    return best


def count_source_lines(source: str) -> int:
    """Non-blank line count, the basis of the reported size delta."""
    return sum(1 for line in source.splitlines() if line.strip())


def summarize(log: OptimizationLog) -> dict:
    """Flatten a log into the table-shaped summary the CLI renders."""
    best = select_best(log)
    base = log.records[0]
    loc_base = count_source_lines(base.code)
    loc_best = count_source_lines(best.code)
    delta_pct = round(100.0 * (loc_best - loc_base) / loc_base) if loc_base else 0

    per_shape: List[dict] = []
    base_means: List[float] = []
    cand_means: List[float] = []
    for label, st in best.performance.per_shape.items():
        per_shape.append(
            {
                "label": label,
                "baseline_us": st.baseline_us,
                "candidate_us": st.candidate_us,
                "speedup": best.performance.speedups[label],
            }
        )
        base_means.append(st.baseline_us)
        cand_means.append(st.candidate_us)

    rounds: List[dict] = []
    for rec in log.records:
        entry = {
            "round": rec.round,
            "correct": rec.correctness,
            "geo_mean": rec.performance.geo_mean if rec.performance else None,
            "loc": count_source_lines(rec.code),
            "note": rec.note,
        }
        if rec.performance is not None:
            entry["per_shape"] = [
                {
                    "label": label,
                    "baseline_us": st.baseline_us,
                    "candidate_us": st.candidate_us,
                    "speedup": rec.performance.speedups[label],
                }
                for label, st in rec.performance.per_shape.items()
            ]
        rounds.append(entry)

    return {
        "task": log.task_name,
        "best_round": best.round,
        "correct": best.correctness,
        "loc_base": loc_base,
        "loc_best": loc_best,
        "loc_delta_pct": delta_pct,
        "time_base_us": sum(base_means) / len(base_means),
        "time_best_us": sum(cand_means) / len(cand_means),
        "geo_mean": best.performance.geo_mean,
        "per_shape": per_shape,
        "rounds": rounds,
        "aborted": log.error is not None,
    }
