"""Optimization run log: one structured record per line, appendable mid-run.

Line kinds, in file order: one `header` (task name + full config snapshot),
one `meta` (the only line allowed to carry wall-clock timestamps), then per
round any `transcript` lines followed by the round's `record` line, and
optionally a final `error` marker when a run aborted. Kernel sources are
embedded as JSON-escaped strings, so a crashed run still leaves every
completed round parseable.

Encoding is canonical (sorted keys, compact separators): loading a log and
saving it again yields byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

from .errors import LogFormatError
from .metrics import PerfReport

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Candidate:
    """One kernel source under evaluation; round 0 is always the baseline."""

    round: int
    source: str
    provenance: str = ""


@dataclass
class AgentTranscript:
    role: str
    round: int
    prompt: str
    response: str
    tokens: Optional[dict] = None
    latency_s: float = 0.0
    retries: int = 0


@dataclass
class RoundRecord:
    round: int
    code: str
    correctness: bool
    performance: Optional[PerfReport] = None
    note: Optional[str] = None


@dataclass
class OptimizationLog:
    task_name: str
    records: List[RoundRecord] = field(default_factory=list)
    config_snapshot: dict = field(default_factory=dict)
    agent_transcripts: List[AgentTranscript] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    error: Optional[dict] = None

    def record_for(self, round_no: int) -> Optional[RoundRecord]:
        for rec in self.records:
            if rec.round == round_no:
                return rec
        return None


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _header_line(log: OptimizationLog) -> str:
    return _dumps(
        {"t": "header", "version": FORMAT_VERSION, "task": log.task_name, "config": log.config_snapshot}
    )


def _meta_line(meta: dict) -> str:
    return _dumps({"t": "meta", **meta})


def _transcript_line(tr: AgentTranscript) -> str:
    return _dumps(
        {
            "t": "transcript",
            "role": tr.role,
            "round": tr.round,
            "prompt": tr.prompt,
            "response": tr.response,
            "tokens": tr.tokens,
            "latency_s": tr.latency_s,
            "retries": tr.retries,
        }
    )


def _record_line(rec: RoundRecord) -> str:
    obj = {
        "t": "record",
        "round": rec.round,
        "code": rec.code,
        "correct": rec.correctness,
        "perf": rec.performance.to_dict() if rec.performance is not None else None,
    }
    if rec.note is not None:
        obj["note"] = rec.note
    return _dumps(obj)


def _error_line(error: dict) -> str:
    return _dumps({"t": "error", **error})


def _validate(log: OptimizationLog) -> None:
    if not log.records:
        # only a run that aborted before round 0 may leave a record-less log
        if log.error is not None:
            return
        raise LogFormatError("log must contain at least the round-0 record")
    if log.records[0].round != 0:
        raise LogFormatError(f"first record must be round 0, got {log.records[0].round}")
    if not log.records[0].correctness:
        raise LogFormatError("round-0 record must be correct (it is the baseline)")
    for i, rec in enumerate(log.records):
        if rec.round != i:
            raise LogFormatError(f"record rounds must be consecutive, got {rec.round} at position {i}")


def log_lines(log: OptimizationLog) -> List[str]:
    """Canonical file lines for a log, reproducing live append order."""
    _validate(log)
    lines = [_header_line(log), _meta_line(log.meta)]
    max_round = max(
        [rec.round for rec in log.records] + [tr.round for tr in log.agent_transcripts] + [0]
    )
    for r in range(max_round + 1):
        for tr in log.agent_transcripts:
            if tr.round == r:
                lines.append(_transcript_line(tr))
        rec = log.record_for(r)
        if rec is not None:
            lines.append(_record_line(rec))
    if log.error is not None:
        lines.append(_error_line(log.error))
    return lines


def save_log(log: OptimizationLog, destination) -> None:
    Path(destination).write_text("".join(line + "\n" for line in log_lines(log)))


def load_log(source) -> OptimizationLog:
    """Parse a log file; malformed lines are reported with their line number."""
    text = Path(source).read_text()
    log: Optional[OptimizationLog] = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"not valid JSON: {exc}", line_no=line_no) from exc
        if not isinstance(obj, dict) or "t" not in obj:
            raise LogFormatError("missing line kind", line_no=line_no)
        kind = obj["t"]
        if kind == "header":
            if log is not None:
                raise LogFormatError("duplicate header", line_no=line_no)
            try:
                log = OptimizationLog(task_name=obj["task"], config_snapshot=obj["config"])
            except KeyError as exc:
                raise LogFormatError(f"header missing {exc}", line_no=line_no) from exc
            continue
        if log is None:
            raise LogFormatError("first line must be the header", line_no=line_no)
        try:
            if kind == "meta":
                log.meta = {k: v for k, v in obj.items() if k != "t"}
            elif kind == "transcript":
                log.agent_transcripts.append(
                    AgentTranscript(
                        role=obj["role"],
                        round=obj["round"],
                        prompt=obj["prompt"],
                        response=obj["response"],
                        tokens=obj["tokens"],
                        latency_s=obj["latency_s"],
                        retries=obj["retries"],
                    )
                )
            elif kind == "record":
                perf = obj["perf"]
                log.records.append(
                    RoundRecord(
                        round=obj["round"],
                        code=obj["code"],
                        correctness=obj["correct"],
                        performance=PerfReport.from_dict(perf) if perf is not None else None,
                        note=obj.get("note"),
                    )
                )
            elif kind == "error":
                log.error = {k: v for k, v in obj.items() if k != "t"}
            else:
                raise LogFormatError(f"unknown line kind {kind!r}", line_no=line_no)
        except (KeyError, TypeError) as exc:
            raise LogFormatError(f"malformed {kind} line: {exc}", line_no=line_no) from exc
    if log is None:
        raise LogFormatError("log file has no header line")
    _validate(log)
    return log


class LogWriter:
    """Streams log lines to disk, flushing after every round record."""

    def __init__(self, path, task_name: str, config_snapshot: dict, meta: Optional[dict] = None):
        self.path = Path(path)
        self.log = OptimizationLog(task_name=task_name, config_snapshot=config_snapshot)
        self.log.meta = meta if meta is not None else {"created_at": _now_iso()}
        self._fh = open(self.path, "w")
        self._write(_header_line(self.log))
        self._write(_meta_line(self.log.meta))
        self._fh.flush()

    def _write(self, line: str) -> None:
        self._fh.write(line + "\n")

    def add_transcript(self, tr: AgentTranscript) -> None:
        self.log.agent_transcripts.append(tr)
        self._write(_transcript_line(tr))
        self._fh.flush()

    def add_record(self, rec: RoundRecord) -> None:
        self.log.records.append(rec)
        self._write(_record_line(rec))
        self._fh.flush()

    def add_error(self, round_no: int, stage: str, message: str) -> None:
        self.log.error = {"round": round_no, "stage": stage, "message": message}
        self._write(_error_line(self.log.error))
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")
