"""The four agent roles over a pluggable conversation backend.

Backends: `llm` talks to a remote chat-completion endpoint (messages in,
choices out) with retry and backoff; `scripted` replays canned responses
keyed by (role, round), making whole runs deterministic. Expected test
outputs always come from the oracle, never from agent text.

In multi-agent mode each role keeps its own conversation context; in
single-agent mode all roles share one context.
"""

from __future__ import annotations

import json
import os
import re
import string
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import requests

from . import oracles
from .errors import BackendError, CodingError, ConfigError, PlanningError, ScriptingError
from .executor import ExecBackendConfig, TimingProtocol, execute_suite, profile_pair
from .metrics import (
    FAILURE_COMPILE,
    FAILURE_RUNTIME,
    CorrectnessReport,
    DiscrepancyMetric,
    PerfReport,
    correctness_pass,
)
from .optlog import AgentTranscript, Candidate
from .suite import TestSuite
from .task import KernelTask, default_shape_label

ROLE_TESTING = "testing"
ROLE_PLANNING = "planning"
ROLE_CODING = "coding"

STRATEGY_TAGS = (
    "loop-invariant-hoisting",
    "warp-shuffle-reduction",
    "vectorized-load",
    "fast-math-intrinsics",
    "other",
)

DEFAULT_SEEDS = (101, 202)
DEFAULT_ELEMENT_BUDGET = 1 << 26

CORRECTNESS_FIRST_DIRECTIVE = (
    "The previous candidate FAILED the correctness check. Restore correctness "
    "first; only pursue further speed once outputs match the reference within "
    "tolerance."
)


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff_s: Tuple[float, ...] = (1.0, 4.0, 16.0)


@dataclass
class AgentBackendConfig:
    kind: str = "scripted"
    endpoint: str = ""
    model: str = ""
    credential_env: str = "KERNELFORGE_API_KEY"
    temperature: float = 0.2
    max_tokens: int = 4096
    request_timeout_s: float = 120.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    script_path: Optional[str] = None
    transcript: Dict[Tuple[str, int], str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("llm", "scripted"):
            raise ConfigError(f"unknown agent backend kind {self.kind!r}")

    def validate(self) -> None:
        """Fail fast on unusable configuration, before any request is made."""
        if self.kind == "llm":
            if not self.endpoint:
                raise ConfigError("llm backend needs an endpoint URL")
            if not os.environ.get(self.credential_env):
                raise ConfigError(
                    f"credential environment variable {self.credential_env!r} is not set"
                )
        else:
            if not self.transcript:
                raise ConfigError("scripted backend has an empty transcript")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model": self.model,
            "credential_env": self.credential_env,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "request_timeout_s": self.request_timeout_s,
            "retry_attempts": self.retry.attempts,
            "script_path": str(self.script_path) if self.script_path else None,
        }


def load_script(path) -> Dict[Tuple[str, int], str]:
    """Scripted transcript file: one JSON object {role, round, response} per line."""
    entries: Dict[Tuple[str, int], str] = {}
    text = Path(path).read_text()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            key = (str(obj["role"]), int(obj["round"]))
            entries[key] = str(obj["response"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad script entry at {path}:{line_no}: {exc}") from exc
    if not entries:
        raise ConfigError(f"script file {path} has no entries")
    return entries


def _load_template(role: str) -> string.Template:
    text = resources.files("kernelforge").joinpath(f"templates/{role}.txt").read_text()
    lines = [ln for ln in text.splitlines() if not ln.startswith("# template-version")]
    return string.Template("\n".join(lines).strip() + "\n")


class AgentSession:
    """Holds conversation contexts and routes chats through the backend."""

    def __init__(
        self,
        cfg: AgentBackendConfig,
        mode: str = "multi-agent",
        recorder: Optional[Callable[[AgentTranscript], None]] = None,
    ):
        if mode not in ("multi-agent", "single-agent"):
            raise ConfigError(f"unknown agent mode {mode!r}")
        self.cfg = cfg
        self.mode = mode
        self.recorder = recorder
        self._contexts: Dict[str, List[dict]] = {}

    def _context_key(self, role: str) -> str:
        return "shared" if self.mode == "single-agent" else role

    def chat(self, role: str, round_no: int, prompt: str) -> str:
        """One backend exchange; the transcript is recorded exactly once."""
        key = self._context_key(role)
        history = self._contexts.setdefault(key, [])
        messages = history + [{"role": "user", "content": prompt}]
        if self.cfg.kind == "scripted":
            entry = self.cfg.transcript.get((role, round_no))
            if entry is None:
                raise ScriptingError(
                    f"scripted transcript has no entry for role {role!r}, round {round_no}"
                )
            response, usage, latency, retries = entry, None, 0.0, 0
        else:
            response, usage, latency, retries = _llm_chat(self.cfg, messages)
        history.append({"role": "user", "content": prompt})
        history.append({"role": "assistant", "content": response})
        if self.recorder is not None:
            self.recorder(
                AgentTranscript(
                    role=role,
                    round=round_no,
                    prompt=prompt,
                    response=response,
                    tokens=usage,
                    latency_s=latency,
                    retries=retries,
                )
            )
        return response


def _llm_chat(cfg: AgentBackendConfig, messages: List[dict]):
    credential = os.environ.get(cfg.credential_env)
    if not credential:
        raise ConfigError(f"credential environment variable {cfg.credential_env!r} is not set")
    payload = {
        "model": cfg.model,
        "messages": messages,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
    }
    headers = {"Authorization": f"Bearer {credential}"}
    last_error: Optional[Exception] = None
    for attempt in range(cfg.retry.attempts):
        start = time.monotonic()
        try:
            resp = requests.post(
                cfg.endpoint, json=payload, headers=headers, timeout=cfg.request_timeout_s
            )
            if resp.status_code == 429 or resp.status_code >= 500:
                raise BackendError(f"transient status {resp.status_code}: {resp.text[:200]}")
            resp.raise_for_status()
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage")
            return text, usage, time.monotonic() - start, attempt
        except (requests.RequestException, BackendError, KeyError, IndexError, ValueError) as exc:
            last_error = exc
            if attempt + 1 < cfg.retry.attempts:
                backoffs = cfg.retry.backoff_s
                time.sleep(backoffs[min(attempt, len(backoffs) - 1)])
    raise BackendError(f"chat request failed after {cfg.retry.attempts} attempts: {last_error}")


# --- testing agent ---------------------------------------------------------


def _signature_summary(task: KernelTask) -> str:
    parts = []
    for p in task.signature:
        if p.role == "scalar":
            parts.append(f"{p.name}: scalar {p.dtype} = {p.value}")
        else:
            parts.append(f"{p.name}: {p.role} {p.dtype} [{', '.join(p.shape)}]")
    return "; ".join(parts)


_SHAPES_RE = re.compile(r"shapes\s*:\s*(\[.*\])", re.IGNORECASE)
_SEEDS_RE = re.compile(r"seeds\s*:\s*(\[.*?\])", re.IGNORECASE)


def parse_shape_proposal(text: str) -> Tuple[List[List[int]], List[int]]:
    """Lenient extraction of `shapes:` and `seeds:` lists from agent text."""
    shapes: List[List[int]] = []
    seeds: List[int] = []
    m = _SHAPES_RE.search(text)
    if m:
        try:
            parsed = json.loads(m.group(1))
            if isinstance(parsed, list):
                for entry in parsed:
                    if isinstance(entry, list) and all(isinstance(d, int) for d in entry):
                        shapes.append([int(d) for d in entry])
        except json.JSONDecodeError:
            pass
    m = _SEEDS_RE.search(text)
    if m:
        try:
            parsed = json.loads(m.group(1))
            if isinstance(parsed, list):
                seeds = [int(s) for s in parsed if isinstance(s, int)]
        except json.JSONDecodeError:
            pass
    return shapes, seeds


def _validate_proposal(
    task: KernelTask, shapes: List[List[int]], budget: int
) -> Dict[str, Tuple[int, ...]]:
    """Keep proposals that fit the signature and the element budget."""
    dims = task.dim_symbols()
    kept: Dict[str, Tuple[int, ...]] = {}
    for shape in shapes:
        if len(shape) != len(dims) or any(d < 1 for d in shape):
            continue
        binding = dict(zip(dims, shape))
        too_big = False
        for p in task.signature:
            if p.role == "scalar":
                continue
            count = 1
            for sym in p.shape:
                count *= int(sym) if sym.lstrip("+-").isdigit() else binding[sym]
            if count > budget:
                too_big = True
                break
        if too_big:
            continue
        label = default_shape_label(shape)
        kept.setdefault(label, tuple(shape))
    return kept


def testing_generate_tests(
    baseline: Candidate,
    task: KernelTask,
    session: AgentSession,
    epsilon: float,
    metric: DiscrepancyMetric,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    budget: int = DEFAULT_ELEMENT_BUDGET,
    gen_spec: oracles.InputGenSpec = oracles.DEFAULT_GEN,
) -> Tuple[TestSuite, Optional[str]]:
    """Build the suite from the agent's shape/seed proposal.

    Expected outputs always come from the oracle. Invalid proposed shapes are
    dropped; if none survive, the task's own shape families are used and the
    fallback is reported in the returned note.
    """
    oracles.check_task_signature(task)
    template = _load_template("testing")
    prompt = template.substitute(
        task_name=task.name,
        signature=_signature_summary(task),
        dims=", ".join(task.dim_symbols()),
        families=json.dumps({k: list(v) for k, v in task.shape_families.items()}),
        budget=str(budget),
    )
    attempts = 1 if session.cfg.kind == "scripted" else session.cfg.retry.attempts
    kept: Dict[str, Tuple[int, ...]] = {}
    proposed_seeds: List[int] = []
    for _ in range(attempts):
        response = session.chat(ROLE_TESTING, 0, prompt)
        shapes, proposed_seeds = parse_shape_proposal(response)
        kept = _validate_proposal(task, shapes, budget)
        if kept:
            break
    note = None
    if not kept:
        kept = dict(task.shape_families)
        proposed_seeds = []
        note = "test proposal unusable; fell back to the task's shape families"
    use_seeds = proposed_seeds if proposed_seeds else list(seeds)
    spec_task = KernelTask(
        name=task.name,
        baseline_source=task.baseline_source,
        signature=task.signature,
        oracle_id=task.oracle_id,
        shape_families=kept,
    )
    suite = oracles.build_suite(spec_task, use_seeds, epsilon, metric, gen_spec)
    return suite, note


# --- testing agent: validation --------------------------------------------


def correctness_from_outcome(outcome, suite: TestSuite) -> Tuple[bool, CorrectnessReport]:
    """Fold a RunOutcome into the suite-wide pass/fail decision."""
    if outcome.status == "compile_error":
        return False, CorrectnessReport.failure(FAILURE_COMPILE)
    if outcome.status in ("runtime_error", "timeout"):
        return False, CorrectnessReport.failure(FAILURE_RUNTIME)
    report = correctness_pass(suite, outcome.outputs)
    return report.passed, report


def testing_validate(
    candidate: Candidate,
    suite: TestSuite,
    task: KernelTask,
    cfg: ExecBackendConfig,
    protocol: TimingProtocol,
) -> Tuple[bool, CorrectnessReport]:
    outcome = execute_suite(candidate, suite, task, cfg, protocol)
    return correctness_from_outcome(outcome, suite)


# --- profiling agent -------------------------------------------------------


def profiling_profile(
    candidate: Candidate,
    baseline: Candidate,
    suite: TestSuite,
    task: KernelTask,
    cfg: ExecBackendConfig,
    protocol: TimingProtocol,
) -> PerfReport:
    """Time candidate against baseline; round 0 profiles the baseline against itself."""
    return profile_pair(baseline, candidate, suite, task, cfg, protocol)


# --- planning agent --------------------------------------------------------


@dataclass(frozen=True)
class SuggestionItem:
    strategy_tag: str
    rationale: str
    region: str = ""


@dataclass
class Suggestion:
    items: List[SuggestionItem]
    raw_text: str

    def summary(self) -> str:
        return "; ".join(f"[{i.strategy_tag}] {i.rationale}" for i in self.items)


_ITEM_RE = re.compile(r"^\s*[-*]\s*\[([a-z0-9-]+)\]\s*(.*)$")
_REGION_RE = re.compile(r"\(region:\s*(.*?)\)\s*$")


def parse_suggestions(text: str) -> Suggestion:
    items: List[SuggestionItem] = []
    for line in text.splitlines():
        m = _ITEM_RE.match(line)
        if not m:
            continue
        tag = m.group(1) if m.group(1) in STRATEGY_TAGS else "other"
        rest = m.group(2).strip()
        region = ""
        rm = _REGION_RE.search(rest)
        if rm:
            region = rm.group(1).strip()
            rest = rest[: rm.start()].strip()
        items.append(SuggestionItem(strategy_tag=tag, rationale=rest, region=region))
    if not items:
        items = [SuggestionItem(strategy_tag="other", rationale=text.strip())]
    return Suggestion(items=items, raw_text=text)


def _timings_block(perf: Optional[PerfReport]) -> str:
    if perf is None:
        return "(no timing data; the previous candidate did not run)"
    lines = []
    for label, st in perf.per_shape.items():
        lines.append(
            f"  {label}: baseline {st.baseline_us:.2f} us, candidate {st.candidate_us:.2f} us, "
            f"speedup {perf.speedups[label]:.3f}"
        )
    lines.append(f"  geometric mean speedup: {perf.geo_mean:.3f}")
    return "\n".join(lines)


def _history_block(history) -> str:
    if history is None or not history.records:
        return "(none)"
    lines = []
    for rec in history.records:
        geo = f"{rec.performance.geo_mean:.3f}" if rec.performance else "n/a"
        status = "pass" if rec.correctness else "FAIL"
        lines.append(f"  round {rec.round}: {status}, geo speedup {geo}")
    return "\n".join(lines)


def render_planning_prompt(
    task: KernelTask,
    prev: Candidate,
    pass_prev: bool,
    perf_prev: Optional[PerfReport],
    history,
    round_no: int,
    diagnostics: str = "",
) -> str:
    template = _load_template("planning")
    return template.substitute(
        task_name=task.name,
        round=str(round_no),
        status_line="passing correctness" if pass_prev else "FAILING correctness",
        directive=CORRECTNESS_FIRST_DIRECTIVE if not pass_prev else "",
        timings=_timings_block(perf_prev),
        diagnostics=diagnostics.strip() or "(none)",
        history=_history_block(history),
        source=prev.source,
    )


def planning_suggest(
    prev: Candidate,
    pass_prev: bool,
    perf_prev: Optional[PerfReport],
    history,
    session: AgentSession,
    task: KernelTask,
    round_no: int,
    diagnostics: str = "",
) -> Suggestion:
    prompt = render_planning_prompt(
        task, prev, pass_prev, perf_prev, history, round_no, diagnostics
    )
    try:
        response = session.chat(ROLE_PLANNING, round_no, prompt)
    except ScriptingError:
        raise
    except BackendError as exc:
        raise PlanningError(f"planning backend failed: {exc}") from exc
    return parse_suggestions(response)


# --- coding agent ----------------------------------------------------------

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def extract_code_block(text: str) -> Optional[Tuple[str, int]]:
    """Largest fenced code block and the number of blocks found."""
    blocks = _FENCE_RE.findall(text)
    if not blocks:
        return None
    best = max(blocks, key=len)
    return best, len(blocks)


def coding_apply(
    prev: Candidate,
    suggestion: Suggestion,
    session: AgentSession,
    task: KernelTask,
    round_no: Optional[int] = None,
) -> Candidate:
    """Ask the coding agent for a rewrite; the fenced block becomes the new source.

    round_no defaults to prev.round + 1; the orchestrator passes the loop
    round explicitly so numbering stays gap-free when a failed round left
    prev in place.
    """
    template = _load_template("coding")
    if round_no is None:
        round_no = prev.round + 1
    suggestions_text = "\n".join(
        f"- [{i.strategy_tag}] {i.rationale}" + (f" (region: {i.region})" if i.region else "")
        for i in suggestion.items
    )
    prompt = template.substitute(
        round=str(round_no), suggestions=suggestions_text, source=prev.source
    )
    attempts = 1 if session.cfg.kind == "scripted" else session.cfg.retry.attempts
    last_response = ""
    for attempt in range(attempts):
        try:
            response = session.chat(ROLE_CODING, round_no, prompt)
        except ScriptingError:
            raise
        except BackendError as exc:
            raise CodingError(f"coding backend failed: {exc}") from exc
        last_response = response
        extracted = extract_code_block(response)
        if extracted is not None:
            source, n_blocks = extracted
            provenance = f"coding agent, round {round_no}; applied: {suggestion.summary()}"
            if n_blocks > 1:
                provenance += f"; took largest of {n_blocks} code blocks"
            return Candidate(round=round_no, source=source, provenance=provenance)
        prompt = (
            "Your previous reply contained no fenced code block. Reply again with "
            "the complete kernel source inside one fenced code block."
        )
    raise CodingError(
        f"coding agent produced no code block after {attempts} attempt(s); "
        f"last response started with: {last_response[:120]!r}"
    )
