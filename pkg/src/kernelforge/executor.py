"""Candidate execution backends.

The simulated backend maps candidate source hashes to registered CPU
behaviors and declared per-shape latencies, which makes full optimization
runs deterministic, network-free and GPU-free. The subprocess backend (see
`subproc`) compiles candidates with an external toolchain and drives the
compiled host harness.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import oracles
from .errors import ConfigError, ExecutorError, ProfilingError
from .metrics import PerfReport, make_perf_report
from .optlog import Candidate
from .suite import TestSuite
from .task import KernelTask
from .tensor import Tensor

STATUS_OK = "ok"
STATUS_COMPILE_ERROR = "compile_error"
STATUS_RUNTIME_ERROR = "runtime_error"
STATUS_TIMEOUT = "timeout"

BEHAVIOR_ORACLE = "oracle"
BEHAVIOR_PERTURB = "perturb"
BEHAVIOR_RUNTIME_ERROR = "runtime_error"


@dataclass(frozen=True)
class TimingProtocol:
    """Repetition counts for performance measurement."""

    warmup_runs: int = 20
    timed_runs: int = 100

    def __post_init__(self):
        if self.warmup_runs < 0:
            raise ConfigError(f"warmup_runs must be >= 0, got {self.warmup_runs}")
        if self.timed_runs < 1:
            raise ConfigError(f"timed_runs must be >= 1, got {self.timed_runs}")


@dataclass(frozen=True)
class SimBehavior:
    """Declared behavior of one registered candidate source.

    kind "oracle" evaluates the task's own reference implementation;
    "perturb" does the same then biases one flat element of one output by
    `delta` in every case; "runtime_error" models a kernel that crashes.
    Latencies are declared microseconds per shape label ("*" is a wildcard).
    """

    kind: str = BEHAVIOR_ORACLE
    latency_us: Dict[str, float] = field(default_factory=dict)
    output: Optional[str] = None
    index: int = 0
    delta: float = 0.0
    noise_pct: float = 0.0

    def latency_for(self, label: str) -> float:
        if label in self.latency_us:
            return float(self.latency_us[label])
        if "*" in self.latency_us:
            return float(self.latency_us["*"])
        raise ExecutorError(f"no declared latency for shape {label!r}")


@dataclass
class ExecBackendConfig:
    kind: str = "simulated"
    registry: Dict[str, SimBehavior] = field(default_factory=dict)
    noise_seed: int = 0
    toolchain: Optional["ToolchainConfig"] = None
    work_dir: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("simulated", "subprocess"):
            raise ConfigError(f"unknown executor kind {self.kind!r}")
        if self.kind == "subprocess" and self.toolchain is None:
            raise ConfigError("subprocess executor needs a toolchain configuration")

    def register(self, source: str, behavior: SimBehavior) -> str:
        digest = hash_source(source)
        self.registry[digest] = behavior
        return digest

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "simulated":
            out["noise_seed"] = self.noise_seed
            out["registry"] = {
                digest: {
                    "kind": b.kind,
                    "latency_us": dict(b.latency_us),
                    "output": b.output,
                    "index": b.index,
                    "delta": b.delta,
                    "noise_pct": b.noise_pct,
                }
                for digest, b in sorted(self.registry.items())
            }
        else:
            out["toolchain"] = self.toolchain.to_dict()
            out["work_dir"] = str(self.work_dir) if self.work_dir else None
        return out


@dataclass(frozen=True)
class ToolchainConfig:
    """External compiler invocation template for the subprocess backend.

    `compile_cmd` entries may use {harness}, {candidate}, {bin} and {arch}
    placeholders. The harness source is compiled together with the candidate.
    """

    compile_cmd: tuple
    harness_source: str
    arch: str = ""
    source_suffix: str = ".cu"
    compile_timeout_s: float = 120.0
    run_timeout_s: float = 120.0

    def __post_init__(self):
        if self.compile_timeout_s <= 0 or self.run_timeout_s <= 0:
            raise ConfigError("toolchain timeouts must be positive")

    def to_dict(self) -> dict:
        return {
            "compile_cmd": list(self.compile_cmd),
            "harness_source": str(self.harness_source),
            "arch": self.arch,
            "source_suffix": self.source_suffix,
            "compile_timeout_s": self.compile_timeout_s,
            "run_timeout_s": self.run_timeout_s,
        }


@dataclass
class RunOutcome:
    status: str
    outputs: Dict[str, Dict[str, Tensor]] = field(default_factory=dict)
    timings: Dict[str, List[float]] = field(default_factory=dict)
    diagnostics: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def hash_source(source: str) -> str:
    """Stable, whitespace-significant digest of a kernel source text."""
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def execute_suite(
    candidate: Candidate,
    suite: TestSuite,
    task: KernelTask,
    cfg: ExecBackendConfig,
    protocol: TimingProtocol,
) -> RunOutcome:
    """Run a candidate over a suite: correctness outputs plus timing samples."""
    if cfg.kind == "simulated":
        return _execute_simulated(candidate, suite, task, cfg, protocol)
    from .subproc import execute_suite_subprocess

    return execute_suite_subprocess(candidate, suite, task, cfg, protocol)


def _execute_simulated(
    candidate: Candidate,
    suite: TestSuite,
    task: KernelTask,
    cfg: ExecBackendConfig,
    protocol: TimingProtocol,
) -> RunOutcome:
    digest = hash_source(candidate.source)
    behavior = cfg.registry.get(digest)
    if behavior is None:
        return RunOutcome(
            status=STATUS_COMPILE_ERROR,
            diagnostics=f"simulated compile failure: source hash {digest[:12]} is not registered",
        )
    if behavior.kind == BEHAVIOR_RUNTIME_ERROR:
        return RunOutcome(
            status=STATUS_RUNTIME_ERROR,
            diagnostics="simulated runtime fault: registered behavior is runtime_error",
        )
    if behavior.kind not in (BEHAVIOR_ORACLE, BEHAVIOR_PERTURB):
        raise ConfigError(f"unknown simulated behavior {behavior.kind!r}")

    outputs: Dict[str, Dict[str, Tensor]] = {}
    for case in suite.cases:
        produced = oracles.evaluate(task, case.inputs)
        if behavior.kind == BEHAVIOR_PERTURB:
            produced = _perturb(produced, task, behavior)
        outputs[case.case_id] = produced

    timings: Dict[str, List[float]] = {}
    for label in suite.shape_labels():
        lat = behavior.latency_for(label)
        if behavior.noise_pct > 0:
            rng = _noise_stream(cfg.noise_seed, digest, label)
            jitter = (rng.random(protocol.timed_runs) * 2.0 - 1.0) * behavior.noise_pct / 100.0
            timings[label] = [float(lat * (1.0 + j)) for j in jitter]
        else:
            timings[label] = [float(lat)] * protocol.timed_runs
    return RunOutcome(status=STATUS_OK, outputs=outputs, timings=timings)


def _perturb(produced: Dict[str, Tensor], task: KernelTask, behavior: SimBehavior) -> Dict[str, Tensor]:
    name = behavior.output or task.outputs()[0].name
    if name not in produced:
        raise ConfigError(f"perturb behavior names unknown output {name!r}")
    tensor = produced[name]
    arr = tensor.to_array().astype(np.float32)
    flat = arr.reshape(-1)
    flat[behavior.index % flat.size] += np.float32(behavior.delta)
    dtype = tensor.dtype
    out = arr.astype(np.float16) if dtype == "f16" else arr
    return {**produced, name: Tensor.from_array(out, dtype=dtype)}


def _noise_stream(noise_seed: int, digest: str, label: str) -> np.random.Generator:
    ints = [int(noise_seed), int(digest[:16], 16)]
    ints.append(int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "little"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(ints)))


def profile_pair(
    baseline: Candidate,
    candidate: Candidate,
    suite: TestSuite,
    task: KernelTask,
    cfg: ExecBackendConfig,
    protocol: TimingProtocol,
) -> PerfReport:
    """Time both kernels under the identical protocol, back to back, and compare."""
    base_outcome = execute_suite(baseline, suite, task, cfg, protocol)
    if not base_outcome.ok:
        raise ProfilingError(
            f"baseline failed to execute ({base_outcome.status}): {base_outcome.diagnostics}",
            outcome=base_outcome,
        )
    cand_outcome = execute_suite(candidate, suite, task, cfg, protocol)
    if not cand_outcome.ok:
        raise ProfilingError(
            f"candidate failed to execute ({cand_outcome.status}): {cand_outcome.diagnostics}",
            outcome=cand_outcome,
        )
    return make_perf_report(base_outcome.timings, cand_outcome.timings)
