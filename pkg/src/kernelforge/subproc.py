"""Subprocess execution backend.

Compiles the candidate source together with the host harness using the
configured toolchain, then runs one harness process per shape family. The
process boundary speaks three file formats: binary tensors (KFT1), a
line-based manifest (KFMAN1) emitted here, and a timing file (KFTIME1, one
microsecond value per line) parsed here. Compile commands, diagnostics and
exit codes are captured verbatim for the planning agent.
"""

from __future__ import annotations

import re
import subprocess
import threading
from pathlib import Path
from typing import Dict, List, Tuple

from .errors import ExecutorError
from .executor import (
    STATUS_COMPILE_ERROR,
    STATUS_OK,
    STATUS_RUNTIME_ERROR,
    STATUS_TIMEOUT,
    ExecBackendConfig,
    RunOutcome,
    TimingProtocol,
    hash_source,
)
from .optlog import Candidate
from .suite import TestCase, TestSuite
from .task import KernelTask, bind_symbols, resolve_output_shapes
from .tensor import Tensor, read_tensor, write_tensor

MANIFEST_MAGIC = "KFMAN1"
TIMING_MAGIC = "KFTIME1"

# Timed launches must not overlap on the device; compilation may.
_DEVICE_LEASE = threading.Lock()


def _sanitize(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", label)


def write_manifest(
    path: Path,
    task: KernelTask,
    cases: List[TestCase],
    label: str,
    protocol: TimingProtocol,
    timing_path: Path,
    io_paths: Dict[str, Dict[str, Path]],
    entry: str = "kernel_entry",
) -> None:
    """Emit the harness manifest for one shape family.

    Parameter bindings appear in signature order within each case; the
    harness times the first listed case after writing every case's outputs.
    """
    first = cases[0]
    shapes = {n: v.shape for n, v in first.inputs.items() if isinstance(v, Tensor)}
    binding = bind_symbols(task, shapes)
    dims = [binding[s] for s in task.dim_symbols()]
    out_shapes = resolve_output_shapes(task, shapes)

    lines = [
        MANIFEST_MAGIC,
        f"entry {entry}",
        f"shape_label {label}",
        f"warmup {protocol.warmup_runs}",
        f"timed {protocol.timed_runs}",
        "launch kernel-declared",
        "dims " + " ".join([str(len(dims))] + [str(d) for d in dims]),
        f"timing {timing_path}",
    ]
    for case in cases:
        lines.append(f"case {case.case_id}")
        for p in task.signature:
            if p.role == "scalar":
                lines.append(f"in {p.name} scalar {float(case.inputs[p.name])!r}")
            elif p.role == "input-tensor":
                lines.append(f"in {p.name} tensor {io_paths[case.case_id][p.name]}")
            else:
                extents = " ".join(str(e) for e in out_shapes[p.name])
                lines.append(
                    f"out {p.name} {p.dtype} {len(out_shapes[p.name])} {extents} "
                    f"{io_paths[case.case_id][p.name]}"
                )
        lines.append("endcase")
    lines.append("end")
    path.write_text("".join(line + "\n" for line in lines))


def parse_timing_file(path: Path) -> Tuple[str, int, int, List[float]]:
    """Read a KFTIME1 file: header (label, warmup, timed) then one value per line."""
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ExecutorError(f"timing file {path} is empty")
    head = lines[0].split()
    if len(head) < 4 or head[0] != TIMING_MAGIC:
        raise ExecutorError(f"timing file {path} has a bad header: {lines[0]!r}")
    label, warmup, timed = head[1], int(head[2]), int(head[3])
    values = []
    for ln in lines[1:]:
        v = float(ln)
        if not v > 0:
            raise ExecutorError(f"timing file {path} contains non-positive value {v}")
        values.append(v)
    if len(values) != timed:
        raise ExecutorError(
            f"timing file {path} has {len(values)} entries, header declares {timed}"
        )
    return label, warmup, timed, values


def compile_candidate(candidate: Candidate, cfg: ExecBackendConfig) -> Tuple[Path, str, str]:
    """Compile (or reuse) the candidate binary. Returns (bin path, status, diagnostics)."""
    tc = cfg.toolchain
    build_dir = Path(cfg.work_dir) / f"build-{hash_source(candidate.source)[:12]}"
    build_dir.mkdir(parents=True, exist_ok=True)
    bin_path = build_dir / "kernel_bin"
    if bin_path.exists():
        return bin_path, STATUS_OK, "reused cached binary"
    src_path = build_dir / f"candidate{tc.source_suffix}"
    src_path.write_text(candidate.source)
    cmd = [
        part.format(
            harness=str(tc.harness_source),
            harness_dir=str(Path(tc.harness_source).parent),
            candidate=str(src_path),
            bin=str(bin_path) + ".tmp",
            arch=tc.arch,
        )
        for part in tc.compile_cmd
    ]
    try:
        proc = subprocess.run(
            cmd, capture_output=True, text=True, timeout=tc.compile_timeout_s
        )
    except subprocess.TimeoutExpired:
        return bin_path, STATUS_TIMEOUT, f"compile timed out after {tc.compile_timeout_s}s: {cmd}"
    except OSError as exc:
        return bin_path, STATUS_COMPILE_ERROR, f"cannot invoke compiler {cmd[0]!r}: {exc}"
    diagnostics = f"$ {' '.join(cmd)}\nexit {proc.returncode}\n{proc.stdout}{proc.stderr}"
    if proc.returncode != 0:
        return bin_path, STATUS_COMPILE_ERROR, diagnostics
    Path(str(bin_path) + ".tmp").rename(bin_path)
    return bin_path, STATUS_OK, diagnostics


def execute_suite_subprocess(
    candidate: Candidate,
    suite: TestSuite,
    task: KernelTask,
    cfg: ExecBackendConfig,
    protocol: TimingProtocol,
) -> RunOutcome:
    if cfg.work_dir is None:
        raise ExecutorError("subprocess executor needs a work_dir")
    bin_path, status, compile_diag = compile_candidate(candidate, cfg)
    if status != STATUS_OK:
        return RunOutcome(status=status, diagnostics=compile_diag)

    outputs: Dict[str, Dict[str, Tensor]] = {}
    timings: Dict[str, List[float]] = {}
    diagnostics = [compile_diag]
    for label in suite.shape_labels():
        cases = suite.cases_for(label)
        run_dir = bin_path.parent / f"run-{_sanitize(label)}"
        run_dir.mkdir(parents=True, exist_ok=True)
        io_paths: Dict[str, Dict[str, Path]] = {}
        expected_outputs: Dict[str, Dict[str, Path]] = {}
        for case in cases:
            paths: Dict[str, Path] = {}
            outs: Dict[str, Path] = {}
            safe = _sanitize(case.case_id)
            for p in task.signature:
                if p.role == "input-tensor":
                    tp = run_dir / f"{safe}-{p.name}.kft"
                    write_tensor(case.inputs[p.name], str(tp))
                    paths[p.name] = tp
                elif p.role == "output-tensor":
                    tp = run_dir / f"{safe}-{p.name}.out.kft"
                    tp.unlink(missing_ok=True)
                    paths[p.name] = tp
                    outs[p.name] = tp
            io_paths[case.case_id] = paths
            expected_outputs[case.case_id] = outs
        manifest_path = run_dir / "manifest.txt"
        timing_path = run_dir / "timing.txt"
        timing_path.unlink(missing_ok=True)
        write_manifest(manifest_path, task, cases, label, protocol, timing_path, io_paths)

        cmd = [str(bin_path), str(manifest_path)]
        try:
            with _DEVICE_LEASE:
                proc = subprocess.run(
                    cmd, capture_output=True, text=True, timeout=cfg.toolchain.run_timeout_s
                )
        except subprocess.TimeoutExpired:
            return RunOutcome(
                status=STATUS_TIMEOUT,
                diagnostics=f"run timed out after {cfg.toolchain.run_timeout_s}s for shape {label!r}",
            )
        run_diag = f"$ {' '.join(cmd)}\nexit {proc.returncode}\n{proc.stdout}{proc.stderr}"
        diagnostics.append(run_diag)
        if proc.returncode != 0:
            return RunOutcome(status=STATUS_RUNTIME_ERROR, diagnostics="\n".join(diagnostics))

        try:
            for case in cases:
                produced = {}
                for name, path in expected_outputs[case.case_id].items():
                    produced[name] = read_tensor(str(path))
                outputs[case.case_id] = produced
            _, _, _, values = parse_timing_file(timing_path)
        except Exception as exc:
            return RunOutcome(
                status=STATUS_RUNTIME_ERROR,
                diagnostics="\n".join(diagnostics + [f"malformed harness output: {exc}"]),
            )
        if len(values) != protocol.timed_runs:
            return RunOutcome(
                status=STATUS_RUNTIME_ERROR,
                diagnostics="\n".join(
                    diagnostics
                    + [f"expected {protocol.timed_runs} timing entries, got {len(values)}"]
                ),
            )
        timings[label] = values
    return RunOutcome(
        status=STATUS_OK, outputs=outputs, timings=timings, diagnostics="\n".join(diagnostics)
    )
