"""kernelforge: agent-driven GPU kernel optimization harness.

Wraps pluggable kernel executors (a deterministic simulated backend and a
subprocess backend driving an external GPU toolchain) and pluggable agent
backends (remote chat completion or scripted replay) around an iterative
test / profile / plan / rewrite loop, with CPU reference implementations
serving as correctness ground truth.
"""

from importlib import resources
from pathlib import Path

from ._accel import BACKEND as accel_backend
from .errors import KernelForgeError
from .metrics import DiscrepancyMetric, PerfReport, discrepancy, geo_mean, speedup
from .optlog import Candidate, OptimizationLog, RoundRecord, load_log, save_log
from .orchestrator import RunConfig, optimize, select_best, summarize
from .oracles import build_suite, generate_inputs
from .task import KernelTask, load_task, resolve_output_shapes
from .tensor import Tensor, read_tensor, write_tensor

__version__ = "0.1.0"


def fixtures_dir() -> Path:
    """Directory holding the shipped task manifests, kernels and transcripts."""
    return Path(str(resources.files("kernelforge").joinpath("fixtures")))


__all__ = [
    "Candidate",
    "DiscrepancyMetric",
    "KernelForgeError",
    "KernelTask",
    "OptimizationLog",
    "PerfReport",
    "RoundRecord",
    "RunConfig",
    "Tensor",
    "accel_backend",
    "build_suite",
    "discrepancy",
    "fixtures_dir",
    "generate_inputs",
    "geo_mean",
    "load_log",
    "load_task",
    "optimize",
    "read_tensor",
    "resolve_output_shapes",
    "save_log",
    "select_best",
    "speedup",
    "summarize",
    "write_tensor",
]
