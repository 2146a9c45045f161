"""Correctness and performance arithmetic.

A candidate kernel is deemed correct when the maximum discrepancy between
its outputs and the reference outputs, over every case in the suite, stays
within the suite tolerance. Speedups are runtime ratios and aggregate by
geometric mean, which treats speedups and slowdowns symmetrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np

from ._accel import max_abs_diff_f32
from .errors import AggregationError, ComparisonError, MeasurementError
from .tensor import Tensor

METRIC_KINDS = ("max-abs", "max-rel-abs")

FAILURE_NONE = "none"
FAILURE_MISMATCH = "mismatch"
FAILURE_COMPILE = "compile"
FAILURE_RUNTIME = "runtime"


@dataclass(frozen=True)
class DiscrepancyMetric:
    """Elementwise comparison rule: max absolute or max relative-absolute error."""

    kind: str = "max-abs"
    rel_floor: float = 1e-6

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ComparisonError(f"unknown metric kind {self.kind!r}")
        if not self.rel_floor > 0:
            raise ComparisonError("rel_floor must be positive")


def discrepancy(a: Tensor, b: Tensor, metric: DiscrepancyMetric) -> float:
    """Comparison in f32; symmetric, non-negative, +inf on any non-finite element."""
    if a.shape != b.shape:
        raise ComparisonError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.dtype != b.dtype:
        raise ComparisonError(f"dtype mismatch: {a.dtype} vs {b.dtype}")
    fa = a.data.astype(np.float32, copy=False)
    fb = b.data.astype(np.float32, copy=False)
    if metric.kind == "max-abs":
        return max_abs_diff_f32(np.ascontiguousarray(fa), np.ascontiguousarray(fb))
    if not (np.isfinite(fa).all() and np.isfinite(fb).all()):
        return float("inf")
    denom = np.maximum(np.maximum(np.abs(fa), np.abs(fb)), np.float32(metric.rel_floor))
    return float(np.max(np.abs(fa - fb) / denom))


@dataclass
class CorrectnessReport:
    passed: bool
    max_discrepancy: float
    per_case: Dict[str, float] = field(default_factory=dict)
    failure_kind: str = FAILURE_NONE

    @classmethod
    def failure(cls, kind: str) -> "CorrectnessReport":
        """Report for a candidate that never produced outputs (compile/runtime)."""
        return cls(passed=False, max_discrepancy=float("inf"), per_case={}, failure_kind=kind)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_discrepancy": self.max_discrepancy,
            "per_case": dict(self.per_case),
            "failure_kind": self.failure_kind,
        }


def correctness_pass(suite, actual: Mapping[str, Mapping[str, Tensor]]) -> CorrectnessReport:
    """Decide pass/fail for a whole suite.

    `actual` maps case_id to the named output tensors the candidate produced.
    A missing case or missing output counts as a runtime failure, never as a
    pass.
    """
    metric = suite.metric
    per_case: Dict[str, float] = {}
    worst = 0.0
    for case in suite.cases:
        outputs = actual.get(case.case_id)
        if outputs is None:
            return CorrectnessReport.failure(FAILURE_RUNTIME)
        case_worst = 0.0
        for name, expected in case.expected.items():
            got = outputs.get(name)
            if got is None:
                return CorrectnessReport.failure(FAILURE_RUNTIME)
            case_worst = max(case_worst, discrepancy(got, expected, metric))
        per_case[case.case_id] = case_worst
        worst = max(worst, case_worst)
    passed = worst <= suite.epsilon
    return CorrectnessReport(
        passed=passed,
        max_discrepancy=worst,
        per_case=per_case,
        failure_kind=FAILURE_NONE if passed else FAILURE_MISMATCH,
    )


def speedup(tau_base: float, tau_cand: float) -> float:
    """Runtime ratio; > 1 means the candidate is faster."""
    if not (tau_base > 0 and math.isfinite(tau_base)):
        raise MeasurementError(f"baseline time must be positive, got {tau_base}")
    if not (tau_cand > 0 and math.isfinite(tau_cand)):
        raise MeasurementError(f"candidate time must be positive, got {tau_cand}")
    return tau_base / tau_cand


def geo_mean(speedups: Sequence[float]) -> float:
    """Geometric mean, computed in log space for overflow safety."""
    if len(speedups) == 0:
        raise AggregationError("cannot aggregate an empty speedup list")
    total = 0.0
    for s in speedups:
        if not (s > 0 and math.isfinite(s)):
            raise AggregationError(f"speedups must be positive and finite, got {s}")
        total += math.log(s)
    return math.exp(total / len(speedups))


@dataclass
class ShapeTiming:
    baseline_us: float
    candidate_us: float
    samples: Dict[str, List[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "baseline_us": self.baseline_us,
            "candidate_us": self.candidate_us,
            "samples": {k: list(v) for k, v in self.samples.items()},
        }


@dataclass
class PerfReport:
    """Per-shape timing means, per-shape speedups, and their geometric mean."""

    per_shape: Dict[str, ShapeTiming]
    speedups: Dict[str, float]
    geo_mean: float

    def to_dict(self) -> dict:
        return {
            "per_shape": {k: v.to_dict() for k, v in self.per_shape.items()},
            "speedups": dict(self.speedups),
            "geo_mean": self.geo_mean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerfReport":
        per_shape = {
            k: ShapeTiming(
                baseline_us=v["baseline_us"],
                candidate_us=v["candidate_us"],
                samples={n: list(s) for n, s in v.get("samples", {}).items()},
            )
            for k, v in d["per_shape"].items()
        }
        return cls(per_shape=per_shape, speedups=dict(d["speedups"]), geo_mean=d["geo_mean"])


def make_perf_report(
    baseline_samples: Mapping[str, Sequence[float]],
    candidate_samples: Mapping[str, Sequence[float]],
) -> PerfReport:
    """Aggregate raw per-shape repetition times into a PerfReport.

    Means are arithmetic over the timed repetitions; the cross-shape summary
    is the geometric mean of the per-shape speedups.
    """
    if set(baseline_samples) != set(candidate_samples):
        raise MeasurementError(
            f"shape labels differ: {sorted(baseline_samples)} vs {sorted(candidate_samples)}"
        )
    if not baseline_samples:
        raise MeasurementError("no shapes were timed")
    per_shape: Dict[str, ShapeTiming] = {}
    ratios: Dict[str, float] = {}
    for label in baseline_samples:
        base = [float(t) for t in baseline_samples[label]]
        cand = [float(t) for t in candidate_samples[label]]
        if not base or not cand:
            raise MeasurementError(f"empty sample list for shape {label!r}")
        base_mean = sum(base) / len(base)
        cand_mean = sum(cand) / len(cand)
        per_shape[label] = ShapeTiming(
            baseline_us=base_mean,
            candidate_us=cand_mean,
            samples={"baseline": base, "candidate": cand},
        )
        ratios[label] = speedup(base_mean, cand_mean)
    ordered = {k: ratios[k] for k in baseline_samples}
    return PerfReport(per_shape=per_shape, speedups=ordered, geo_mean=geo_mean(list(ordered.values())))
