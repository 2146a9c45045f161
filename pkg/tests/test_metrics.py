import math

import numpy as np
import pytest

from kernelforge.errors import AggregationError, ComparisonError, MeasurementError
from kernelforge.metrics import (
    CorrectnessReport,
    DiscrepancyMetric,
    correctness_pass,
    discrepancy,
    geo_mean,
    make_perf_report,
    speedup,
)
from kernelforge.suite import TestCase as Case, TestSuite as Suite
from kernelforge.tensor import Tensor

from naive_refs import naive_max_abs

MAXABS = DiscrepancyMetric(kind="max-abs")


def t(values, dtype="f32"):
    arr = np.asarray(values, dtype=np.float16 if dtype == "f16" else np.float32)
    return Tensor.from_array(arr, dtype=dtype)


class TestDiscrepancy:
    def test_identical_tensors_zero(self):
        a = t([[1.0, 2.0], [3.0, 4.0]])
        assert discrepancy(a, a, MAXABS) == 0.0

    def test_single_element(self):
        assert discrepancy(t([1.0]), t([1.5]), MAXABS) == pytest.approx(0.5)

    def test_matches_bruteforce_loop(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = rng.standard_normal((3, 3)).astype(np.float32)
            b = rng.standard_normal((3, 3)).astype(np.float32)
            got = discrepancy(Tensor.from_array(a), Tensor.from_array(b), MAXABS)
            assert got == pytest.approx(naive_max_abs(a, b), rel=1e-6)

    def test_symmetric(self):
        rng = np.random.default_rng(12)
        a = Tensor.from_array(rng.standard_normal(10).astype(np.float32))
        b = Tensor.from_array(rng.standard_normal(10).astype(np.float32))
        for metric in (MAXABS, DiscrepancyMetric(kind="max-rel-abs")):
            assert discrepancy(a, b, metric) == discrepancy(b, a, metric)

    def test_signed_zero_counts_as_equal(self):
        assert discrepancy(t([0.0]), t([-0.0]), MAXABS) == 0.0

    def test_nan_fails_closed(self):
        a = t([float("nan")])
        assert discrepancy(a, a, MAXABS) == float("inf")

    def test_inf_fails_closed(self):
        assert discrepancy(t([float("inf")]), t([1.0]), MAXABS) == float("inf")

    def test_shape_mismatch(self):
        with pytest.raises(ComparisonError):
            discrepancy(t([1.0]), t([[1.0]]), MAXABS)

    def test_dtype_mismatch(self):
        with pytest.raises(ComparisonError):
            discrepancy(t([1.0]), t([1.0], dtype="f16"), MAXABS)

    def test_rel_metric_bounded_by_floor(self):
        metric = DiscrepancyMetric(kind="max-rel-abs", rel_floor=1e-3)
        got = discrepancy(t([0.0]), t([1e-6]), metric)
        assert got == pytest.approx(1e-6 / 1e-3)


def make_suite(expected_by_case, epsilon):
    cases = []
    for case_id, expected in expected_by_case.items():
        cases.append(
            Case(
                case_id=case_id,
                inputs={},
                expected={"out": expected},
                shape_label="s",
                seed=0,
            )
        )
    return Suite(cases=cases, epsilon=epsilon, metric=MAXABS)


class TestCorrectnessPass:
    def test_all_below_tolerance(self):
        suite = make_suite({"a": t([1.0]), "b": t([2.0])}, epsilon=1e-3)
        actual = {"a": {"out": t([1.0])}, "b": {"out": t([2.0001])}}
        report = correctness_pass(suite, actual)
        assert report.passed
        assert report.failure_kind == "none"
        assert report.per_case["a"] == 0.0
        assert report.max_discrepancy == pytest.approx(1e-4, rel=1e-2)

    def test_above_tolerance_fails(self):
        suite = make_suite({"a": t([1.0])}, epsilon=1e-3)
        report = correctness_pass(suite, {"a": {"out": t([1.002])}})
        assert not report.passed
        assert report.failure_kind == "mismatch"
        assert report.max_discrepancy == pytest.approx(2e-3, rel=1e-3)

    def test_exact_equality_at_zero_epsilon(self):
        suite = make_suite({"a": t([1.0, 2.0])}, epsilon=0.0)
        report = correctness_pass(suite, {"a": {"out": t([1.0, 2.0])}})
        assert report.passed

    def test_missing_case_is_runtime_failure(self):
        suite = make_suite({"a": t([1.0]), "b": t([1.0])}, epsilon=1.0)
        report = correctness_pass(suite, {"a": {"out": t([1.0])}})
        assert not report.passed
        assert report.failure_kind == "runtime"

    def test_missing_output_is_runtime_failure(self):
        suite = make_suite({"a": t([1.0])}, epsilon=1.0)
        report = correctness_pass(suite, {"a": {}})
        assert report.failure_kind == "runtime"

    def test_monotone_in_epsilon(self):
        actual = {"a": {"out": t([1.0005])}}
        for eps, stricter in [(1e-3, 1e-5), (0.1, 1e-3)]:
            loose = correctness_pass(make_suite({"a": t([1.0])}, eps), actual)
            tight = correctness_pass(make_suite({"a": t([1.0])}, stricter), actual)
            if tight.passed:
                assert loose.passed

    def test_failure_constructor_invariant(self):
        report = CorrectnessReport.failure("compile")
        assert not report.passed
        assert report.max_discrepancy == float("inf")


class TestSpeedup:
    def test_published_rows(self):
        assert speedup(31.4, 24.9) == pytest.approx(1.26, abs=0.005)
        assert speedup(32.9, 22.6) == pytest.approx(1.46, abs=0.005)
        assert speedup(41.3, 33.1) == pytest.approx(1.25, abs=0.005)
        assert speedup(20.1, 13.8) == pytest.approx(1.46, abs=0.005)

    def test_identity(self):
        assert speedup(10.0, 10.0) == 1.0

    def test_nonpositive_rejected(self):
        with pytest.raises(MeasurementError):
            speedup(0.0, 1.0)
        with pytest.raises(MeasurementError):
            speedup(1.0, -2.0)

    def test_reciprocal_product(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a, b = rng.uniform(0.1, 100, size=2)
            assert speedup(a, b) * speedup(b, a) == pytest.approx(1.0, rel=1e-12)


class TestGeoMean:
    def test_reciprocal_symmetry(self):
        assert geo_mean([2.0, 0.5]) == pytest.approx(1.0, rel=1e-12)

    def test_published_average(self):
        assert geo_mean([1.26, 1.25, 1.46]) == pytest.approx(1.32, abs=0.01)

    def test_log_space_identity(self):
        rng = np.random.default_rng(6)
        ratios = rng.uniform(0.01, 100.0, size=50).tolist()
        want = math.exp(sum(math.log(r) for r in ratios) / len(ratios))
        assert geo_mean(ratios) == pytest.approx(want, rel=1e-12)

    def test_single_element(self):
        assert geo_mean([1.7]) == pytest.approx(1.7, rel=1e-12)

    def test_copy_invariance(self):
        base = [1.1, 2.2, 0.7]
        assert geo_mean(base * 3) == pytest.approx(geo_mean(base), rel=1e-12)

    def test_reciprocal_list_product_is_one(self):
        rng = np.random.default_rng(7)
        ratios = rng.uniform(0.1, 10.0, size=20).tolist()
        inverse = [1.0 / r for r in ratios]
        assert geo_mean(ratios) * geo_mean(inverse) == pytest.approx(1.0, rel=1e-12)

    def test_overflow_safety(self):
        assert geo_mean([1e300, 1e300, 1e300]) == pytest.approx(1e300, rel=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(AggregationError):
            geo_mean([])

    def test_nonpositive_rejected(self):
        with pytest.raises(AggregationError):
            geo_mean([1.0, 0.0])


class TestPerfReport:
    def test_roundtrip_and_invariants(self):
        report = make_perf_report(
            {"a": [31.4] * 3, "b": [32.9] * 3},
            {"a": [24.9] * 3, "b": [22.6] * 3},
        )
        assert report.speedups["a"] == pytest.approx(31.4 / 24.9)
        assert report.speedups["b"] == pytest.approx(32.9 / 22.6)
        want = math.sqrt((31.4 / 24.9) * (32.9 / 22.6))
        assert report.geo_mean == pytest.approx(want, rel=1e-12)
        back = type(report).from_dict(report.to_dict())
        assert back.to_dict() == report.to_dict()

    def test_label_mismatch_rejected(self):
        with pytest.raises(MeasurementError):
            make_perf_report({"a": [1.0]}, {"b": [1.0]})
