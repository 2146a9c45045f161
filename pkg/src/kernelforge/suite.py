"""Test suite types: labeled cases with oracle-computed expected outputs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Union

from .errors import ConfigError
from .metrics import DiscrepancyMetric
from .tensor import Tensor

ScalarOrTensor = Union[Tensor, float]


@dataclass(frozen=True)
class TestCase:
    case_id: str
    inputs: Dict[str, ScalarOrTensor]
    expected: Dict[str, Tensor]
    shape_label: str
    seed: int


@dataclass(frozen=True)
class TestSuite:
    cases: List[TestCase]
    epsilon: float
    metric: DiscrepancyMetric = field(default_factory=DiscrepancyMetric)

    def __post_init__(self):
        if not self.cases:
            raise ConfigError("test suite must contain at least one case")
        ids = [c.case_id for c in self.cases]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate case ids in test suite")
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")

    def shape_labels(self) -> List[str]:
        """Distinct shape labels in first-appearance order."""
        seen: List[str] = []
        for case in self.cases:
            if case.shape_label not in seen:
                seen.append(case.shape_label)
        return seen

    def cases_for(self, label: str) -> List[TestCase]:
        return [c for c in self.cases if c.shape_label == label]
