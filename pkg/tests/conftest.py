import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kernelforge.task import KernelTask, Param


@pytest.fixture
def silu_task():
    """Small f32 silu task for executor and metrics tests."""
    return KernelTask(
        name="silu_small",
        baseline_source="// silu baseline v0\n__global__ void k() {}\n",
        signature=(
            Param("x", "input-tensor", dtype="f32", shape=("rows", "hidden"), dist="value"),
            Param("g", "input-tensor", dtype="f32", shape=("rows", "hidden"), dist="value"),
            Param("out", "output-tensor", dtype="f32", shape=("rows", "hidden")),
        ),
        oracle_id="silu_and_mul",
        shape_families={"4x16": (4, 16), "8x8": (8, 8)},
    )


@pytest.fixture
def rmsnorm_task():
    return KernelTask(
        name="rmsnorm_small",
        baseline_source="// rmsnorm baseline v0\n",
        signature=(
            Param("x", "input-tensor", dtype="f32", shape=("rows", "hidden"), dist="value"),
            Param("r", "input-tensor", dtype="f32", shape=("rows", "hidden"), dist="value"),
            Param("w", "input-tensor", dtype="f32", shape=("hidden",), dist="weight"),
            Param("eps", "scalar", value=1e-6),
            Param("y", "output-tensor", dtype="f32", shape=("rows", "hidden")),
        ),
        oracle_id="fused_add_rmsnorm",
        shape_families={"4x16": (4, 16)},
    )


@pytest.fixture
def merge_task():
    return KernelTask(
        name="merge_small",
        baseline_source="// merge baseline v0\n",
        signature=(
            Param("Va", "input-tensor", dtype="f32", shape=("seq", "heads", "dim"), dist="value"),
            Param("Sa", "input-tensor", dtype="f32", shape=("seq", "heads"), dist="score"),
            Param("Vb", "input-tensor", dtype="f32", shape=("seq", "heads", "dim"), dist="value"),
            Param("Sb", "input-tensor", dtype="f32", shape=("seq", "heads"), dist="score"),
            Param("Vout", "output-tensor", dtype="f32", shape=("seq", "heads", "dim")),
            Param("Sout", "output-tensor", dtype="f32", shape=("seq", "heads")),
        ),
        oracle_id="merge_attn_states_lse",
        shape_families={"4x2x8": (4, 2, 8)},
    )
