"""CPU reference implementations that define ground truth for each kernel task.

Each oracle is a pure function over f32 arrays. Half-precision task inputs
are widened to f32 before evaluation and outputs are rounded back to f16
(round-to-nearest-even) when the task declares f16 outputs, matching kernels
that load half data but accumulate in f32.

Input generation is deterministic: the values of a parameter are a pure
function of (seed, parameter name), drawn per the parameter's distribution
tag. Value tensors are uniform on [-1, 1], score tensors standard normal,
weight tensors uniform on [0.5, 1.5].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from ._accel import fused_add_rmsnorm_f32, merge_lse_f32, silu_mul_f32
from .errors import ConfigError, SignatureError
from .metrics import DiscrepancyMetric
from .suite import TestCase, TestSuite
from .task import ROLE_INPUT, ROLE_OUTPUT, ROLE_SCALAR, KernelTask, Param, resolve_output_shapes
from .tensor import Tensor

ArrayMap = Dict[str, np.ndarray]
OracleFn = Callable[[Mapping[str, Union[np.ndarray, float]]], ArrayMap]


@dataclass(frozen=True)
class OracleSpec:
    oracle_id: str
    signature: Tuple[Param, ...]
    fn: OracleFn


_REGISTRY: Dict[str, OracleSpec] = {}


def register(spec: OracleSpec) -> None:
    if spec.oracle_id in _REGISTRY:
        raise ConfigError(f"oracle {spec.oracle_id!r} already registered")
    _REGISTRY[spec.oracle_id] = spec


def get(oracle_id: str) -> OracleSpec:
    try:
        return _REGISTRY[oracle_id]
    except KeyError:
        raise ConfigError(f"no oracle registered under {oracle_id!r}") from None


def registered_ids() -> List[str]:
    return sorted(_REGISTRY)


# --- reference implementations -------------------------------------------


def merge_attn_states_lse_ref(inputs) -> ArrayMap:
    """Merge two partial attention states by their log-sum-exp scores.

    v_out = (e^{sa} va + e^{sb} vb) / (e^{sa} + e^{sb}), stabilized by
    subtracting max(sa, sb) per (sequence, head) pair;
    s_out = max + log(w_a + w_b).
    """
    va, sa, vb, sb = inputs["Va"], inputs["Sa"], inputs["Vb"], inputs["Sb"]
    if va.shape != vb.shape or sa.shape != sb.shape or va.shape[:-1] != sa.shape:
        raise SignatureError(
            f"merge shapes inconsistent: Va{va.shape} Sa{sa.shape} Vb{vb.shape} Sb{sb.shape}"
        )
    seq, heads, dim = va.shape
    n = seq * heads
    vout, sout = merge_lse_f32(
        np.ascontiguousarray(va.reshape(n, dim)),
        np.ascontiguousarray(sa.reshape(n)),
        np.ascontiguousarray(vb.reshape(n, dim)),
        np.ascontiguousarray(sb.reshape(n)),
    )
    return {"Vout": vout.reshape(seq, heads, dim), "Sout": sout.reshape(seq, heads)}


def fused_add_rmsnorm_ref(inputs) -> ArrayMap:
    """y = (x + r) / sqrt(mean((x + r)^2) + eps) * w, accumulated in f32 per row."""
    x, r, w = inputs["x"], inputs["r"], inputs["w"]
    eps = float(inputs["eps"])
    if x.shape != r.shape or x.shape[-1] != w.shape[0]:
        raise SignatureError(f"rmsnorm shapes inconsistent: x{x.shape} r{r.shape} w{w.shape}")
    if eps < 0:
        raise SignatureError(f"eps must be non-negative, got {eps}")
    y = fused_add_rmsnorm_f32(
        np.ascontiguousarray(x), np.ascontiguousarray(r), np.ascontiguousarray(w), np.float32(eps)
    )
    return {"y": y}


def silu_and_mul_ref(inputs) -> ArrayMap:
    """out = silu(x) * g elementwise, silu(z) = z / (1 + e^{-z})."""
    x, g = inputs["x"], inputs["g"]
    if x.shape != g.shape:
        raise SignatureError(f"silu shapes inconsistent: x{x.shape} g{g.shape}")
    out = silu_mul_f32(
        np.ascontiguousarray(x.reshape(-1)), np.ascontiguousarray(g.reshape(-1))
    )
    return {"out": out.reshape(x.shape)}


register(
    OracleSpec(
        oracle_id="merge_attn_states_lse",
        signature=(
            Param("Va", ROLE_INPUT, shape=("seq", "heads", "dim"), dist="value"),
            Param("Sa", ROLE_INPUT, shape=("seq", "heads"), dist="score"),
            Param("Vb", ROLE_INPUT, shape=("seq", "heads", "dim"), dist="value"),
            Param("Sb", ROLE_INPUT, shape=("seq", "heads"), dist="score"),
            Param("Vout", ROLE_OUTPUT, shape=("seq", "heads", "dim")),
            Param("Sout", ROLE_OUTPUT, shape=("seq", "heads")),
        ),
        fn=merge_attn_states_lse_ref,
    )
)

register(
    OracleSpec(
        oracle_id="fused_add_rmsnorm",
        signature=(
            Param("x", ROLE_INPUT, shape=("rows", "hidden"), dist="value"),
            Param("r", ROLE_INPUT, shape=("rows", "hidden"), dist="value"),
            Param("w", ROLE_INPUT, shape=("hidden",), dist="weight"),
            Param("eps", ROLE_SCALAR, value=1e-6),
            Param("y", ROLE_OUTPUT, shape=("rows", "hidden")),
        ),
        fn=fused_add_rmsnorm_ref,
    )
)

register(
    OracleSpec(
        oracle_id="silu_and_mul",
        signature=(
            Param("x", ROLE_INPUT, shape=("rows", "hidden"), dist="value"),
            Param("g", ROLE_INPUT, shape=("rows", "hidden"), dist="value"),
            Param("out", ROLE_OUTPUT, shape=("rows", "hidden")),
        ),
        fn=silu_and_mul_ref,
    )
)


# --- task/oracle signature consistency ------------------------------------


def _canonical_pattern(signature: Sequence[Param]) -> List[Tuple[str, str, Tuple[str, ...]]]:
    """Rename symbolic dims by first occurrence so two signatures compare structurally."""
    renames: Dict[str, str] = {}
    out = []
    for p in signature:
        dims = []
        for sym in p.shape:
            if sym.lstrip("+-").isdigit():
                dims.append(sym)
            else:
                renames.setdefault(sym, f"${len(renames)}")
                dims.append(renames[sym])
        out.append((p.name, p.role, tuple(dims)))
    return out


def check_task_signature(task: KernelTask) -> OracleSpec:
    """Validate that the task's signature structurally matches its oracle's."""
    spec = get(task.oracle_id)
    want = _canonical_pattern(spec.signature)
    got = _canonical_pattern(task.signature)
    if want != got:
        raise SignatureError(
            f"task {task.name!r} signature does not match oracle {task.oracle_id!r}: "
            f"expected {want}, got {got}"
        )
    return spec


def evaluate(task: KernelTask, inputs: Mapping[str, Union[Tensor, float]]) -> Dict[str, Tensor]:
    """Run the task's oracle on named inputs; outputs carry the task's declared dtypes."""
    spec = check_task_signature(task)
    arrays: Dict[str, Union[np.ndarray, float]] = {}
    for p in task.signature:
        if p.role == ROLE_OUTPUT:
            continue
        if p.name not in inputs:
            raise SignatureError(f"missing input {p.name!r} for task {task.name!r}")
        value = inputs[p.name]
        if p.role == ROLE_SCALAR:
            arrays[p.name] = float(value if not isinstance(value, Tensor) else value.data[0])
        else:
            if not isinstance(value, Tensor):
                raise SignatureError(f"input {p.name!r} must be a tensor")
            arrays[p.name] = value.astype_f32()
    raw = spec.fn(arrays)
    out: Dict[str, Tensor] = {}
    for p in task.outputs():
        arr = raw[p.name]
        if p.dtype == "f16":
            arr = arr.astype(np.float16)
        else:
            arr = arr.astype(np.float32, copy=False)
        out[p.name] = Tensor.from_array(arr, dtype=p.dtype)
    return out


# --- deterministic input generation ---------------------------------------


@dataclass(frozen=True)
class InputGenSpec:
    """Distribution parameters per role tag; generation is pure in (spec, shape, seed, name)."""

    value_low: float = -1.0
    value_high: float = 1.0
    score_std: float = 1.0
    weight_low: float = 0.5
    weight_high: float = 1.5


DEFAULT_GEN = InputGenSpec()


def _param_stream(seed: int, name: str) -> np.random.Generator:
    digest = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), digest])))


def generate_inputs(
    task: KernelTask,
    shape_label: str,
    seed: int,
    spec: InputGenSpec = DEFAULT_GEN,
) -> Dict[str, Union[Tensor, float]]:
    """Fill every input parameter for one shape family, deterministically."""
    shapes = task.input_shapes(shape_label)
    out: Dict[str, Union[Tensor, float]] = {}
    for p in task.signature:
        if p.role == ROLE_SCALAR:
            out[p.name] = float(p.value)
            continue
        if p.role != ROLE_INPUT:
            continue
        gen = _param_stream(seed, p.name)
        size = int(np.prod(shapes[p.name]))
        if p.dist == "score":
            arr = gen.standard_normal(size, dtype=np.float32) * np.float32(spec.score_std)
        elif p.dist == "weight":
            span = np.float32(spec.weight_high - spec.weight_low)
            arr = gen.random(size, dtype=np.float32) * span + np.float32(spec.weight_low)
        else:
            span = np.float32(spec.value_high - spec.value_low)
            arr = gen.random(size, dtype=np.float32) * span + np.float32(spec.value_low)
        if p.dtype == "f16":
            arr = arr.astype(np.float16)
        out[p.name] = Tensor(dtype=p.dtype, shape=shapes[p.name], data=arr)
    return out


def build_suite(
    task: KernelTask,
    seeds: Sequence[int],
    epsilon: float,
    metric: DiscrepancyMetric = None,
    gen_spec: InputGenSpec = DEFAULT_GEN,
    shape_labels: Sequence[str] = None,
) -> TestSuite:
    """One case per (shape family x seed); expected outputs come from the oracle."""
    check_task_signature(task)
    if metric is None:
        metric = DiscrepancyMetric()
    labels = list(shape_labels) if shape_labels is not None else list(task.shape_families)
    if not labels:
        raise ConfigError(f"task {task.name!r} has no shape families")
    if not seeds:
        raise ConfigError("at least one seed is required")
    cases = []
    for label in labels:
        for seed in seeds:
            inputs = generate_inputs(task, label, seed, gen_spec)
            expected = evaluate(task, inputs)
            # Cross-check the signature's resolved output shapes against the oracle's.
            resolved = resolve_output_shapes(task, task.input_shapes(label))
            for name, tensor in expected.items():
                if tensor.shape != resolved[name]:
                    raise SignatureError(
                        f"oracle output {name!r} shape {tensor.shape} does not match "
                        f"signature resolution {resolved[name]}"
                    )
            cases.append(
                TestCase(
                    case_id=f"{label}-s{seed}",
                    inputs=inputs,
                    expected=expected,
                    shape_label=label,
                    seed=int(seed),
                )
            )
    return TestSuite(cases=cases, epsilon=epsilon, metric=metric)


def default_epsilon(task: KernelTask) -> float:
    """Looser tolerance when any output is half precision."""
    if any(p.dtype == "f16" for p in task.outputs()):
        return 2e-2
    return 1e-5
