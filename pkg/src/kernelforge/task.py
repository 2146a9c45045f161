"""Kernel task definitions: baseline source, signature, oracle binding, shape families.

A task manifest is a TOML file naming the baseline source file, the ordered
parameter list, the oracle id, and the concrete shape families the suite and
the profiler iterate over. Symbolic dimensions in parameter shapes are bound
by each shape family in declaration order.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, SignatureError

ROLE_INPUT = "input-tensor"
ROLE_OUTPUT = "output-tensor"
ROLE_SCALAR = "scalar"

_ROLE_ALIASES = {
    "input": ROLE_INPUT,
    "input-tensor": ROLE_INPUT,
    "output": ROLE_OUTPUT,
    "output-tensor": ROLE_OUTPUT,
    "scalar": ROLE_SCALAR,
}

DIST_KINDS = ("value", "score", "weight")


@dataclass(frozen=True)
class Param:
    """One signature entry. Tensors carry a symbolic shape; scalars a fixed value."""

    name: str
    role: str
    dtype: str = "f32"
    shape: Tuple[str, ...] = ()
    dist: str = "value"
    value: Optional[float] = None

    def __post_init__(self):
        if self.role not in (ROLE_INPUT, ROLE_OUTPUT, ROLE_SCALAR):
            raise SignatureError(f"unknown parameter role {self.role!r}")
        if self.role == ROLE_SCALAR:
            if self.value is None:
                raise SignatureError(f"scalar parameter {self.name!r} needs a value")
        else:
            if not self.shape:
                raise SignatureError(f"tensor parameter {self.name!r} needs a shape")
            if self.role == ROLE_INPUT and self.dist not in DIST_KINDS:
                raise SignatureError(f"unknown distribution {self.dist!r} for {self.name!r}")


@dataclass(frozen=True)
class KernelTask:
    name: str
    baseline_source: str
    signature: Tuple[Param, ...]
    oracle_id: str
    shape_families: Dict[str, Tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        names = [p.name for p in self.signature]
        if len(set(names)) != len(names):
            raise SignatureError(f"duplicate parameter names in {self.name!r}")
        dims = self.dim_symbols()
        for label, concrete in self.shape_families.items():
            if len(concrete) != len(dims):
                raise SignatureError(
                    f"shape family {label!r} has {len(concrete)} dims, task needs {len(dims)} ({dims})"
                )
            if any(int(e) < 1 for e in concrete):
                raise SignatureError(f"shape family {label!r} has non-positive extents")
        # Outputs must be resolvable from input symbols alone.
        bound = set(dims)
        for p in self.outputs():
            for sym in p.shape:
                if not _is_literal(sym) and sym not in bound:
                    raise SignatureError(
                        f"output {p.name!r} uses dimension {sym!r} not bound by any input"
                    )

    def inputs(self) -> List[Param]:
        return [p for p in self.signature if p.role == ROLE_INPUT]

    def outputs(self) -> List[Param]:
        return [p for p in self.signature if p.role == ROLE_OUTPUT]

    def scalars(self) -> List[Param]:
        return [p for p in self.signature if p.role == ROLE_SCALAR]

    def dim_symbols(self) -> Tuple[str, ...]:
        """Free symbolic dimensions in first-appearance order over the inputs."""
        seen: List[str] = []
        for p in self.inputs():
            for sym in p.shape:
                if not _is_literal(sym) and sym not in seen:
                    seen.append(sym)
        return tuple(seen)

    def family_bindings(self, label: str) -> Dict[str, int]:
        try:
            concrete = self.shape_families[label]
        except KeyError:
            raise ConfigError(f"unknown shape label {label!r} for task {self.name!r}") from None
        return dict(zip(self.dim_symbols(), (int(e) for e in concrete)))

    def input_shapes(self, label: str) -> Dict[str, Tuple[int, ...]]:
        binding = self.family_bindings(label)
        return {p.name: _substitute(p.shape, binding, p.name) for p in self.inputs()}


def _is_literal(sym: str) -> bool:
    return sym.lstrip("+-").isdigit()


def _substitute(shape: Tuple[str, ...], binding: Mapping[str, int], pname: str) -> Tuple[int, ...]:
    out = []
    for sym in shape:
        if _is_literal(sym):
            out.append(int(sym))
        elif sym in binding:
            out.append(int(binding[sym]))
        else:
            raise SignatureError(f"unresolvable dimension {sym!r} in parameter {pname!r}")
    return tuple(out)


def bind_symbols(task: KernelTask, input_shapes: Mapping[str, Tuple[int, ...]]) -> Dict[str, int]:
    """Bind each symbolic dimension from the concrete input shapes."""
    binding: Dict[str, int] = {}
    for p in task.inputs():
        if p.name not in input_shapes:
            raise SignatureError(f"missing shape for input {p.name!r}")
        concrete = tuple(int(e) for e in input_shapes[p.name])
        if len(concrete) != len(p.shape):
            raise SignatureError(
                f"input {p.name!r} expects rank {len(p.shape)}, got shape {concrete}"
            )
        for sym, extent in zip(p.shape, concrete):
            if _is_literal(sym):
                if int(sym) != extent:
                    raise SignatureError(
                        f"input {p.name!r} dimension fixed at {sym}, got {extent}"
                    )
            elif sym in binding and binding[sym] != extent:
                raise SignatureError(
                    f"dimension {sym!r} bound to {binding[sym]} and {extent}"
                )
            else:
                binding[sym] = extent
    return binding


def resolve_output_shapes(
    task: KernelTask, input_shapes: Mapping[str, Tuple[int, ...]]
) -> Dict[str, Tuple[int, ...]]:
    """Bind symbolic dims from concrete input shapes, then resolve every output."""
    binding = bind_symbols(task, input_shapes)
    return {p.name: _substitute(p.shape, binding, p.name) for p in task.outputs()}


def default_shape_label(dims) -> str:
    return "x".join(str(int(d)) for d in dims)


def load_task(path) -> KernelTask:
    """Load a task manifest (TOML) and its baseline source file."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read task manifest {path}: {exc}") from exc
    for key in ("name", "oracle", "source"):
        if key not in raw:
            raise ConfigError(f"task manifest {path} is missing {key!r}")
    source_path = path.parent / raw["source"]
    try:
        baseline_source = source_path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read baseline source {source_path}: {exc}") from exc
    params = []
    for entry in raw.get("param", []):
        role = _ROLE_ALIASES.get(entry.get("role", ""), entry.get("role", ""))
        params.append(
            Param(
                name=entry["name"],
                role=role,
                dtype=entry.get("dtype", "f32"),
                shape=tuple(str(s) for s in entry.get("shape", ())),
                dist=entry.get("dist", "value"),
                value=entry.get("value"),
            )
        )
    families: Dict[str, Tuple[int, ...]] = {}
    for entry in raw.get("shapes", []):
        dims = tuple(int(d) for d in entry["dims"])
        label = str(entry.get("label", default_shape_label(dims)))
        if label in families:
            raise ConfigError(f"duplicate shape label {label!r} in {path}")
        families[label] = dims
    try:
        return KernelTask(
            name=str(raw["name"]),
            baseline_source=baseline_source,
            signature=tuple(params),
            oracle_id=str(raw["oracle"]),
            shape_families=families,
        )
    except SignatureError as exc:
        raise ConfigError(f"invalid task manifest {path}: {exc}") from exc
