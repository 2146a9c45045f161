"""Dense dtype-tagged tensors and their binary on-disk format.

The wire format is deliberately trivial so that non-Python tooling (the GPU
host harness in particular) can parse it with a few dozen lines of C++:

    magic   4 bytes  b"KFT1"
    dtype   u8       0 = f32, 1 = f16
    ndim    u32 LE
    extents u64 LE, one per dimension
    data    raw row-major little-endian element payload

Round-trips are bit-exact, including f16 subnormals and non-finite values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Union

import numpy as np

from .errors import TensorFormatError

MAGIC = b"KFT1"

_DTYPE_CODES = {"f32": 0, "f16": 1}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}
_NUMPY_DTYPES = {"f32": np.dtype("<f4"), "f16": np.dtype("<f2")}


@dataclass(frozen=True)
class Tensor:
    """Immutable dense array: dtype tag, shape, flat row-major data."""

    dtype: str
    shape: tuple
    data: np.ndarray

    def __post_init__(self):
        if self.dtype not in _DTYPE_CODES:
            raise TensorFormatError(f"unsupported dtype {self.dtype!r}")
        if not isinstance(self.shape, tuple):
            object.__setattr__(self, "shape", tuple(self.shape))
        if len(self.shape) == 0:
            raise ValueError("shape must be non-empty")
        if any(int(e) < 1 for e in self.shape):
            raise ValueError(f"extents must be >= 1, got {self.shape}")
        want = _NUMPY_DTYPES[self.dtype]
        data = np.ascontiguousarray(self.data, dtype=want).reshape(-1)
        count = 1
        for e in self.shape:
            count *= int(e)
        if data.size != count:
            raise ValueError(
                f"data has {data.size} elements, shape {self.shape} needs {count}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, arr: np.ndarray, dtype: str | None = None) -> "Tensor":
        """Wrap a numpy array; dtype defaults to the array's own f32/f16 type."""
        arr = np.asarray(arr)
        if dtype is None:
            if arr.dtype == np.float16:
                dtype = "f16"
            else:
                dtype = "f32"
        return cls(dtype=dtype, shape=tuple(arr.shape), data=arr.reshape(-1))

    def to_array(self) -> np.ndarray:
        """Read-only shaped view of the payload."""
        return self.data.reshape(self.shape)

    def astype_f32(self) -> np.ndarray:
        """Shaped f32 copy (oracle and metric arithmetic happens in f32)."""
        return self.to_array().astype(np.float32)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.dtype == other.dtype
            and self.shape == other.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    def __hash__(self):
        return hash((self.dtype, self.shape, self.data.tobytes()))


def numpy_dtype(dtype: str) -> np.dtype:
    try:
        return _NUMPY_DTYPES[dtype]
    except KeyError:
        raise TensorFormatError(f"unsupported dtype {dtype!r}") from None


def write_tensor(tensor: Tensor, destination: Union[str, BinaryIO]) -> None:
    """Serialize to a path or binary stream in the KFT1 format."""
    if isinstance(destination, (str, bytes)) or hasattr(destination, "__fspath__"):
        with open(destination, "wb") as fh:
            _write(tensor, fh)
    else:
        _write(tensor, destination)


def _write(tensor: Tensor, fh: BinaryIO) -> None:
    fh.write(MAGIC)
    fh.write(struct.pack("<B", _DTYPE_CODES[tensor.dtype]))
    fh.write(struct.pack("<I", len(tensor.shape)))
    for extent in tensor.shape:
        fh.write(struct.pack("<Q", int(extent)))
    payload = np.ascontiguousarray(tensor.data, dtype=_NUMPY_DTYPES[tensor.dtype])
    fh.write(payload.tobytes())


def read_tensor(source: Union[str, BinaryIO]) -> Tensor:
    """Parse one tensor from a path or binary stream."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            return _read(fh)
    return _read(source)


def _read(fh: BinaryIO) -> Tensor:
    magic = fh.read(4)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    head = fh.read(5)
    if len(head) != 5:
        raise TensorFormatError("truncated header")
    code, ndim = struct.unpack("<BI", head)
    if code not in _CODE_DTYPES:
        raise TensorFormatError(f"unknown dtype code {code}")
    if ndim == 0:
        raise TensorFormatError("zero-dimensional tensor")
    raw = fh.read(8 * ndim)
    if len(raw) != 8 * ndim:
        raise TensorFormatError("truncated extent list")
    shape = struct.unpack(f"<{ndim}Q", raw)
    if any(e < 1 for e in shape):
        raise TensorFormatError(f"non-positive extent in {shape}")
    dtype = _CODE_DTYPES[code]
    np_dtype = _NUMPY_DTYPES[dtype]
    count = 1
    for e in shape:
        count *= e
    payload = fh.read(count * np_dtype.itemsize)
    if len(payload) != count * np_dtype.itemsize:
        raise TensorFormatError(
            f"truncated payload: expected {count * np_dtype.itemsize} bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype=np_dtype)
    return Tensor(dtype=dtype, shape=tuple(int(e) for e in shape), data=data)
