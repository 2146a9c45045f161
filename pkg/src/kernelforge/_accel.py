"""Backend selection for the hot numeric loops.

Prefers the compiled extension, falls back to numpy. Set
KERNELFORGE_NO_ACCEL=1 to force the fallback (used by the backend benchmark
and equivalence tests).
"""

import os

if os.environ.get("KERNELFORGE_NO_ACCEL"):
    from . import _ref as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _fastcore as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _ref as _impl

        BACKEND = "numpy"

merge_lse_f32 = _impl.merge_lse_f32
fused_add_rmsnorm_f32 = _impl.fused_add_rmsnorm_f32
silu_mul_f32 = _impl.silu_mul_f32
max_abs_diff_f32 = _impl.max_abs_diff_f32
