"""Backend selection: compiled extension if available, NumPy otherwise.

Set STOKESBEM_PURE_PYTHON=1 to force the fallback (used by the benchmark
and to debug the compiled path).
"""
import os

if os.environ.get("STOKESBEM_PURE_PYTHON"):
    from . import _slow as backend
else:
    try:
        from . import _accel as backend
    except ImportError:
        from . import _slow as backend


def backend_name() -> str:
    return backend.name
