"""Backend selection for the gate kernels.

The compiled Cython kernels are used when available; otherwise the numpy
fallback is selected. `QNTKLAB_BACKEND=numpy` forces the fallback,
`QNTKLAB_BACKEND=cython` requires the extension (ImportError if missing).
"""

import os

from . import _gates_np

_forced = os.environ.get("QNTKLAB_BACKEND", "").lower()

if _forced == "numpy":
    kernels = _gates_np
elif _forced == "cython":
    from . import _gates_cy as kernels  # noqa: F401
else:
    try:
        from . import _gates_cy as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _gates_np


def backend_name() -> str:
    return kernels.NAME
