"""Pick the compiled kernels when importable, else the numpy fallback.

Set ``BKAPPA_PURE=1`` to force the fallback (used by the benchmark and the
backend-agreement tests).
"""

from __future__ import annotations

import os

from bkappa import _pykernels

kernels = _pykernels
NAME = "python"

if os.environ.get("BKAPPA_PURE") != "1":
    try:
        from bkappa import _kernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _kernels
        NAME = "compiled"


def get(name: str | None = None):
    """Kernel module by name (``"compiled"``/``"python"``); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "compiled":
        from bkappa import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
