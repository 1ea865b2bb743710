"""Kernel backend selection.

Prefers the compiled extension, falling back to the pure-Python kernels when
it is not built.  ``MMVNMF_BACKEND=c`` or ``MMVNMF_BACKEND=py`` forces a
choice (``c`` raises if the extension is missing).
"""

import os

_choice = os.environ.get("MMVNMF_BACKEND", "").strip().lower()
if _choice not in ("", "c", "py"):
    raise ImportError(f"MMVNMF_BACKEND must be 'c' or 'py', got {_choice!r}")

if _choice == "py":
    from . import _kernels_py as kernels

    BACKEND = "py"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "c"
    except ImportError:
        if _choice == "c":
            raise
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        BACKEND = "py"

__all__ = ["kernels", "BACKEND"]
