"""Backend selection for the threshold-scan kernel.

The compiled extension is preferred when importable; set
``PARTITION_TREE_BACKEND=python`` or ``compiled`` to force one. Both backends
implement the same function and return identical results.
"""

from __future__ import annotations

import os

from . import _scan_py

_REQUESTED = os.environ.get("PARTITION_TREE_BACKEND", "auto").lower()

try:
    from . import _scan_cy  # type: ignore[attr-defined]
except ImportError:
    _scan_cy = None

if _REQUESTED not in ("auto", "python", "compiled"):
    raise ValueError(
        f"PARTITION_TREE_BACKEND must be auto|python|compiled, got {_REQUESTED!r}"
    )
if _REQUESTED == "compiled" and _scan_cy is None:
    raise ImportError("compiled backend requested but the extension is not built")

if _REQUESTED == "python" or _scan_cy is None:
    _ACTIVE_NAME = "python"
    scan_threshold = _scan_py.scan_threshold
else:
    _ACTIVE_NAME = "compiled"
    scan_threshold = _scan_cy.scan_threshold


def active_backend() -> str:
    return _ACTIVE_NAME


def available_backends() -> dict:
    """Name -> scan function, for parity tests and benchmarks."""
    out = {"python": _scan_py.scan_threshold}
    if _scan_cy is not None:
        out["compiled"] = _scan_cy.scan_threshold
    return out
