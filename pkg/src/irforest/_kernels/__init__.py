"""Kernel backend selection.

The compiled backend ("c", built from fast.pyx) is used when importable,
otherwise the pure-numpy reference ("python"). Both produce bit-identical
results; only speed differs. Set IRFOREST_BACKEND=c|python to force one,
or use the `use(...)` context manager (tests, benchmarks).
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from . import pure

_backends = {"python": pure}
try:
    from . import fast  # compiled extension; absent in source-only installs
    _backends["c"] = fast
except ImportError:
    fast = None

_forced = os.environ.get("IRFOREST_BACKEND")
if _forced:
    if _forced not in _backends:
        raise ImportError(
            f"IRFOREST_BACKEND={_forced!r} not available; "
            f"choices: {sorted(_backends)}"
        )
    _active = _forced
else:
    _active = "c" if "c" in _backends else "python"


def backend_name() -> str:
    return _active


def available_backends() -> list[str]:
    return sorted(_backends)


def get(name: str | None = None):
    return _backends[_active if name is None else name]


@contextmanager
def use(name: str):
    """Temporarily switch the active backend (not thread-safe)."""
    global _active
    if name not in _backends:
        raise ValueError(f"unknown backend {name!r}; choices: {sorted(_backends)}")
    previous = _active
    _active = name
    try:
        yield
    finally:
        _active = previous


def scan_node(*args, **kwargs):
    return _backends[_active].scan_node(*args, **kwargs)


def grow_tree(*args, **kwargs):
    return _backends[_active].grow_tree(*args, **kwargs)
