"""Kernel backend selection.

The compiled Cython module is used when importable; set ``DGAT_PURE_PYTHON=1``
to force the NumPy fallback. :func:`use_backend` switches at runtime (tests
and the benchmark compare both).
"""

from __future__ import annotations

import contextlib
import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS: dict[str, ModuleType] = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

if os.environ.get("DGAT_PURE_PYTHON", "") not in ("", "0") or _compiled is None:
    _active = _kernels_py
else:
    _active = _compiled


def available() -> list[str]:
    return sorted(_BACKENDS)


def backend_name() -> str:
    return "cython" if _active is _compiled else "python"


def get(name: str | None = None) -> ModuleType:
    if name is None:
        return _active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available (have {available()})") from None


@contextlib.contextmanager
def use_backend(name: str):
    global _active
    previous, _active = _active, get(name)
    try:
        yield
    finally:
        _active = previous


def attention_forward(*args, **kwargs):
    return _active.attention_forward(*args, **kwargs)


def attention_backward(*args, **kwargs):
    return _active.attention_backward(*args, **kwargs)


def scatter_add_rows(src, idx, n_rows):
    return _active.scatter_add_rows(src, idx, n_rows)
