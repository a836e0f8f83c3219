"""Hot-kernel backend selection.

The compiled extension is preferred when present; ``MIQES_BACKEND`` forces
the choice (``auto`` | ``cython`` | ``python``). Both backends implement the
same functions with the same semantics, so everything above this package is
backend-agnostic.
"""

from __future__ import annotations

import os

from . import _pyref

_CHOICES = ("auto", "cython", "python")


def _load(requested: str):
    if requested not in _CHOICES:
        raise ValueError(f"MIQES_BACKEND must be one of {_CHOICES}, got {requested!r}")
    if requested in ("auto", "cython"):
        try:
            from . import _core
            return _core, "cython"
        except ImportError:
            if requested == "cython":
                raise
    return _pyref, "python"


_impl, BACKEND = _load(os.environ.get("MIQES_BACKEND", "auto"))

quadform_batch = _impl.quadform_batch
penalized_batch = _impl.penalized_batch
double_geometric_from_p = _impl.double_geometric_from_p
mies_mutate_batch = _impl.mies_mutate_batch


def available_backends() -> dict:
    """Map backend name -> kernel module, for benchmarks and cross-checks."""
    backends = {"python": _pyref}
    try:
        from . import _core
        backends["cython"] = _core
    except ImportError:
        pass
    return backends
