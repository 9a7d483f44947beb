"""Select the kernel backend at import time.

The compiled ``_ckernels`` extension is used when it was built; otherwise,
or when ``LIFEGRAPH_PURE_PYTHON`` is set to a non-empty value other than
``0``, the numpy fallback in ``_pykernels`` is used.
"""
import os

from . import _pykernels

_FORCE_PURE = os.environ.get("LIFEGRAPH_PURE_PYTHON", "") not in ("", "0")

try:
    if _FORCE_PURE:
        raise ImportError("pure-python backend forced")
    from . import _ckernels as _active

    BACKEND = "cython"
except ImportError:
    _active = _pykernels
    BACKEND = "python"

efron_terms = _active.efron_terms
concordance_counts = _active.concordance_counts


def backends():
    """Mapping of every importable backend name to its module."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
