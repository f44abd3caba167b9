"""Kernel backend chosen at import.

The compiled extension is used when it is importable; set
``RF2NN_PURE_PYTHON=1`` to force the pure-Python twin.
"""

import os

from . import _pykernels

if os.environ.get("RF2NN_PURE_PYTHON", "").strip() not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        kernels = _pykernels

BACKEND = kernels.NAME


def available():
    """Names of every importable backend, compiled first."""
    names = []
    try:
        from . import _kernels  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    names.append("python")
    return names


def get(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
