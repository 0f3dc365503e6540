"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``KNOBCTL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("KNOBCTL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"
else:
    _compiled = None

best_split = _impl.best_split
fitness_mass = _impl.fitness_mass
tree_predict = _impl.tree_predict
feasible_argmin = _impl.feasible_argmin


def backends():
    """Available kernel modules keyed by name, compiled first when built."""
    out = {}
    if _compiled is not None:
        out["cython"] = _compiled
    out["python"] = _kernels_py
    return out
