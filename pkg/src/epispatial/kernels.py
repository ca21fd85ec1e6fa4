"""Kernel backend selection.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
pure-Python module ``_kernels_py`` is used. Set ``EPISPATIAL_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("EPISPATIAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

SEIR, RESERVOIR, COUPLED = _kernels_py.SEIR, _kernels_py.RESERVOIR, _kernels_py.COUPLED
OK, NEGATIVE, NONFINITE = _kernels_py.OK, _kernels_py.NEGATIVE, _kernels_py.NONFINITE

rk4_integrate = _impl.rk4_integrate
host_reaction = _impl.host_reaction
reservoir_reaction = _impl.reservoir_reaction
logistic_reaction = _impl.logistic_reaction
