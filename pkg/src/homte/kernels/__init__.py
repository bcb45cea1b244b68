"""Element-loop kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imported successfully; set
``HOMTE_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
the equivalence tests).  Both implementations return bit-identical arrays.
"""

import os

from . import pykernels

if os.environ.get("HOMTE_PURE_PYTHON"):
    _impl = pykernels
    COMPILED = False
else:
    try:
        from . import _speedups as _impl

        COMPILED = True
    except ImportError:
        _impl = pykernels
        COMPILED = False

tri_geometry = _impl.tri_geometry
stiffness_data = _impl.stiffness_data
stiffness_data_tensor = _impl.stiffness_data_tensor
mass_data = _impl.mass_data
gradient_accumulate = _impl.gradient_accumulate
locate_uniform = _impl.locate_uniform

__all__ = [
    "COMPILED",
    "tri_geometry",
    "stiffness_data",
    "stiffness_data_tensor",
    "mass_data",
    "gradient_accumulate",
    "locate_uniform",
]
