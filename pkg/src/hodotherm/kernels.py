"""Backend selection for the hot kernels.

The compiled extension is used when importable; set the environment variable
``HODOTHERM_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

import os

if os.environ.get("HODOTHERM_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

MAX_PHASES = _impl.MAX_PHASES
BRILLOUIN_Y_SMALL = _impl.BRILLOUIN_Y_SMALL

esp = _impl.esp
esp_excluding = _impl.esp_excluding
tsallis_entropy = _impl.tsallis_entropy
tsallis_gradient = _impl.tsallis_gradient
tsallis_hessian = _impl.tsallis_hessian
det = _impl.det
cofactor = _impl.cofactor
wnl_matrix = _impl.wnl_matrix
wnl_cofactor_columns = _impl.wnl_cofactor_columns
wnl_cofactor_ratios = _impl.wnl_cofactor_ratios
langevin = _impl.langevin
brillouin = _impl.brillouin
brillouin_array = _impl.brillouin_array

__all__ = [
    "BACKEND", "MAX_PHASES", "BRILLOUIN_Y_SMALL", "esp", "esp_excluding",
    "tsallis_entropy", "tsallis_gradient", "tsallis_hessian", "det", "cofactor",
    "wnl_matrix", "wnl_cofactor_columns", "wnl_cofactor_ratios", "langevin", "brillouin", "brillouin_array",
]
