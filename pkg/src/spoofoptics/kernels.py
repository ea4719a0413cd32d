"""Backend selection for the hot loops.

Only the SH basis evaluation is compiled. The normal-equation accumulation
(``gram``) always uses numpy, whose BLAS product beats a scalar loop. The
compiled extension is used when it was built and importable; otherwise
the numpy implementation in ``_kernels_py`` is used. Setting the environment
variable ``SPOOFOPTICS_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SPOOFOPTICS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

real_sh_basis = _impl.real_sh_basis
gram = _kernels_py.gram

__all__ = ["BACKEND", "real_sh_basis", "gram"]
