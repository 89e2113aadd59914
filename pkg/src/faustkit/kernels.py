"""Hot-loop kernels, compiled when available.

The Cython extension ``faustkit._kernels`` is used if it was built; otherwise
the numpy implementation in ``faustkit._kernels_py`` is loaded. Set
``FAUSTKIT_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("FAUSTKIT_PURE_PYTHON"):
    from . import _kernels_py as _impl
    COMPILED = False
else:
    try:
        from . import _kernels as _impl
        COMPILED = True
    except ImportError:  # extension not built
        from . import _kernels_py as _impl
        COMPILED = False

csr_matvec = _impl.csr_matvec
csr_rmatvec = _impl.csr_rmatvec
batch_omp = _impl.batch_omp

__all__ = ["COMPILED", "csr_matvec", "csr_rmatvec", "batch_omp"]
