"""Hot numerical kernels with a compiled core and a numpy fallback.

The backend is chosen once at import: the Cython extension when it was
built, otherwise the pure-Python/numpy reference.  Setting the environment
variable ``SEQREADOUT_KERNELS=python`` forces the fallback;
``SEQREADOUT_KERNELS=cython`` makes a missing extension an ImportError.

Both backends are always importable as :data:`python_backend` and (when
built) :data:`cython_backend` so they can be benchmarked side by side.
"""
import logging
import os

from . import _pykernels as python_backend

logger = logging.getLogger(__name__)

try:
    from . import _ckernels as cython_backend
except ImportError:  # extension not built
    cython_backend = None

_choice = os.environ.get("SEQREADOUT_KERNELS", "auto").lower()
if _choice == "python":
    backend = python_backend
elif _choice == "cython":
    if cython_backend is None:
        raise ImportError("SEQREADOUT_KERNELS=cython but the extension is not built")
    backend = cython_backend
else:
    backend = cython_backend if cython_backend is not None else python_backend

BACKEND_NAME = "cython" if backend is cython_backend else "python"
logger.debug("kernel backend: %s", BACKEND_NAME)

beam_splitter_dp45 = backend.beam_splitter_dp45
wigner_iterative = backend.wigner_iterative
husimi_amplitudes = backend.husimi_amplitudes
hist2d_uniform = backend.hist2d_uniform

__all__ = [
    "BACKEND_NAME",
    "beam_splitter_dp45",
    "cython_backend",
    "hist2d_uniform",
    "husimi_amplitudes",
    "python_backend",
    "wigner_iterative",
]
