"""Kernel backend selection.

Two interchangeable backends implement the hot kernels: the compiled Cython
core (``_kernels_cy``, built at install time) and the numpy fallback
(``_kernels_np``). The compiled core is preferred when importable; set
``VLMLAB_KERNELS=py`` or ``VLMLAB_KERNELS=cy`` to force one.

Dense matrix products are not part of the backend set: both lanes go
through ``numpy.matmul`` (BLAS), which is already a compiled kernel.
``benchmarks/bench_kernels.py`` compares the two backends head to head.
"""

import os

from . import _kernels_np

try:
    from . import _kernels_cy
except ImportError:
    _kernels_cy = None

_FORCE = os.environ.get("VLMLAB_KERNELS", "").strip().lower()
if _FORCE in ("py", "python", "numpy"):
    _impl = _kernels_np
elif _FORCE in ("cy", "cython", "ext", "compiled"):
    if _kernels_cy is None:
        raise ImportError(
            "VLMLAB_KERNELS requested the compiled backend but "
            "vlmlab.diffcore._kernels_cy is not built; reinstall with a C compiler"
        )
    _impl = _kernels_cy
elif _FORCE:
    raise ValueError(f"unknown VLMLAB_KERNELS value: {_FORCE!r} (use 'py' or 'cy')")
else:
    _impl = _kernels_cy if _kernels_cy is not None else _kernels_np

BACKEND = "cython" if _impl is _kernels_cy else "numpy"

masked_softmax = _impl.masked_softmax
softmax_backward = _impl.softmax_backward
layer_norm_forward = _impl.layer_norm_forward
layer_norm_backward = _impl.layer_norm_backward
gelu_forward = _impl.gelu_forward
gelu_backward = _impl.gelu_backward
logsumexp_rows = _impl.logsumexp_rows
cross_entropy_backward = _impl.cross_entropy_backward
bilinear_resize = _impl.bilinear_resize


def available_backends():
    """Map of backend name to kernel module (compiled one may be None)."""
    return {"numpy": _kernels_np, "cython": _kernels_cy}
