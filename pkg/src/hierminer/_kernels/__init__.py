"""Inner-loop kernels: compiled extension when available, numpy fallback.

``BACKEND`` names the active implementation ("compiled" or "python");
``get_backend(name)`` returns a specific one for tests and benchmarks.
"""

from . import _pure

try:
    from . import _core as _active
except ImportError:  # extension not built; the fallback is equivalent
    _active = _pure

BACKEND = _active.BACKEND
PropagationError = _pure.PropagationError
sum_product_tree = _active.sum_product_tree
gather_bucket_sums = _active.gather_bucket_sums


def get_backend(name: str):
    """Return the kernel module for "python" or "compiled"."""
    if name == "python":
        return _pure
    if name == "compiled":
        if _active is _pure:
            raise ImportError("compiled kernel extension is not available")
        return _active
    raise ValueError(f"unknown backend: {name!r}")
