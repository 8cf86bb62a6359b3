"""Hot raster kernels with switchable backends.

The default backend is numba-jitted; set ``HISTOKIT_BACKEND=numpy`` to force
the pure numpy/python fallback (or ``numba`` to require the jitted path).
Both backends produce bit-identical results; ``benchmarks/bench_kernels.py``
compares their throughput.
"""

import os

from . import numpy_impl

_VALID = ("auto", "numba", "numpy")

KERNEL_NAMES = (
    "label_components",
    "plateau_components",
    "squared_edt",
    "watershed_flood",
    "dilate_bool",
    "boundary_mask",
    "assign_nearest",
)


def _resolve(name):
    if name not in _VALID:
        raise ValueError(f"HISTOKIT_BACKEND must be one of {_VALID}, got {name!r}")
    if name == "numpy":
        return numpy_impl, "numpy"
    try:
        from . import numba_impl
    except ImportError:
        if name == "numba":
            raise
        return numpy_impl, "numpy"
    return numba_impl, "numba"


_impl, BACKEND = _resolve(os.environ.get("HISTOKIT_BACKEND", "auto"))


def set_backend(name):
    """Switch kernel backend at runtime (mainly for tests and benchmarks)."""
    global _impl, BACKEND
    _impl, BACKEND = _resolve(name)


def label_components(mask, connectivity=8):
    return _impl.label_components(mask, connectivity)


def plateau_components(values, mask):
    return _impl.plateau_components(values, mask)


def squared_edt(mask):
    return _impl.squared_edt(mask)


def watershed_flood(priority, markers, mask):
    return _impl.watershed_flood(priority, markers, mask)


def dilate_bool(mask, kernel_size):
    return _impl.dilate_bool(mask, kernel_size)


def boundary_mask(labels, thickness):
    return _impl.boundary_mask(labels, thickness)


def assign_nearest(query_rows, query_cols, site_rows, site_cols, site_ids, height, width):
    return _impl.assign_nearest(
        query_rows, query_cols, site_rows, site_cols, site_ids, height, width
    )
