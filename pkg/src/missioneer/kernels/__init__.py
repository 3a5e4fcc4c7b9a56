"""Point-cloud kernels with a compiled fast path.

The Cython extension (_native) is optional; if it is missing or the
MISSIONEER_KERNELS environment variable says "python", the numpy/scipy
fallback is used. Both backends implement the same contracts:

    NeighborIndex(target, radius).nearest_within(queries) -> (idx, d2)
    cluster_labels(points, tolerance) -> labels
    neighborhood_moments(points, radius) -> (counts, means, covariances)
"""

import importlib
import os

from . import _fallback


def _load_native():
    try:
        return importlib.import_module("missioneer.kernels._native")
    except ImportError:
        return None


_choice = os.environ.get("MISSIONEER_KERNELS", "auto").lower()

_native = None
if _choice in ("auto", "native"):
    _native = _load_native()
    if _native is None and _choice == "native":
        raise ImportError(
            "MISSIONEER_KERNELS=native but missioneer.kernels._native is not built; "
            "run `pip install -e . --no-build-isolation`"
        )

_impl = _native if _native is not None else _fallback

BACKEND = _impl.BACKEND
NeighborIndex = _impl.NeighborIndex
cluster_labels = _impl.cluster_labels
neighborhood_moments = _impl.neighborhood_moments


def backend_name() -> str:
    return BACKEND


def backends():
    """All importable backends, for parity tests and benchmarks."""
    found = {"python": _fallback}
    native = _native if _native is not None else _load_native()
    if native is not None:
        found["native"] = native
    return found
