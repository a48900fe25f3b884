"""Kernel backend selection.

The compiled extension ``contflow._kernels`` is used when it imports;
otherwise the pure-Python twin in ``contflow._pykernels`` takes over.
Set ``CONTFLOW_PURE_PYTHON=1`` to force the fallback.

Array layout for :func:`evaluate_placements` (``n`` instances and ``m``
edges, both indexed in id order; ``O`` offers; ``S`` sites):

edge_src, edge_dst   int32[m]        instance indices
out_ptr, out_edges   int32[n+1], [m] CSR of outbound edges, ascending edge index
indeg                int32[n]
dur, task_cost       float64[n, O]   execution seconds / billed dollars
offer_site           int32[O]
offer_avail, offer_power, offer_idle  float64[O]
xt, xc               float64[m, S, S] transfer seconds / egress dollars
link_used            int8[S, S]      1 when the site pair goes through a serialized link
weights              float64[3]      time, cost, scaled energy
placements           int32[P, n]     offer index per instance
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if not os.environ.get("CONTFLOW_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def backend_module(name: str | None = None):
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def evaluate_placements(arrays: dict, placements, backend: str | None = None):
    """Evaluate every row of ``placements``; returns (makespan, cost, energy, objective)."""
    impl = backend_module(backend)
    pl = np.ascontiguousarray(placements, dtype=np.int32)
    if pl.ndim == 1:
        pl = pl.reshape(1, -1)
    count = pl.shape[0]
    outs = [np.zeros(count) for _ in range(4)]
    impl.evaluate_placements(
        arrays["edge_src"], arrays["edge_dst"], arrays["out_ptr"], arrays["out_edges"],
        arrays["indeg"], arrays["dur"], arrays["task_cost"], arrays["offer_site"],
        arrays["offer_avail"], arrays["offer_power"], arrays["offer_idle"],
        arrays["xt"], arrays["xc"], arrays["link_used"], arrays["weights"], pl, *outs)
    return tuple(outs)


def longest_path(order, ptr, succ, weight, backend: str | None = None) -> float:
    impl = backend_module(backend)
    return float(impl.longest_path(
        np.ascontiguousarray(order, dtype=np.int64), np.ascontiguousarray(ptr, dtype=np.int64),
        np.ascontiguousarray(succ, dtype=np.int64), np.ascontiguousarray(weight, dtype=np.float64)))
