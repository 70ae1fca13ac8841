"""Scoring kernels: compiled extension when built, numpy fallback otherwise.

`greedy_select(weights, emb, exclude)` picks, for each of the K weight rows
in order, the remaining item with the highest dot-product score (lowest id
on ties). Both backends are contract-identical; `BACKEND` names the one in
use and both stay importable for the benchmark comparison.
"""

import numpy as np

from . import _fallback

try:
    from . import _greedy as _compiled

    BACKEND = "compiled"
except ImportError:  # extension not built
    _compiled = None
    BACKEND = "fallback"


def _normalize(weights, emb, exclude):
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    emb = np.ascontiguousarray(emb, dtype=np.float64)
    if exclude is None:
        exclude = np.empty(0, dtype=np.int64)
    else:
        exclude = np.ascontiguousarray(exclude, dtype=np.int64)
    if weights.ndim != 2 or emb.ndim != 2:
        raise ValueError("weights and emb must be 2-d arrays")
    return weights, emb, exclude


def greedy_select(weights, emb, exclude=None):
    weights, emb, exclude = _normalize(weights, emb, exclude)
    if _compiled is not None:
        return _compiled.greedy_select(weights, emb, exclude)
    return _fallback.greedy_select(weights, emb, exclude)


def greedy_select_fallback(weights, emb, exclude=None):
    """Force the pure-numpy path (benchmarks and backend-equivalence tests)."""
    weights, emb, exclude = _normalize(weights, emb, exclude)
    return _fallback.greedy_select(weights, emb, exclude)
