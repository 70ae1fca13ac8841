"""Pure-numpy greedy selection, used when the compiled kernel is absent."""

import numpy as np


def greedy_select(weights, emb, exclude):
    n_slots = weights.shape[0]
    n_items = emb.shape[0]
    if emb.shape[1] != weights.shape[1]:
        raise ValueError("weight/embedding dimension mismatch")
    free = np.ones(n_items, dtype=bool)
    free[exclude] = False
    out = np.empty(n_slots, dtype=np.int64)
    scores = emb @ weights.T  # (n_items, n_slots)
    for k in range(n_slots):
        masked = np.where(free, scores[:, k], -np.inf)
        best = int(np.argmax(masked))
        if not free[best]:
            raise ValueError("not enough free items for the requested list")
        out[k] = best
        free[best] = False
    return out
