# Greedy slot-by-slot list selection: for each of K weight vectors, pick the
# highest-scoring remaining item by dot product. Ties break to the lowest id
# (strict > keeps the first maximum).
#
# The dense score matrix comes from one BLAS matmul; the compiled part is the
# sequential masked argmax, which numpy can only express with per-slot
# temporaries.

import numpy as np

cimport numpy as cnp

cnp.import_array()


def greedy_select(
    cnp.float64_t[:, ::1] weights,
    cnp.float64_t[:, ::1] emb,
    cnp.int64_t[::1] exclude,
):
    cdef Py_ssize_t n_slots = weights.shape[0]
    cdef Py_ssize_t n_items = emb.shape[0]
    cdef Py_ssize_t k, i, best
    cdef double score, best_score

    if emb.shape[1] != weights.shape[1]:
        raise ValueError("weight/embedding dimension mismatch")

    scores_arr = np.dot(np.asarray(emb), np.asarray(weights).T)
    cdef cnp.float64_t[:, ::1] scores = np.ascontiguousarray(scores_arr)

    taken = np.zeros(n_items, dtype=np.uint8)
    cdef cnp.uint8_t[::1] taken_v = taken
    for i in range(exclude.shape[0]):
        taken_v[exclude[i]] = 1

    out = np.empty(n_slots, dtype=np.int64)
    cdef cnp.int64_t[::1] out_v = out
    for k in range(n_slots):
        best = -1
        best_score = 0.0
        for i in range(n_items):
            if taken_v[i]:
                continue
            score = scores[i, k]
            if best < 0 or score > best_score:
                best = i
                best_score = score
        if best < 0:
            raise ValueError("not enough free items for the requested list")
        out_v[k] = best
        taken_v[best] = 1
    return out
