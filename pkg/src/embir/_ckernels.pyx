# Compiled scoring kernels. Hot loops of BM25/Dirichlet-QL scoring:
# one pass over the concatenated postings of the query terms,
# accumulating into dense per-document arrays.
#
# Contract and floating-point expression shapes must stay in sync with
# _pykernels.py; compiled without fast-math so both backends keep IEEE
# semantics.

from libc.math cimport log

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "c"


def bm25_accumulate(cnp.int64_t[::1] ordinals,
                    cnp.float64_t[::1] tfs,
                    cnp.int64_t[::1] offsets,
                    cnp.float64_t[::1] idfs,
                    cnp.float64_t[::1] doc_lens,
                    double avg_dl, double k1, double b,
                    cnp.float64_t[::1] scores,
                    cnp.uint8_t[::1] matched):
    cdef Py_ssize_t t, j
    cdef cnp.int64_t d
    cdef double tf, denom
    cdef double k1p1 = k1 + 1.0
    cdef double one_minus_b = 1.0 - b
    with nogil:
        for t in range(idfs.shape[0]):
            for j in range(offsets[t], offsets[t + 1]):
                d = ordinals[j]
                tf = tfs[j]
                denom = tf + k1 * (one_minus_b + b * (doc_lens[d] / avg_dl))
                scores[d] += idfs[t] * tf * k1p1 / denom
                matched[d] = 1


def ql_accumulate(cnp.int64_t[::1] ordinals,
                  cnp.float64_t[::1] tfs,
                  cnp.int64_t[::1] offsets,
                  cnp.float64_t[::1] mu_pt,
                  cnp.float64_t[::1] scores,
                  cnp.uint8_t[::1] matched):
    cdef Py_ssize_t t, j
    cdef cnp.int64_t d
    cdef double bg
    with nogil:
        for t in range(mu_pt.shape[0]):
            bg = log(mu_pt[t])
            for j in range(offsets[t], offsets[t + 1]):
                d = ordinals[j]
                scores[d] += log(tfs[j] + mu_pt[t]) - bg
                matched[d] = 1
