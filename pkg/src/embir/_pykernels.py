"""Fallback scoring kernels (numpy).

Same contract as the compiled kernels in ``_ckernels``: accumulate
per-term posting contributions into a dense score array and mark
matched documents. Expression shapes deliberately mirror the C loops
so both backends agree to the last few ulp.
"""

import numpy as np

BACKEND = "python"


def bm25_accumulate(ordinals, tfs, offsets, idfs, doc_lens, avg_dl, k1, b,
                    scores, matched):
    """scores[d] += idf_t * tf * (k1+1) / (tf + k1*(1 - b + b*len(d)/avg_dl))

    ordinals/tfs hold the concatenated postings of every query term;
    offsets[t]:offsets[t+1] is term t's slice. Doc ordinals are unique
    within one term's slice, so fancy-indexed += is safe.
    """
    k1p1 = k1 + 1.0
    for t in range(len(idfs)):
        lo, hi = offsets[t], offsets[t + 1]
        if lo == hi:
            continue
        d = ordinals[lo:hi]
        tf = tfs[lo:hi]
        denom = tf + k1 * (1.0 - b + b * (doc_lens[d] / avg_dl))
        scores[d] += idfs[t] * tf * k1p1 / denom
        matched[d] = 1


def ql_accumulate(ordinals, tfs, offsets, mu_pt, scores, matched):
    """scores[d] += ln(tf + mu*p_t) - ln(mu*p_t) for each posting.

    The caller adds the background mass and the per-document length
    normalization afterwards (shared between backends).
    """
    for t in range(len(mu_pt)):
        lo, hi = offsets[t], offsets[t + 1]
        if lo == hi:
            continue
        d = ordinals[lo:hi]
        tf = tfs[lo:hi]
        scores[d] += np.log(tf + mu_pt[t]) - np.log(mu_pt[t])
        matched[d] = 1
