"""BM25 and Dirichlet query-likelihood scoring, plus boolean-OR execution.

Rankings are deterministic: score descending, ties broken by ascending
external doc id. Only documents matching at least one query term are
returned. Query terms absent from the collection vocabulary are dropped
(an all-out-of-vocabulary query retrieves nothing).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, IndexError_

SCORERS = ("bm25", "ql")
BOOLEAN_MODES = ("union", "max-clause")


@dataclass(frozen=True)
class BM25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if self.k1 < 0:
            raise ConfigurationError(f"bm25 k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigurationError(f"bm25 b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class QLParams:
    mu: float = 1000.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigurationError(f"ql mu must be > 0, got {self.mu}")


@dataclass(frozen=True)
class BooleanQuery:
    """Disjunction of term sequences; clause 0 is the original query."""

    clauses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        deduped = []
        seen = set()
        for clause in self.clauses:
            clause = tuple(clause)
            if not clause:
                raise ConfigurationError("boolean query clauses must be non-empty")
            if clause not in seen:
                seen.add(clause)
                deduped.append(clause)
        if not deduped:
            raise ConfigurationError("boolean query needs at least one clause")
        object.__setattr__(self, "clauses", tuple(deduped))


def _require_nonempty(index):
    if index.num_docs == 0:
        raise IndexError_("cannot score against an empty index")


def _ranked(index, scores, matched, k):
    cand = np.nonzero(matched)[0]
    if cand.size == 0:
        return []
    cand_scores = scores[cand]
    order = np.lexsort((index.ext_rank[cand], -cand_scores))[:k]
    return [(index.doc_ids[int(cand[i])], float(cand_scores[int(i)]))
            for i in order]


def _gather_postings(index, terms):
    """Concatenate postings of the given terms (multiset; OOV dropped)."""
    kept = [t for t in terms if t in index.term_lookup]
    slices = [index.postings(t) for t in kept]
    offsets = np.zeros(len(kept) + 1, dtype=np.int64)
    for i, (ordinals, _) in enumerate(slices):
        offsets[i + 1] = offsets[i] + len(ordinals)
    total = int(offsets[-1])
    ordinals = np.empty(total, dtype=np.int64)
    tfs = np.empty(total, dtype=np.float64)
    for i, (o, t) in enumerate(slices):
        ordinals[offsets[i]:offsets[i + 1]] = o
        tfs[offsets[i]:offsets[i + 1]] = t
    return kept, ordinals, tfs, offsets


def _resolve_kernel(backend):
    if backend is None or isinstance(backend, str):
        return kernels.get_backend(backend)
    return backend


def bm25_dense(query_terms, index, params: BM25Params, backend=None):
    """Dense (scores, matched) arrays over all documents."""
    kern = _resolve_kernel(backend)
    scores = np.zeros(index.num_docs, dtype=np.float64)
    matched = np.zeros(index.num_docs, dtype=np.uint8)
    kept, ordinals, tfs, offsets = _gather_postings(index, query_terms)
    if not kept:
        return scores, matched
    n = index.num_docs
    idfs = np.array(
        [math.log(1.0 + (n - index.doc_freq(t) + 0.5) / (index.doc_freq(t) + 0.5))
         for t in kept], dtype=np.float64)
    kern.bm25_accumulate(ordinals, tfs, offsets, idfs, index.doc_lens_f,
                         index.avg_doc_len, params.k1, params.b,
                         scores, matched)
    return scores, matched


def ql_dense(query_terms, index, params: QLParams, backend=None):
    kern = _resolve_kernel(backend)
    scores = np.zeros(index.num_docs, dtype=np.float64)
    matched = np.zeros(index.num_docs, dtype=np.uint8)
    kept, ordinals, tfs, offsets = _gather_postings(index, query_terms)
    if not kept:
        return scores, matched
    mu = params.mu
    mu_pt = np.array([mu * index.coll_freq(t) / index.total_tokens for t in kept],
                     dtype=np.float64)
    kern.ql_accumulate(ordinals, tfs, offsets, mu_pt, scores, matched)
    # Per-candidate completion: background mass for every query term and
    # the shared length normalization.
    bg_total = float(np.log(mu_pt).sum())
    cand = matched.astype(bool)
    scores[cand] += bg_total - len(kept) * np.log(index.doc_lens_f[cand] + mu)
    return scores, matched


_DENSE = {"bm25": bm25_dense, "ql": ql_dense}


def _check_k(k):
    if k < 1:
        raise ConfigurationError(f"result depth k must be >= 1, got {k}")


def score_bm25(query_terms, index, params: BM25Params = BM25Params(),
               k: int = 1000, backend=None):
    _check_k(k)
    _require_nonempty(index)
    scores, matched = bm25_dense(query_terms, index, params, backend)
    return _ranked(index, scores, matched, k)


def score_ql(query_terms, index, params: QLParams = QLParams(),
             k: int = 1000, backend=None):
    _check_k(k)
    _require_nonempty(index)
    scores, matched = ql_dense(query_terms, index, params, backend)
    return _ranked(index, scores, matched, k)


def union_terms(bq: BooleanQuery):
    """Deduplicated union of clause terms, first occurrence order."""
    seen = set()
    terms = []
    for clause in bq.clauses:
        for term in clause:
            if term not in seen:
                seen.add(term)
                terms.append(term)
    return terms


def execute_boolean(bq: BooleanQuery, index, scorer: str = "bm25",
                    params=None, k: int = 1000, mode: str = "union",
                    backend=None):
    """OR-execute a boolean query with the chosen bag-of-words scorer.

    ``union`` scores the deduplicated union of clause terms (each term
    weight 1 no matter how many clauses contain it); ``max-clause``
    scores each clause separately and keeps each document's best clause
    score.
    """
    _check_k(k)
    _require_nonempty(index)
    if scorer not in SCORERS:
        raise ConfigurationError(f"unknown scorer {scorer!r}; expected {SCORERS}")
    if mode not in BOOLEAN_MODES:
        raise ConfigurationError(
            f"unknown boolean mode {mode!r}; expected {BOOLEAN_MODES}")
    if params is None:
        params = BM25Params() if scorer == "bm25" else QLParams()
    dense = _DENSE[scorer]
    if mode == "union":
        scores, matched = dense(union_terms(bq), index, params, backend)
        return _ranked(index, scores, matched, k)
    best = np.full(index.num_docs, -np.inf, dtype=np.float64)
    matched_any = np.zeros(index.num_docs, dtype=np.uint8)
    for clause in bq.clauses:
        scores, matched = dense(list(clause), index, params, backend)
        mask = matched.astype(bool)
        np.maximum(best, scores, out=best, where=mask)
        matched_any |= matched
    return _ranked(index, best, matched_any, k)
