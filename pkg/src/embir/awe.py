"""Averaged-word-embedding ranking.

Queries and documents are represented by aggregating their words'
embedding vectors; candidates (top-N from a lexical scorer, or the whole
corpus) are ranked by cosine between the aggregates. Three aggregation
strategies cover the plausible readings of TF-IDF normalization:

- ``mean``: plain average over in-vocabulary token occurrences;
- ``tfidf_weighted``: weighted mean with g(w) = tf(w, text) * idf(w);
- ``tfidf_divided``: sum of v_w / g(w) over distinct words, then
  L2-normalized (the literal per-word division reading).

Documents (or queries) whose every term is out of vocabulary have no
vector; such documents rank last with sentinel score -2, and such
queries fall back to the candidate scorer's ranking (flagged in the run
metadata).
"""

import io
import logging
import zlib
from dataclasses import dataclass

import numpy as np

from .analysis import analyze
from .errors import ConfigurationError, EmbirError, IndexFormatError
from .evaluation import RunFile
from .retrieval import BM25Params, QLParams, score_bm25, score_ql
from .util import (pack_u32, pack_u64, read_lstring, read_varint,
                   unpack_u32, unpack_u64, write_lstring, write_varint)

log = logging.getLogger(__name__)

AWE_WEIGHTINGS = ("mean", "tfidf_weighted", "tfidf_divided")
ABSENT_SCORE = -2.0

_CACHE_MAGIC = b"EMBIRVEC"
_CACHE_VERSION = 1


@dataclass(frozen=True)
class AweConfig:
    weighting: str = "tfidf_weighted"
    rerank_depth: int = 1000  # 0 scores the whole corpus
    candidate_scorer: str = "bm25"

    def __post_init__(self):
        if self.weighting not in AWE_WEIGHTINGS:
            raise ConfigurationError(
                f"unknown weighting {self.weighting!r}; expected {AWE_WEIGHTINGS}")
        if self.rerank_depth < 0:
            raise ConfigurationError("rerank_depth must be >= 0")
        if self.candidate_scorer not in ("bm25", "ql"):
            raise ConfigurationError("candidate_scorer must be bm25 or ql")


def _idf_array(index):
    return np.log((index.num_docs + 1) / (index.df + 1)) + 1.0


def _aggregate(rows, weights, weighting):
    """Combine embedding rows with positive weights; None if degenerate."""
    if len(rows) == 0:
        return None
    if weighting == "tfidf_divided":
        vec = (rows / weights[:, None]).sum(axis=0)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            return None
        return vec / norm
    total = weights.sum()
    if total == 0.0:
        return None
    return (rows * weights[:, None]).sum(axis=0) / total


def text_vector(terms, store, index=None, weighting="tfidf_weighted"):
    """Aggregate vector for an analyzed term list, or None when every
    term is out of vocabulary (or carries no usable weight)."""
    if weighting not in AWE_WEIGHTINGS:
        raise ConfigurationError(
            f"unknown weighting {weighting!r}; expected {AWE_WEIGHTINGS}")
    if weighting != "mean" and index is None:
        raise ConfigurationError(f"weighting {weighting!r} requires an index")
    counts = {}
    for term in terms:
        counts[term] = counts.get(term, 0) + 1
    rows = []
    weights = []
    for term, tf in counts.items():
        row = store.word_to_row.get(term)
        if row is None:
            continue
        if weighting == "mean":
            weight = float(tf)
        else:
            # Terms the index has never seen have no idf: skipped.
            if term not in index.term_lookup:
                continue
            weight = tf * index.idf_smooth(term)
        rows.append(store.matrix[row])
        weights.append(weight)
    if not rows:
        return None
    return _aggregate(np.asarray(rows), np.asarray(weights, dtype=np.float64),
                      weighting)


class DocVectorSet:
    """Per-document aggregate vectors for one (index, store, weighting)."""

    def __init__(self, matrix, absent, index_fingerprint, store_fingerprint,
                 weighting):
        self.matrix = matrix
        self.index_fingerprint = index_fingerprint
        self.store_fingerprint = store_fingerprint
        self.weighting = weighting
        norms = np.linalg.norm(matrix, axis=1)
        self.absent = absent | (norms == 0.0)
        safe = np.where(norms == 0.0, 1.0, norms)
        self.unit = matrix / safe[:, None]

    @classmethod
    def build(cls, index, store, weighting):
        idf = _idf_array(index)
        row_ptr = np.array([store.word_to_row.get(t, -1) for t in index.terms],
                           dtype=np.int64)
        dim = store.dim
        matrix = np.zeros((index.num_docs, dim), dtype=np.float64)
        absent = np.zeros(index.num_docs, dtype=bool)
        forward = index.forward()
        for d in range(index.num_docs):
            tids, tfs = forward[d]
            if len(tids) == 0:
                absent[d] = True
                continue
            ptr = row_ptr[tids]
            keep = ptr >= 0
            if not keep.any():
                absent[d] = True
                continue
            rows = store.matrix[ptr[keep]]
            if weighting == "mean":
                weights = tfs[keep].astype(np.float64)
            else:
                weights = tfs[keep] * idf[tids[keep]]
            vec = _aggregate(rows, weights, weighting)
            if vec is None:
                absent[d] = True
            else:
                matrix[d] = vec
        return cls(matrix, absent, index_fingerprint(index),
                   store.fingerprint, weighting)

    def save(self, path):
        buf = io.BytesIO()
        write_lstring(buf, self.index_fingerprint)
        write_lstring(buf, self.store_fingerprint)
        write_lstring(buf, self.weighting)
        write_varint(buf, self.matrix.shape[1])
        write_varint(buf, self.matrix.shape[0])
        buf.write(np.packbits(self.absent).tobytes())
        buf.write(np.ascontiguousarray(self.matrix).tobytes())
        payload = buf.getvalue()
        with open(path, "wb") as fh:
            fh.write(_CACHE_MAGIC)
            fh.write(pack_u32(_CACHE_VERSION))
            fh.write(pack_u32(zlib.crc32(payload)))
            fh.write(pack_u64(len(payload)))
            fh.write(payload)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 24 or data[:8] != _CACHE_MAGIC:
            raise IndexFormatError(f"{path}: not a doc-vector cache")
        if unpack_u32(data, 8) != _CACHE_VERSION:
            raise IndexFormatError(
                f"{path}: cache version {unpack_u32(data, 8)} unsupported "
                f"(expected {_CACHE_VERSION})")
        payload = data[24:]
        if len(payload) != unpack_u64(data, 16) or \
                zlib.crc32(payload) != unpack_u32(data, 12):
            raise IndexFormatError(f"{path}: checksum mismatch")
        pos = 0
        index_fp, pos = read_lstring(payload, pos)
        store_fp, pos = read_lstring(payload, pos)
        weighting, pos = read_lstring(payload, pos)
        dim, pos = read_varint(payload, pos)
        num_docs, pos = read_varint(payload, pos)
        mask_bytes = (num_docs + 7) // 8
        absent = np.unpackbits(
            np.frombuffer(payload, dtype=np.uint8, count=mask_bytes, offset=pos),
            count=num_docs).astype(bool)
        pos += mask_bytes
        matrix = np.frombuffer(payload, dtype=np.float64,
                               count=num_docs * dim, offset=pos)
        matrix = matrix.reshape(num_docs, dim).copy()
        return cls(matrix, absent, index_fp, store_fp, weighting)


def index_fingerprint(index):
    """Content hash of an index (cached on the instance)."""
    fp = getattr(index, "_content_fingerprint", None)
    if fp is None:
        from .util import sha256_hex
        fp = sha256_hex(index._encode_payload())
        index._content_fingerprint = fp
    return fp


def doc_vectors(index, store, weighting, cache_path=None) -> DocVectorSet:
    """Build (or reuse) the document vectors; the sidecar cache is only
    trusted when its fingerprints match the inputs."""
    if cache_path is not None:
        try:
            cached = DocVectorSet.load(cache_path)
        except (FileNotFoundError, IndexFormatError):
            cached = None
        if cached is not None and \
                cached.index_fingerprint == index_fingerprint(index) and \
                cached.store_fingerprint == store.fingerprint and \
                cached.weighting == weighting:
            return cached
        if cached is not None:
            log.info("doc-vector cache %s is stale, rebuilding", cache_path)
    built = DocVectorSet.build(index, store, weighting)
    if cache_path is not None:
        built.save(cache_path)
    return built


def _lexical(config, candidate_params):
    scorer = score_bm25 if config.candidate_scorer == "bm25" else score_ql
    if candidate_params is None:
        candidate_params = BM25Params() if config.candidate_scorer == "bm25" \
            else QLParams()
    return scorer, candidate_params


def _candidate_ordinals(query_terms, index, config, candidate_params,
                        backend=None):
    if config.rerank_depth == 0:
        return list(range(index.num_docs))
    scorer, params = _lexical(config, candidate_params)
    ranked = scorer(query_terms, index, params, k=config.rerank_depth,
                    backend=backend)
    return [index.doc_ordinal(doc_id) for doc_id, _ in ranked]


def score_awe(query_terms, index, store, config: AweConfig = AweConfig(),
              k: int = 1000, candidate_params=None, vectors=None,
              backend=None):
    """Rank documents by cosine to the aggregated query vector.

    Returns (ranked, used_fallback): when the query has no vector the
    candidate scorer's own ranking is returned and flagged.
    """
    if k < 1:
        raise ConfigurationError(f"result depth k must be >= 1, got {k}")
    query_terms = list(query_terms)
    qvec = text_vector(query_terms, store, index, config.weighting)
    qnorm = np.linalg.norm(qvec) if qvec is not None else 0.0
    if qvec is None or qnorm == 0.0:
        scorer, params = _lexical(config, candidate_params)
        return scorer(query_terms, index, params, k=k, backend=backend), True
    qunit = qvec / qnorm
    if vectors is None:
        vectors = doc_vectors(index, store, config.weighting)
    ordinals = _candidate_ordinals(query_terms, index, config,
                                   candidate_params, backend)
    if not ordinals:
        return [], False
    ordinals = np.asarray(ordinals, dtype=np.int64)
    scores = vectors.unit[ordinals] @ qunit
    scores = np.where(vectors.absent[ordinals], ABSENT_SCORE, scores)
    order = np.lexsort((index.ext_rank[ordinals], -scores))[:k]
    ranked = [(index.doc_ids[int(ordinals[i])], float(scores[int(i)]))
              for i in order]
    return ranked, False


def run_awe_pipeline(topics, index, store, config, k, tag,
                     candidate_params=None, cache_path=None,
                     use_description=False, backend=None) -> RunFile:
    vectors = doc_vectors(index, store, config.weighting, cache_path)
    run = RunFile(tag=tag)
    for topic in topics:
        try:
            terms = analyze(topic.query_text(use_description), index.analyzer)
            if not terms:
                run.add_topic(topic.topic_id, [])
                continue
            ranked, fell_back = score_awe(terms, index, store, config, k,
                                          candidate_params, vectors, backend)
            if fell_back:
                run.fallback_topics.append(topic.topic_id)
            run.add_topic(topic.topic_id, ranked)
        except EmbirError as exc:
            run.skipped_topics.append(topic.topic_id)
            log.error("topic %s failed, skipped: %s", topic.topic_id, exc)
    return run
