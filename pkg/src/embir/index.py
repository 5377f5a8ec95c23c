"""Inverted index: build, persist, and query collection statistics.

On-disk layout (version 1): an 8-byte magic, version, CRC32 and payload
length header, then a payload holding the analyzer configuration, the
doc-id table (ordinal -> external id + length), a sorted term table with
byte offsets into a postings region, and the postings region itself
(varint-delta doc ordinals + term frequencies).
"""

import io
import math
import zlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .analysis import AnalyzerConfig, analyze
from .errors import (AnalyzerMismatchError, IndexFormatError,
                     IndexVersionError, IngestError)
from .util import (pack_u32, pack_u64, read_lstring, read_varint,
                   unpack_u32, unpack_u64, write_lstring, write_varint)

MAGIC = b"EMBIRIDX"
VERSION = 1


@dataclass(frozen=True)
class IndexStats:
    num_docs: int
    total_tokens: int
    avg_doc_len: float


class Index:
    """Immutable after construction; safe for concurrent readers."""

    def __init__(self, analyzer, doc_ids, doc_lens, terms, df, cf,
                 post_offsets, post_ordinals, post_tfs, total_tokens):
        self.analyzer = analyzer
        self.doc_ids = list(doc_ids)
        self.doc_lens = np.asarray(doc_lens, dtype=np.int64)
        self.terms = list(terms)
        self.term_lookup = {t: i for i, t in enumerate(self.terms)}
        self.df = np.asarray(df, dtype=np.int64)
        self.cf = np.asarray(cf, dtype=np.int64)
        self.post_offsets = np.asarray(post_offsets, dtype=np.int64)
        self.post_ordinals = np.asarray(post_ordinals, dtype=np.int64)
        self.post_tfs = np.asarray(post_tfs, dtype=np.int64)
        self.total_tokens = int(total_tokens)
        self._doc_lookup = {d: i for i, d in enumerate(self.doc_ids)}
        self._ext_rank = None
        self._doc_lens_f = None
        self._forward = None

    # --- statistics ------------------------------------------------------

    @property
    def num_docs(self):
        return len(self.doc_ids)

    @property
    def avg_doc_len(self):
        if self.num_docs == 0:
            return 0.0
        return self.total_tokens / self.num_docs

    @property
    def stats(self):
        return IndexStats(self.num_docs, self.total_tokens, self.avg_doc_len)

    def doc_freq(self, term):
        tid = self.term_lookup.get(term)
        return 0 if tid is None else int(self.df[tid])

    def coll_freq(self, term):
        tid = self.term_lookup.get(term)
        return 0 if tid is None else int(self.cf[tid])

    def doc_ordinal(self, doc_id):
        return self._doc_lookup[doc_id]

    # --- postings --------------------------------------------------------

    def postings(self, term):
        """(doc_ordinals, tfs) arrays for ``term``, or None if unindexed."""
        tid = self.term_lookup.get(term)
        if tid is None:
            return None
        lo, hi = self.post_offsets[tid], self.post_offsets[tid + 1]
        return self.post_ordinals[lo:hi], self.post_tfs[lo:hi]

    def tf(self, term, doc_id):
        entry = self.postings(term)
        if entry is None:
            return 0
        ordinals, tfs = entry
        pos = np.searchsorted(ordinals, self._doc_lookup[doc_id])
        if pos < len(ordinals) and ordinals[pos] == self._doc_lookup[doc_id]:
            return int(tfs[pos])
        return 0

    # --- weights ---------------------------------------------------------

    def idf_smooth(self, term):
        """ln((N + 1) / (df + 1)) + 1; strictly positive for any df."""
        return math.log((self.num_docs + 1) / (self.doc_freq(term) + 1)) + 1.0

    def tfidf_weight(self, term, doc_id):
        tf = self.tf(term, doc_id)
        if tf == 0:
            raise KeyError(f"term {term!r} does not occur in document {doc_id!r}")
        return tf * self.idf_smooth(term)

    # --- derived views (cached) -------------------------------------------

    @property
    def ext_rank(self):
        """ordinal -> rank of its external id in ascending id order."""
        if self._ext_rank is None:
            order = sorted(range(self.num_docs), key=self.doc_ids.__getitem__)
            rank = np.empty(self.num_docs, dtype=np.int64)
            for r, ordinal in enumerate(order):
                rank[ordinal] = r
            self._ext_rank = rank
        return self._ext_rank

    @property
    def doc_lens_f(self):
        if self._doc_lens_f is None:
            self._doc_lens_f = self.doc_lens.astype(np.float64)
        return self._doc_lens_f

    def forward(self):
        """Per-doc (term_id array, tf array), rebuilt from the postings."""
        if self._forward is None:
            tids = [[] for _ in range(self.num_docs)]
            tfs = [[] for _ in range(self.num_docs)]
            for tid in range(len(self.terms)):
                lo, hi = self.post_offsets[tid], self.post_offsets[tid + 1]
                for pos in range(lo, hi):
                    d = self.post_ordinals[pos]
                    tids[d].append(tid)
                    tfs[d].append(self.post_tfs[pos])
            self._forward = [
                (np.asarray(t, dtype=np.int64), np.asarray(f, dtype=np.int64))
                for t, f in zip(tids, tfs)]
        return self._forward

    def require_analyzer(self, config: AnalyzerConfig):
        if config.fingerprint() != self.analyzer.fingerprint():
            raise AnalyzerMismatchError(
                "query analyzer fingerprint "
                f"{config.fingerprint()[:12]} does not match index "
                f"fingerprint {self.analyzer.fingerprint()[:12]}")

    # --- persistence -------------------------------------------------------

    def save(self, path):
        payload = self._encode_payload()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(pack_u32(VERSION))
            fh.write(pack_u32(zlib.crc32(payload)))
            fh.write(pack_u64(len(payload)))
            fh.write(payload)

    def _encode_payload(self):
        buf = io.BytesIO()
        cfg = self.analyzer
        write_varint(buf, 1 if cfg.lowercase else 0)
        write_lstring(buf, cfg.stemmer)
        write_lstring(buf, cfg.token_pattern)
        write_varint(buf, len(cfg.stopwords))
        for word in sorted(cfg.stopwords):
            write_lstring(buf, word)
        write_lstring(buf, cfg.fingerprint())

        write_varint(buf, self.num_docs)
        write_varint(buf, self.total_tokens)
        for doc_id, length in zip(self.doc_ids, self.doc_lens):
            write_lstring(buf, doc_id)
            write_varint(buf, int(length))

        postings = io.BytesIO()
        offsets = []
        for tid in range(len(self.terms)):
            offsets.append(postings.tell())
            lo, hi = self.post_offsets[tid], self.post_offsets[tid + 1]
            prev = -1
            for pos in range(lo, hi):
                ordinal = int(self.post_ordinals[pos])
                write_varint(postings, ordinal - prev - 1)
                write_varint(postings, int(self.post_tfs[pos]))
                prev = ordinal
        region = postings.getvalue()

        write_varint(buf, len(self.terms))
        for tid, term in enumerate(self.terms):
            write_lstring(buf, term)
            write_varint(buf, int(self.df[tid]))
            write_varint(buf, int(self.cf[tid]))
            write_varint(buf, offsets[tid])
        write_varint(buf, len(region))
        buf.write(region)
        return buf.getvalue()

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 24 or data[:8] != MAGIC:
            raise IndexFormatError(
                f"{path}: not an embir index (bad magic or truncated header); "
                "checksum verification impossible")
        version = unpack_u32(data, 8)
        if version != VERSION:
            raise IndexVersionError(
                f"{path}: on-disk index version {version} is not supported "
                f"(this build reads version {VERSION})")
        crc = unpack_u32(data, 12)
        payload_len = unpack_u64(data, 16)
        payload = data[24:]
        if len(payload) != payload_len or zlib.crc32(payload) != crc:
            raise IndexFormatError(f"{path}: checksum mismatch (corrupt or truncated)")
        try:
            return cls._decode_payload(payload)
        except (ValueError, UnicodeDecodeError) as exc:
            raise IndexFormatError(f"{path}: corrupt payload: {exc}") from exc

    @classmethod
    def _decode_payload(cls, payload):
        pos = 0
        lowercase, pos = read_varint(payload, pos)
        stemmer, pos = read_lstring(payload, pos)
        pattern, pos = read_lstring(payload, pos)
        n_stop, pos = read_varint(payload, pos)
        stopwords = set()
        for _ in range(n_stop):
            word, pos = read_lstring(payload, pos)
            stopwords.add(word)
        fingerprint, pos = read_lstring(payload, pos)
        analyzer = AnalyzerConfig(lowercase=bool(lowercase),
                                  stopwords=frozenset(stopwords),
                                  stemmer=stemmer, token_pattern=pattern)
        if analyzer.fingerprint() != fingerprint:
            raise ValueError("stored analyzer fingerprint does not match config")

        num_docs, pos = read_varint(payload, pos)
        total_tokens, pos = read_varint(payload, pos)
        doc_ids = []
        doc_lens = np.empty(num_docs, dtype=np.int64)
        for i in range(num_docs):
            doc_id, pos = read_lstring(payload, pos)
            doc_ids.append(doc_id)
            length, pos = read_varint(payload, pos)
            doc_lens[i] = length

        num_terms, pos = read_varint(payload, pos)
        terms = []
        df = np.empty(num_terms, dtype=np.int64)
        cf = np.empty(num_terms, dtype=np.int64)
        region_offsets = np.empty(num_terms, dtype=np.int64)
        for tid in range(num_terms):
            term, pos = read_lstring(payload, pos)
            terms.append(term)
            df[tid], pos = read_varint(payload, pos)
            cf[tid], pos = read_varint(payload, pos)
            region_offsets[tid], pos = read_varint(payload, pos)
        region_len, pos = read_varint(payload, pos)
        region = payload[pos:pos + region_len]
        if len(region) != region_len:
            raise ValueError("postings region truncated")

        total_postings = int(df.sum())
        post_offsets = np.zeros(num_terms + 1, dtype=np.int64)
        np.cumsum(df, out=post_offsets[1:])
        post_ordinals = np.empty(total_postings, dtype=np.int64)
        post_tfs = np.empty(total_postings, dtype=np.int64)
        write = 0
        for tid in range(num_terms):
            rpos = int(region_offsets[tid])
            prev = -1
            for _ in range(int(df[tid])):
                delta, rpos = read_varint(region, rpos)
                tf, rpos = read_varint(region, rpos)
                prev = prev + 1 + delta
                post_ordinals[write] = prev
                post_tfs[write] = tf
                write += 1
        return cls(analyzer, doc_ids, doc_lens, terms, df, cf,
                   post_offsets, post_ordinals, post_tfs, total_tokens)


def build_index(docs, config: AnalyzerConfig = AnalyzerConfig()) -> Index:
    """Index a document stream. Deterministic given input order."""
    doc_ids = []
    doc_lens = []
    seen = set()
    postings = {}
    total_tokens = 0
    for doc in docs:
        if doc.doc_id in seen:
            raise IngestError(f"duplicate doc_id {doc.doc_id!r} during indexing")
        seen.add(doc.doc_id)
        ordinal = len(doc_ids)
        doc_ids.append(doc.doc_id)
        terms = analyze(doc.title, config) + analyze(doc.body, config)
        doc_lens.append(len(terms))
        total_tokens += len(terms)
        for term, tf in sorted(Counter(terms).items()):
            postings.setdefault(term, []).append((ordinal, tf))
    return _freeze(config, doc_ids, doc_lens, postings, total_tokens)


def _freeze(config, doc_ids, doc_lens, postings, total_tokens):
    terms = sorted(postings)
    df = np.array([len(postings[t]) for t in terms], dtype=np.int64)
    post_offsets = np.zeros(len(terms) + 1, dtype=np.int64)
    np.cumsum(df, out=post_offsets[1:])
    total_postings = int(post_offsets[-1])
    post_ordinals = np.empty(total_postings, dtype=np.int64)
    post_tfs = np.empty(total_postings, dtype=np.int64)
    cf = np.empty(len(terms), dtype=np.int64)
    write = 0
    for tid, term in enumerate(terms):
        entries = postings[term]
        cf[tid] = sum(tf for _, tf in entries)
        for ordinal, tf in entries:
            post_ordinals[write] = ordinal
            post_tfs[write] = tf
            write += 1
    return Index(config, doc_ids, doc_lens, terms, df, cf,
                 post_offsets, post_ordinals, post_tfs, total_tokens)


def merge_indexes(shards) -> Index:
    """Merge per-shard indexes; equivalent to indexing the concatenated
    document streams in shard order."""
    shards = list(shards)
    if not shards:
        raise ValueError("no shards to merge")
    first = shards[0]
    for shard in shards[1:]:
        if shard.analyzer.fingerprint() != first.analyzer.fingerprint():
            raise AnalyzerMismatchError("shards were built with different analyzers")
    doc_ids = []
    doc_lens = []
    seen = set()
    postings = {}
    total_tokens = 0
    for shard in shards:
        base = len(doc_ids)
        for doc_id in shard.doc_ids:
            if doc_id in seen:
                raise IngestError(f"duplicate doc_id {doc_id!r} across shards")
            seen.add(doc_id)
            doc_ids.append(doc_id)
        doc_lens.extend(int(x) for x in shard.doc_lens)
        total_tokens += shard.total_tokens
        for tid, term in enumerate(shard.terms):
            lo, hi = shard.post_offsets[tid], shard.post_offsets[tid + 1]
            bucket = postings.setdefault(term, [])
            for pos in range(lo, hi):
                bucket.append((base + int(shard.post_ordinals[pos]),
                               int(shard.post_tfs[pos])))
    return _freeze(first.analyzer, doc_ids, doc_lens, postings, total_tokens)
