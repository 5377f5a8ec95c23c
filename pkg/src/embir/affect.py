"""Lexicon-based corpus affect scoring.

A TSV lexicon (header ``word<TAB>dim1<TAB>dim2...``) is min-max
normalized per dimension to [0, 1]. Each document's score per dimension
is the mean over its matched tokens (multiplicity counts); the corpus
mean is the unweighted mean over documents with at least one matched
token. Sums use math.fsum so the report is exactly invariant under
document reordering and corpus doubling.
"""

import logging
import math
from dataclasses import dataclass

from .analysis import AnalyzerConfig, analyze
from .errors import LexiconError
from .util import open_text

log = logging.getLogger(__name__)

AGGREGATES = ("docs", "tokens")


@dataclass
class AffectLexicon:
    dimensions: list
    entries: dict  # word -> tuple of per-dimension scores in [0, 1]
    duplicates: int = 0
    skipped_rows: int = 0


@dataclass
class AffectReport:
    dimensions: list
    means: dict            # dimension -> mean or None when undefined
    coverage: dict         # dimension -> matched tokens / total tokens
    docs_scored: int
    docs_skipped: int
    total_tokens: int
    matched_tokens: int
    aggregate: str = "docs"

    @property
    def defined(self):
        return self.docs_scored > 0 if self.aggregate == "docs" \
            else self.matched_tokens > 0

    def to_dict(self):
        return {
            "dimensions": {
                dim: {"mean": self.means[dim], "coverage": self.coverage[dim]}
                for dim in self.dimensions
            },
            "docs_scored": self.docs_scored,
            "docs_skipped": self.docs_skipped,
            "total_tokens": self.total_tokens,
            "matched_tokens": self.matched_tokens,
            "aggregate": self.aggregate,
            "defined": self.defined,
        }


def load_lexicon(path) -> AffectLexicon:
    """Parse and min-max normalize a lexicon file. Duplicate words keep
    their first entry; rows with missing/unparsable cells are skipped.
    A constant column normalizes to 0.5 everywhere."""
    with open_text(path) as fh:
        header = fh.readline().rstrip("\n")
        if not header.strip():
            raise LexiconError(f"{path}: empty lexicon")
        columns = header.split("\t")
        if len(columns) < 2:
            raise LexiconError(f"{path}: header needs word + >=1 dimension")
        dimensions = [c.strip() for c in columns[1:]]
        raw = {}
        duplicates = 0
        skipped = 0
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            cells = line.rstrip("\n").split("\t")
            if len(cells) != len(columns) or any(not c.strip() for c in cells):
                skipped += 1
                log.warning("%s:%d: malformed lexicon row skipped", path, lineno)
                continue
            word = cells[0].strip().lower()
            try:
                scores = tuple(float(c) for c in cells[1:])
            except ValueError:
                skipped += 1
                log.warning("%s:%d: non-numeric score skipped", path, lineno)
                continue
            if word in raw:
                duplicates += 1
                continue
            raw[word] = scores
    if not raw:
        raise LexiconError(f"{path}: lexicon has no usable entries")
    entries = _normalize(raw, len(dimensions))
    if duplicates:
        log.warning("%s: %d duplicate words (first kept)", path, duplicates)
    return AffectLexicon(dimensions, entries, duplicates, skipped)


def _normalize(raw, n_dims):
    mins = [min(scores[i] for scores in raw.values()) for i in range(n_dims)]
    maxs = [max(scores[i] for scores in raw.values()) for i in range(n_dims)]
    entries = {}
    for word, scores in raw.items():
        entries[word] = tuple(
            0.5 if maxs[i] == mins[i]
            else (scores[i] - mins[i]) / (maxs[i] - mins[i])
            for i in range(n_dims))
    return entries


def score_corpus(docs, lexicon: AffectLexicon,
                 config: AnalyzerConfig = AnalyzerConfig(),
                 aggregate: str = "docs") -> AffectReport:
    """Score a document stream against the lexicon.

    ``aggregate="docs"`` (default) averages per-document token means;
    ``aggregate="tokens"`` averages over all matched tokens globally.
    """
    if aggregate not in AGGREGATES:
        raise LexiconError(f"unknown aggregate {aggregate!r}; expected {AGGREGATES}")
    n_dims = len(lexicon.dimensions)
    doc_means = []  # (doc_id, tuple of per-dim means)
    token_sums = [[] for _ in range(n_dims)]
    total_tokens = 0
    matched_tokens = 0
    num_docs = 0
    docs_skipped = 0
    for doc in docs:
        num_docs += 1
        tokens = analyze(doc.title, config) + analyze(doc.body, config)
        total_tokens += len(tokens)
        hits = [lexicon.entries[t] for t in tokens if t in lexicon.entries]
        if not hits:
            docs_skipped += 1
            continue
        matched_tokens += len(hits)
        means = []
        for i in range(n_dims):
            values = [h[i] for h in hits]
            token_sums[i].extend(values)
            means.append(math.fsum(values) / len(values))
        doc_means.append((doc.doc_id, tuple(means)))
    if num_docs == 0:
        raise LexiconError("cannot score an empty corpus")

    if aggregate == "docs":
        defined = bool(doc_means)
        # Reduce in sorted doc-id order: a canonical order plus fsum makes
        # the corpus mean exactly permutation-invariant.
        doc_means.sort(key=lambda item: item[0])
        means = {
            dim: (math.fsum(m[i] for _, m in doc_means) / len(doc_means)
                  if defined else None)
            for i, dim in enumerate(lexicon.dimensions)}
    else:
        defined = matched_tokens > 0
        means = {
            dim: (math.fsum(token_sums[i]) / matched_tokens if defined else None)
            for i, dim in enumerate(lexicon.dimensions)}
    coverage_value = matched_tokens / total_tokens if total_tokens else 0.0
    coverage = {dim: coverage_value for dim in lexicon.dimensions}
    if not defined:
        log.warning("no document matched any lexicon word; means undefined")
    return AffectReport(list(lexicon.dimensions), means, coverage,
                        docs_scored=len(doc_means), docs_skipped=docs_skipped,
                        total_tokens=total_tokens,
                        matched_tokens=matched_tokens, aggregate=aggregate)
