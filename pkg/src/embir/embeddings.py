"""Pretrained word-embedding store with exact cosine k-NN.

Out-of-vocabulary words are a first-class absent value (``None``), not
an error: expansion and AWE pipelines silently skip them. All-zero
vectors are kept in the vocabulary but excluded from neighbor results,
and their similarity is undefined (``nan``).
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EmbeddingError
from .util import open_binary, sha256_hex

log = logging.getLogger(__name__)

EMBEDDING_FORMATS = ("glove_text", "word2vec_text")


@dataclass
class LoadReport:
    rows_read: int = 0
    skipped_rows: int = 0
    duplicate_words: int = 0
    header_vocab: int = -1


class EmbeddingStore:
    def __init__(self, words, matrix, fingerprint="", report=None):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise EmbeddingError("embedding matrix must be 2-dimensional")
        if len(words) != matrix.shape[0]:
            raise EmbeddingError("vocabulary and matrix row count differ")
        if not np.isfinite(matrix).all():
            raise EmbeddingError("embedding matrix contains non-finite entries")
        self.words = list(words)
        self.matrix = matrix
        self.dim = int(matrix.shape[1])
        self.word_to_row = {w: i for i, w in enumerate(self.words)}
        if len(self.word_to_row) != len(self.words):
            raise EmbeddingError("duplicate words in vocabulary")
        self.fingerprint = fingerprint
        self.report = report or LoadReport(rows_read=len(self.words))
        norms = np.linalg.norm(matrix, axis=1)
        self.zero_mask = norms == 0.0
        safe = np.where(self.zero_mask, 1.0, norms)
        self.unit_matrix = matrix / safe[:, None]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.word_to_row

    def row(self, word):
        i = self.word_to_row.get(word)
        return None if i is None else self.matrix[i]

    def cosine(self, a, b):
        """Cosine of two vocabulary words.

        Returns None when either word is out of vocabulary, nan when
        either vector is all-zero. Exactly symmetric (same dot product
        expression either way).
        """
        ia = self.word_to_row.get(a)
        ib = self.word_to_row.get(b)
        if ia is None or ib is None:
            return None
        if self.zero_mask[ia] or self.zero_mask[ib]:
            return float("nan")
        lo, hi = (ia, ib) if ia <= ib else (ib, ia)
        return float(np.dot(self.unit_matrix[lo], self.unit_matrix[hi]))

    def nearest_neighbors(self, word, k, min_cos):
        """Up to ``k`` words with cosine strictly above ``min_cos``,
        sorted by cosine descending, ties by vocabulary order. The query
        word itself and all-zero vectors are excluded; an OOV query
        returns None."""
        i = self.word_to_row.get(word)
        if i is None:
            return None
        if k < 1 or self.zero_mask[i]:
            return []
        sims = self.unit_matrix @ self.unit_matrix[i]
        eligible = ~self.zero_mask
        eligible[i] = False
        eligible &= sims > min_cos
        cand = np.nonzero(eligible)[0]
        if cand.size == 0:
            return []
        order = np.lexsort((cand, -sims[cand]))[:k]
        return [(self.words[int(cand[j])], float(sims[int(cand[j])]))
                for j in order]

    def restrict(self, vocabulary) -> "EmbeddingStore":
        """New store keeping only ``vocabulary`` words, original order."""
        vocabulary = set(vocabulary)
        keep = [i for i, w in enumerate(self.words) if w in vocabulary]
        return EmbeddingStore([self.words[i] for i in keep],
                              self.matrix[keep],
                              fingerprint=self.fingerprint + ":restricted",
                              report=self.report)


def load_embeddings(path, fmt: str) -> EmbeddingStore:
    if fmt not in EMBEDDING_FORMATS:
        raise ConfigurationError(
            f"unknown embedding format {fmt!r}; expected {EMBEDDING_FORMATS}")
    with open_binary(path) as fh:
        data = fh.read()
    if not data.strip():
        raise EmbeddingError(f"{path}: empty embedding file")
    fingerprint = sha256_hex(data)
    lines = data.decode("utf-8", errors="replace").splitlines()
    report = LoadReport()

    start = 0
    if fmt == "word2vec_text":
        header = lines[0].split()
        if len(header) != 2 or not all(p.lstrip("-").isdigit() for p in header):
            raise EmbeddingError(
                f"{path}: word2vec_text requires a 'vocab_size dim' header line")
        report.header_vocab = int(header[0])
        start = 1

    words = []
    vectors = []
    seen = set()
    dim = None
    for lineno in range(start, len(lines)):
        parts = lines[lineno].split()
        if not parts:
            continue
        word, tail = parts[0], parts[1:]
        try:
            vec = [float(x) for x in tail]
        except ValueError:
            report.skipped_rows += 1
            log.warning("%s:%d: non-numeric vector component, row skipped",
                        path, lineno + 1)
            continue
        if not vec:
            report.skipped_rows += 1
            continue
        if dim is None:
            dim = len(vec)
        if len(vec) != dim:
            report.skipped_rows += 1
            log.warning("%s:%d: expected %d components, got %d; row skipped",
                        path, lineno + 1, dim, len(vec))
            continue
        if word in seen:
            report.duplicate_words += 1
            continue
        seen.add(word)
        words.append(word)
        vectors.append(vec)
    if not words:
        raise EmbeddingError(f"{path}: no usable embedding rows")
    report.rows_read = len(words)
    if report.duplicate_words:
        log.warning("%s: %d duplicate words (first occurrence kept)",
                    path, report.duplicate_words)
    if fmt == "word2vec_text" and report.header_vocab != len(words):
        log.warning("%s: header declares %d vectors but %d were loaded",
                    path, report.header_vocab, len(words))
    return EmbeddingStore(words, np.array(vectors, dtype=np.float64),
                          fingerprint=fingerprint, report=report)


def cosine(a, b, store: EmbeddingStore):
    return store.cosine(a, b)


def nearest_neighbors(word, store: EmbeddingStore, k: int, min_cos: float):
    return store.nearest_neighbors(word, k, min_cos)
