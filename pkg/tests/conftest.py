import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from embir.ingest import RawDocument


def make_docs(pairs):
    """[(doc_id, body), ...] -> [RawDocument, ...] with empty titles."""
    return [RawDocument(doc_id, "", body, "jsonl") for doc_id, body in pairs]


def random_corpus(rng, num_docs, vocab_size, min_len=3):
    """Synthetic corpus -> (docs, {doc_id: tokens}). Zipf-ish skew so
    term statistics vary; every doc gets a unique length so documents
    never tie exactly under length-normalized scorers."""
    vocab = [f"w{i:02d}" for i in range(vocab_size)]
    weights = 1.0 / np.arange(1, vocab_size + 1)
    weights /= weights.sum()
    lengths = min_len + rng.permutation(num_docs)
    docs = []
    tokens_by_id = {}
    for d in range(num_docs):
        tokens = [vocab[int(i)] for i in
                  rng.choice(vocab_size, size=int(lengths[d]), p=weights)]
        doc_id = f"doc{d:03d}"
        docs.append(RawDocument(doc_id, "", " ".join(tokens), "jsonl"))
        tokens_by_id[doc_id] = tokens
    return docs, tokens_by_id


def write_glove(path, vectors):
    """{word: iterable of floats} -> glove_text file."""
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in vectors.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    return path


def assert_rankings_match(got, want, rel=1e-9):
    """Same doc ids in the same order; scores within relative tolerance."""
    assert [d for d, _ in got] == [d for d, _ in want]
    for (_, a), (_, b) in zip(got, want):
        assert a == pytest.approx(b, rel=rel, abs=1e-12)


@pytest.fixture
def tiny_index():
    from embir.index import build_index
    return build_index(make_docs([("d1", "a b a"), ("d2", "b c")]))
