#!/usr/bin/env python3
"""Benchmark the compiled scoring kernels against the numpy fallback.

Builds a synthetic corpus, runs a query workload through BM25 and QL
with each available backend, verifies the rankings agree, and prints a
timing table.

    python benchmarks/bench_kernels.py --docs 50000 --queries 200
"""

import argparse
import time

import numpy as np

from embir import kernels
from embir.index import build_index
from embir.ingest import RawDocument
from embir.retrieval import score_bm25, score_ql


def synthetic_index(num_docs, vocab_size, seed=0):
    rng = np.random.default_rng(seed)
    vocab = [f"term{i:05d}" for i in range(vocab_size)]
    weights = 1.0 / np.arange(1, vocab_size + 1) ** 1.1
    weights /= weights.sum()
    docs = []
    for d in range(num_docs):
        length = int(rng.integers(30, 300))
        tokens = rng.choice(vocab_size, size=length, p=weights)
        body = " ".join(vocab[int(i)] for i in tokens)
        docs.append(RawDocument(f"doc{d:06d}", "", body, "jsonl"))
    return build_index(docs), vocab, rng


def workload(vocab, rng, num_queries):
    return [[vocab[int(i)] for i in rng.integers(0, len(vocab) // 10,
                                                 int(rng.integers(2, 6)))]
            for _ in range(num_queries)]


def time_backend(scorer, queries, index, backend, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for query in queries:
            scorer(query, index, k=1000, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best


def time_kernel_only(index, queries, backend_name, repeats=5):
    """Time just the accumulate call, excluding candidate ranking."""
    from embir.retrieval import BM25Params, _gather_postings

    kern = kernels.get_backend(backend_name)
    params = BM25Params()
    gathered = [_gather_postings(index, q) for q in queries]
    n = index.num_docs
    idf_of = {t: None for q in queries for t in q}
    import math
    for t in idf_of:
        df = index.doc_freq(t)
        idf_of[t] = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for kept, ordinals, tfs, offsets in gathered:
            scores = np.zeros(n)
            matched = np.zeros(n, dtype=np.uint8)
            idfs = np.array([idf_of[t] for t in kept])
            kern.bm25_accumulate(ordinals, tfs, offsets, idfs,
                                 index.doc_lens_f, index.avg_doc_len,
                                 params.k1, params.b, scores, matched)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=20000)
    parser.add_argument("--vocab", type=int, default=5000)
    parser.add_argument("--queries", type=int, default=100)
    args = parser.parse_args()

    print(f"building synthetic index: {args.docs} docs, vocab {args.vocab} ...")
    index, vocab, rng = synthetic_index(args.docs, args.vocab)
    queries = workload(vocab, rng, args.queries)
    print(f"total postings: {len(index.post_ordinals)}, "
          f"avg doc len {index.avg_doc_len:.1f}")

    backends = kernels.available_backends()
    print(f"backends: {backends}\n")

    print("end-to-end query latency (accumulate + rank, depth 1000):")
    for name, scorer in (("bm25", score_bm25), ("ql", score_ql)):
        sample = {b: scorer(queries[0], index, k=10, backend=b)
                  for b in backends}
        if len(backends) == 2:
            ids = {b: [d for d, _ in sample[b]] for b in backends}
            assert ids["c"] == ids["py"], "backend rankings disagree"
        times = {b: time_backend(scorer, queries, index, b) for b in backends}
        line = f"  {name:5s} " + "  ".join(
            f"{b}: {times[b]:7.3f}s ({args.queries / times[b]:6.1f} q/s)"
            for b in backends)
        if len(backends) == 2:
            line += f"  speedup: {times['py'] / times['c']:.2f}x"
        print(line)

    print("\nkernel-only accumulation (bm25):")
    ktimes = {b: time_kernel_only(index, queries, b) for b in backends}
    line = "  accum " + "  ".join(f"{b}: {ktimes[b] * 1e3:8.2f}ms"
                                  for b in backends)
    if len(backends) == 2:
        line += f"  speedup: {ktimes['py'] / ktimes['c']:.2f}x"
    print(line)


if __name__ == "__main__":
    main()
