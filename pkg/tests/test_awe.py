"""AWE ranking: the three aggregation strategies, invariances, the
brute-force cosine oracle, and the doc-vector cache."""

import numpy as np
import pytest

from conftest import make_docs
from embir.awe import (ABSENT_SCORE, AweConfig, DocVectorSet, doc_vectors,
                       run_awe_pipeline, score_awe, text_vector)
from embir.embeddings import EmbeddingStore
from embir.errors import ConfigurationError
from embir.index import build_index
from embir.ingest import Topic
from embir.retrieval import score_bm25
from oracles import oracle_awe_ranking, oracle_text_vector


def _store(vectors):
    words = list(vectors)
    return EmbeddingStore(words, np.array([vectors[w] for w in words],
                                          dtype=np.float64))


def _idf_lookup(index):
    return lambda term: (index.idf_smooth(term)
                         if term in index.term_lookup else None)


class TestTextVector:
    def setup_method(self):
        self.index = build_index(make_docs(
            [("d1", "apple banana apple"), ("d2", "banana cherry")]))
        self.vectors = {"apple": [1.0, 0.0], "banana": [0.0, 1.0],
                        "cherry": [1.0, 1.0]}
        self.store = _store(self.vectors)

    @pytest.mark.parametrize("weighting",
                             ["mean", "tfidf_weighted", "tfidf_divided"])
    def test_singleton_equals_the_row(self, weighting):
        v = text_vector(["apple"], self.store, self.index, weighting)
        row = np.array(self.vectors["apple"])
        if weighting == "tfidf_divided":
            row = row / np.linalg.norm(row)
        assert np.allclose(v, row, atol=1e-12)

    def test_mean_counts_occurrences(self):
        v = text_vector(["apple", "apple", "banana"], self.store, None, "mean")
        assert np.allclose(v, [2 / 3, 1 / 3], atol=1e-15)

    def test_uniform_weights_collapse_to_distinct_mean(self):
        # both terms have df=2 -> equal idf; tf=1 each
        ix = build_index(make_docs([("d1", "apple banana"),
                                    ("d2", "apple banana")]))
        weighted = text_vector(["apple", "banana"], self.store, ix,
                               "tfidf_weighted")
        mean = text_vector(["apple", "banana"], self.store, None, "mean")
        assert np.allclose(weighted, mean, atol=1e-15)

    def test_crafted_weights_match_direct_formula(self):
        got = text_vector(["apple", "apple", "banana", "cherry"],
                          self.store, self.index, "tfidf_weighted")
        want = oracle_text_vector(["apple", "apple", "banana", "cherry"],
                                  self.vectors, _idf_lookup(self.index),
                                  "tfidf_weighted")
        assert np.allclose(got, want, atol=1e-12)

    def test_divided_matches_direct_formula(self):
        got = text_vector(["apple", "banana", "banana"], self.store,
                          self.index, "tfidf_divided")
        want = oracle_text_vector(["apple", "banana", "banana"],
                                  self.vectors, _idf_lookup(self.index),
                                  "tfidf_divided")
        assert np.allclose(got, want, atol=1e-12)

    def test_oov_terms_skipped(self):
        with_oov = text_vector(["apple", "zzz"], self.store, self.index,
                               "tfidf_weighted")
        without = text_vector(["apple"], self.store, self.index,
                              "tfidf_weighted")
        assert np.allclose(with_oov, without, atol=1e-15)

    def test_all_oov_absent(self):
        assert text_vector(["zzz", "qqq"], self.store, self.index,
                           "tfidf_weighted") is None

    def test_term_unseen_by_index_skipped_for_tfidf(self):
        # "cherry" is in the store but absent from this index
        ix = build_index(make_docs([("d1", "apple banana")]))
        v = text_vector(["apple", "cherry"], self.store, ix, "tfidf_weighted")
        assert np.allclose(v, self.vectors["apple"], atol=1e-15)
        # under mean it still contributes
        m = text_vector(["apple", "cherry"], self.store, None, "mean")
        assert np.allclose(m, [1.0, 0.5], atol=1e-15)

    def test_unknown_weighting(self):
        with pytest.raises(ConfigurationError):
            text_vector(["apple"], self.store, self.index, "bm25f")


def small_world(rng, num_docs=10, vocab_size=12, dim=5):
    vocab = [f"w{i:02d}" for i in range(vocab_size)]
    vectors = {w: rng.integers(-3, 4, size=dim).astype(float).tolist()
               for w in vocab}
    docs = []
    tokens = {}
    for d in range(num_docs):
        length = int(rng.integers(2, 9))
        toks = [vocab[int(i)] for i in rng.integers(0, vocab_size, length)]
        doc_id = f"doc{d:02d}"
        docs.append((doc_id, " ".join(toks)))
        tokens[doc_id] = toks
    return make_docs(docs), tokens, vectors


class TestScoreAwe:
    def test_identical_doc_scores_one(self):
        docs = make_docs([("d1", "apple banana")])
        ix = build_index(docs)
        store = _store({"apple": [1.0, 2.0], "banana": [3.0, -1.0]})
        ranked, fell_back = score_awe(["apple", "banana"], ix, store,
                                      AweConfig(rerank_depth=0), k=5)
        assert not fell_back
        assert ranked[0][0] == "d1"
        assert ranked[0][1] == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("weighting",
                             ["mean", "tfidf_weighted", "tfidf_divided"])
    def test_full_ranking_matches_oracle(self, weighting):
        rng = np.random.default_rng(51)
        docs, tokens, vectors = small_world(rng)
        ix = build_index(docs)
        store = _store(vectors)
        query = ["w00", "w03", "w05"]
        ranked, fell_back = score_awe(
            query, ix, store, AweConfig(weighting=weighting, rerank_depth=0),
            k=100)
        assert not fell_back
        want = oracle_awe_ranking(tokens, query, vectors, _idf_lookup(ix),
                                  weighting, k=100)
        assert [d for d, _ in ranked] == [d for d, _ in want]
        for (_, a), (_, b) in zip(ranked, want):
            assert a == pytest.approx(b, abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(52)
        docs, tokens, vectors = small_world(rng, num_docs=20)
        ix = build_index(docs)
        store = _store(vectors)
        scaled = _store({w: [3.7 * x for x in v] for w, v in vectors.items()})
        for weighting in ("mean", "tfidf_weighted", "tfidf_divided"):
            config = AweConfig(weighting=weighting, rerank_depth=0)
            base, _ = score_awe(["w01", "w02"], ix, store, config, k=50)
            big, _ = score_awe(["w01", "w02"], ix, scaled, config, k=50)
            assert [d for d, _ in base] == [d for d, _ in big]

    def test_rerank_depth_zero_equals_full_corpus_depth(self):
        # every doc contains a query term, so the full-depth lexical
        # candidate set is the whole corpus and both modes must agree
        rng = np.random.default_rng(53)
        raw, _, vectors = small_world(rng, num_docs=50, vocab_size=20)
        docs = make_docs([(d.doc_id, d.body + " w01") for d in raw])
        ix = build_index(docs)
        store = _store(vectors)
        exhaustive, _ = score_awe(["w01", "w02"], ix, store,
                                  AweConfig(rerank_depth=0), k=100)
        full_depth, _ = score_awe(["w01", "w02"], ix, store,
                                  AweConfig(rerank_depth=ix.num_docs), k=100)
        assert exhaustive == full_depth

    def test_rerank_candidates_are_lexical_matches_only(self):
        rng = np.random.default_rng(59)
        docs, _, vectors = small_world(rng, num_docs=30)
        ix = build_index(docs)
        store = _store(vectors)
        reranked, _ = score_awe(["w01"], ix, store,
                                AweConfig(rerank_depth=30), k=100)
        matched = {d for d, _ in score_bm25(["w01"], ix, k=100)}
        assert {d for d, _ in reranked} == matched

    def test_absent_doc_vector_ranked_last_with_sentinel(self):
        docs = make_docs([("d1", "apple banana"), ("d2", "nowhere words")])
        ix = build_index(docs)
        store = _store({"apple": [1.0, 0.0], "banana": [0.0, 1.0]})
        ranked, _ = score_awe(["apple"], ix, store,
                              AweConfig(rerank_depth=0), k=10)
        assert ranked[-1] == ("d2", ABSENT_SCORE)
        assert all(s >= -1.0 - 1e-9 for _, s in ranked[:-1])

    def test_absent_query_vector_falls_back(self):
        docs = make_docs([("d1", "apple banana"), ("d2", "apple")])
        ix = build_index(docs)
        store = _store({"apple": [1.0, 0.0]})
        ranked, fell_back = score_awe(["zzz", "banana"], ix, store,
                                      AweConfig(), k=10)
        assert fell_back
        assert ranked == score_bm25(["zzz", "banana"], ix, k=10)

    def test_cosine_scores_in_range(self):
        rng = np.random.default_rng(54)
        docs, _, vectors = small_world(rng, num_docs=30)
        ix = build_index(docs)
        ranked, _ = score_awe(["w00", "w01"], ix, _store(vectors),
                              AweConfig(rerank_depth=0), k=100)
        for _, s in ranked:
            assert s == ABSENT_SCORE or -1.0 - 1e-9 <= s <= 1.0 + 1e-9


class TestPipelineAndCache:
    def test_pipeline_deterministic(self, tmp_path):
        rng = np.random.default_rng(55)
        docs, _, vectors = small_world(rng, num_docs=25)
        ix = build_index(docs)
        store = _store(vectors)
        topics = [Topic("1", "w00 w01"), Topic("2", "w02 w03")]
        r1 = run_awe_pipeline(topics, ix, store, AweConfig(rerank_depth=0),
                              10, "tag")
        r2 = run_awe_pipeline(topics, ix, store, AweConfig(rerank_depth=0),
                              10, "tag")
        assert r1.results == r2.results

    def test_cache_round_trip_and_reuse(self, tmp_path):
        rng = np.random.default_rng(56)
        docs, _, vectors = small_world(rng, num_docs=15)
        ix = build_index(docs)
        store = _store(vectors)
        cache = tmp_path / "vectors.cache"
        built = doc_vectors(ix, store, "tfidf_weighted", cache)
        assert cache.exists()
        loaded = doc_vectors(ix, store, "tfidf_weighted", cache)
        assert (loaded.matrix == built.matrix).all()
        assert (loaded.absent == built.absent).all()

    def test_stale_cache_rebuilt(self, tmp_path):
        rng = np.random.default_rng(57)
        docs, _, vectors = small_world(rng, num_docs=15)
        ix = build_index(docs)
        store = _store(vectors)
        cache = tmp_path / "vectors.cache"
        doc_vectors(ix, store, "tfidf_weighted", cache)
        # different weighting must not reuse the cached file
        other = doc_vectors(ix, store, "mean", cache)
        reloaded = DocVectorSet.load(cache)
        assert reloaded.weighting == "mean"
        assert (reloaded.matrix == other.matrix).all()

    def test_run_with_two_stores_differs_only_in_scores(self):
        rng = np.random.default_rng(58)
        docs, _, vectors = small_world(rng, num_docs=20)
        ix = build_index(docs)
        topics = [Topic("1", "w00 w01")]
        run_a = run_awe_pipeline(topics, ix, _store(vectors),
                                 AweConfig(rerank_depth=0), 10, "a")
        shuffled = {w: [x * 2 for x in v] for w, v in vectors.items()}
        run_b = run_awe_pipeline(topics, ix, _store(shuffled),
                                 AweConfig(rerank_depth=0), 10, "b")
        assert run_a.tag != run_b.tag
        assert [d for d, _ in run_a.results["1"]] == \
            [d for d, _ in run_b.results["1"]]
