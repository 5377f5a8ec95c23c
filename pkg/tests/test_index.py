"""Index construction, statistics invariants, TF-IDF weights,
persistence round-trip and corruption handling, shard merging."""

import math

import numpy as np
import pytest

from conftest import make_docs, random_corpus
from embir.analysis import AnalyzerConfig
from embir.errors import (AnalyzerMismatchError, IndexFormatError,
                          IndexVersionError, IngestError)
from embir.index import Index, build_index, merge_indexes


class TestBuild:
    def test_hand_counted_example(self, tiny_index):
        ix = tiny_index
        assert ix.doc_freq("a") == 1
        assert ix.doc_freq("b") == 2
        assert ix.doc_freq("c") == 1
        assert ix.tf("a", "d1") == 2
        assert ix.avg_doc_len == 2.5
        assert ix.num_docs == 2
        assert ix.total_tokens == 5

    def test_empty_stream(self):
        ix = build_index([])
        assert ix.num_docs == 0
        assert ix.terms == []
        assert ix.avg_doc_len == 0.0

    def test_single_doc(self):
        ix = build_index(make_docs([("d", "x")]))
        assert ix.doc_freq("x") == 1
        assert ix.coll_freq("x") == 1
        assert ix.avg_doc_len == 1.0

    def test_duplicate_doc_id(self):
        with pytest.raises(IngestError, match="'d'"):
            build_index(make_docs([("d", "a"), ("d", "b")]))

    def test_title_is_indexed(self):
        from embir.ingest import RawDocument
        ix = build_index([RawDocument("d", "Title Word", "body", "jsonl")])
        assert ix.doc_freq("title") == 1
        assert ix.doc_freq("body") == 1

    def test_deterministic(self):
        docs, _ = random_corpus(np.random.default_rng(5), 30, 20)
        a = build_index(docs)._encode_payload()
        b = build_index(docs)._encode_payload()
        assert a == b


class TestStatsInvariants:
    def test_cf_sums_to_total_tokens(self):
        docs, _ = random_corpus(np.random.default_rng(11), 60, 30)
        ix = build_index(docs)
        assert int(ix.cf.sum()) == ix.total_tokens

    def test_df_bounds_and_cf_ge_df(self):
        docs, _ = random_corpus(np.random.default_rng(12), 60, 30)
        ix = build_index(docs)
        assert (ix.df >= 1).all()
        assert (ix.df <= ix.num_docs).all()
        assert (ix.cf >= ix.df).all()

    def test_postings_sorted_strictly_ascending(self):
        docs, _ = random_corpus(np.random.default_rng(13), 50, 25)
        ix = build_index(docs)
        for term in ix.terms:
            ordinals, tfs = ix.postings(term)
            assert (np.diff(ordinals) > 0).all()
            assert (tfs >= 1).all()


class TestTfidf:
    def test_single_doc_degenerate(self):
        ix = build_index(make_docs([("d", "x")]))
        assert ix.tfidf_weight("x", "d") == pytest.approx(1.0)

    def test_formula_example(self):
        docs = make_docs([("d1", "q q a"), ("d2", "a b"), ("d3", "b c")])
        ix = build_index(docs)
        # tf=2, df=1, N=3: 2 * (ln(4/2) + 1)
        assert ix.tfidf_weight("q", "d1") == \
            pytest.approx(2 * (math.log(2.0) + 1.0), rel=1e-12)

    def test_idf_monotone_in_df(self):
        docs = make_docs([("d1", "rare common"), ("d2", "common"),
                          ("d3", "common")])
        ix = build_index(docs)
        assert ix.idf_smooth("rare") > ix.idf_smooth("common")

    def test_absent_pair_raises(self, tiny_index):
        with pytest.raises(KeyError):
            tiny_index.tfidf_weight("c", "d1")

    def test_strictly_positive_for_all_indexed_pairs(self):
        docs, tokens = random_corpus(np.random.default_rng(14), 40, 20)
        ix = build_index(docs)
        for doc_id, toks in tokens.items():
            for term in set(toks):
                assert ix.tfidf_weight(term, doc_id) > 0.0


class TestPersistence:
    def test_round_trip_identical(self, tiny_index, tmp_path):
        path = tmp_path / "ix.bin"
        tiny_index.save(path)
        loaded = Index.load(path)
        assert loaded.doc_ids == tiny_index.doc_ids
        assert loaded.terms == tiny_index.terms
        assert (loaded.df == tiny_index.df).all()
        assert (loaded.cf == tiny_index.cf).all()
        assert (loaded.post_ordinals == tiny_index.post_ordinals).all()
        assert (loaded.post_tfs == tiny_index.post_tfs).all()
        assert loaded.total_tokens == tiny_index.total_tokens
        assert loaded.analyzer.fingerprint() == tiny_index.analyzer.fingerprint()

    def test_round_trip_random_corpus_bytes(self, tmp_path):
        docs, _ = random_corpus(np.random.default_rng(15), 80, 40)
        ix = build_index(docs)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        ix.save(p1)
        Index.load(p1).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_altered_magic_is_format_error(self, tiny_index, tmp_path):
        path = tmp_path / "ix.bin"
        tiny_index.save(path)
        data = bytearray(path.read_bytes())
        data[0] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(IndexFormatError):
            Index.load(path)

    def test_corrupt_payload_is_checksum_error(self, tiny_index, tmp_path):
        path = tmp_path / "ix.bin"
        tiny_index.save(path)
        data = bytearray(path.read_bytes())
        data[-1] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(IndexFormatError, match="checksum"):
            Index.load(path)

    def test_truncated_file_is_checksum_error(self, tiny_index, tmp_path):
        path = tmp_path / "ix.bin"
        tiny_index.save(path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(IndexFormatError):
            Index.load(path)

    def test_version_mismatch_names_versions(self, tiny_index, tmp_path):
        path = tmp_path / "ix.bin"
        tiny_index.save(path)
        data = bytearray(path.read_bytes())
        data[8] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(IndexVersionError, match="99"):
            Index.load(path)

    def test_unicode_terms_and_ids_survive(self, tmp_path):
        from embir.ingest import RawDocument
        ix = build_index([RawDocument("ддок-1", "", "naïve café 北京", "jsonl")])
        path = tmp_path / "ix.bin"
        ix.save(path)
        loaded = Index.load(path)
        assert loaded.doc_ids == ["ддок-1"]
        assert loaded.doc_freq("naïve") == 1
        assert loaded.doc_freq("北京") == 1

    def test_analyzer_config_survives(self, tmp_path):
        config = AnalyzerConfig(stopwords=frozenset({"the"}), stemmer="porter")
        ix = build_index(make_docs([("d", "the running dogs")]), config)
        path = tmp_path / "ix.bin"
        ix.save(path)
        loaded = Index.load(path)
        assert loaded.analyzer == config
        assert loaded.doc_freq("run") == 1
        assert loaded.doc_freq("the") == 0


class TestAnalyzerFingerprint:
    def test_mismatched_query_config_refused(self, tiny_index):
        with pytest.raises(AnalyzerMismatchError, match="fingerprint"):
            tiny_index.require_analyzer(AnalyzerConfig(lowercase=False))

    def test_matching_config_accepted(self, tiny_index):
        tiny_index.require_analyzer(AnalyzerConfig())


class TestMerge:
    def test_merge_equals_concatenated_build(self):
        rng = np.random.default_rng(16)
        docs, _ = random_corpus(rng, 50, 25)
        whole = build_index(docs)
        merged = merge_indexes([build_index(docs[:23]),
                                build_index(docs[23:])])
        assert merged._encode_payload() == whole._encode_payload()

    def test_merge_three_shards(self):
        docs, _ = random_corpus(np.random.default_rng(17), 60, 20)
        whole = build_index(docs)
        merged = merge_indexes([build_index(docs[:10]),
                                build_index(docs[10:40]),
                                build_index(docs[40:])])
        assert merged._encode_payload() == whole._encode_payload()

    def test_merge_rejects_duplicate_ids(self):
        a = build_index(make_docs([("d", "x")]))
        b = build_index(make_docs([("d", "y")]))
        with pytest.raises(IngestError):
            merge_indexes([a, b])

    def test_merge_rejects_mixed_analyzers(self):
        a = build_index(make_docs([("d1", "x")]), AnalyzerConfig())
        b = build_index(make_docs([("d2", "y")]),
                        AnalyzerConfig(lowercase=False))
        with pytest.raises(AnalyzerMismatchError):
            merge_indexes([a, b])
