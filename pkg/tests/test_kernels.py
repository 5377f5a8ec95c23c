"""Kernel backend parity: the compiled extension and the numpy fallback
must produce the same scores (to float noise) and identical rankings."""

import numpy as np
import pytest

from conftest import random_corpus
from embir import kernels
from embir.index import build_index
from embir.retrieval import score_bm25, score_ql

HAS_C = "c" in kernels.available_backends()

pytestmark = pytest.mark.skipif(not HAS_C,
                                reason="compiled kernels not built")


def _corpus(seed):
    rng = np.random.default_rng(seed)
    docs, tokens = random_corpus(rng, 120, 40)
    return build_index(docs), tokens, rng


class TestBackendParity:
    @pytest.mark.parametrize("scorer", [score_bm25, score_ql])
    def test_scores_and_rankings_agree(self, scorer):
        ix, tokens, rng = _corpus(81)
        vocab = sorted({t for toks in tokens.values() for t in toks})
        for _ in range(30):
            query = [vocab[int(i)]
                     for i in rng.integers(0, len(vocab), int(rng.integers(1, 5)))]
            c_ranked = scorer(query, ix, backend="c")
            py_ranked = scorer(query, ix, backend="py")
            assert [d for d, _ in c_ranked] == [d for d, _ in py_ranked]
            for (_, a), (_, b) in zip(c_ranked, py_ranked):
                assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    def test_bm25_bit_identical_across_backends(self):
        # The bm25 path uses no libm calls inside the loop, so both
        # backends evaluate the identical IEEE expression tree.
        ix, tokens, rng = _corpus(82)
        vocab = sorted({t for toks in tokens.values() for t in toks})
        for _ in range(20):
            query = [vocab[int(i)] for i in rng.integers(0, len(vocab), 3)]
            c_ranked = score_bm25(query, ix, backend="c")
            py_ranked = score_bm25(query, ix, backend="py")
            assert c_ranked == py_ranked

    def test_each_backend_deterministic(self):
        ix, tokens, _ = _corpus(83)
        for backend in kernels.available_backends():
            a = score_ql(["w00", "w01"], ix, backend=backend)
            b = score_ql(["w00", "w01"], ix, backend=backend)
            assert a == b


class TestBackendSelection:
    def test_available_backends_contains_py(self):
        assert "py" in kernels.available_backends()

    def test_get_backend_by_name(self):
        assert kernels.get_backend("py").BACKEND == "python"
        if HAS_C:
            assert kernels.get_backend("c").BACKEND == "c"

    def test_unknown_backend_rejected(self):
        with pytest.raises(RuntimeError):
            kernels.get_backend("fortran")

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("EMBIR_KERNELS", "py")
        assert kernels.get_backend().BACKEND == "python"
