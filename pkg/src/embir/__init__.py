"""embir: batch information-retrieval experimentation engine."""

__version__ = "0.1.0"

from .analysis import AnalyzerConfig, analyze
from .embeddings import EmbeddingStore, load_embeddings
from .index import Index, build_index, merge_indexes
from .ingest import RawDocument, Topic, ingest_collection, ingest_topics
from .retrieval import (BM25Params, BooleanQuery, QLParams, execute_boolean,
                        score_bm25, score_ql)

__all__ = [
    "AnalyzerConfig", "analyze", "EmbeddingStore", "load_embeddings",
    "Index", "build_index", "merge_indexes", "RawDocument", "Topic",
    "ingest_collection", "ingest_topics", "BM25Params", "QLParams",
    "BooleanQuery", "execute_boolean", "score_bm25", "score_ql",
    "__version__",
]
