"""Embedding-based query expansion.

Each query term with an in-vocabulary embedding gets up to
``neighbors_per_term`` nearest neighbors above the cosine threshold;
alternative queries substitute any combination of terms by their
neighbors, and the original plus all alternatives are OR-combined into
one boolean query. Enumeration prefers minimal edits with the strongest
neighbors and is capped at ``max_alternatives`` alternative clauses.
"""

import itertools
from dataclasses import dataclass

from .analysis import analyze
from .errors import ConfigurationError
from .evaluation import RunFile, collect_run
from .retrieval import BooleanQuery, execute_boolean


@dataclass(frozen=True)
class ExpansionConfig:
    t: float = 0.75
    neighbors_per_term: int = 1
    max_alternatives: int = 64

    def __post_init__(self):
        if not -1.0 <= self.t <= 1.0:
            raise ConfigurationError(f"cosine threshold must be in [-1, 1], got {self.t}")
        if self.neighbors_per_term < 1:
            raise ConfigurationError("neighbors_per_term must be >= 1")
        if self.max_alternatives < 1:
            raise ConfigurationError("max_alternatives must be >= 1")


def term_candidates(query_terms, store, config: ExpansionConfig):
    """Neighbor lists per query position (empty for OOV / no neighbor)."""
    candidates = []
    for term in query_terms:
        found = store.nearest_neighbors(term, config.neighbors_per_term, config.t)
        candidates.append([w for w, _cos in found] if found else [])
    return candidates


def expand_query(query_terms, store, config: ExpansionConfig = ExpansionConfig()
                 ) -> BooleanQuery:
    """Build the OR query: clause 0 is the query itself, then alternative
    clauses ordered by (substitution count, leftmost substituted position,
    neighbor strength), truncated after ``max_alternatives``."""
    query_terms = list(query_terms)
    if not query_terms:
        raise ConfigurationError("cannot expand an empty query")
    candidates = term_candidates(query_terms, store, config)
    expandable = [i for i, c in enumerate(candidates) if c]
    clauses = [tuple(query_terms)]
    budget = config.max_alternatives
    for n_subs in range(1, len(expandable) + 1):
        if budget <= 0:
            break
        for positions in itertools.combinations(expandable, n_subs):
            if budget <= 0:
                break
            for picks in itertools.product(*(range(len(candidates[p]))
                                             for p in positions)):
                alt = list(query_terms)
                for p, pick in zip(positions, picks):
                    alt[p] = candidates[p][pick]
                clauses.append(tuple(alt))
                budget -= 1
                if budget <= 0:
                    break
    return BooleanQuery(tuple(clauses))


def run_expansion_pipeline(topics, index, store, config, scorer, params,
                           k, tag, mode="union", use_description=False,
                           backend=None) -> RunFile:
    """One expansion experiment: analyze, expand, OR-execute each topic."""

    def score_topic(topic):
        terms = analyze(topic.query_text(use_description), index.analyzer)
        if not terms:
            return []
        bq = expand_query(terms, store, config)
        return execute_boolean(bq, index, scorer=scorer, params=params,
                               k=k, mode=mode, backend=backend)

    return collect_run(topics, tag, score_topic)
