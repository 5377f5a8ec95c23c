"""TREC-style run files, qrels, and the NDCG/MAP metrics.

Run lines: ``topic_id Q0 doc_id rank score tag`` with rank starting at 1
and scores printed to 6 decimal places. Qrels lines: ``topic 0 doc grade``.
Negative grades are clamped to 0 with a warning (trec_eval convention).
"""

import logging
import math
from dataclasses import dataclass, field

from .errors import EmbirError, QrelsFormatError, RunFormatError
from .util import open_text

log = logging.getLogger(__name__)

METRICS = ("map", "ndcg")


@dataclass
class RunFile:
    tag: str
    # topic_id -> [(doc_id, score)] in rank order; insertion order is
    # topic order and is preserved on write.
    results: dict = field(default_factory=dict)
    skipped_topics: list = field(default_factory=list)
    fallback_topics: list = field(default_factory=list)

    def add_topic(self, topic_id, ranked):
        self.results[topic_id] = list(ranked)


@dataclass
class Qrels:
    # (topic_id, doc_id) -> grade
    grades: dict = field(default_factory=dict)
    clamped: int = 0

    def topic_grades(self, topic_id):
        return {doc: g for (t, doc), g in self.grades.items() if t == topic_id}

    def topics(self):
        return {t for t, _ in self.grades}


def collect_run(topics, tag, score_topic) -> RunFile:
    """Run ``score_topic(topic)`` per topic; failures are recorded and
    skipped so one bad topic does not abort the run."""
    run = RunFile(tag=tag)
    for topic in topics:
        try:
            run.add_topic(topic.topic_id, score_topic(topic))
        except EmbirError as exc:
            run.skipped_topics.append(topic.topic_id)
            log.error("topic %s failed, skipped: %s", topic.topic_id, exc)
    return run


def write_run(run: RunFile, path):
    with open(path, "w", encoding="utf-8") as fh:
        for topic_id, ranked in run.results.items():
            for rank, (doc_id, score) in enumerate(ranked, 1):
                fh.write(f"{topic_id} Q0 {doc_id} {rank} {score:.6f} {run.tag}\n")


def read_run(path) -> RunFile:
    run = RunFile(tag="")
    last_rank = {}
    last_score = {}
    seen_docs = {}
    with open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise RunFormatError(
                    f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            topic_id, _q0, doc_id, rank_s, score_s, tag = parts
            try:
                rank = int(rank_s)
                score = float(score_s)
            except ValueError as exc:
                raise RunFormatError(f"{path}:{lineno}: {exc}") from exc
            run.tag = tag
            expected = last_rank.get(topic_id, 0) + 1
            if rank != expected:
                raise RunFormatError(
                    f"{path}:{lineno}: rank {rank} for topic {topic_id} is not "
                    f"contiguous (expected {expected})")
            docs = seen_docs.setdefault(topic_id, set())
            if doc_id in docs:
                raise RunFormatError(
                    f"{path}:{lineno}: duplicate doc {doc_id} for topic {topic_id}")
            docs.add(doc_id)
            if topic_id in last_score and score > last_score[topic_id]:
                raise RunFormatError(
                    f"{path}:{lineno}: score increases with rank for topic {topic_id}")
            last_rank[topic_id] = rank
            last_score[topic_id] = score
            run.results.setdefault(topic_id, []).append((doc_id, score))
    return run


def read_qrels(path) -> Qrels:
    qrels = Qrels()
    with open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise QrelsFormatError(
                    f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            topic_id, _iter, doc_id, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError as exc:
                raise QrelsFormatError(f"{path}:{lineno}: {exc}") from exc
            if grade < 0:
                log.warning("%s:%d: negative grade %d clamped to 0",
                            path, lineno, grade)
                grade = 0
                qrels.clamped += 1
            key = (topic_id, doc_id)
            if key in qrels.grades:
                raise QrelsFormatError(
                    f"{path}:{lineno}: duplicate judgment for topic "
                    f"{topic_id}, doc {doc_id}")
            qrels.grades[key] = grade
    return qrels


@dataclass
class MetricResult:
    per_topic: dict
    mean: float
    # topics present in the run but not judged / judged with no positive grade
    unjudged_topics: list = field(default_factory=list)
    excluded_topics: list = field(default_factory=list)


def _common_topics(run: RunFile, qrels: Qrels):
    judged = qrels.topics()
    kept, unjudged = [], []
    for topic_id in run.results:
        if topic_id in judged:
            kept.append(topic_id)
        else:
            unjudged.append(topic_id)
            log.warning("topic %s not in qrels, skipped", topic_id)
    return kept, unjudged


def eval_map(run: RunFile, qrels: Qrels, depth: int = 1000) -> MetricResult:
    """Average precision per topic (grade >= 1 counts as relevant) and
    the mean over judged topics with at least one relevant document."""
    if not run.results:
        raise RunFormatError("cannot evaluate an empty run")
    kept, unjudged = _common_topics(run, qrels)
    per_topic = {}
    excluded = []
    for topic_id in kept:
        grades = qrels.topic_grades(topic_id)
        total_rel = sum(1 for g in grades.values() if g >= 1)
        if total_rel == 0:
            excluded.append(topic_id)
            continue
        hits = 0
        precision_sum = 0.0
        for i, (doc_id, _score) in enumerate(run.results[topic_id][:depth], 1):
            if grades.get(doc_id, 0) >= 1:
                hits += 1
                precision_sum += hits / i
        per_topic[topic_id] = precision_sum / total_rel
    mean = math.fsum(per_topic.values()) / len(per_topic) if per_topic else 0.0
    return MetricResult(per_topic, mean, unjudged, excluded)


def eval_ndcg(run: RunFile, qrels: Qrels, depth: int = 1000) -> MetricResult:
    """NDCG with gain = raw grade and discount log2(rank + 1)."""
    if not run.results:
        raise RunFormatError("cannot evaluate an empty run")
    kept, unjudged = _common_topics(run, qrels)
    per_topic = {}
    excluded = []
    for topic_id in kept:
        grades = qrels.topic_grades(topic_id)
        ideal = sorted(grades.values(), reverse=True)[:depth]
        idcg = math.fsum(g / math.log2(i + 1) for i, g in enumerate(ideal, 1))
        if idcg == 0.0:
            excluded.append(topic_id)
            continue
        dcg = math.fsum(
            grades.get(doc_id, 0) / math.log2(i + 1)
            for i, (doc_id, _score) in enumerate(run.results[topic_id][:depth], 1))
        per_topic[topic_id] = dcg / idcg
    mean = math.fsum(per_topic.values()) / len(per_topic) if per_topic else 0.0
    return MetricResult(per_topic, mean, unjudged, excluded)


EVALUATORS = {"map": eval_map, "ndcg": eval_ndcg}
