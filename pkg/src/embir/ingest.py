"""Collection and topic ingestion.

Parses TREC SGML, CACM, JSON-lines and directory-of-text collections
into a uniform streamed document model, and TREC/TSV topic files into
Topic records. Documents are yielded one at a time in file order so
memory stays bounded by the largest single document.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError, IngestError
from .util import decode_replacing, open_binary, open_text

log = logging.getLogger(__name__)

COLLECTION_FORMATS = ("trec_sgml", "cacm", "jsonl", "plain_dir")
TOPIC_FORMATS = ("trec_topics", "tsv")


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    title: str
    body: str
    source_format: str


@dataclass(frozen=True)
class Topic:
    topic_id: str
    title: str
    description: str = ""

    def query_text(self, use_description=False) -> str:
        if use_description and self.description:
            return f"{self.title} {self.description}"
        return self.title


@dataclass
class IngestStats:
    docs_read: int = 0
    decode_replacements: int = 0
    skipped_records: int = 0


class CollectionReader:
    """Iterable over a collection file/directory.

    Counters (``stats``) are populated as iteration proceeds and are
    complete once the iterator is exhausted.
    """

    def __init__(self, path, source_format: str):
        if source_format not in COLLECTION_FORMATS:
            raise ConfigurationError(
                f"unknown collection format {source_format!r}; "
                f"expected one of {COLLECTION_FORMATS}")
        self.path = Path(path)
        if not self.path.exists():
            raise ConfigurationError(f"collection path does not exist: {self.path}")
        self.source_format = source_format
        self.stats = IngestStats()
        self._seen_ids = set()

    def _files(self):
        """File formats accept either one file or a directory of files
        (read in sorted name order, recursively)."""
        if self.path.is_dir():
            return sorted(p for p in self.path.rglob("*") if p.is_file())
        return [self.path]

    def __iter__(self):
        if self.source_format == "plain_dir":
            sources = [None]
        else:
            sources = self._files()
        for source in sources:
            parser = {
                "jsonl": self._iter_jsonl,
                "trec_sgml": self._iter_trec,
                "cacm": self._iter_cacm,
                "plain_dir": self._iter_dir,
            }[self.source_format]
            iterator = parser() if source is None else parser(source)
            for doc in iterator:
                if doc.doc_id in self._seen_ids:
                    raise IngestError(
                        f"duplicate doc_id {doc.doc_id!r} in {self.path}")
                self._seen_ids.add(doc.doc_id)
                self.stats.docs_read += 1
                yield doc

    def _decode(self, raw: bytes) -> str:
        text, replaced = decode_replacing(raw)
        self.stats.decode_replacements += replaced
        return text

    def _skip(self, offset, reason):
        self.stats.skipped_records += 1
        log.error("%s: skipping record at byte offset %d: %s",
                  self.path, offset, reason)

    def _iter_jsonl(self, path):
        offset = 0
        with open_binary(path) as fh:
            for raw in fh:
                line_offset = offset
                offset += len(raw)
                line = self._decode(raw).strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    doc_id = str(rec["id"]).strip()
                    if not doc_id:
                        raise ValueError("empty id")
                    yield RawDocument(doc_id, str(rec.get("title", "")),
                                      str(rec.get("body", "")), "jsonl")
                except IngestError:
                    raise
                except (ValueError, KeyError, TypeError) as exc:
                    self._skip(line_offset, exc)

    def _iter_trec(self, path):
        offset = 0
        block = None
        block_offset = 0
        with open_binary(path) as fh:
            for raw in fh:
                line_offset = offset
                offset += len(raw)
                rest = self._decode(raw)
                while rest:
                    if block is None:
                        found = rest.upper().find("<DOC>")
                        if found < 0:
                            break
                        block = []
                        block_offset = line_offset
                        rest = rest[found + len("<DOC>"):]
                    else:
                        found = rest.upper().find("</DOC>")
                        if found < 0:
                            block.append(rest)
                            break
                        block.append(rest[:found])
                        doc = self._parse_trec_block("".join(block), block_offset)
                        if doc is not None:
                            yield doc
                        block = None
                        rest = rest[found + len("</DOC>"):]

    def _parse_trec_block(self, text, offset):
        doc_id = _extract_tag(text, "DOCNO")
        if doc_id is None or not doc_id.strip():
            self._skip(offset, "missing <DOCNO>")
            return None
        title = _extract_tag(text, "HEADLINE")
        if title is None:
            title = _extract_tag(text, "TITLE")
        remainder = _remove_tag(text, "DOCNO")
        for tag in ("HEADLINE", "TITLE"):
            remainder = _remove_tag(remainder, tag)
        body = _strip_tags(remainder).strip()
        return RawDocument(doc_id.strip(), _strip_tags(title or "").strip(),
                           body, "trec_sgml")

    def _iter_cacm(self, path):
        # CACM ".all" records: .I id, then dot-flagged fields; title (.T)
        # and abstract (.W) are what we keep, concatenated into body.
        offset = 0
        rec = None

        def finish(r):
            title = " ".join(r["T"]).strip()
            abstract = " ".join(r["W"]).strip()
            body = "\n".join(part for part in (title, abstract) if part)
            return RawDocument(r["id"], title, body, "cacm")

        with open_binary(path) as fh:
            for raw in fh:
                line_offset = offset
                offset += len(raw)
                line = self._decode(raw).rstrip("\n")
                if line.startswith(".I"):
                    if rec is not None:
                        yield finish(rec)
                    doc_id = line[2:].strip()
                    if not doc_id:
                        self._skip(line_offset, "missing id after .I")
                        rec = None
                        continue
                    rec = {"id": doc_id, "T": [], "W": [], "field": None}
                elif rec is None:
                    continue
                elif line.startswith("."):
                    flag = line[1:2]
                    rec["field"] = flag if flag in ("T", "W") else None
                elif rec["field"]:
                    rec[rec["field"]].append(line.strip())
        if rec is not None:
            yield finish(rec)

    def _iter_dir(self):
        if not self.path.is_dir():
            raise ConfigurationError(f"plain_dir format needs a directory: {self.path}")
        for entry in sorted(p for p in self.path.iterdir() if p.is_file()):
            raw = entry.read_bytes()
            yield RawDocument(entry.name, "", self._decode(raw), "plain_dir")


def _extract_tag(text, tag):
    lower = text.upper()
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    start = lower.find(open_tag)
    if start < 0:
        return None
    start += len(open_tag)
    end = lower.find(close_tag, start)
    if end < 0:
        end = len(text)
    return text[start:end]


def _remove_tag(text, tag):
    lower = text.upper()
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    start = lower.find(open_tag)
    if start < 0:
        return text
    end = lower.find(close_tag, start)
    end = len(text) if end < 0 else end + len(close_tag)
    return text[:start] + text[end:]


def _strip_tags(text):
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "<":
            close = text.find(">", i)
            if close < 0:
                out.append(text[i:])
                break
            i = close + 1
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def ingest_collection(path, source_format: str) -> CollectionReader:
    """Open a collection for streaming; counts live on ``reader.stats``."""
    return CollectionReader(path, source_format)


def write_jsonl(docs, path):
    """Serialize documents to JSON-lines (the round-trippable format)."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(
                {"id": doc.doc_id, "title": doc.title, "body": doc.body},
                ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def ingest_topics(path, topics_format: str):
    """Parse a topic file into a list of Topic, in file order."""
    if topics_format not in TOPIC_FORMATS:
        raise ConfigurationError(
            f"unknown topics format {topics_format!r}; "
            f"expected one of {TOPIC_FORMATS}")
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"topics path does not exist: {path}")
    if topics_format == "tsv":
        return _topics_tsv(path)
    return _topics_trec(path)


def _topics_tsv(path):
    topics = []
    with open_text(path, errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            topic_id, _, title = line.partition("\t")
            topic_id = topic_id.strip()
            title = title.strip()
            if not topic_id or not title:
                log.error("%s:%d: topic missing id or title, skipped", path, lineno)
                continue
            topics.append(Topic(topic_id, title))
    return topics


def _topics_trec(path):
    with open_text(path, errors="replace") as fh:
        text = fh.read()
    topics = []
    lower = text.lower()
    pos = 0
    while True:
        start = lower.find("<top>", pos)
        if start < 0:
            break
        end = lower.find("</top>", start)
        end = len(text) if end < 0 else end
        block = text[start:end]
        pos = end + len("</top>")
        topic = _parse_trec_topic(block)
        if topic is None:
            log.error("%s: topic block without number/title, skipped", path)
        else:
            topics.append(topic)
    return topics


def _parse_trec_topic(block):
    num = _topic_field(block, "num")
    title = _topic_field(block, "title")
    desc = _topic_field(block, "desc") or ""
    if num is None or title is None:
        return None
    num = num.replace("Number:", "").strip()
    title = title.replace("Topic:", "").strip()
    desc = desc.replace("Description:", "").strip()
    if not num or not title:
        return None
    return Topic(num, title, desc)


def _topic_field(block, name):
    lower = block.lower()
    start = lower.find(f"<{name}>")
    if start < 0:
        return None
    start += len(name) + 2
    # field runs until the next tag
    end = block.find("<", start)
    end = len(block) if end < 0 else end
    return block[start:end].strip()
