"""Shared tokenization/normalization.

Every pipeline (indexing, expansion, AWE, affect scoring) analyzes text
through the same configuration so they all see identical terms. The
pipeline order is: tokenize -> lowercase -> stopword filter -> stem.
"""

import re
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .porter import stem as porter_stem
from .util import open_text, sha256_hex

# Maximal runs of Unicode letters/digits. [^\W_] is word characters
# minus underscore, so hyphens/punctuation split tokens.
TOKEN_PATTERN = r"[^\W_]+"
_TOKEN_RE = re.compile(TOKEN_PATTERN, re.UNICODE)

STEMMERS = ("none", "porter")


@dataclass(frozen=True)
class AnalyzerConfig:
    lowercase: bool = True
    stopwords: frozenset = field(default_factory=frozenset)
    stemmer: str = "none"
    token_pattern: str = TOKEN_PATTERN

    def __post_init__(self):
        if self.stemmer not in STEMMERS:
            raise ConfigurationError(
                f"unknown stemmer {self.stemmer!r}; expected one of {STEMMERS}")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def canonical(self) -> str:
        stop = sha256_hex("\n".join(sorted(self.stopwords))) if self.stopwords else "-"
        return (f"lowercase={str(self.lowercase).lower()};"
                f"stopwords={stop};stemmer={self.stemmer};"
                f"pattern={self.token_pattern}")

    def fingerprint(self) -> str:
        return sha256_hex(self.canonical())


def load_stopwords(path) -> frozenset:
    """One word per line, UTF-8, '#' starts a comment."""
    words = set()
    with open_text(path) as fh:
        for line in fh:
            word = line.split("#", 1)[0].strip()
            if word:
                words.add(word.lower())
    return frozenset(words)


def analyze(text: str, config: AnalyzerConfig = AnalyzerConfig()):
    """Tokenize ``text`` into a list of terms. Total and deterministic."""
    if not text:
        return []
    pattern = _TOKEN_RE if config.token_pattern == TOKEN_PATTERN \
        else re.compile(config.token_pattern, re.UNICODE)
    tokens = pattern.findall(text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.stopwords:
        tokens = [t for t in tokens if t not in config.stopwords]
    if config.stemmer == "porter":
        tokens = [porter_stem(t) for t in tokens]
    return tokens
