"""Exception hierarchy.

ConfigurationError maps to CLI exit code 1 (usage), everything else
derived from EmbirError maps to exit code 2 (data).
"""


class EmbirError(Exception):
    """Base class for all embir errors."""


class ConfigurationError(EmbirError):
    """Bad flags, unknown format names, missing input paths."""


class IngestError(EmbirError):
    """Collection/topic parsing problems that abort ingestion."""


class IndexError_(EmbirError):
    """Problems with index construction or use."""


class IndexFormatError(IndexError_):
    """Corrupt index file: bad magic, checksum mismatch, truncation."""


class IndexVersionError(IndexFormatError):
    """On-disk index version is not supported by this build."""


class AnalyzerMismatchError(IndexError_):
    """Query analyzed under a different configuration than the index."""


class EmbeddingError(EmbirError):
    """Unusable embedding file."""


class LexiconError(EmbirError):
    """Unusable affect lexicon file."""


class RunFormatError(EmbirError):
    """Malformed run file line (message carries the line number)."""


class QrelsFormatError(EmbirError):
    """Malformed qrels line or duplicate judgment."""
