"""Exception hierarchy shared across the toolkit.

Validation problems (bad files, bad configs, mismatched shapes of the user's
own making) raise ``ValidationError`` subclasses; numerical failures during
training or decoding raise ``NumericError``.  The CLI maps the former to exit
code 1 and the latter to exit code 2.
"""


class DocmtError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(DocmtError):
    """Bad input data or configuration."""


class CorpusFormatError(ValidationError):
    """A corpus file or in-memory corpus violates the corpus format."""


class AlignmentError(ValidationError):
    """Two sides of a parallel resource disagree in structure."""


class ConfigError(ValidationError):
    """An invalid configuration value or combination."""


class VocabError(ValidationError):
    """Tokenizer training or lookup failed validation."""


class ManifestError(ValidationError):
    """A run manifest is malformed or contains unknown keys."""


class NumericError(DocmtError):
    """A numerical failure (non-finite loss, degenerate optimization state)."""
