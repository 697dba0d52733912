"""Bundled dictionaries: stopwords and sentiment lexicons."""

from __future__ import annotations

from pathlib import Path

from ppkmsent.errors import ConfigError
from ppkmsent.lexicon import LexiconDict, load_lexicon
from ppkmsent.preprocess import StopwordDict, load_stopwords

_DATA_DIR = Path(__file__).resolve().parent

STOPWORDS_FILE = "stopwords_id.txt"
LEXICON_POSITIVE_FILE = "lexicon_positive.txt"
LEXICON_NEGATIVE_FILE = "lexicon_negative.txt"
LEXICON_SEED_POSITIVE_FILE = "lexicon_seed_positive.txt"
LEXICON_SEED_NEGATIVE_FILE = "lexicon_seed_negative.txt"


def data_path(name: str) -> Path:
    """Absolute path of a bundled data file."""
    path = _DATA_DIR / name
    if not path.is_file():
        raise ConfigError(f"no bundled data file named {name!r}")
    return path


def default_stopwords() -> StopwordDict:
    """The bundled Indonesian stopword snapshot."""
    return load_stopwords(data_path(STOPWORDS_FILE), source_name="bundled-id-snapshot")


def default_lexicon() -> LexiconDict:
    """The bundled sentiment lexicon (seed lists plus extension)."""
    return load_lexicon(
        data_path(LEXICON_POSITIVE_FILE), data_path(LEXICON_NEGATIVE_FILE)
    )


def seed_lexicon() -> LexiconDict:
    """Only the 12 + 12 phrase seed lists that the bundled lexicon extends."""
    return load_lexicon(
        data_path(LEXICON_SEED_POSITIVE_FILE), data_path(LEXICON_SEED_NEGATIVE_FILE)
    )
