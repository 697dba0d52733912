"""Text normalization: regex cleansing, tokenization, stopword removal.

All pattern deletion (URLs, mentions, hashtags, symbols) happens in
``cleanse``; ``remove_stopwords`` is a pure dictionary filter.  Every
function here is pure and deterministic, so documents can be processed in
parallel without coordination.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path


class SentimentLabel(IntEnum):
    NEGATIVE = 0
    NEUTRAL = 1
    POSITIVE = 2


_LABEL_NAMES = {
    SentimentLabel.NEGATIVE: "negative",
    SentimentLabel.NEUTRAL: "neutral",
    SentimentLabel.POSITIVE: "positive",
}
_NAME_LABELS = {name: label for label, name in _LABEL_NAMES.items()}


def label_name(label: SentimentLabel) -> str:
    return _LABEL_NAMES[SentimentLabel(label)]


def parse_label(name: str) -> SentimentLabel:
    try:
        return _NAME_LABELS[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown sentiment label: {name!r}") from None


@dataclass(frozen=True)
class Document:
    """A cleaned, tokenized text unit flowing through the pipeline."""

    id: str
    raw_text: str
    clean_text: str
    tokens: tuple[str, ...]
    label: SentimentLabel | None = None


@dataclass(frozen=True)
class StopwordDict:
    """Lowercase single-word stopword set plus the name of its source."""

    words: frozenset[str] = field(default_factory=frozenset)
    source_name: str = ""


# Chunks containing "http" (covers https and truncated links) and t.co
# shortlinks are deleted wholesale; stray fragments would otherwise survive
# the symbol pass as fake words.
_URL_RE = re.compile(r"\S*http\S*|\S*\bt\.co/\S+")
_MENTION_RE = re.compile(r"@\w+")
_SYMBOL_RE = re.compile(r"[^a-z0-9\s-]")
_MULTI_HYPHEN_RE = re.compile(r"-{2,}")
_LONE_HYPHEN_RE = re.compile(r"(?<![a-z0-9])-|-(?![a-z0-9])")
_LONE_DIGITS_RE = re.compile(r"(?<![a-z0-9-])[0-9]+(?![a-z0-9-])")
_WS_RE = re.compile(r"\s+")


def cleanse(raw_text: str) -> str:
    """Normalize raw tweet text to lowercase alphanumeric words.

    Applies, in order: lowercase, URL removal, @mention removal, '#'
    stripping (the hashtag word survives), symbol removal keeping
    intra-word hyphens, standalone-digit removal (digits embedded in words
    like "covid19" survive), whitespace collapse, trim.  Idempotent.
    """
    text = raw_text.lower()
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    # '#' becomes a space, not the empty string: deleting it outright could
    # splice the surrounding fragments into a new "http" run that a second
    # pass would treat as a URL, breaking idempotence
    text = text.replace("#", " ")
    text = _SYMBOL_RE.sub(" ", text)
    text = _MULTI_HYPHEN_RE.sub(" ", text)
    text = _LONE_HYPHEN_RE.sub(" ", text)
    text = _LONE_DIGITS_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


def tokenize(clean_text: str) -> list[str]:
    """Split cleansed text on whitespace; never yields empty tokens."""
    return clean_text.split()


def remove_stopwords(tokens: list[str], stopwords: StopwordDict) -> list[str]:
    """Order-preserving filter dropping exact dictionary members."""
    return [t for t in tokens if t not in stopwords.words]


def load_stopwords(path: str | Path, source_name: str | None = None) -> StopwordDict:
    """Load a stopword dictionary: one word per line, '#' comments ignored.

    Entries are lowercased and trimmed; a line containing whitespace inside
    the word is rejected.
    """
    path = Path(path)
    words = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            word = line.strip()
            if not word or word.startswith("#"):
                continue
            if any(ch.isspace() for ch in word):
                raise ValueError(
                    f"{path}:{lineno}: stopword entries must be single words: {word!r}"
                )
            words.add(word.lower())
    return StopwordDict(words=frozenset(words), source_name=source_name or path.stem)


def make_document(
    doc_id: str,
    raw_text: str,
    stopwords: StopwordDict | None = None,
    label: SentimentLabel | None = None,
) -> Document:
    """Run the full cleanse/tokenize/stopword pipeline on one text."""
    clean = cleanse(raw_text)
    tokens = tokenize(clean)
    if stopwords is not None:
        tokens = remove_stopwords(tokens, stopwords)
    return Document(
        id=doc_id, raw_text=raw_text, clean_text=clean, tokens=tuple(tokens), label=label
    )
