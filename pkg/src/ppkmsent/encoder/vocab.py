"""Token vocabulary and fixed-length input formatting for the encoder."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ppkmsent.errors import ConfigError
from ppkmsent.preprocess import Document

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
SEP_ID = 3

RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)


@dataclass(frozen=True)
class TokenVocab:
    """Immutable token-to-id mapping with the four reserved entries first."""

    token_to_id: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for expected_id, token in enumerate(RESERVED_TOKENS):
            if self.token_to_id.get(token) != expected_id:
                raise ConfigError(
                    f"token vocabulary must map {token!r} to id {expected_id}"
                )
        ids = sorted(self.token_to_id.values())
        if ids != list(range(len(ids))):
            raise ConfigError("token vocabulary ids must be contiguous from 0")

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def tokens_in_id_order(self) -> list[str]:
        return sorted(self.token_to_id, key=self.token_to_id.__getitem__)

    def to_dict(self) -> dict:
        return {"tokens": self.tokens_in_id_order()}

    @classmethod
    def from_dict(cls, data: dict) -> "TokenVocab":
        tokens = data.get("tokens")
        if not isinstance(tokens, list):
            raise ConfigError("token vocabulary payload must hold a token list")
        return cls(token_to_id={tok: i for i, tok in enumerate(tokens)})


def build_token_vocab(
    documents: Iterable[Document],
    max_size: int | None = None,
    min_count: int = 1,
) -> TokenVocab:
    """Build a vocabulary from document tokens.

    Content tokens are ranked by descending corpus frequency with ties broken
    lexicographically, and receive ids after the four reserved entries.
    """
    if min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {min_count}")
    if max_size is not None and max_size < len(RESERVED_TOKENS):
        raise ConfigError(
            f"max_size must leave room for the {len(RESERVED_TOKENS)} "
            f"reserved tokens, got {max_size}"
        )
    counts: Counter[str] = Counter()
    for doc in documents:
        counts.update(doc.tokens)
    for reserved in RESERVED_TOKENS:
        counts.pop(reserved, None)
    ranked = sorted(
        (tok for tok, n in counts.items() if n >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    if max_size is not None:
        ranked = ranked[: max_size - len(RESERVED_TOKENS)]
    token_to_id = {tok: i for i, tok in enumerate(RESERVED_TOKENS)}
    for offset, tok in enumerate(ranked):
        token_to_id[tok] = len(RESERVED_TOKENS) + offset
    return TokenVocab(token_to_id=token_to_id)


def format_input(
    tokens: Sequence[str],
    vocab: TokenVocab,
    max_sequence_length: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Convert a token sequence into fixed-length id and mask arrays.

    Layout: ``[CLS]``, then content tokens truncated to ``max_sequence_length
    - 2``, then ``[SEP]``, then ``[PAD]`` up to the full length.  The mask is
    1.0 at every non-pad position and 0.0 at pad positions.
    """
    if max_sequence_length < 3:
        raise ConfigError(
            f"max_sequence_length must be >= 3, got {max_sequence_length}"
        )
    content = [vocab.lookup(tok) for tok in tokens[: max_sequence_length - 2]]
    ids = [CLS_ID, *content, SEP_ID]
    pad_count = max_sequence_length - len(ids)
    mask = [1.0] * len(ids) + [0.0] * pad_count
    ids.extend([PAD_ID] * pad_count)
    return (
        np.asarray(ids, dtype=np.int64),
        np.asarray(mask, dtype=np.float64),
    )
