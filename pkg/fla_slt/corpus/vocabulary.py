from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

from fla_slt.common.constants import BOS_TOKEN, EOS_TOKEN, PAD_TOKEN, SPECIAL_TOKENS, UNK_TOKEN
from fla_slt.common.exceptions import VocabularyError
from fla_slt.common.logger import LoggerFactory
from fla_slt.corpus.sign_video import Corpus

LOG = LoggerFactory.get_logger(__name__)


class Vocabulary:
    """Whitespace-level token alphabet. The four specials always occupy ids 0..3."""

    def __init__(self, tokens: Sequence[str]) -> None:
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise VocabularyError(f"vocabulary must start with {SPECIAL_TOKENS}, got {tuple(tokens[:4])}")
        if len(set(tokens)) != len(tokens):
            raise VocabularyError("vocabulary contains duplicate tokens")
        if len(tokens) < len(SPECIAL_TOKENS) + 1:
            raise VocabularyError(f"vocabulary needs at least {len(SPECIAL_TOKENS) + 1} tokens, got {len(tokens)}")
        self._id_to_token: Tuple[str, ...] = tuple(tokens)
        self._token_to_id: Dict[str, int] = {token: index for index, token in enumerate(tokens)}

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> Vocabulary:
        ordered: List[str] = list(SPECIAL_TOKENS)
        seen = set(ordered)
        for token in tokens:
            if token not in seen:
                seen.add(token)
                ordered.append(token)
        if len(ordered) == len(SPECIAL_TOKENS):
            # keeps the size >= 5 invariant for specials-only vocabularies
            ordered.append("<none>")
        return cls(ordered)

    @property
    def token_to_id(self) -> Mapping[str, int]:
        return self._token_to_id

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self._id_to_token

    @property
    def pad_id(self) -> int:
        return self._token_to_id[PAD_TOKEN]

    @property
    def bos_id(self) -> int:
        return self._token_to_id[BOS_TOKEN]

    @property
    def eos_id(self) -> int:
        return self._token_to_id[EOS_TOKEN]

    @property
    def unk_id(self) -> int:
        return self._token_to_id[UNK_TOKEN]

    @property
    def special_ids(self) -> Tuple[int, ...]:
        return tuple(self._token_to_id[token] for token in SPECIAL_TOKENS)

    @property
    def content_tokens(self) -> Tuple[str, ...]:
        return tuple(token for token in self._id_to_token[len(SPECIAL_TOKENS) :] if token != "<none>")

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: object) -> bool:
        return token in self._token_to_id

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._id_to_token == other._id_to_token

    def __hash__(self) -> int:
        return hash(self._id_to_token)

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(token, self.unk_id)

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self):
            raise VocabularyError(f"token id {token_id} outside vocabulary of size {len(self)}")
        return self._id_to_token[token_id]

    def save(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as vocabulary_file:
            vocabulary_file.write("\n".join(self._id_to_token) + "\n")

    @classmethod
    def load(cls, path: Path) -> Vocabulary:
        with open(path, "r", encoding="utf-8") as vocabulary_file:
            tokens = [line.rstrip("\n") for line in vocabulary_file if line.rstrip("\n")]
        return cls(tokens)


@dataclass(frozen=True)
class TokenSequence:
    ids: Tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.ids)


def tokenize(transcript: str, vocab: Vocabulary) -> TokenSequence:
    words = transcript.split()
    if not words:
        raise VocabularyError("cannot tokenize an empty transcript")
    return TokenSequence((vocab.bos_id, *(vocab.id_of(word) for word in words), vocab.eos_id))


def detokenize(ids: Iterable[int], vocab: Vocabulary) -> str:
    """Drop bos/pad, stop at the first eos."""
    words: List[str] = []
    for token_id in ids:
        token_id = int(token_id)
        if token_id == vocab.eos_id:
            break
        if token_id in (vocab.bos_id, vocab.pad_id):
            continue
        words.append(vocab.token_of(token_id))
    return " ".join(words)


def trim_vocabulary(base_vocab: Vocabulary, corpus: Union[Corpus, Iterable[str]]) -> Vocabulary:
    """Specials plus the train-split tokens known to ``base_vocab``, in first-occurrence order."""
    transcripts = corpus.transcripts("train") if isinstance(corpus, Corpus) else corpus
    kept: List[str] = []
    seen = set()
    dropped = set()
    for transcript in transcripts:
        for word in transcript.split():
            if word in seen:
                continue
            if word in base_vocab and word not in SPECIAL_TOKENS:
                seen.add(word)
                kept.append(word)
            else:
                dropped.add(word)
    if dropped:
        LOG.warning(f"{len(dropped)} train tokens are unknown to the base vocabulary and map to {UNK_TOKEN}")
    trimmed = Vocabulary.from_tokens(kept)
    LOG.info(f"trimmed vocabulary from {len(base_vocab)} to {len(trimmed)} tokens")
    return trimmed
