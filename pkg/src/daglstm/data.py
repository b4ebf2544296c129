"""Corpus loading, tokenization, embeddings, and split handling.

Conversations arrive as JSON lines, one conversation per line:

    {"id": "<game>", "utterances": [
        {"participant": "<p>", "text": "<raw>", "label": "Offer"}, ...]}

The ``label`` field is optional on prediction inputs. Embeddings use the
plain GloVe text format, one ``word v1 ... vd`` per line.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

LABELS = ("Accept", "Counteroffer", "Offer", "Other", "Refusal")
LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}
DISCARDED_LABEL = "Preference"

UNK_TOKEN = "<unk>"
EMPTY_TOKEN = "<empty>"


class CorpusFormatError(ValueError):
    """A conversation file does not match the JSONL schema."""


class EmbeddingFormatError(ValueError):
    """An embedding file is malformed."""


@dataclass
class Utterance:
    index: int  # 1-based position within the conversation
    participant: str
    text: str
    tokens: list[str]
    gold_label: Optional[str] = None


@dataclass
class Conversation:
    id: str
    utterances: list[Utterance]

    def __len__(self) -> int:
        return len(self.utterances)

    def participants(self) -> list[str]:
        return [u.participant for u in self.utterances]

    def labels(self) -> list[Optional[str]]:
        return [u.gold_label for u in self.utterances]


@dataclass
class CorpusSplits:
    train: list[Conversation]
    dev: list[Conversation]
    test: list[Conversation]
    seed: int


# Tokenization approximates the usual PTB conventions with an ordered rule
# list: URLs and emoticons are protected, contractions split off, standard
# punctuation separated. Known divergences from the reference tokenizer are
# listed in tests/fixtures/ptb_divergences.txt. Case is preserved.

_PRESPLITS = [
    (re.compile(r"\b(can)(not)\b", re.IGNORECASE), r"\1 \2"),
    (re.compile(r"\b(gon)(na)\b", re.IGNORECASE), r"\1 \2"),
    (re.compile(r"\b(got)(ta)\b", re.IGNORECASE), r"\1 \2"),
    (re.compile(r"\b(wan)(na)\b", re.IGNORECASE), r"\1 \2"),
    (re.compile(r"\b(lem)(me)\b", re.IGNORECASE), r"\1 \2"),
    (re.compile(r"\b(gim)(me)\b", re.IGNORECASE), r"\1 \2"),
    (re.compile(r"(\w)(n't)\b", re.IGNORECASE), r"\1 \2"),
]

_TOKEN_RE = re.compile(
    r"""
    https?://[^\s]+ | www\.[^\s]+          # URLs stay whole
  | <unk> | <empty>                        # sentinels pass through
  | \.\.\.+                                # ellipsis
  | \d+(?::\d+)+                           # times and scores, 8:30, 2:1
  | \d+(?:[.,]\d+)+                        # decimals and 1,000 groupings
  | [:;=8xX][-'^o]?[)(\[\]DPpOoSs/\\|*3]+  # western emoticons, :D ;) :'( x(
  | <3+                                    # hearts
  | n't\b | '(?:s|re|m|ll|d|ve|em|t)\b     # contraction suffixes
  | \d+                                    # bare numbers
  | \w+(?:-\w+)*                           # words, hyphenated words
  | \S                                     # any other symbol, one per token
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[str]:
    """Deterministic, total tokenizer; never raises on any input string."""
    for pattern, repl in _PRESPLITS:
        text = pattern.sub(repl, text)
    return _TOKEN_RE.findall(text)


def _parse_utterance(obj, conv_no: int, position: int,
                     drop_preference: bool) -> Optional[Utterance]:
    if not isinstance(obj, dict):
        raise CorpusFormatError(
            f"conversation {conv_no}: utterance {position} is not an object")
    participant = obj.get("participant")
    if not isinstance(participant, str) or not participant:
        raise CorpusFormatError(
            f"conversation {conv_no}: utterance {position} needs a nonempty "
            f"'participant'")
    text = obj.get("text")
    if not isinstance(text, str):
        raise CorpusFormatError(
            f"conversation {conv_no}: utterance {position} needs a 'text' string")
    label = obj.get("label")
    if label is not None:
        if label == DISCARDED_LABEL:
            if drop_preference:
                return None
        elif label not in LABEL_INDEX:
            raise CorpusFormatError(
                f"conversation {conv_no}: unknown label {label!r}")
    tokens = tokenize(text) or [EMPTY_TOKEN]
    return Utterance(index=0, participant=participant, text=text,
                     tokens=tokens, gold_label=label)


def parse_conversation(obj, conv_no: int = 0,
                       drop_preference: bool = True) -> tuple[Conversation, int]:
    """Build one Conversation from a decoded JSON object.

    Returns the conversation and the number of Preference-labeled utterances
    that were dropped (prediction inputs keep them so output lines stay
    aligned with input lines).
    """
    if not isinstance(obj, dict) or "id" not in obj or "utterances" not in obj:
        raise CorpusFormatError(
            f"conversation {conv_no}: expected an object with 'id' and 'utterances'")
    if not isinstance(obj["utterances"], list):
        raise CorpusFormatError(f"conversation {conv_no}: 'utterances' must be a list")
    utterances = []
    dropped = 0
    for pos, raw in enumerate(obj["utterances"], 1):
        utt = _parse_utterance(raw, conv_no, pos, drop_preference)
        if utt is None:
            dropped += 1
            continue
        utt.index = len(utterances) + 1
        utterances.append(utt)
    return Conversation(id=str(obj["id"]), utterances=utterances), dropped


def load_conversations(path) -> list[Conversation]:
    """Read a JSONL corpus; Preference-labeled utterances are dropped."""
    conversations = []
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(
                    f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            try:
                conv, n = parse_conversation(obj, conv_no=lineno)
            except CorpusFormatError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc
            dropped += n
            conversations.append(conv)
    if dropped:
        log.warning("dropped %d %s-labeled utterances", dropped, DISCARDED_LABEL)
    return conversations


def write_conversations(conversations: Iterable[Conversation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for conv in conversations:
            obj = {
                "id": conv.id,
                "utterances": [
                    {"participant": u.participant, "text": u.text,
                     **({"label": u.gold_label} if u.gold_label else {})}
                    for u in conv.utterances
                ],
            }
            fh.write(json.dumps(obj) + "\n")


def corpus_vocabulary(conversations: Iterable[Conversation]) -> set[str]:
    vocab = set()
    for conv in conversations:
        for utt in conv.utterances:
            vocab.update(utt.tokens)
    return vocab


@dataclass
class EmbeddingTable:
    """Word-to-row map over a dense [V, d] matrix with a reserved <unk> row.

    Lookups fall back to the lowercased form before <unk>, since published
    embedding vocabularies are mostly lowercase.
    """

    words: list[str]  # includes UNK_TOKEN as the final entry
    matrix: np.ndarray
    trainable: bool = False
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.words) != self.matrix.shape[0]:
            raise EmbeddingFormatError(
                f"{len(self.words)} words vs matrix {self.matrix.shape}")
        self.index = {w: i for i, w in enumerate(self.words)}

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def unk_row(self) -> int:
        return self.index[UNK_TOKEN]

    def row_for(self, word: str) -> int:
        row = self.index.get(word)
        if row is None:
            row = self.index.get(word.lower())
        return self.unk_row if row is None else row


def load_embeddings(path, vocab_words: Iterable[str], seed: int = 0) -> EmbeddingTable:
    """Load the subset of an embedding file covering the corpus vocabulary.

    Only rows for corpus words (or their lowercased forms) are retained.
    The <unk> row is initialized Uniform(-0.01, 0.01) from ``seed``.
    """
    vocab_words = set(vocab_words)
    needed = vocab_words | {w.lower() for w in vocab_words}
    words: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    dim = None
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected 'word v1 ... vd'")
            word, vec = parts[0], parts[1:]
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dim} values, got {len(vec)}")
            if word not in needed:
                continue
            if word in seen:
                duplicates += 1
                continue  # first occurrence wins
            try:
                values = [float(v) for v in vec]
            except ValueError as exc:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: non-numeric value") from exc
            seen.add(word)
            words.append(word)
            rows.append(values)
    if dim is None:
        raise EmbeddingFormatError(f"{path}: no embedding rows")
    if duplicates:
        log.warning("embedding file had %d duplicated words; kept the first "
                    "occurrence of each", duplicates)
    rng = np.random.default_rng(seed)
    unk = rng.uniform(-0.01, 0.01, size=dim)
    matrix = np.vstack([np.asarray(rows, dtype=np.float64).reshape(len(rows), dim),
                        unk[None, :]]) if rows else unk[None, :]
    return EmbeddingTable(words=words + [UNK_TOKEN], matrix=matrix)


def random_embeddings(vocab_words: Sequence[str], dim: int, seed: int = 0,
                      scale: float = 0.5) -> EmbeddingTable:
    """Random Uniform(-scale, scale) table for corpora without pretrained vectors."""
    words = sorted(set(vocab_words) - {UNK_TOKEN})
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-scale, scale, size=(len(words) + 1, dim))
    return EmbeddingTable(words=words + [UNK_TOKEN], matrix=matrix)


def write_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, row in zip(table.words, table.matrix):
            if word == UNK_TOKEN:
                continue
            fh.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")


def apply_word_dropout(tokens: Sequence[str], rate: float,
                       rng: np.random.Generator) -> list[str]:
    """Independently replace each token by <unk> with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"word dropout rate must be in [0, 1], got {rate}")
    if rate == 0.0:
        return list(tokens)
    return [UNK_TOKEN if rng.random() < rate else tok for tok in tokens]


def split_corpus(corpus: Sequence[Conversation], seed: int,
                 counts: tuple[int, int, int]) -> CorpusSplits:
    """Seeded shuffle of whole conversations, then prefix assignment."""
    n_train, n_dev, n_test = counts
    if n_train + n_dev + n_test != len(corpus):
        raise ValueError(
            f"split counts {counts} do not sum to corpus size {len(corpus)}")
    order = np.random.default_rng(seed).permutation(len(corpus))
    shuffled = [corpus[i] for i in order]
    return CorpusSplits(
        train=shuffled[:n_train],
        dev=shuffled[n_train:n_train + n_dev],
        test=shuffled[n_train + n_dev:],
        seed=seed,
    )
