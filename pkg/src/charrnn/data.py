"""Corpus ingestion, vocabulary, train/test split, batching, circular shift.

Tokens are Unicode scalar values (not bytes: the Finnish-style corpora exceed
ASCII and byte-tokenizing would change the vocabulary size). The vocabulary
is the sorted set of distinct code points in the corpus.

Each training batch holds `lanes` parallel sequences read at equidistant
offsets that advance by k1 per batch:

    offset_j(i) = floor(j * train_len / lanes) + i * k1   (mod train_len)

Sequence reads wrap modulo the train length so every batch stays full.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TEST_LEN = 11_100
DEFAULT_LANES = 64


class DataError(ValueError):
    pass


@dataclass
class Vocabulary:
    chars: list[str]

    def __post_init__(self):
        self.index = {ch: i for i, ch in enumerate(self.chars)}
        if len(self.index) != len(self.chars):
            raise DataError("vocabulary characters must be distinct")

    def __len__(self) -> int:
        return len(self.chars)

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        return cls(sorted(set(text)))

    def encode(self, text: str) -> np.ndarray:
        try:
            return np.fromiter((self.index[ch] for ch in text), dtype=np.int64,
                               count=len(text))
        except KeyError as exc:
            raise DataError(f"character {exc.args[0]!r} not in vocabulary") from None

    def decode(self, ids) -> str:
        return "".join(self.chars[int(i)] for i in ids)


@dataclass
class Corpus:
    tokens: np.ndarray
    source: str = ""

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class Split:
    train: Corpus
    test: Corpus


def load_corpus(path) -> tuple[Vocabulary, Corpus]:
    """Read a UTF-8 text file into a vocabulary and token sequence."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text:
        raise DataError(f"corpus {path} is empty")
    vocab = Vocabulary.from_text(text)
    return vocab, Corpus(vocab.encode(text), source=str(path))


def split_dataset(corpus: Corpus, rotation: int,
                  test_len: int = DEFAULT_TEST_LEN) -> Split:
    """Rotate the corpus left, then peel the last test_len tokens off as the
    test set; the rest is the train set."""
    n = len(corpus)
    if test_len >= n:
        raise DataError(f"test length {test_len} must be below corpus length {n}")
    rotated = np.roll(corpus.tokens, -(rotation % n))
    return Split(
        train=Corpus(rotated[:n - test_len].copy(), corpus.source),
        test=Corpus(rotated[n - test_len:].copy(), corpus.source),
    )


def batch_offsets(i: int, k1: int, train_len: int,
                  lanes: int = DEFAULT_LANES) -> np.ndarray:
    """Equidistant lane offsets for batch i, advanced by i*k1, mod train_len."""
    if lanes < 1:
        raise DataError(f"lanes must be >= 1, got {lanes}")
    j = np.arange(lanes, dtype=np.int64)
    return (j * train_len // lanes + i * k1) % train_len


@dataclass
class Batch:
    inputs: np.ndarray    # (k2, lanes)
    targets: np.ndarray   # (k2, lanes), inputs shifted one token ahead


def make_batch(train: Corpus, offsets: np.ndarray, k2: int) -> Batch:
    """Each lane reads k2+1 consecutive tokens from its offset (wrapping);
    first k2 are inputs, tokens 2..k2+1 the targets."""
    if k2 < 1:
        raise DataError(f"k2 must be >= 1, got {k2}")
    n = len(train)
    idx = (np.asarray(offsets)[None, :] + np.arange(k2 + 1)[:, None]) % n
    window = train.tokens[idx]           # (k2+1, lanes)
    return Batch(inputs=window[:-1], targets=window[1:])


def circular_shift(train: Corpus, amount: int) -> Corpus:
    """Left rotation by amount mod length (applied between epochs)."""
    n = len(train)
    return Corpus(np.roll(train.tokens, -(amount % n)), train.source)


def batches_per_epoch(train_len: int, lanes: int, k1: int) -> int:
    """Number of batches until lane windows have swept one inter-lane stride
    (then the train set is shifted and the batch counter resets)."""
    stride = train_len // lanes
    return max(1, -(-stride // k1))
