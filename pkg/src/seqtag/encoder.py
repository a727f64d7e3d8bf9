"""Token encoders: vocabulary one-hot, pretrained embeddings, letter trigrams.

Every encoder produces a dense float vector per token, with four surface-form
flag slots appended after the lexical part.  Vocabularies and tables are
immutable once built; encoding is a pure function and safe to use
concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .corpus import Sentence

ENCODER_METHODS = ("DICT", "EMB", "TRI")

# Canonical persistence order of the flag slots.
FLAG_LAYOUT = ("initial_capital", "all_uppercase", "all_lowercase", "mixed_case")
N_FLAGS = len(FLAG_LAYOUT)

TRIGRAM_BOUNDARY = "#"


@dataclass(frozen=True)
class SurfaceFlags:
    """Capitalization pattern of a token.

    The three case-class bits are mutually exclusive and judged over
    alphabetic characters only; a token whose sole uppercase letter is its
    first character counts as initial-capital, not mixed-case.  Tokens
    without letters set none of the case bits.
    """

    initial_capital: bool
    all_uppercase: bool
    all_lowercase: bool
    mixed_case: bool

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.initial_capital,
                self.all_uppercase,
                self.all_lowercase,
                self.mixed_case,
            ],
            dtype=np.float64,
        )


def surface_flags(token_text: str) -> SurfaceFlags:
    """Compute the four surface-form flags for one token."""
    letters = [c for c in token_text if c.isalpha()]
    initial = bool(token_text) and token_text[0].isupper()
    has_upper = any(c.isupper() for c in letters)
    has_lower = any(c.islower() for c in letters)
    if not (has_upper or has_lower):  # no letters, or only caseless ones
        return SurfaceFlags(initial, False, False, False)
    all_upper = not has_lower
    all_lower = not has_upper
    title = initial and not any(c.isupper() for c in letters[1:])
    mixed = has_upper and has_lower and not title
    return SurfaceFlags(initial, all_upper, all_lower, mixed)


def extract_trigrams(token_text: str) -> list[str]:
    """List the letter trigrams of a token.

    The token is lowercased and wrapped in boundary markers, then every
    window of three consecutive characters is emitted in order.
    """
    if not token_text:
        return []
    padded = TRIGRAM_BOUNDARY + token_text.lower() + TRIGRAM_BOUNDARY
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


class TrigramVocabulary:
    """Dense trigram -> index map with lexicographic index assignment."""

    def __init__(self, trigrams: Iterable[str]):
        ordered = sorted(set(trigrams))
        if not ordered:
            raise ValueError("empty trigram vocabulary")
        self.index = {t: i for i, t in enumerate(ordered)}

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sentence]) -> "TrigramVocabulary":
        trigrams: set[str] = set()
        for sentence in sentences:
            for tok in sentence.tokens:
                trigrams.update(extract_trigrams(tok.text))
        return cls(trigrams)

    @property
    def size(self) -> int:
        return len(self.index)

    def trigram_list(self) -> list[str]:
        return sorted(self.index, key=self.index.get)


class WordVocabulary:
    """Dense lowercased word -> index map; unseen words have no index."""

    def __init__(self, words: Iterable[str]):
        ordered = sorted({w.lower() for w in words})
        if not ordered:
            raise ValueError("empty word vocabulary")
        self.index = {w: i for i, w in enumerate(ordered)}

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sentence]) -> "WordVocabulary":
        return cls(tok.text for sentence in sentences for tok in sentence.tokens)

    @property
    def size(self) -> int:
        return len(self.index)

    def word_list(self) -> list[str]:
        return sorted(self.index, key=self.index.get)


class EmbeddingTable:
    """Pretrained word vectors of one fixed dimension.

    Lookup misses yield the zero vector and are counted in `misses`.
    """

    def __init__(self, words: list[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(words) != vectors.shape[0]:
            raise ValueError("embedding matrix shape does not match word list")
        self.words = list(words)
        self.vectors = vectors
        self.index = {w: i for i, w in enumerate(self.words)}
        self.misses = 0

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def lookup(self, word: str) -> np.ndarray:
        i = self.index.get(word)
        if i is None:
            self.misses += 1
            return np.zeros(self.dim)
        return self.vectors[i]


def load_embeddings(path) -> EmbeddingTable:
    """Load a text embedding file: one "word v1 v2 ... vd" line per word."""
    words: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'word v1 ... vd'")
            word, values = fields[0], fields[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ValueError(
                    f"{path}:{lineno}: vector of dimension {len(values)}, "
                    f"expected {dim}"
                )
            try:
                rows.append([float(v) for v in values])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric vector component")
            words.append(word)
    if not words:
        raise ValueError(f"{path}: no vectors")
    return EmbeddingTable(words, np.array(rows, dtype=np.float64))


def write_embeddings_file(path, words: list[str], vectors: np.ndarray) -> None:
    """Write vectors in the text format accepted by load_embeddings."""
    vectors = np.asarray(vectors)
    with open(path, "w", encoding="utf-8") as fh:
        for word, row in zip(words, vectors):
            fh.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")


class DictEncoder:
    """One-hot encoding over a lowercased word vocabulary."""

    method = "DICT"

    def __init__(self, vocab: WordVocabulary):
        self.vocab = vocab

    @property
    def dim(self) -> int:
        return self.vocab.size + N_FLAGS

    def encode(self, token_text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        i = self.vocab.index.get(token_text.lower())
        if i is not None:
            vec[i] = 1.0
        vec[self.vocab.size :] = surface_flags(token_text).as_array()
        return vec


class EmbeddingEncoder:
    """Pretrained embedding lookup; unseen words map to the zero vector."""

    method = "EMB"

    def __init__(self, table: EmbeddingTable):
        self.table = table

    @property
    def dim(self) -> int:
        return self.table.dim + N_FLAGS

    def encode(self, token_text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        vec[: self.table.dim] = self.table.lookup(token_text)
        vec[self.table.dim :] = surface_flags(token_text).as_array()
        return vec


class TrigramEncoder:
    """Multi-hot letter-trigram encoding, slot values clipped to {0, 1}.

    Trigrams unseen at vocabulary-build time are skipped, so a novel or
    misspelled word still lights up every trigram slot it shares with the
    training vocabulary.
    """

    method = "TRI"

    def __init__(self, vocab: TrigramVocabulary):
        self.vocab = vocab

    @property
    def dim(self) -> int:
        return self.vocab.size + N_FLAGS

    def encode(self, token_text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for trigram in extract_trigrams(token_text):
            i = self.vocab.index.get(trigram)
            if i is not None:
                vec[i] = 1.0
        vec[self.vocab.size :] = surface_flags(token_text).as_array()
        return vec


TokenEncoder = DictEncoder | EmbeddingEncoder | TrigramEncoder


def build_encoder(
    method: str,
    train_sentences: Iterable[Sentence] | None = None,
    table: EmbeddingTable | None = None,
) -> TokenEncoder:
    """Build the encoder for `method` from training sentences or a table."""
    method = method.upper()
    if method == "DICT":
        if train_sentences is None:
            raise ValueError("DICT encoder needs training sentences")
        return DictEncoder(WordVocabulary.from_sentences(train_sentences))
    if method == "TRI":
        if train_sentences is None:
            raise ValueError("TRI encoder needs training sentences")
        return TrigramEncoder(TrigramVocabulary.from_sentences(train_sentences))
    if method == "EMB":
        if table is None:
            raise ValueError("EMB encoder needs a loaded embedding table")
        return EmbeddingEncoder(table)
    raise ValueError(f"unknown encoder method {method!r}; expected DICT, EMB or TRI")


def encode_sentence(encoder: TokenEncoder, sentence: Sentence) -> np.ndarray:
    """Encode a sentence as a (n_tokens, encoder.dim) float matrix."""
    if not sentence.tokens:
        return np.zeros((0, encoder.dim))
    return np.stack([encoder.encode(tok.text) for tok in sentence.tokens])
