"""Text ingestion, tokenization, and the document/sentence/token data model.

Mentions are untyped character spans; token labels follow the BIO2 scheme
(every mention starts with B, continues with I, everything else is O).
All types are immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field

LABELS = ("B", "I", "O")
LABEL_TO_INDEX = {label: i for i, label in enumerate(LABELS)}

# Characters split off token edges; hyphens and slashes stay in-word so
# forms like "anti-CD15" survive intact.
_EDGE_PUNCT = set(".,;:!?()[]\"'")

_SENTENCE_TERMINALS = ".!?"

# Dotted tokens that do not end a sentence even before an uppercase word.
_ABBREVIATIONS = {
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.",
    "e.g.", "i.e.", "cf.", "vs.", "fig.", "no.", "u.s.", "u.k.",
}


@dataclass(frozen=True)
class Token:
    """One token with half-open character offsets into its document text."""

    text: str
    begin: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.begin < self.end:
            raise ValueError(f"invalid token interval [{self.begin}, {self.end})")
        if len(self.text) != self.end - self.begin:
            raise ValueError(
                f"token text {self.text!r} does not span [{self.begin}, {self.end})"
            )


@dataclass(frozen=True)
class Sentence:
    """An ordered run of tokens, optionally carrying gold BIO2 labels."""

    tokens: tuple[Token, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.tokens):
                raise ValueError(
                    f"{len(self.labels)} labels for {len(self.tokens)} tokens"
                )
            for label in self.labels:
                if label not in LABELS:
                    raise ValueError(f"unknown label {label!r}")
        prev_end = -1
        for tok in self.tokens:
            if tok.begin < prev_end:
                raise ValueError("tokens overlap or are out of order")
            prev_end = tok.end

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, order=True)
class MentionSpan:
    """An untyped mention: half-open character interval on one document."""

    begin: int
    end: int
    doc_id: str = field(default="", compare=True)

    def __post_init__(self) -> None:
        if not 0 <= self.begin < self.end:
            raise ValueError(f"invalid mention interval [{self.begin}, {self.end})")

    def overlaps(self, other: "MentionSpan") -> bool:
        return self.begin < other.end and other.begin < self.end


@dataclass(frozen=True)
class Document:
    """Full text plus its sentences and gold mention annotations."""

    doc_id: str
    text: str
    sentences: tuple[Sentence, ...]
    gold_mentions: tuple[MentionSpan, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(
            self, "gold_mentions", tuple(sorted(self.gold_mentions))
        )
        for sentence in self.sentences:
            for tok in sentence.tokens:
                if tok.end > len(self.text):
                    raise ValueError(
                        f"{self.doc_id}: token at [{tok.begin}, {tok.end}) "
                        f"outside text of length {len(self.text)}"
                    )
                if self.text[tok.begin : tok.end] != tok.text:
                    raise ValueError(
                        f"{self.doc_id}: token text {tok.text!r} does not match "
                        f"document slice {self.text[tok.begin:tok.end]!r}"
                    )
        check_non_overlapping(self.gold_mentions, what=f"{self.doc_id}: gold mentions")
        for m in self.gold_mentions:
            if m.end > len(self.text):
                raise ValueError(
                    f"{self.doc_id}: mention [{m.begin}, {m.end}) outside "
                    f"text of length {len(self.text)}"
                )


@dataclass(frozen=True)
class Corpus:
    """A set of documents with unique ids."""

    documents: tuple[Document, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "documents", tuple(self.documents))
        seen: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)

    @property
    def sentences(self) -> list[Sentence]:
        return [s for doc in self.documents for s in doc.sentences]

    def __len__(self) -> int:
        return len(self.documents)


def check_non_overlapping(mentions, what: str = "mentions") -> None:
    """Raise ValueError if any two spans in `mentions` overlap."""
    ordered = sorted(mentions)
    for prev, cur in zip(ordered, ordered[1:]):
        if prev.overlaps(cur):
            raise ValueError(
                f"{what} overlap: [{prev.begin}, {prev.end}) and "
                f"[{cur.begin}, {cur.end})"
            )


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Split text into half-open (begin, end) sentence intervals.

    A sentence ends after '.', '!' or '?' followed by whitespace and an
    uppercase letter or digit, except when the dot terminates a known
    abbreviation or a single-letter initial.  Intervals are trimmed to the
    first/last non-whitespace character, so together they cover every
    non-whitespace character of the input.
    """
    intervals: list[tuple[int, int]] = []
    n = len(text)
    start = _next_non_space(text, 0)
    while start is not None:
        boundary = None
        for j in range(start, n):
            if text[j] in _SENTENCE_TERMINALS and _boundary_after(text, j):
                boundary = j + 1
                break
        if boundary is None:
            end = _trimmed_end(text, start)
            if end > start:
                intervals.append((start, end))
            break
        intervals.append((start, boundary))
        start = _next_non_space(text, boundary)
    return intervals


def _next_non_space(text: str, pos: int) -> int | None:
    for i in range(pos, len(text)):
        if not text[i].isspace():
            return i
    return None


def _trimmed_end(text: str, start: int) -> int:
    end = len(text)
    while end > start and text[end - 1].isspace():
        end -= 1
    return end


def _boundary_after(text: str, j: int) -> bool:
    n = len(text)
    if j + 1 >= n or not text[j + 1].isspace():
        return False
    nxt = _next_non_space(text, j + 1)
    if nxt is None or not (text[nxt].isupper() or text[nxt].isdigit()):
        return False
    if text[j] != ".":
        return True
    # Walk back to the start of the chunk containing the dot.
    w = j
    while w > 0 and not text[w - 1].isspace():
        w -= 1
    chunk = text[w : j + 1]
    if chunk.lower() in _ABBREVIATIONS:
        return False
    letters = chunk[:-1]
    if len(letters) == 1 and letters.isalpha():
        return False
    return True


def tokenize(sentence_text: str, sentence_begin: int = 0) -> list[Token]:
    """Tokenize one sentence, producing tokens with absolute offsets.

    Chunks are split on whitespace; leading and trailing punctuation
    characters become separate single-character tokens, while in-word
    hyphens and slashes are preserved.
    """
    tokens: list[Token] = []
    for m in re.finditer(r"\S+", sentence_text):
        chunk = m.group()
        base = sentence_begin + m.start()
        left, right = 0, len(chunk)
        while left < right and chunk[left] in _EDGE_PUNCT:
            tokens.append(Token(chunk[left], base + left, base + left + 1))
            left += 1
        trailing: list[Token] = []
        while right > left and chunk[right - 1] in _EDGE_PUNCT:
            trailing.append(Token(chunk[right - 1], base + right - 1, base + right))
            right -= 1
        if right > left:
            tokens.append(Token(chunk[left:right], base + left, base + right))
        tokens.extend(reversed(trailing))
    return tokens


def mentions_to_bio2(sentence: Sentence, mentions) -> list[str]:
    """Project character-span mentions onto per-token BIO2 labels.

    A token overlapping a mention is inside it; the first overlapping token
    of each mention gets B.  A mention partially covering a token claims the
    whole token.  Overlapping mentions are rejected.
    """
    check_non_overlapping(mentions)
    labels = ["O"] * len(sentence.tokens)
    for mention in sorted(mentions):
        hit = [
            i
            for i, tok in enumerate(sentence.tokens)
            if tok.begin < mention.end and mention.begin < tok.end
        ]
        if not hit:
            continue
        if labels[hit[0]] == "O":
            labels[hit[0]] = "B"
        for i in hit[1:]:
            labels[i] = "I"
    return labels


def label_runs(labels) -> list[tuple[int, int]]:
    """Return maximal mention runs as (first, last) token index pairs.

    B starts a run, I extends it, O closes it.  An I with no open run
    (after O or at position 0) starts a new run: lenient decoding keeps
    orphaned inside-labels instead of dropping them.
    """
    labels = list(labels)
    runs: list[tuple[int, int]] = []
    open_at: int | None = None
    for i, label in enumerate(labels):
        if label == "B":
            if open_at is not None:
                runs.append((open_at, i - 1))
            open_at = i
        elif label == "I":
            if open_at is None:
                open_at = i
        elif label == "O":
            if open_at is not None:
                runs.append((open_at, i - 1))
                open_at = None
        else:
            raise ValueError(f"unknown label {label!r}")
    if open_at is not None:
        runs.append((open_at, len(labels) - 1))
    return runs


def read_bio_column_file(path) -> Corpus:
    """Read a BIO column file into a Corpus.

    Format: UTF-8, one "token<TAB>label" line per token, blank line between
    sentences, a line whose first field is "-DOCSTART-" starting a new
    document.  Document text is reconstructed by joining tokens with single
    spaces; gold mentions are recovered by inverting the label sequences.
    """
    documents: list[Document] = []
    doc_rows: list[list[tuple[str, str]]] = []
    sent_rows: list[tuple[str, str]] = []

    def flush_sentence() -> None:
        nonlocal sent_rows
        if sent_rows:
            doc_rows.append(sent_rows)
            sent_rows = []

    def flush_document() -> None:
        nonlocal doc_rows
        flush_sentence()
        if doc_rows:
            documents.append(document_from_rows(f"doc{len(documents)}", doc_rows))
            doc_rows = []

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                flush_sentence()
                continue
            fields = line.split("\t")
            if fields[0] == "-DOCSTART-":
                flush_document()
                continue
            if len(fields) != 2:
                raise ValueError(
                    f"{path}:{lineno}: expected 'token<TAB>label', got {line!r}"
                )
            token_text, label = fields
            if not token_text:
                raise ValueError(f"{path}:{lineno}: empty token field")
            if label not in LABELS:
                raise ValueError(f"{path}:{lineno}: unknown label {label!r}")
            sent_rows.append((token_text, label))
    flush_document()
    return Corpus(tuple(documents))


def document_from_rows(doc_id: str, sent_rows) -> Document:
    """Build a Document from per-sentence (token, label) rows.

    Text is reconstructed by joining all tokens with single spaces; gold
    mentions are recovered by inverting the label sequences.
    """
    words: list[str] = []
    sentences: list[Sentence] = []
    mentions: list[MentionSpan] = []
    cursor = 0
    for rows in sent_rows:
        tokens: list[Token] = []
        labels: list[str] = []
        for word, label in rows:
            if words:
                cursor += 1  # single joining space
            tokens.append(Token(word, cursor, cursor + len(word)))
            cursor += len(word)
            words.append(word)
            labels.append(label)
        sentence = Sentence(tuple(tokens), tuple(labels))
        sentences.append(sentence)
        for first, last in label_runs(labels):
            mentions.append(
                MentionSpan(tokens[first].begin, tokens[last].end, doc_id)
            )
    return Document(doc_id, " ".join(words), tuple(sentences), tuple(mentions))


def write_bio_column_file(corpus: Corpus, path) -> None:
    """Write a Corpus in the BIO column format read by read_bio_column_file."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            fh.write("-DOCSTART-\tO\n\n")
            for sentence in doc.sentences:
                labels = sentence.labels
                if labels is None:
                    labels = tuple(mentions_to_bio2(sentence, doc.gold_mentions))
                for tok, label in zip(sentence.tokens, labels):
                    fh.write(f"{tok.text}\t{label}\n")
                fh.write("\n")


def read_standoff(path) -> Corpus:
    """Read standoff-annotated documents into a Corpus.

    Accepted shapes: a JSON array of records, one JSON record per line, or
    an object with a "documents" array.  Each record carries {doc_id, text,
    mentions: [{begin, end}]}; offsets are half-open character intervals.
    Sentences and tokens are produced by split_sentences/tokenize, and gold
    BIO2 labels are attached by projecting the mentions onto the tokens.
    """
    with open(path, encoding="utf-8") as fh:
        content = fh.read()
    records = _standoff_records(content, path)
    documents = []
    for index, record in enumerate(records):
        where = f"{path}: record {index}"
        if not isinstance(record, dict) or "text" not in record:
            raise ValueError(f"{where}: expected an object with a 'text' field")
        text = record["text"]
        doc_id = str(record.get("doc_id", f"doc{index}"))
        mentions = []
        for m in record.get("mentions", []):
            begin, end = int(m["begin"]), int(m["end"])
            if not 0 <= begin < end <= len(text):
                raise ValueError(
                    f"{where}: mention [{begin}, {end}) outside text "
                    f"of length {len(text)}"
                )
            mentions.append(MentionSpan(begin, end, doc_id))
        check_non_overlapping(mentions, what=f"{where}: mentions")
        sentences = []
        for s_begin, s_end in split_sentences(text):
            tokens = tokenize(text[s_begin:s_end], s_begin)
            sentence = Sentence(tuple(tokens))
            labels = mentions_to_bio2(sentence, mentions)
            sentences.append(Sentence(tuple(tokens), tuple(labels)))
        documents.append(Document(doc_id, text, tuple(sentences), tuple(mentions)))
    return Corpus(tuple(documents))


def _standoff_records(content: str, path) -> list:
    stripped = content.strip()
    if not stripped:
        return []
    try:
        obj = json.loads(stripped)
    except json.JSONDecodeError:
        obj = None
    if obj is not None:
        if isinstance(obj, list):
            return obj
        if isinstance(obj, dict):
            return obj["documents"] if "documents" in obj else [obj]
        raise ValueError(f"{path}: expected JSON records, got {type(obj).__name__}")
    # One JSON record per line.
    records = []
    for lineno, line in enumerate(stripped.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON record: {exc}") from None
    return records


def sample_split(
    corpus: Corpus, n_train: int, n_test: int, seed: int
) -> tuple[list[Sentence], list[Sentence]]:
    """Draw disjoint random train/test sentence samples without replacement.

    Deterministic for a fixed seed; raises if the corpus holds fewer than
    n_train + n_test sentences.
    """
    sentences = corpus.sentences
    if n_train < 0 or n_test < 0:
        raise ValueError("sample sizes must be non-negative")
    if n_train + n_test > len(sentences):
        raise ValueError(
            f"requested {n_train} train + {n_test} test sentences, "
            f"but only {len(sentences)} are available"
        )
    rng = random.Random(seed)
    picks = rng.sample(range(len(sentences)), n_train + n_test)
    train = [sentences[i] for i in picks[:n_train]]
    test = [sentences[i] for i in picks[n_train:]]
    return train, test
