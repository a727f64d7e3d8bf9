"""Model lifecycle: training over sentence mini-batches, prediction, BIO2
span decoding, and self-contained binary persistence."""
from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from dataclasses import dataclass, field

import numpy as np

from .corpus import LABELS, LABEL_TO_INDEX, MentionSpan, Sentence, label_runs
from .corpus import split_sentences, tokenize
from .encoder import (
    FLAG_LAYOUT,
    DictEncoder,
    EmbeddingEncoder,
    EmbeddingTable,
    TokenEncoder,
    TrigramEncoder,
    TrigramVocabulary,
    WordVocabulary,
    build_encoder,
    encode_sentence,
)
from .network import (
    NetworkConfig,
    backward_bptt,
    forward,
    init_params,
    loss,
    param_spec,
    sgd_step,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_MAGIC = b"SEQTAGM1"


@dataclass(frozen=True)
class TrainingConfig:
    """Knobs of one training run; the seed drives init and shuffling."""

    epochs: int = 100
    seed: int = 0
    shuffle: bool = True
    log_every: int = 10

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class PredictionResult:
    """Per-token argmax labels and the underlying class distributions."""

    labels: tuple[str, ...]
    distributions: np.ndarray


@dataclass
class TaggerModel:
    """A trained tagger: encoder, network configuration and weights."""

    encoder: TokenEncoder
    config: NetworkConfig
    params: dict[str, np.ndarray]
    format_version: int = FORMAT_VERSION
    loss_trace: list[float] = field(default_factory=list, repr=False)


def train(
    train_sentences,
    encoder_method: str = "TRI",
    network_variant: str = "BLSTM",
    training: TrainingConfig | None = None,
    *,
    embeddings: EmbeddingTable | None = None,
    dense_size: int = 150,
    lstm_cells: int = 20,
    learning_rate: float = 0.005,
) -> TaggerModel:
    """Train a tagger from labeled sentences.

    Builds the encoder vocabulary from the training sentences (DICT/TRI) or
    wraps the given embedding table (EMB), then runs ``epochs`` passes of
    per-sentence forward / BPTT / SGD updates.  Fully deterministic for a
    fixed (seed, data, configuration).  The per-epoch mean loss trace is
    recorded on the returned model.
    """
    training = training or TrainingConfig()
    sentences = [s for s in train_sentences if len(s.tokens) > 0]
    if not sentences:
        raise ValueError("no non-empty training sentences")
    for n, sentence in enumerate(sentences):
        if sentence.labels is None:
            raise ValueError(f"training sentence {n} has no gold labels")

    encoder = build_encoder(encoder_method, sentences, table=embeddings)
    config = NetworkConfig(
        variant=network_variant.upper(),
        input_dim=encoder.dim,
        dense_size=dense_size,
        lstm_cells=lstm_cells,
        learning_rate=learning_rate,
    )
    params = init_params(config, training.seed)

    inputs = [encode_sentence(encoder, s) for s in sentences]
    golds = [
        np.array([LABEL_TO_INDEX[lab] for lab in s.labels], dtype=np.int64)
        for s in sentences
    ]

    order = list(range(len(sentences)))
    rng = random.Random(training.seed)
    trace: list[float] = []
    started = time.monotonic()
    for epoch in range(training.epochs):
        if training.shuffle:
            rng.shuffle(order)
        total = 0.0
        for n in order:
            ys, cache = forward(inputs[n], config, params)
            total += loss(ys, golds[n])
            grads = backward_bptt(cache, golds[n], config, params)
            try:
                sgd_step(params, grads, config.learning_rate)
            except ValueError as exc:
                raise ValueError(
                    f"epoch {epoch}, sentence {n}: {exc}"
                ) from exc
        trace.append(total / len(sentences))
        if training.log_every and (epoch + 1) % training.log_every == 0:
            logger.info(
                "epoch %d/%d: mean loss %.6f (%.1fs)",
                epoch + 1,
                training.epochs,
                trace[-1],
                time.monotonic() - started,
            )
    return TaggerModel(encoder, config, params, loss_trace=trace)


def predict(model: TaggerModel, sentence: Sentence) -> PredictionResult:
    """Predict per-token label distributions and argmax labels.

    Pure function of (model, sentence); argmax ties resolve to the first
    class in B < I < O order.
    """
    xs = encode_sentence(model.encoder, sentence)
    ys, _ = forward(xs, model.config, model.params)
    labels = tuple(LABELS[i] for i in np.argmax(ys, axis=1)) if len(ys) else ()
    return PredictionResult(labels, ys)


def decode_spans(sentence: Sentence, labels, doc_id: str = "") -> list[MentionSpan]:
    """Decode a BIO2 label sequence into character-offset mention spans.

    B opens a mention, I extends it, O closes it; an orphaned I (after O or
    at the start) opens a new mention rather than being dropped.
    """
    labels = list(labels)
    if len(labels) != len(sentence.tokens):
        raise ValueError(f"{len(labels)} labels for {len(sentence.tokens)} tokens")
    return [
        MentionSpan(sentence.tokens[first].begin, sentence.tokens[last].end, doc_id)
        for first, last in label_runs(labels)
    ]


def annotate(model: TaggerModel, document_text: str, doc_id: str = "") -> list[MentionSpan]:
    """Detect mentions in raw text: split, tokenize, predict, decode."""
    spans: list[MentionSpan] = []
    for begin, end in split_sentences(document_text):
        sentence = Sentence(tuple(tokenize(document_text[begin:end], begin)))
        result = predict(model, sentence)
        spans.extend(decode_spans(sentence, result.labels, doc_id))
    return spans


# ---------------------------------------------------------------------------
# Persistence
#
# Model file layout (all integers little-endian):
#   bytes 0..8    magic "SEQTAGM1"
#   bytes 8..16   uint64 header length H
#   bytes 16..16+H   UTF-8 JSON header: format_version, encoder section
#                    (method + vocabulary), flag layout, network config,
#                    tensor manifest [name, shape], optional meta
#   ...           tensor data, float64 little-endian, C order, manifest order
#   last 32 bytes SHA-256 of everything before them


def _tensor_manifest(model: TaggerModel) -> list[tuple[str, np.ndarray]]:
    tensors: list[tuple[str, np.ndarray]] = []
    if isinstance(model.encoder, EmbeddingEncoder):
        tensors.append(("embedding.vectors", model.encoder.table.vectors))
    for name, _ in param_spec(model.config):
        tensors.append((name, model.params[name]))
    return tensors


def _encoder_header(encoder: TokenEncoder) -> dict:
    if isinstance(encoder, TrigramEncoder):
        return {"method": "TRI", "trigrams": encoder.vocab.trigram_list()}
    if isinstance(encoder, DictEncoder):
        return {"method": "DICT", "words": encoder.vocab.word_list()}
    return {
        "method": "EMB",
        "words": encoder.table.words,
        "dim": encoder.table.dim,
    }


def save_model(model: TaggerModel, path, meta: dict | None = None) -> None:
    """Write the model as a single self-contained checksummed binary file."""
    tensors = _tensor_manifest(model)
    header = {
        "format_version": model.format_version,
        "encoder": _encoder_header(model.encoder),
        "flag_layout": list(FLAG_LAYOUT),
        "network": {
            "variant": model.config.variant,
            "input_dim": model.config.input_dim,
            "dense_size": model.config.dense_size,
            "lstm_cells": model.config.lstm_cells,
            "n_classes": model.config.n_classes,
            "learning_rate": model.config.learning_rate,
        },
        "tensors": [[name, list(t.shape)] for name, t in tensors],
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )
    parts = [_MAGIC, len(header_bytes).to_bytes(8, "little"), header_bytes]
    parts.extend(np.ascontiguousarray(t, dtype="<f8").tobytes() for _, t in tensors)
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())


def load_model(path) -> TaggerModel:
    """Load a model file; verifies the checksum before trusting any field."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(_MAGIC) + 8 + 32:
        raise ValueError(f"{path}: checksum mismatch (file truncated)")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ValueError(f"{path}: checksum mismatch")
    if body[:8] != _MAGIC:
        raise ValueError(f"{path}: not a seqtag model file")
    header_len = int.from_bytes(body[8:16], "little")
    if 16 + header_len > len(body):
        raise ValueError(f"{path}: header extends past end of file")
    header = json.loads(body[16 : 16 + header_len].decode("utf-8"))
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported format_version {version!r} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    if header.get("flag_layout") != list(FLAG_LAYOUT):
        raise ValueError(f"{path}: unknown surface-flag layout")

    offset = 16 + header_len
    tensors: dict[str, np.ndarray] = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(body):
            raise ValueError(f"{path}: tensor {name!r} extends past end of file")
        flat = np.frombuffer(body, dtype="<f8", count=count, offset=offset)
        tensors[name] = flat.astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(body):
        raise ValueError(f"{path}: trailing bytes after tensor data")

    enc = header["encoder"]
    encoder: TokenEncoder
    if enc["method"] == "TRI":
        encoder = TrigramEncoder(TrigramVocabulary(enc["trigrams"]))
    elif enc["method"] == "DICT":
        encoder = DictEncoder(WordVocabulary(enc["words"]))
    elif enc["method"] == "EMB":
        vectors = tensors.pop("embedding.vectors", None)
        if vectors is None:
            raise ValueError(f"{path}: EMB model lacks the embedding.vectors tensor")
        encoder = EmbeddingEncoder(EmbeddingTable(enc["words"], vectors))
    else:
        raise ValueError(f"{path}: unknown encoder method {enc['method']!r}")

    net = header["network"]
    config = NetworkConfig(
        variant=net["variant"],
        input_dim=net["input_dim"],
        dense_size=net["dense_size"],
        lstm_cells=net["lstm_cells"],
        n_classes=net["n_classes"],
        learning_rate=net["learning_rate"],
    )
    if encoder.dim != config.input_dim:
        raise ValueError(
            f"{path}: encoder dimension {encoder.dim} does not match "
            f"network input_dim {config.input_dim}"
        )
    expected = {name for name, _ in param_spec(config)}
    if set(tensors) != expected:
        raise ValueError(f"{path}: tensor manifest does not match configuration")
    return TaggerModel(encoder, config, tensors, format_version=version)
