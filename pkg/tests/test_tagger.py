import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqtag.corpus import LABELS, MentionSpan, Sentence, Token
from seqtag.encoder import EmbeddingTable
from seqtag.synth import SynthConfig, synthetic_corpus
from seqtag.tagger import (
    TrainingConfig,
    annotate,
    decode_spans,
    load_model,
    predict,
    save_model,
    train,
)


def make_sentence(words, labels=None):
    tokens = []
    pos = 0
    for w in words:
        tokens.append(Token(w, pos, pos + len(w)))
        pos += len(w) + 1
    return Sentence(tuple(tokens), tuple(labels) if labels else None)


@pytest.fixture(scope="module")
def tiny_sentences():
    corpus = synthetic_corpus(SynthConfig(n_sentences=12, seed=3, misspell_rate=0.0))
    return corpus.sentences


def quick_config(epochs=3, seed=0):
    return TrainingConfig(epochs=epochs, seed=seed, log_every=0)


def quick_train(sentences, encoder="TRI", network="BLSTM", epochs=3, seed=0, **kw):
    return train(
        sentences,
        encoder,
        network,
        quick_config(epochs, seed),
        dense_size=12,
        lstm_cells=4,
        **kw,
    )


# ---------------------------------------------------------------------------
# train


def test_train_records_loss_trace(tiny_sentences):
    model = quick_train(tiny_sentences, epochs=4)
    assert len(model.loss_trace) == 4
    assert all(np.isfinite(v) for v in model.loss_trace)


def test_train_rejects_zero_epochs():
    with pytest.raises(ValueError, match="epochs"):
        TrainingConfig(epochs=0)


def test_train_rejects_unlabeled_sentence(tiny_sentences):
    bad = [Sentence(tiny_sentences[0].tokens, None)]
    with pytest.raises(ValueError, match="gold labels"):
        quick_train(bad)


def test_train_rejects_empty_input():
    with pytest.raises(ValueError, match="training sentences"):
        quick_train([])


def test_train_emb_requires_table(tiny_sentences):
    with pytest.raises(ValueError, match="EMB"):
        quick_train(tiny_sentences, encoder="EMB")


def test_train_deterministic(tiny_sentences):
    a = quick_train(tiny_sentences, epochs=3, seed=5)
    b = quick_train(tiny_sentences, epochs=3, seed=5)
    assert set(a.params) == set(b.params)
    for name in a.params:
        assert np.array_equal(a.params[name], b.params[name])
    assert a.loss_trace == b.loss_trace


def test_train_with_embedding_table(tiny_sentences):
    words = sorted({t.text for s in tiny_sentences for t in s.tokens})
    table = EmbeddingTable(words, np.random.default_rng(0).normal(size=(len(words), 7)))
    model = quick_train(tiny_sentences, encoder="EMB", embeddings=table)
    assert model.encoder.dim == 7 + 4


# ---------------------------------------------------------------------------
# predict


def test_predict_empty_sentence(tiny_sentences):
    model = quick_train(tiny_sentences)
    result = predict(model, Sentence(()))
    assert result.labels == ()
    assert result.distributions.shape == (0, 3)


def test_predict_distributions_sum_to_one(tiny_sentences):
    model = quick_train(tiny_sentences)
    result = predict(model, tiny_sentences[0])
    assert np.allclose(result.distributions.sum(axis=1), 1.0, atol=1e-9)
    assert len(result.labels) == len(tiny_sentences[0].tokens)
    for label, row in zip(result.labels, result.distributions):
        assert label == LABELS[int(np.argmax(row))]


def test_predict_is_pure(tiny_sentences):
    model = quick_train(tiny_sentences)
    s = tiny_sentences[1]
    a, b = predict(model, s), predict(model, s)
    assert a.labels == b.labels
    assert np.array_equal(a.distributions, b.distributions)


# ---------------------------------------------------------------------------
# decode_spans


def test_decode_fig_example():
    sentence = make_sentence(["Aspirin", "has", "an", "antiplatelet", "effect", "."])
    spans = decode_spans(sentence, ["B", "O", "O", "B", "I", "O"])
    assert spans == [MentionSpan(0, 7), MentionSpan(15, 34)]


def test_decode_all_outside():
    sentence = make_sentence(["a", "b", "c"])
    assert decode_spans(sentence, ["O", "O", "O"]) == []


def test_decode_orphan_inside_opens_mention():
    sentence = make_sentence(["aa", "bb", "cc"])
    spans = decode_spans(sentence, ["O", "I", "I"])
    assert spans == [MentionSpan(3, 8)]


def test_decode_length_mismatch():
    with pytest.raises(ValueError):
        decode_spans(make_sentence(["a"]), ["B", "O"])


@given(st.lists(st.sampled_from(LABELS), min_size=1, max_size=14))
@settings(max_examples=300)
def test_decode_spans_ordered_non_overlapping(labels):
    sentence = make_sentence(["tok"] * len(labels))
    spans = decode_spans(sentence, labels)
    for prev, cur in zip(spans, spans[1:]):
        assert prev.end <= cur.begin
    # every B or I token is covered by exactly one span
    covered = sum(s.end - s.begin for s in spans)
    assert covered > 0 or all(l == "O" for l in labels)


# ---------------------------------------------------------------------------
# annotate


def test_annotate_empty_text(tiny_sentences):
    model = quick_train(tiny_sentences)
    assert annotate(model, "") == []


def test_annotate_offsets_within_bounds(tiny_sentences):
    model = quick_train(tiny_sentences)
    text = "Patients received golden syrup. It failed. We retried twice."
    for span in annotate(model, text):
        assert 0 <= span.begin < span.end <= len(text)


# ---------------------------------------------------------------------------
# persistence


@pytest.mark.parametrize("encoder", ["TRI", "DICT", "EMB"])
def test_save_load_round_trip_bit_exact(tmp_path, tiny_sentences, encoder):
    kw = {}
    if encoder == "EMB":
        words = sorted({t.text for s in tiny_sentences for t in s.tokens})
        kw["embeddings"] = EmbeddingTable(
            words, np.random.default_rng(1).normal(size=(len(words), 5))
        )
    model = quick_train(tiny_sentences, encoder=encoder, **kw)
    path = tmp_path / "model.stm"
    save_model(model, path)
    loaded = load_model(path)
    for sentence in tiny_sentences[:4]:
        a, b = predict(model, sentence), predict(loaded, sentence)
        assert a.labels == b.labels
        assert np.array_equal(a.distributions, b.distributions)


def test_save_load_preserves_config(tmp_path, tiny_sentences):
    model = quick_train(tiny_sentences)
    path = tmp_path / "model.stm"
    save_model(model, path, meta={"note": "fixture"})
    loaded = load_model(path)
    assert loaded.config == model.config
    assert loaded.format_version == model.format_version


def test_truncated_file_fails_checksum(tmp_path, tiny_sentences):
    model = quick_train(tiny_sentences)
    path = tmp_path / "model.stm"
    save_model(model, path)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(ValueError, match="checksum"):
        load_model(path)


def test_corrupted_byte_fails_checksum(tmp_path, tiny_sentences):
    model = quick_train(tiny_sentences)
    path = tmp_path / "model.stm"
    save_model(model, path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 3] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="checksum"):
        load_model(path)


def test_version_bump_rejected_explicitly(tmp_path, tiny_sentences):
    import hashlib
    import json

    model = quick_train(tiny_sentences)
    path = tmp_path / "model.stm"
    save_model(model, path)
    blob = path.read_bytes()
    body = blob[:-32]
    header_len = int.from_bytes(body[8:16], "little")
    header = json.loads(body[16 : 16 + header_len])
    header["format_version"] = 99
    new_header = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    new_body = (
        body[:8]
        + len(new_header).to_bytes(8, "little")
        + new_header
        + body[16 + header_len :]
    )
    path.write_bytes(new_body + hashlib.sha256(new_body).digest())
    with pytest.raises(ValueError, match="format_version"):
        load_model(path)


def test_load_rejects_non_model_file(tmp_path):
    path = tmp_path / "junk.stm"
    import hashlib

    body = b"NOTMODEL" + b"\x00" * 32
    path.write_bytes(body + hashlib.sha256(body).digest())
    with pytest.raises(ValueError, match="not a seqtag model"):
        load_model(path)
