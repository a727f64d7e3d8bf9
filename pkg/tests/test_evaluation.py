import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqtag.corpus import Corpus, MentionSpan, document_from_rows
from seqtag.evaluation import (
    NerReport,
    SpanCounts,
    count_document,
    evaluate,
    format_report,
    macro_bio,
    micro_scores,
    report_to_dict,
    weak_match,
)

# ---------------------------------------------------------------------------
# Brute-force reference evaluator (independent of the implementation): a
# literal translation of the count definitions over raw (begin, end) pairs.


def ref_match(a, b):
    return max(a[0], b[0]) <= min(a[1], b[1])  # closed intervals intersect


def ref_counts(predicted, gold):
    p = [(m.begin, m.end) for m in predicted]
    g = [(m.begin, m.end) for m in gold]
    tp = len([x for x in p if any(ref_match(x, y) for y in g)])
    fp = len([x for x in p if not any(ref_match(x, y) for y in g)])
    fn = len([y for y in g if not any(ref_match(x, y) for x in p)])
    return tp, fp, fn


def ref_micro(count_triples):
    tp = sum(c[0] for c in count_triples)
    fp = sum(c[1] for c in count_triples)
    fn = sum(c[2] for c in count_triples)
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return prec, rec, f1


def ref_macro_bio(pred_seqs, gold_seqs):
    scores = []
    for label in ("B", "I", "O"):
        tp = fp = fn = 0
        for pred, gold in zip(pred_seqs, gold_seqs):
            for p, g in zip(pred, gold):
                tp += p == label and g == label
                fp += p == label and g != label
                fn += p != label and g == label
        if tp + fp == 0 and tp + fn == 0:
            scores.append((1.0, 1.0))
        else:
            scores.append(
                (tp / (tp + fp) if tp + fp else 0.0, tp / (tp + fn) if tp + fn else 0.0)
            )
    prec = sum(s[0] for s in scores) / 3
    rec = sum(s[1] for s in scores) / 3
    return prec, rec


def random_spans(rng, max_spans=10, width=60):
    spans = []
    for _ in range(rng.randint(0, max_spans)):
        begin = rng.randint(0, width - 2)
        end = rng.randint(begin + 1, width)
        spans.append(MentionSpan(begin, end))
    return spans


# ---------------------------------------------------------------------------
# weak_match


def test_weak_match_exact():
    assert weak_match(MentionSpan(0, 7), MentionSpan(0, 7))


def test_weak_match_partial_overlap():
    assert weak_match(MentionSpan(0, 5), MentionSpan(3, 10))


def test_weak_match_disjoint():
    assert not weak_match(MentionSpan(0, 3), MentionSpan(5, 9))


def test_weak_match_nested():
    assert weak_match(MentionSpan(0, 20), MentionSpan(5, 9))
    assert weak_match(MentionSpan(5, 9), MentionSpan(0, 20))


def test_weak_match_touching_endpoints_count_as_match():
    # endpoints are compared as closed intervals on the stored offsets
    assert weak_match(MentionSpan(0, 5), MentionSpan(5, 9))


spans_strategy = st.builds(
    lambda b, width: MentionSpan(b, b + width),
    st.integers(min_value=0, max_value=50),
    st.integers(min_value=1, max_value=20),
)


@given(spans_strategy, spans_strategy)
@settings(max_examples=500)
def test_weak_match_symmetric_and_equals_interval_intersection(p, g):
    assert weak_match(p, g) == weak_match(g, p)
    assert weak_match(p, g) == ref_match((p.begin, p.end), (g.begin, g.end))


# ---------------------------------------------------------------------------
# count_document


def test_count_exact_match():
    counts = count_document([MentionSpan(0, 7)], [MentionSpan(0, 7)])
    assert (counts.tp, counts.fp, counts.fn) == (1, 0, 0)


def test_count_mixed_example():
    counts = count_document(
        [MentionSpan(0, 5), MentionSpan(30, 35)],
        [MentionSpan(0, 7), MentionSpan(10, 20)],
    )
    assert (counts.tp, counts.fp, counts.fn) == (1, 1, 1)


def test_count_no_predictions():
    counts = count_document([], [MentionSpan(0, 7)])
    assert (counts.tp, counts.fp, counts.fn) == (0, 0, 1)


def test_count_one_prediction_covering_two_golds():
    counts = count_document(
        [MentionSpan(0, 30)], [MentionSpan(1, 5), MentionSpan(10, 20)]
    )
    assert (counts.tp, counts.fp, counts.fn) == (1, 0, 0)


def test_count_tn_placeholder_zero():
    assert count_document([], []).tn == 0


# ---------------------------------------------------------------------------
# micro_scores


def test_micro_balanced():
    report = micro_scores([SpanCounts(tp=1, fp=1, fn=1)])
    assert report.precision == report.recall == report.f1 == 0.5


def test_micro_empty_counts_score_zero():
    report = micro_scores([SpanCounts()])
    assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)


def test_micro_pools_documents():
    report = micro_scores([SpanCounts(tp=2), SpanCounts(fp=1, fn=1)])
    assert report.precision == pytest.approx(2 / 3)
    assert report.recall == pytest.approx(2 / 3)
    assert report.f1 == pytest.approx(2 / 3)


def test_micro_f1_bounded_by_max():
    report = micro_scores([SpanCounts(tp=3, fp=1, fn=2)])
    assert report.f1 <= max(report.precision, report.recall) + 1e-12


# ---------------------------------------------------------------------------
# macro_bio


def test_macro_perfect_all_classes():
    seqs = [["B", "I", "O"]]
    report = macro_bio(seqs, seqs)
    assert report.macro_precision == report.macro_recall == report.macro_f1 == 1.0


def test_macro_hand_example():
    report = macro_bio([["O", "O"]], [["B", "O"]])
    assert report.macro_recall == pytest.approx(2 / 3)
    assert report.macro_precision == pytest.approx(0.5)
    assert report.macro_f1 == pytest.approx(4 / 7)
    assert report.per_class["B"].fn == 1
    assert report.per_class["O"].fp == 1


def test_macro_absent_classes_score_one():
    report = macro_bio([["O", "O", "O"]], [["O", "O", "O"]])
    assert report.macro_precision == report.macro_recall == report.macro_f1 == 1.0


def test_macro_length_mismatch():
    with pytest.raises(ValueError):
        macro_bio([["O", "O"]], [["O"]])
    with pytest.raises(ValueError):
        macro_bio([["O"], ["O"]], [["O"]])


@given(
    st.lists(
        st.lists(st.sampled_from(["B", "I", "O"]), min_size=1, max_size=8),
        min_size=1,
        max_size=6,
    ),
    st.data(),
)
@settings(max_examples=300)
def test_macro_matches_reference(gold_seqs, data):
    pred_seqs = [
        [data.draw(st.sampled_from(["B", "I", "O"])) for _ in seq] for seq in gold_seqs
    ]
    report = macro_bio(pred_seqs, gold_seqs)
    prec, rec = ref_macro_bio(pred_seqs, gold_seqs)
    assert report.macro_precision == pytest.approx(prec, abs=1e-12)
    assert report.macro_recall == pytest.approx(rec, abs=1e-12)


# ---------------------------------------------------------------------------
# randomized oracle equivalence for span counting


def test_count_document_matches_brute_force_on_random_documents():
    rng = random.Random(1234)
    for _ in range(300):
        predicted = random_spans(rng)
        gold = _non_overlapping(random_spans(rng))
        counts = count_document(predicted, gold)
        assert (counts.tp, counts.fp, counts.fn) == ref_counts(predicted, gold)


def _non_overlapping(spans):
    picked = []
    for span in sorted(spans):
        if all(not span.overlaps(p) for p in picked):
            picked.append(span)
    return picked


# ---------------------------------------------------------------------------
# evaluate() orchestration


def _gold_corpus():
    rows = [
        [("alpha", "B"), ("works", "O")],
        [("beta", "B"), ("factor", "I"), ("rests", "O")],
    ]
    return Corpus((document_from_rows("d0", rows),))


def test_evaluate_with_perfect_precomputed_annotations():
    corpus = _gold_corpus()
    annotations = {"d0": list(corpus.documents[0].gold_mentions)}
    report = evaluate(annotations, corpus, mode="both")
    assert report.ner == NerReport(1.0, 1.0, 1.0)
    assert report.bio.macro_f1 == 1.0


def test_evaluate_zero_span_annotator_has_zero_recall():
    corpus = _gold_corpus()
    report = evaluate({"d0": []}, corpus, mode="span")
    assert report.ner.recall == 0.0
    assert report.bio is None


def test_evaluate_rejects_unknown_mode():
    with pytest.raises(ValueError, match="mode"):
        evaluate({}, _gold_corpus(), mode="banana")


def test_evaluate_precomputed_requires_corpus():
    with pytest.raises(ValueError, match="Corpus"):
        evaluate({}, _gold_corpus().sentences, mode="span")


def test_evaluate_missing_gold_labels_for_bio():
    from seqtag.corpus import Document, Sentence

    doc = _gold_corpus().documents[0]
    unlabeled = Document(
        doc.doc_id,
        doc.text,
        tuple(Sentence(s.tokens, None) for s in doc.sentences),
        doc.gold_mentions,
    )
    with pytest.raises(ValueError, match="gold labels"):
        evaluate({doc.doc_id: []}, Corpus((unlabeled,)), mode="bio")


def test_report_formats_agree():
    corpus = _gold_corpus()
    report = evaluate({"d0": list(corpus.documents[0].gold_mentions)}, corpus)
    text = format_report(report)
    payload = report_to_dict(report)
    assert f"{payload['span']['f1']:.4f}" in text
    assert f"{payload['bio']['precision']:.4f}" in text
    assert payload["span"]["per_document"][0]["doc_id"] == "d0"
