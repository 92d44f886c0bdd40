import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ler.corpus import ENTITY_LABELS, EntitySpan
from ler.errors import EvalError
from ler.evaluation import (
    ClassCounts,
    ClassMetrics,
    MatchCounts,
    MetricsReport,
    compare_reports,
    compute_metrics,
    f1_score,
    match_spans,
    precision_recall_f1,
    read_report,
    write_report,
)


def _counts(**per_label):
    table = {label: ClassCounts() for label in ENTITY_LABELS}
    table.update(per_label)
    return MatchCounts(table)


# --- match_spans ---------------------------------------------------------------

def test_identical_lists_all_tp():
    gold = [EntitySpan(0, 2, "PARTY"), EntitySpan(3, 4, "DATE")]
    counts = match_spans(list(gold), gold)
    assert counts.micro == ClassCounts(tp=2, fp=0, fn=0)


def test_empty_predictions_all_fn():
    gold = [EntitySpan(i * 2, i * 2 + 1, "MONEY") for i in range(4)]
    counts = match_spans([], gold)
    assert counts.micro == ClassCounts(tp=0, fp=0, fn=4)


def test_hand_enumerated_fixture():
    # 4 gold spans; 3 predictions of which 2 match exactly:
    #   pred (0,2,PARTY) == gold (0,2,PARTY)          tp
    #   pred (3,4,DATE)  == gold (3,4,DATE)           tp
    #   pred (5,6,MONEY) vs gold (5,7,MONEY)          fp (boundary off)
    #   gold (8,9,PROVISION) unmatched                fn
    gold = [EntitySpan(0, 2, "PARTY"), EntitySpan(3, 4, "DATE"),
            EntitySpan(5, 7, "MONEY"), EntitySpan(8, 9, "PROVISION")]
    pred = [EntitySpan(0, 2, "PARTY"), EntitySpan(3, 4, "DATE"),
            EntitySpan(5, 6, "MONEY")]
    counts = match_spans(pred, gold)
    assert counts.micro == ClassCounts(tp=2, fp=1, fn=2)


def test_label_must_match_exactly():
    counts = match_spans([EntitySpan(0, 1, "PARTY")], [EntitySpan(0, 1, "DATE")])
    assert counts.micro == ClassCounts(tp=0, fp=1, fn=1)


def test_overlapping_predictions_rejected():
    pred = [EntitySpan(0, 3, "PARTY"), EntitySpan(2, 4, "DATE")]
    with pytest.raises(EvalError, match="overlapping"):
        match_spans(pred, [])


def test_match_symmetry(rng):
    for _ in range(25):
        def random_spans():
            spans, pos = [], 0
            while pos < 20 and rng.random() < 0.7:
                end = pos + int(rng.integers(1, 3))
                spans.append(EntitySpan(pos, end, str(rng.choice(ENTITY_LABELS))))
                pos = end + int(rng.integers(0, 3))
            return spans

        a, b = random_spans(), random_spans()
        fwd = match_spans(a, b)
        rev = match_spans(b, a)
        assert fwd.micro.tp == rev.micro.tp
        assert fwd.micro.fp == rev.micro.fn
        assert fwd.micro.fn == rev.micro.fp


# --- metrics ---------------------------------------------------------------------

def test_table_arithmetic_consistency():
    # Reference values: baseline P/R 90.2/88.4 -> F1 89.3, hybrid
    # P/R 94.1/92.7 -> F1 93.4 (both within half a tenth of a point).
    assert f1_score(0.902, 0.884) == pytest.approx(0.893, abs=0.0005)
    assert f1_score(0.941, 0.927) == pytest.approx(0.934, abs=0.0005)


def test_f1_of_equal_p_and_r():
    for p in (0.0, 0.25, 0.6, 1.0):
        assert f1_score(p, p) == pytest.approx(p, abs=1e-12)


def test_metrics_hand_fixture():
    # tp=2, fp=1, fn=2: P=2/3, R=1/2, F1=4/7. Cross-checked by brute-force
    # pair counting below.
    m = precision_recall_f1(ClassCounts(tp=2, fp=1, fn=2))
    assert m.precision == pytest.approx(2 / 3, abs=1e-12)
    assert m.recall == pytest.approx(0.5, abs=1e-12)
    assert m.f1 == pytest.approx(4 / 7, abs=1e-12)
    # brute force: 3 predictions, 4 golds, 2 matched pairs
    pred_n, gold_n, matched = 3, 4, 2
    assert m.precision == pytest.approx(matched / pred_n)
    assert m.recall == pytest.approx(matched / gold_n)


def test_zero_denominator_conventions():
    empty = precision_recall_f1(ClassCounts())
    assert (empty.precision, empty.recall, empty.f1) == (0.0, 0.0, 0.0)
    no_pred = precision_recall_f1(ClassCounts(tp=0, fp=0, fn=3))
    assert no_pred.precision == 0.0 and no_pred.recall == 0.0


@given(st.integers(0, 100), st.integers(0, 100), st.integers(0, 100))
@settings(max_examples=200)
def test_metric_identities(tp, fp, fn):
    m = precision_recall_f1(ClassCounts(tp, fp, fn))
    assert 0.0 <= m.precision <= 1.0
    assert 0.0 <= m.recall <= 1.0
    assert 0.0 <= m.f1 <= 1.0
    assert min(m.precision, m.recall) <= m.f1 + 1e-12
    assert m.f1 <= max(m.precision, m.recall) + 1e-12
    if m.precision + m.recall > 0:
        expected = 2 * m.precision * m.recall / (m.precision + m.recall)
        assert m.f1 == pytest.approx(expected, abs=1e-12)


def test_micro_counts_sum_per_class(rng):
    per_label = {
        label: ClassCounts(*(int(x) for x in rng.integers(0, 20, size=3)))
        for label in ENTITY_LABELS
    }
    counts = MatchCounts(per_label)
    assert counts.micro.tp == sum(c.tp for c in per_label.values())
    assert counts.micro.fp == sum(c.fp for c in per_label.values())
    assert counts.micro.fn == sum(c.fn for c in per_label.values())


# --- comparison ------------------------------------------------------------------

def _report_from(p, r, tau=None, digest="run-1"):
    # build a MetricsReport with the micro block forced to given P/R
    return MetricsReport(
        per_class={label: ClassMetrics(p, r, f1_score(p, r)) for label in ENTITY_LABELS},
        micro=ClassMetrics(p, r, f1_score(p, r)),
        counts=_counts(),
        tau=tau,
        config_digest=digest,
    )


def test_compare_identical_reports_zero_deltas():
    base = _report_from(0.9, 0.8)
    table = compare_reports(base, _report_from(0.9, 0.8, tau=-2.0))
    assert table.deltas == ClassMetrics(0.0, 0.0, 0.0)
    assert table.flags == ()


def test_compare_reference_values_deltas():
    # Reference comparison: +3.9 precision, +4.3 recall, +4.1 F1 points.
    table = compare_reports(_report_from(0.902, 0.884), _report_from(0.941, 0.927))
    assert table.deltas.precision == pytest.approx(0.039, abs=1e-9)
    assert table.deltas.recall == pytest.approx(0.043, abs=1e-9)
    assert table.deltas.f1 == pytest.approx(0.041, abs=5e-4)


def test_compare_flags_recall_regression():
    table = compare_reports(_report_from(0.9, 0.9), _report_from(0.95, 0.85))
    assert "recall" in table.flags
    assert "precision" not in table.flags


def test_compare_rejects_mismatched_digests():
    with pytest.raises(EvalError, match="digest mismatch"):
        compare_reports(_report_from(0.9, 0.9, digest="a"), _report_from(0.9, 0.9, digest="b"))


def test_render_is_aligned_table():
    text = compare_reports(_report_from(0.902, 0.884), _report_from(0.941, 0.927)).render()
    lines = text.splitlines()
    assert lines[0].split() == ["Model", "Precision", "Recall", "F1"]
    assert lines[1].split() == ["baseline", "0.9020", "0.8840", "0.8929"]
    assert lines[2].split() == ["hybrid", "0.9410", "0.9270", "0.9339"]
    assert lines[3].split() == ["delta", "+0.0390", "+0.0430", "+0.0410"]


# --- report files ----------------------------------------------------------------

def test_report_roundtrip(tmp_path):
    counts = _counts(PARTY=ClassCounts(5, 1, 2), DATE=ClassCounts(3, 0, 0))
    report = compute_metrics(counts, tau=0.5, config_digest="deadbeef")
    path = tmp_path / "report.json"
    write_report(report, path)
    back = read_report(path)
    assert back.config_digest == "deadbeef"
    assert back.tau == 0.5
    assert back.counts == counts
    assert back.micro.precision == pytest.approx(report.micro.precision, abs=5e-5)
