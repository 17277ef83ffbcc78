import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haarface.errors import EmptyInput, UnknownLabelInTruth
from haarface.evaluation import (
    DetectionReportRow,
    GroundTruthFace,
    GroundTruthImage,
    RecognitionReportRow,
    Roster,
    detection_report,
    iou,
    match_detections,
    recognition_report,
    recognition_tally,
)
from haarface.gallery import MatchResult
from haarface.imaging import Rect

from oracles import max_cardinality_matching

# Published group-photo (total, detected) and (a_pp, a_aa) rows, C = 30.
DETECTION_ROWS = [(25, 25), (25, 25), (25, 25), (25, 25), (25, 23), (25, 24), (25, 23), (11, 11)]
DETECTION_ACC = [100, 100, 100, 100, 92, 96, 92, 100]
RECOGNITION_ROWS = [(24, 5), (24, 5), (25, 5), (24, 5), (21, 5), (20.5, 5), (18, 5), (11, 19)]
RECOGNITION_ACC = [96.67, 96.67, 100, 96.67, 86.67, 85, 76.67, 100]


def test_iou_examples():
    assert iou(Rect(1, 2, 5, 5), Rect(1, 2, 5, 5)) == 1.0
    assert iou(Rect(0, 0, 5, 5), Rect(6, 6, 2, 2)) == 0.0
    assert iou(Rect(0, 0, 10, 10), Rect(5, 5, 10, 10)) == pytest.approx(25 / 175)
    assert iou(Rect(0, 0, 0, 0), Rect(0, 0, 0, 0)) == 0.0


def test_match_identical_lists():
    boxes = [Rect(0, 0, 10, 10), Rect(20, 0, 10, 10), Rect(40, 5, 8, 8)]
    m = match_detections(boxes, boxes)
    assert m.pairs == ((0, 0), (1, 1), (2, 2)) and not m.unmatched_pred and not m.unmatched_truth


def test_duplicate_detection_is_false_positive():
    m = match_detections([Rect(0, 0, 10, 10), Rect(1, 0, 10, 10)], [Rect(0, 0, 10, 10)])
    assert m.pairs == ((0, 0),) and m.unmatched_pred == (1,)


box_st = st.builds(Rect, st.integers(0, 20), st.integers(0, 20), st.integers(1, 12), st.integers(1, 12))


@settings(max_examples=200, deadline=None)
@given(st.lists(box_st, max_size=5), st.lists(box_st, max_size=5))
def test_greedy_never_exceeds_maximum(pred, truth):
    m = match_detections(pred, truth, 0.3)
    assert len(m.pairs) <= max_cardinality_matching(pred, truth, 0.3, iou)


def test_greedy_can_fall_short_of_maximum():
    # IoU matrix [[0.5, 0.677], [0.333, 0.643]]: greedy takes (p0, t1) and strands p1
    pred = [Rect(5, 2, 8, 6), Rect(4, 3, 6, 6)]
    truth = [Rect(6, 1, 6, 10), Rect(4, 2, 8, 7)]
    assert match_detections(pred, truth).pairs == ((0, 1),)
    assert max_cardinality_matching(pred, truth, 0.5, iou) == 2


def test_greedy_equals_bruteforce_random_instances():
    rng = random.Random(17)
    checked = 0
    while checked < 150:
        n, k = rng.randint(0, 4), rng.randint(0, 4)
        truth = [Rect(rng.randint(0, 60), rng.randint(0, 60), rng.randint(6, 12), rng.randint(6, 12)) for _ in range(k)]
        pred = [Rect(max(0, t.x + rng.randint(-2, 2)), max(0, t.y + rng.randint(-2, 2)), t.w, t.h)
                for t in rng.sample(truth, min(len(truth), n))]
        pred += [Rect(rng.randint(0, 60), rng.randint(0, 60), 8, 8) for _ in range(rng.randint(0, 2))]
        vals = [iou(p, t) for p in pred for t in truth if iou(p, t) >= 0.5]
        if len(set(vals)) != len(vals):
            continue
        checked += 1
        m = match_detections(pred, truth)
        assert len(m.pairs) == max_cardinality_matching(pred, truth, 0.5, iou)


@settings(max_examples=200, deadline=None)
@given(st.lists(box_st, max_size=6), st.lists(box_st, max_size=6))
def test_match_symmetric(pred, truth):
    a = match_detections(pred, truth)
    b = match_detections(truth, pred)
    assert len(a.unmatched_pred) == len(b.unmatched_truth)
    assert len(a.unmatched_truth) == len(b.unmatched_pred)
    assert sorted((j, i) for i, j in a.pairs) == sorted(b.pairs)


def test_detection_table_rows():
    rows = [DetectionReportRow.from_counts(f"GP{i + 1}", t, d) for i, (t, d) in enumerate(DETECTION_ROWS)]
    rep = detection_report(rows)
    assert [r.accuracy for r in rep.rows] == pytest.approx(DETECTION_ACC, abs=0.01)
    assert rep.accuracy == pytest.approx(97.5, abs=0.01)
    r5 = rep.rows[4]
    assert (r5.tp, r5.fn, r5.detected_faces) == (23, 2, 23)


def test_detection_from_matchings():
    truth = [Rect(0, 0, 10, 10), Rect(20, 0, 10, 10)]
    m = match_detections([Rect(0, 0, 10, 10), Rect(0, 1, 10, 10)], truth)
    rep = detection_report([("img", m)])
    row = rep.rows[0]
    assert (row.total_faces, row.detected_faces, row.fp, row.fn) == (2, 1, 1, 1)
    assert row.accuracy == 50.0
    with pytest.raises(EmptyInput):
        detection_report([])


def test_recognition_table_rows():
    rows = [RecognitionReportRow.from_counts(f"GP{i + 1}", 30, 25 if i < 7 else 11, pp, aa)
            for i, (pp, aa) in enumerate(RECOGNITION_ROWS)]
    rep = recognition_report(rows)
    assert [r.accuracy for r in rep.rows] == pytest.approx(RECOGNITION_ACC, abs=0.01)
    assert rep.accuracy == pytest.approx(92.29, abs=0.01)
    assert recognition_report(rows[6:7]).accuracy == pytest.approx(76.67, abs=0.01)


def _class(n_present=25, C=30):
    roster = Roster(frozenset(f"s{i:02d}" for i in range(C)))
    faces = tuple(GroundTruthFace(Rect(12 * i, 0, 10, 10), f"s{i:02d}") for i in range(n_present))
    return roster, GroundTruthImage("gp", faces)


def test_tally_gp1():
    roster, truth = _class()
    preds = [(f.box, MatchResult(f.label, 0.1)) for f in truth.faces]
    preds[3] = (preds[3][0], MatchResult(None, 0.9))
    row = recognition_tally(truth, preds, roster)
    assert (row.a_pp, row.a_aa, row.a_ap, row.a_ps, row.a_as) == (24, 5, 1, 0, 0)
    assert row.accuracy == pytest.approx(96.67, abs=0.01)


def test_tally_all_correct_and_empty():
    roster, truth = _class()
    preds = [(f.box, MatchResult(f.label, 0.1)) for f in truth.faces]
    row = recognition_tally(truth, preds, roster)
    assert (row.a_pp, row.a_aa, row.accuracy) == (25, 5, 100.0)
    row = recognition_tally(truth, [], roster)
    assert (row.a_pp, row.a_ap, row.a_aa) == (0, 25, 5)
    assert row.accuracy == pytest.approx(16.67, abs=0.01)


def test_tally_strangers():
    roster = Roster(frozenset(["ann", "bob", "cat", "dan"]))
    faces = (
        GroundTruthFace(Rect(0, 0, 10, 10), "ann"),
        GroundTruthFace(Rect(20, 0, 10, 10), None),
        GroundTruthFace(Rect(40, 0, 10, 10), None),
        GroundTruthFace(Rect(60, 0, 10, 10), None),
    )
    truth = GroundTruthImage("x", faces)
    preds = [
        (Rect(0, 0, 10, 10), MatchResult("ann", 0.1)),
        (Rect(20, 0, 10, 10), MatchResult("ann", 0.2)),  # stranger labelled as a present student
        (Rect(40, 0, 10, 10), MatchResult("dan", 0.3)),  # stranger labelled as an absent student
        (Rect(60, 0, 10, 10), MatchResult(None, 0.9)),   # correct rejection, not counted
    ]
    row = recognition_tally(truth, preds, roster)
    assert (row.a_pp, row.a_ps, row.a_as, row.a_ap) == (1, 1, 1, 0)
    assert row.a_aa == 4 - 2  # ann present, dan consumed
    assert row.accuracy == pytest.approx(75.0)


def test_tally_unknown_truth_label():
    roster = Roster(frozenset(["ann"]))
    truth = GroundTruthImage("x", (GroundTruthFace(Rect(0, 0, 4, 4), "zed"),))
    with pytest.raises(UnknownLabelInTruth, match="zed"):
        recognition_tally(truth, [], roster)


def test_row_invariants():
    with pytest.raises(ValueError):
        RecognitionReportRow.from_counts("x", 30, 25, 26, 5)
    with pytest.raises(ValueError):
        RecognitionReportRow.from_counts("x", 30, 25, 25, 6)
    with pytest.raises(ValueError):
        DetectionReportRow.from_counts("x", 5, 6)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.data())
def test_reports_bounded_and_perfect(C, data):
    labels = [f"p{i}" for i in range(C)]
    roster = Roster(frozenset(labels))
    present = data.draw(st.lists(st.sampled_from(labels), unique=True, max_size=C))
    faces = tuple(GroundTruthFace(Rect(15 * i, 0, 10, 10), lab) for i, lab in enumerate(present))
    truth = GroundTruthImage("img", faces)
    perfect = [(f.box, MatchResult(f.label, 0.0)) for f in faces]
    assert recognition_tally(truth, perfect, roster).accuracy == 100.0
    noisy = [(f.box, MatchResult(data.draw(st.sampled_from(labels + [None])), 0.0)) for f in faces]
    row = recognition_tally(truth, noisy, roster)
    assert 0 <= row.accuracy <= 100
    assert row.accuracy == pytest.approx(100 * (row.a_pp + row.a_aa) / row.C)
    m = match_detections([f.box for f in faces], [f.box for f in faces])
    assert detection_report([("img", m)]).accuracy == 100.0


def test_tables_render():
    rows = [DetectionReportRow.from_counts(f"{i + 1}", t, d) for i, (t, d) in enumerate(DETECTION_ROWS)]
    text = detection_report(rows).to_table()
    assert "Detected faces" in text and "Mean accuracy: 97.50%" in text
    rows = [RecognitionReportRow.from_counts(f"{i + 1}", 30, 25, pp, aa) for i, (pp, aa) in enumerate(RECOGNITION_ROWS[:7])]
    assert "20.5" in recognition_report(rows).to_table()
