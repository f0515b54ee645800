import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polypstream.errors import InputError
from polypstream.evaluation import (
    FrameOutcome,
    aggregate,
    average_precision,
    evaluate_sequences,
    match_boxes,
    match_frame,
    mpt,
    pdr,
    pr_curve,
)
from polypstream.geometry import (
    BoundingBox,
    BoxOrigin,
    FrameDetections,
    FrameMeta,
    ScoredBox,
    corners_to_centroid,
)

from oracles import naive_average_precision


def sb(x0, y0, x1, y1, conf=0.9):
    return ScoredBox(BoundingBox(x0, y0, x1, y1), conf, BoxOrigin.DETECTOR)


def bb(x0, y0, x1, y1):
    return BoundingBox(x0, y0, x1, y1)


class TestMatchFrame:
    def test_empty_frame_is_true_negative(self):
        assert match_frame([], []) == FrameOutcome(0, 0, 0, 1)

    def test_single_hit(self):
        out = match_frame([sb(0, 0, 10, 10)], [bb(1, 1, 11, 11)])
        assert (out.tp, out.fp, out.fn, out.tn) == (1, 0, 0, 0)

    def test_duplicate_detection_not_counted_twice(self):
        dets = [sb(0, 0, 10, 10, 0.9), sb(0.5, 0.5, 10.5, 10.5, 0.8)]
        out = match_frame(dets, [bb(0, 0, 10, 10)])
        assert (out.tp, out.fp, out.fn) == (1, 0, 0)

    def test_unmatched_detection_is_fp(self):
        out = match_frame([sb(50, 50, 60, 60)], [])
        assert (out.tp, out.fp, out.fn, out.tn) == (0, 1, 0, 0)

    def test_undetected_gt_is_fn(self):
        out = match_frame([], [bb(0, 0, 10, 10)])
        assert (out.tp, out.fp, out.fn, out.tn) == (0, 0, 1, 0)

    def test_iou_cut_is_strict(self):
        # IoU exactly 0.5: (0,0,10,20) vs (0,0,10,10) -> inter 100, union 200
        out = match_frame([sb(0, 0, 10, 20)], [bb(0, 0, 10, 10)])
        assert (out.tp, out.fp, out.fn) == (0, 1, 1)

    def test_confidence_priority(self):
        # lower-confidence detection has better IoU but the higher one matches first
        gt = bb(0, 0, 10, 10)
        d_hi = sb(0, 0, 10, 12, 0.9)
        d_lo = sb(0, 0, 10, 10, 0.5)
        marks, claimed = match_boxes([d_lo, d_hi], [gt])
        assert marks == ["dup", "tp"]
        assert claimed == [0]

    def test_highest_iou_wins_among_free(self):
        gts = [bb(0, 0, 10, 10), bb(0, 0, 10, 12)]
        marks, claimed = match_boxes([sb(0, 0, 10, 10)], gts)
        assert marks == ["tp"]
        assert claimed == [0]

    def test_tp_plus_fn_equals_total_gt(self):
        r = np.random.default_rng(0)
        for _ in range(50):
            gts = [
                bb(x, y, x + 10, y + 10)
                for x, y in r.integers(0, 80, size=(r.integers(0, 4), 2))
            ]
            dets = [
                sb(x, y, x + 10, y + 10, float(c))
                for (x, y), c in zip(
                    r.integers(0, 80, size=(r.integers(0, 5), 2)),
                    r.random(5),
                )
            ]
            out = match_frame(dets, gts)
            assert out.tp + out.fn == len(gts)


class TestAggregate:
    def test_table_fixture_a(self):
        rep = aggregate([FrameOutcome(167, 26, 41, 0)], 0)
        assert rep.sen == pytest.approx(80.29, abs=0.005)
        assert rep.pre == pytest.approx(86.53, abs=0.005)
        assert rep.f1 == pytest.approx(83.29, abs=0.005)
        assert rep.f2 == pytest.approx(81.46, abs=0.005)

    def test_table_fixture_b(self):
        rep = aggregate([FrameOutcome(149, 30, 59, 0)], 0)
        assert rep.sen == pytest.approx(71.63, abs=0.005)
        assert rep.pre == pytest.approx(83.24, abs=0.005)
        assert rep.f1 == pytest.approx(77.00, abs=0.005)
        assert rep.f2 == pytest.approx(73.69, abs=0.005)

    def test_degenerate_denominators(self):
        rep = aggregate([FrameOutcome(0, 0, 5, 0)], 0)
        assert rep.sen == 0.0
        assert rep.pre is None
        assert rep.f1 is None
        assert rep.mnfp == 0.0
        assert rep.spe is None

    def test_mnfp_counts_all_frames(self):
        outcomes = [FrameOutcome(1, 2, 0, 0), FrameOutcome(0, 0, 0, 1)]
        rep = aggregate(outcomes, 1)
        assert rep.mnfp == 1.0
        assert rep.spe == 100.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            aggregate([], 0)

    def test_negative_frames_derived(self):
        outcomes = [FrameOutcome(0, 1, 0, 0), FrameOutcome(1, 0, 0, 0), FrameOutcome(0, 0, 0, 1)]
        rep = aggregate(outcomes)
        assert rep.n_negative_frames == 2
        assert rep.spe == 50.0

    @given(
        st.integers(0, 500), st.integers(0, 500), st.integers(0, 500)
    )
    def test_f_scores_identity(self, tp, fp, fn):
        rep = aggregate([FrameOutcome(tp, fp, fn, 0)], 0)
        if rep.f1 is None:
            return
        assert rep.f1 <= 100.0 + 1e-9
        if abs(rep.sen - rep.pre) < 1e-12:
            assert rep.f1 == pytest.approx(rep.f2, abs=1e-9)
        elif rep.sen < rep.pre:
            assert rep.f2 < rep.f1
        else:
            assert rep.f2 > rep.f1


class TestAveragePrecision:
    def test_perfect_detector(self):
        gts = [[bb(0, 0, 10, 10)], [bb(20, 20, 40, 40)]]
        dets = [[sb(0, 0, 10, 10, 0.9)], [sb(20, 20, 40, 40, 0.8)]]
        assert average_precision(dets, gts) == pytest.approx(1.0)

    def test_tp_fp_tp_staircase(self):
        # confidence order: TP(0.9), FP(0.8), TP(0.7) with 2 ground truths
        gts = [[bb(0, 0, 10, 10)], [bb(50, 50, 60, 60)]]
        dets = [
            [sb(0, 0, 10, 10, 0.9), sb(80, 80, 90, 90, 0.8)],
            [sb(50, 50, 60, 60, 0.7)],
        ]
        assert average_precision(dets, gts) == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3))

    def test_all_false_positives(self):
        gts = [[bb(0, 0, 10, 10)]]
        dets = [[sb(50, 50, 60, 60, 0.9), sb(70, 70, 80, 80, 0.8)]]
        assert average_precision(dets, gts) == 0.0

    def test_no_ground_truth_rejected(self):
        with pytest.raises(InputError):
            average_precision([[sb(0, 0, 10, 10)]], [[]])

    def test_pr_points_monotone_recall(self):
        r = np.random.default_rng(1)
        dets, gts = _random_dataset(r, 8)
        points = pr_curve(dets, gts)
        recalls = [p.recall for p in points]
        assert recalls == sorted(recalls)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_matches_per_threshold_oracle(self, seed):
        r = np.random.default_rng(seed)
        dets, gts = _random_dataset(r, 5)
        if sum(len(g) for g in gts) == 0:
            return
        got = average_precision(dets, gts)
        want = naive_average_precision(dets, gts)
        assert got == pytest.approx(want, abs=1e-12)


def _random_dataset(r, n_frames):
    dets, gts = [], []
    for _ in range(n_frames):
        frame_gts = [
            bb(float(x), float(y), float(x + 10), float(y + 10))
            for x, y in r.integers(0, 60, size=(int(r.integers(0, 3)), 2))
        ]
        frame_dets = []
        for g in frame_gts:
            if r.random() < 0.7:
                dx, dy = r.uniform(-3, 3, size=2)
                frame_dets.append(
                    sb(
                        max(g.x_min + dx, 0.0),
                        max(g.y_min + dy, 0.0),
                        max(g.x_max + dx, g.x_min + dx + 1),
                        max(g.y_max + dy, g.y_min + dy + 1),
                        round(float(r.random()), 2),
                    )
                )
        for _ in range(int(r.integers(0, 3))):
            x, y = r.integers(0, 80, size=2)
            frame_dets.append(sb(float(x), float(y), float(x + 8), float(y + 8), round(float(r.random()), 2)))
        dets.append(frame_dets)
        gts.append(frame_gts)
    return dets, gts


class TestPdr:
    def test_all_detected(self):
        assert pdr({"a": True, "b": True}) == 100.0

    def test_fourteen_of_fifteen(self):
        flags = {f"p{i}": i != 7 for i in range(15)}
        assert pdr(flags) == pytest.approx(93.33, abs=0.005)

    def test_zero_detected(self):
        assert pdr({"a": False, "b": False}) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            pdr({})


class TestMpt:
    def test_mean(self):
        assert mpt([2.0, 2.0, 2.0]) == 2.0

    def test_thousand_frames_in_37s(self):
        durations = [37.0] * 1000  # ms each, 37 s total
        assert mpt(durations) == pytest.approx(37.0)

    def test_single_frame(self):
        assert mpt([5.0]) == 5.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            mpt([])


class TestEvaluateSequences:
    def _seq(self, frame_specs):
        dets, gts = [], []
        for i, (det_boxes, gt_boxes) in enumerate(frame_specs):
            meta = FrameMeta(200, 200, i)
            dets.append(FrameDetections(meta, tuple(det_boxes)))
            gts.append(gt_boxes)
        return dets, gts

    def test_pdr_and_counts(self):
        gt_a = corners_to_centroid(bb(10, 10, 30, 30), "a")
        gt_b = corners_to_centroid(bb(60, 60, 90, 90), "b")
        seq = self._seq(
            [
                ([sb(10, 10, 30, 30, 0.9)], [gt_a]),
                ([], [gt_a]),
                ([sb(100, 100, 120, 120, 0.8)], [gt_b]),
                ([], []),
            ]
        )
        rep = evaluate_sequences([seq])
        assert (rep.tp, rep.fp, rep.fn, rep.tn) == (1, 1, 2, 1)
        assert rep.pdr == 50.0
        assert rep.n_frames == 4
        assert rep.n_negative_frames == 1

    def test_frame_order_invariance(self):
        gt = corners_to_centroid(bb(10, 10, 30, 30), "a")
        frames = [
            ([sb(10, 10, 30, 30, 0.9)], [gt]),
            ([sb(50, 50, 70, 70, 0.4)], []),
            ([], [gt]),
        ]
        rep_fwd = evaluate_sequences([self._seq(frames)])
        rep_rev = evaluate_sequences([self._seq(frames[::-1])])
        for field in ("tp", "fp", "fn", "tn", "sen", "pre", "mnfp", "map", "pdr"):
            assert getattr(rep_fwd, field) == getattr(rep_rev, field)

    def test_length_mismatch_rejected(self):
        dets, gts = self._seq([([], [])])
        with pytest.raises(InputError):
            evaluate_sequences([(dets, gts + [[]])])
