import numpy as np
import pytest

from ebt.evalharness import (
    PRECISION_THRESHOLDS,
    SUCCESS_THRESHOLDS,
    Sequence,
    evaluate,
    load_sequence,
    parse_gt_line,
    precision_curve,
    save_sequence,
    subsample,
    success_curve,
    synth_sequence,
)
from ebt.geometry import Box
from ebt.synth import SceneSpec


def _hand_case():
    """Four frames with exactly known distances and overlaps.

    frame 0: perfect match (d=0, IoU=1)
    frame 1: shifted 10 px right (d=10, IoU = 10/30)
    frame 2: shifted 30 px (d=30, IoU = 0 since boxes are 20 wide... use 25)
    frame 3: ground truth absent -> skipped
    """
    g = Box(50, 50, 20, 20)
    pred = [g, g.translated(10, 0), g.translated(25, 0), Box(0, 0, 20, 20)]
    gt = [g, g, g, None]
    return pred, gt


class TestParseGtLine:
    def test_comma_and_space_formats(self):
        assert parse_gt_line("11,21,30,40") == Box(10, 20, 30, 40)
        assert parse_gt_line("11 21 30 40") == Box(10, 20, 30, 40)
        assert parse_gt_line("11\t21\t30\t40") == Box(10, 20, 30, 40)

    def test_absent_markers(self):
        assert parse_gt_line("nan,nan,nan,nan") is None
        assert parse_gt_line("5,5,0,10") is None
        assert parse_gt_line("5,5,10,-3") is None


class TestCurves:
    def test_precision_hand_case(self):
        pred, gt = _hand_case()
        curve, ps20 = precision_curve(pred, gt)
        # distances over 3 evaluable frames: 0, 10, 25
        assert curve[0] == pytest.approx(1 / 3)
        assert curve[9] == pytest.approx(1 / 3)
        assert curve[10] == pytest.approx(2 / 3)
        assert curve[25] == pytest.approx(1.0)
        assert ps20 == pytest.approx(2 / 3)

    def test_success_hand_case(self):
        pred, gt = _hand_case()
        curve, auc = success_curve(pred, gt)
        # overlaps: 1.0, 10/30, 0.0; success uses a strict > comparison
        expected = np.array([(np.array([1.0, 1 / 3, 0.0]) > tau).mean() for tau in SUCCESS_THRESHOLDS])
        np.testing.assert_allclose(curve, expected)
        assert auc == pytest.approx(expected.mean())

    def test_strict_threshold_at_exact_iou(self):
        g = Box(0, 0, 10, 10)
        # IoU exactly 1.0 is NOT counted at threshold 1.0
        curve, _ = success_curve([g], [g])
        assert curve[-1] == 0.0 and curve[0] == 1.0

    def test_perfect_tracking(self):
        gt = [Box(5 + i, 6 + i, 12, 14) for i in range(5)]
        report = evaluate(gt, list(gt))
        assert report.precision_score_20 == 1.0
        assert report.auc == pytest.approx(20 / 21)

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            precision_curve([Box(0, 0, 5, 5)], [])

    def test_all_absent_raises(self):
        with pytest.raises(ValueError):
            success_curve([Box(0, 0, 5, 5)], [None])


class TestSequenceIo:
    def test_save_load_round_trip(self, tmp_path):
        seq = synth_sequence(SceneSpec(frame_count=4, seed=5))
        path = str(tmp_path / "scene")
        save_sequence(seq, path)
        loaded = load_sequence(path)
        assert len(loaded) == 4
        for i in range(4):
            np.testing.assert_array_equal(loaded.frame(i), seq.frame(i))
            assert loaded.ground_truth[i].x == pytest.approx(seq.ground_truth[i].x)
            assert loaded.ground_truth[i].as_tuple() == pytest.approx(
                seq.ground_truth[i].as_tuple()
            )

    def test_absent_rows_round_trip(self, tmp_path):
        seq = synth_sequence(SceneSpec(frame_count=3, seed=1))
        seq.ground_truth[1] = None
        path = str(tmp_path / "gap")
        save_sequence(seq, path)
        assert load_sequence(path).ground_truth[1] is None

    def test_missing_gt_raises(self, tmp_path):
        d = tmp_path / "empty"
        (d / "img").mkdir(parents=True)
        with pytest.raises(FileNotFoundError):
            load_sequence(str(d))

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            Sequence(frames=[np.zeros((4, 4, 3))], ground_truth=[])


class TestSubsample:
    def test_stride_one_is_identity(self):
        seq = synth_sequence(SceneSpec(frame_count=6, seed=2))
        assert subsample(seq, 1) is seq

    def test_stride_alignment(self):
        seq = synth_sequence(SceneSpec(frame_count=41, seed=2))
        sub = subsample(seq, 20)
        assert len(sub) == 3
        assert sub.ground_truth[1] == seq.ground_truth[20]
        assert sub.name.endswith("+20")

    def test_composition(self):
        seq = synth_sequence(SceneSpec(frame_count=25, seed=3))
        a = subsample(subsample(seq, 2), 3)
        b = subsample(seq, 6)
        assert a.ground_truth == b.ground_truth

    def test_bad_stride_raises(self):
        seq = synth_sequence(SceneSpec(frame_count=2, seed=0))
        with pytest.raises(ValueError):
            subsample(seq, 0)
