import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pigpose.analysis import (
    DEFAULT_THRESHOLDS,
    evaluate,
    find_peaks,
    mine_outliers,
    outlier_scores,
)
from pigpose.errors import AnalysisError
from pigpose.pose import empty_pose


def rand_pose_pair(rng, k=9, w=100, h=80, p_missing=0.2):
    def one(scores):
        pose = np.zeros((k, 3))
        pose[:, 0] = rng.uniform(0, w - 1, k)
        pose[:, 1] = rng.uniform(0, h - 1, k)
        pose[:, 2] = scores
        for i in range(k):
            if rng.random() < p_missing:
                pose[i] = np.nan
        return pose

    pred = one(rng.uniform(0, 1, k))
    gt = one(np.ones(k))
    # pull some predictions near the truth so matches actually occur
    for i in range(k):
        if rng.random() < 0.5 and not np.isnan(gt[i, 0]) and not np.isnan(pred[i, 0]):
            pred[i, 0] = gt[i, 0] + rng.normal(0, 4)
            pred[i, 1] = gt[i, 1] + rng.normal(0, 4)
    return pred, gt


def oracle_counts(preds, gts, radius, threshold):
    """Set-style classification of every (frame, keypoint) slot.

    A slot with a detection is TP when truth exists within the radius and
    FP otherwise; a slot with truth but no detection at all is FN (a
    too-far detection is only a false positive, the truth slot is not
    additionally counted as missed).
    """
    detections = set()
    truths = set()
    for f, (pred, gt) in enumerate(zip(preds, gts)):
        for i in range(pred.shape[0]):
            if not math.isnan(pred[i, 0]) and pred[i, 2] >= threshold:
                detections.add((f, i))
            if not math.isnan(gt[i, 0]):
                truths.add((f, i))
    tp = 0
    for f, i in detections:
        if (f, i) in truths:
            d = math.hypot(preds[f][i, 0] - gts[f][i, 0], preds[f][i, 1] - gts[f][i, 1])
            if d <= radius:
                tp += 1
    fp = len(detections) - tp
    fn = len(truths - detections)
    return tp, fp, fn


class TestEvaluate:
    def test_perfect_predictions(self):
        rng = np.random.default_rng(0)
        gts = []
        for _ in range(4):
            pose = np.zeros((9, 3))
            pose[:, 0] = rng.uniform(5, 90, 9)
            pose[:, 1] = rng.uniform(5, 70, 9)
            pose[:, 2] = 1.0
            gts.append(pose)
        report = evaluate([g.copy() for g in gts], gts, radius=10.0)
        for m in report.per_threshold:
            assert m.precision == 1.0 and m.recall == 1.0 and m.f_measure == 1.0
        assert all(e == pytest.approx(0.0) for e in report.per_keypoint_error)

    def test_scores_below_first_threshold(self):
        gt = np.zeros((9, 3))
        gt[:, 0] = np.linspace(5, 85, 9)
        gt[:, 1] = 40.0
        gt[:, 2] = 1.0
        pred = gt.copy()
        pred[:, 2] = 0.05
        report = evaluate([pred], [gt], radius=10.0)
        m = report.per_threshold[0]
        assert m.threshold == 0.1
        assert m.recall == 0.0
        assert m.precision == 1.0  # vacuous: no detections at all
        assert m.f_measure == 0.0

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            preds, gts = zip(*(rand_pose_pair(rng) for _ in range(5)))
            preds, gts = list(preds), list(gts)
            report = evaluate(preds, gts, radius=8.0)
            for m in report.per_threshold:
                tp, fp, fn = oracle_counts(preds, gts, 8.0, m.threshold)
                precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
                recall = 1.0 if tp + fn == 0 else tp / (tp + fn)
                f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
                assert m.precision == pytest.approx(precision, abs=1e-12)
                assert m.recall == pytest.approx(recall, abs=1e-12)
                assert m.f_measure == pytest.approx(f, abs=1e-12)

    def test_recall_monotone_in_threshold(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            preds, gts = zip(*(rand_pose_pair(rng) for _ in range(3)))
            report = evaluate(list(preds), list(gts), radius=8.0)
            recalls = [m.recall for m in report.per_threshold]
            assert all(b <= a + 1e-12 for a, b in zip(recalls, recalls[1:]))

    def test_frame_order_invariant(self):
        rng = np.random.default_rng(3)
        preds, gts = zip(*(rand_pose_pair(rng) for _ in range(6)))
        preds, gts = list(preds), list(gts)
        a = evaluate(preds, gts, radius=8.0)
        order = [4, 2, 0, 5, 1, 3]
        b = evaluate([preds[i] for i in order], [gts[i] for i in order], radius=8.0)
        for ma, mb in zip(a.per_threshold, b.per_threshold):
            assert ma == mb

    def test_default_thresholds(self):
        assert DEFAULT_THRESHOLDS == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

    def test_length_mismatch(self):
        with pytest.raises(AnalysisError):
            evaluate([empty_pose(9)], [], radius=5.0)


class TestOutlierScores:
    def test_constant_sequence_zero(self):
        pose = np.zeros((9, 3))
        pose[:, 0] = 10.0
        pose[:, 1] = 10.0
        pose[:, 2] = 0.9
        scores = outlier_scores([pose.copy() for _ in range(10)], (64, 64))
        assert not scores.any()

    def test_confidence_drop_worked_example(self):
        frames = []
        for t in range(12):
            pose = np.zeros((9, 3))
            pose[:, 0] = 20.0
            pose[:, 1] = 20.0
            pose[:, 2] = 0.9
            if t == 7:
                pose[4, 2] = 0.1
            frames.append(pose)
        scores = outlier_scores(frames, (64, 64))
        assert scores[7] == pytest.approx(0.8)
        assert scores[8] == pytest.approx(0.8)  # recovery is a jump too
        others = np.delete(scores, [7, 8])
        assert not others.any()
        assert scores[0] == 0.0

    def test_teleport_is_strict_max(self):
        rng = np.random.default_rng(4)
        diag = math.hypot(64, 64)
        frames = []
        x = 10.0
        for t in range(100):
            pose = np.zeros((9, 3))
            x += 0.15
            pose[:, 0] = x + rng.normal(0, 0.02, 9)
            pose[:, 1] = 30.0 + rng.normal(0, 0.02, 9)
            pose[:, 2] = 0.9
            if t == 50:
                pose[0, 0] += 0.5 * diag
            frames.append(pose)
        scores = outlier_scores(frames, (64, 64))
        assert scores[50] > max(np.delete(scores, [50, 51])) * 5
        assert scores.argmax() in (50, 51)
        assert scores[50] == scores.max()

    def test_missing_contributes_score_term_only(self):
        a = np.zeros((9, 3))
        a[:, 0] = a[:, 1] = 10.0
        a[:, 2] = 0.9
        b = a.copy()
        b[3] = np.nan  # keypoint vanished: |0.9 - 0| with no position term
        scores = outlier_scores([a, b], (64, 64))
        assert scores[1] == pytest.approx(0.9)

    def test_too_short(self):
        with pytest.raises(AnalysisError):
            outlier_scores([empty_pose(9)], (10, 10))


class TestFindPeaks:
    def test_single_spike(self):
        assert find_peaks(np.array([0.0, 0.0, 5.0, 0.0, 0.0]), 1.0) == [2]

    def test_strictly_increasing_no_flags(self):
        assert find_peaks(np.arange(10.0), 1.0) == []

    def test_plateau_takes_leftmost(self):
        series = np.array([0.0, 0.0, 4.0, 4.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert find_peaks(series, 1.0) == [2]

    def test_cutoff_filters_small_peaks(self):
        series = np.array([0.0, 1.0, 0.0, 10.0, 0.0, 1.0, 0.0])
        got = find_peaks(series, 1.0)
        assert got == [3]

    def test_min_separation_keeps_larger(self):
        series = np.array([0.0, 8.0, 0.0, 9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert find_peaks(series, 0.5, min_separation=4) == [3]

    def test_min_separation_tie_lower_index(self):
        series = np.array([0.0, 9.0, 0.0, 9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert find_peaks(series, 0.5, min_separation=4) == [1]

    def test_sorted_duplicate_free(self):
        rng = np.random.default_rng(5)
        series = rng.random(200)
        series[[20, 90, 160]] += 6.0
        got = find_peaks(series, 3.0)
        assert got == sorted(set(got))

    def test_three_injected_jumps(self):
        rng = np.random.default_rng(6)
        base = 0.05 * np.sin(np.linspace(0, 6 * math.pi, 200)) + 0.1
        base += rng.normal(0, 0.004, 200)
        base[40] += 1.1
        base[101] += 0.9
        base[177] += 1.3
        got = find_peaks(base, 3.0)
        assert got == [40, 101, 177]

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(min_value=0.01, max_value=50.0),
        st.floats(min_value=-100.0, max_value=100.0),
    )
    def test_positive_affine_invariance(self, a, b):
        rng = np.random.default_rng(7)
        series = rng.random(120)
        series[[15, 60, 99]] += 5.0
        assert find_peaks(series * a + b, 3.0) == find_peaks(series, 3.0)

    def test_non_finite_rejected(self):
        with pytest.raises(AnalysisError):
            find_peaks(np.array([0.0, np.nan, 1.0]), 1.0)


def test_mine_outliers_combines():
    rng = np.random.default_rng(8)
    frames = []
    for t in range(60):
        pose = np.zeros((9, 3))
        pose[:, 0] = 20.0 + rng.normal(0, 0.05, 9)
        pose[:, 1] = 20.0
        pose[:, 2] = 0.9
        if t == 30:
            pose[:, 2] = 0.05
        frames.append(pose)
    report = mine_outliers(frames, (64, 64), prominence_multiplier=3.0, min_separation=1)
    assert 30 in report.flagged or 31 in report.flagged
    assert len(report.scores) == 60
