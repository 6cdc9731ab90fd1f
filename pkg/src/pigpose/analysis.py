"""Evaluation metrics and outlier-frame mining.

evaluate() sweeps detection thresholds 0.10..0.90: a predicted keypoint
with score >= t is a detection; it is a true positive iff ground truth
exists for that keypoint and the Euclidean distance is within the match
radius. outlier_scores() turns a temporally ordered pose sequence into a
per-frame novelty score from confidence and position derivatives;
find_peaks() flags its prominent local maxima for re-annotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AnalysisError
from .pose import missing_rows

DEFAULT_THRESHOLDS = tuple(round(i / 10, 2) for i in range(1, 10))
DEFAULT_MATCH_RADIUS = 10.0


@dataclass(frozen=True)
class ThresholdMetrics:
    threshold: float
    precision: float
    recall: float
    f_measure: float


@dataclass
class MatchReport:
    radius: float
    per_threshold: list[ThresholdMetrics]
    per_keypoint_error: list[float]  # NaN where a keypoint never matched

    def to_csv(self) -> str:
        lines = ["threshold,precision,recall,f_measure"]
        for m in self.per_threshold:
            lines.append(
                f"{m.threshold!r},{m.precision!r},{m.recall!r},{m.f_measure!r}"
            )
        return "\n".join(lines) + "\n"

    def errors_to_csv(self, keypoint_names: list[str]) -> str:
        lines = ["keypoint,mean_error_px"]
        for name, err in zip(keypoint_names, self.per_keypoint_error):
            lines.append(f"{name},{'' if math.isnan(err) else repr(err)}")
        return "\n".join(lines) + "\n"


@dataclass
class OutlierReport:
    scores: np.ndarray  # one non-negative scalar per frame
    flagged: list[int]  # indices into the sequence, sorted
    prominence_multiplier: float
    min_separation: int


def _ratio(num: int, den: int) -> float:
    return 1.0 if den == 0 else num / den


def evaluate(
    predictions: list[np.ndarray],
    ground_truth: list[np.ndarray],
    radius: float = DEFAULT_MATCH_RADIUS,
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
) -> MatchReport:
    """Per-keypoint, per-frame detection sweep.

    Conventions: precision is 1 when there are no detections, recall is 1
    when there is no ground truth; F = 2PR/(P+R) with F = 0 when P+R = 0.
    The per-keypoint mean error is threshold-free, over pairs where both
    prediction and ground truth exist and lie within the radius.
    """
    if len(predictions) != len(ground_truth):
        raise AnalysisError(
            f"{len(predictions)} predictions vs {len(ground_truth)} ground-truth frames"
        )
    if not predictions:
        raise AnalysisError("nothing to evaluate")
    k = ground_truth[0].shape[0]
    for p, g in zip(predictions, ground_truth):
        if p.shape != (k, 3) or g.shape != (k, 3):
            raise AnalysisError("pose shape mismatch between predictions and ground truth")

    per_threshold = []
    for t in thresholds:
        tp = fp = fn = 0
        for pred, gt in zip(predictions, ground_truth):
            pred_miss = missing_rows(pred)
            gt_miss = missing_rows(gt)
            for i in range(k):
                detected = (not pred_miss[i]) and pred[i, 2] >= t
                has_gt = not gt_miss[i]
                if detected:
                    close = (
                        has_gt
                        and math.hypot(
                            pred[i, 0] - gt[i, 0], pred[i, 1] - gt[i, 1]
                        )
                        <= radius
                    )
                    if close:
                        tp += 1
                    else:
                        fp += 1
                elif has_gt:
                    fn += 1
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        per_threshold.append(ThresholdMetrics(t, precision, recall, f))

    err_sum = np.zeros(k)
    err_count = np.zeros(k, dtype=int)
    for pred, gt in zip(predictions, ground_truth):
        both = ~missing_rows(pred) & ~missing_rows(gt)
        for i in np.nonzero(both)[0]:
            dist = math.hypot(pred[i, 0] - gt[i, 0], pred[i, 1] - gt[i, 1])
            if dist <= radius:
                err_sum[i] += dist
                err_count[i] += 1
    per_keypoint_error = [
        err_sum[i] / err_count[i] if err_count[i] else math.nan for i in range(k)
    ]
    return MatchReport(radius, per_threshold, per_keypoint_error)


def outlier_scores(
    pose_sequence: list[np.ndarray],
    frame_size: tuple[int, int],
    position_weight: float = 1.0,
) -> np.ndarray:
    """Per-frame novelty: max over keypoints of |d score| + w * |d position| / diag.

    The sequence must be ordered by source_index. Missing keypoints count
    as confidence 0 and contribute no position term for the affected
    frame pair. score(0) = 0.
    """
    if len(pose_sequence) < 2:
        raise AnalysisError("need at least 2 frames for temporal derivatives")
    width, height = frame_size
    diag = math.hypot(width, height)
    scores = np.zeros(len(pose_sequence))
    for t in range(1, len(pose_sequence)):
        prev, cur = pose_sequence[t - 1], pose_sequence[t]
        prev_miss = missing_rows(prev)
        cur_miss = missing_rows(cur)
        best = 0.0
        for i in range(cur.shape[0]):
            s_prev = 0.0 if prev_miss[i] else prev[i, 2]
            s_cur = 0.0 if cur_miss[i] else cur[i, 2]
            term = abs(s_cur - s_prev)
            if not prev_miss[i] and not cur_miss[i]:
                jump = math.hypot(cur[i, 0] - prev[i, 0], cur[i, 1] - prev[i, 1])
                term += position_weight * jump / diag
            best = max(best, term)
        scores[t] = best
    return scores


def find_peaks(
    series: np.ndarray,
    prominence_multiplier: float = 3.0,
    min_separation: int = 1,
) -> list[int]:
    """Indices of prominent strict local maxima, sorted.

    A plateau takes its leftmost index; endpoints are never maxima.
    Peaks must exceed mean + c * stddev; when two survivors are closer
    than min_separation the larger one wins (ties to the lower index).
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or len(x) == 0:
        raise AnalysisError("series must be a non-empty 1D array")
    if not np.isfinite(x).all():
        raise AnalysisError("series contains non-finite values")

    candidates = []
    n = len(x)
    i = 1
    while i < n - 1:
        if x[i] <= x[i - 1]:
            i += 1
            continue
        # Risen above the left neighbor: scan the plateau.
        j = i
        while j + 1 < n and x[j + 1] == x[i]:
            j += 1
        if j + 1 < n and x[j + 1] < x[i]:
            candidates.append(i)
        i = j + 1

    cutoff = float(x.mean()) + prominence_multiplier * float(x.std())
    candidates = [i for i in candidates if x[i] > cutoff]

    kept: list[int] = []
    for i in sorted(candidates, key=lambda i: (-x[i], i)):
        if all(abs(i - j) >= min_separation for j in kept):
            kept.append(i)
    return sorted(kept)


def mine_outliers(
    pose_sequence: list[np.ndarray],
    frame_size: tuple[int, int],
    prominence_multiplier: float = 3.0,
    min_separation: int = 1,
    position_weight: float = 1.0,
) -> OutlierReport:
    scores = outlier_scores(pose_sequence, frame_size, position_weight)
    flagged = find_peaks(scores, prominence_multiplier, min_separation)
    return OutlierReport(scores, flagged, prominence_multiplier, min_separation)
