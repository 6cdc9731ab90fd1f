"""Pose matrices: one row per skeleton keypoint, columns (x, y, score).

Coordinates use the top-left pixel-center convention (x rightward, y
downward, sub-pixel floats allowed). A missing keypoint has NaN in all
three columns of its row; partial NaN rows are rejected on validation.
"""

from __future__ import annotations

import numpy as np

from .errors import DatasetError


def empty_pose(n_keypoints: int) -> np.ndarray:
    """All-missing pose matrix of shape (n_keypoints, 3)."""
    return np.full((n_keypoints, 3), np.nan, dtype=np.float64)


def missing_rows(pose: np.ndarray) -> np.ndarray:
    """Boolean mask, True where the keypoint is missing."""
    return np.isnan(pose[:, 0])


def validate_pose(pose: np.ndarray, n_keypoints: int) -> np.ndarray:
    """Coerce to float64 (n,3), enforcing the all-or-nothing NaN rule."""
    arr = np.asarray(pose, dtype=np.float64)
    if arr.shape != (n_keypoints, 3):
        raise DatasetError(
            f"pose must have shape ({n_keypoints}, 3), got {arr.shape}"
        )
    nan = np.isnan(arr)
    mixed = nan.any(axis=1) & ~nan.all(axis=1)
    if mixed.any():
        row = int(np.nonzero(mixed)[0][0])
        raise DatasetError(
            f"pose row {row} mixes NaN and finite values; missing keypoints "
            "must have x, y and score all unset"
        )
    return arr
