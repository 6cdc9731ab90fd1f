"""Stacked dense-net hourglass: model, training, checkpoints, prediction."""

from __future__ import annotations

import numpy as np

from ..heatmap import MapSpec, decode
from ..skeleton import Skeleton
from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    NetworkConfig,
    build,
    forward,
    gradients,
    loss_and_gradients,
    loss_value,
    parameter_count,
)
from .train import Adam, EpochRecord, Monitor, TrainConfig, TrainHistory, train


def predict(
    params: dict[str, np.ndarray],
    net_config: NetworkConfig,
    map_spec: MapSpec,
    skeleton: Skeleton,
    frames: np.ndarray,
    batch_size: int = 8,
) -> list[np.ndarray]:
    """Forward + final-stack decode: one (K, 3) pose per input frame.

    frames is (N, side, side) grayscale in [0, 1]; coordinates come back
    in that frame's pixel space.
    """
    x = np.asarray(frames)
    if x.ndim == 2:
        x = x[None]
    poses = []
    for start in range(0, x.shape[0], batch_size):
        chunk = x[start : start + batch_size]
        _, final = forward(params, net_config, chunk)
        for i in range(final.shape[0]):
            poses.append(decode(final[i].astype(np.float64), map_spec, skeleton))
    return poses


__all__ = [
    "Adam",
    "EpochRecord",
    "Monitor",
    "NetworkConfig",
    "TrainConfig",
    "TrainHistory",
    "build",
    "forward",
    "gradients",
    "load_checkpoint",
    "loss_and_gradients",
    "loss_value",
    "parameter_count",
    "predict",
    "save_checkpoint",
    "train",
]
