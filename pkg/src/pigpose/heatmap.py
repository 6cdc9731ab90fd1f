"""Confidence-map encoding and subpixel decoding.

A pose is rendered into a channel stack at 1/d of the frame resolution:
one Gaussian bump per keypoint, one limb map per skeleton edge (Gaussian
of distance to the parent-child segment), and a single global map that is
the element-wise max of the keypoint channels. Decoding runs an argmax
per keypoint channel followed by a 1D quadratic fit across the peak in
each axis, then maps coordinates back to frame pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HeatmapError
from .pose import empty_pose, missing_rows
from .skeleton import Skeleton

DECODE_FLOOR = 0.05


@dataclass(frozen=True)
class MapSpec:
    """Geometry of a confidence stack.

    sigma is the Gaussian width in full-resolution pixels; downsample d is
    the power-of-two factor between frame and map resolution. Channels are
    laid out as K keypoint maps, then one limb map per skeleton edge
    (sorted by child index), then one global map.
    """

    sigma: float = 5.0
    downsample: int = 2

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise HeatmapError(f"sigma must be positive, got {self.sigma}")
        if self.downsample not in (1, 2, 4, 8):
            raise HeatmapError(
                f"downsample must be one of 1, 2, 4, 8, got {self.downsample}"
            )

    def channel_count(self, skeleton: Skeleton) -> int:
        return len(skeleton) + len(skeleton.edges()) + 1

    def channel_names(self, skeleton: Skeleton) -> list[str]:
        names = list(skeleton.names)
        names += [
            f"limb:{skeleton.names[p]}-{skeleton.names[c]}"
            for p, c in skeleton.edges()
        ]
        names.append("global")
        return names

    def map_shape(self, width: int, height: int) -> tuple[int, int]:
        d = self.downsample
        if width % d or height % d:
            raise HeatmapError(
                f"frame dims {width}x{height} not divisible by downsample {d}"
            )
        return height // d, width // d


def encode(
    pose: np.ndarray,
    width: int,
    height: int,
    spec: MapSpec,
    skeleton: Skeleton,
) -> np.ndarray:
    """Render a pose into a (C, H/d, W/d) confidence stack in [0, 1].

    Missing keypoints yield all-zero keypoint channels; a limb channel is
    zero when either endpoint is missing.
    """
    if pose.shape[0] != len(skeleton):
        raise HeatmapError(
            f"pose has {pose.shape[0]} rows, skeleton has {len(skeleton)}"
        )
    mh, mw = spec.map_shape(width, height)
    d = float(spec.downsample)
    sd = spec.sigma / d
    k = len(skeleton)
    edges = skeleton.edges()
    stack = np.zeros((k + len(edges) + 1, mh, mw), dtype=np.float64)

    us = np.arange(mw, dtype=np.float64)
    vs = np.arange(mh, dtype=np.float64)
    missing = missing_rows(pose)

    for i in range(k):
        if missing[i]:
            continue
        mx, my = pose[i, 0] / d, pose[i, 1] / d
        eu = np.exp(-((us - mx) ** 2) / (2.0 * sd * sd))
        ev = np.exp(-((vs - my) ** 2) / (2.0 * sd * sd))
        stack[i] = np.outer(ev, eu)

    uu, vv = np.meshgrid(us, vs)
    for e, (p, c) in enumerate(edges):
        if missing[p] or missing[c]:
            continue
        ax, ay = pose[p, 0] / d, pose[p, 1] / d
        bx, by = pose[c, 0] / d, pose[c, 1] / d
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            d2 = (uu - ax) ** 2 + (vv - ay) ** 2
        else:
            t = np.clip(((uu - ax) * dx + (vv - ay) * dy) / seg2, 0.0, 1.0)
            d2 = (uu - (ax + t * dx)) ** 2 + (vv - (ay + t * dy)) ** 2
        stack[k + e] = np.exp(-d2 / (2.0 * sd * sd))

    stack[-1] = stack[:k].max(axis=0)
    return stack


def subpixel_refine(channel: np.ndarray, peak: tuple[int, int]) -> tuple[float, float]:
    """Quadratic-fit offsets (dx, dy) in [-0.5, 0.5] around an argmax cell.

    peak is (row, col). Border peaks skip refinement (offset 0); a
    degenerate denominator (|L - 2P + R| <= 1e-12) also yields 0.
    """
    v, u = peak
    h, w = channel.shape

    def fit(left: float, center: float, right: float) -> float:
        denom = 2.0 * (left - 2.0 * center + right)
        if abs(denom) <= 1e-12:
            return 0.0
        return (left - right) / denom

    dx = 0.0
    dy = 0.0
    if 0 < u < w - 1:
        dx = fit(channel[v, u - 1], channel[v, u], channel[v, u + 1])
    if 0 < v < h - 1:
        dy = fit(channel[v - 1, u], channel[v, u], channel[v + 1, u])
    return dx, dy


def decode(
    stack: np.ndarray,
    spec: MapSpec,
    skeleton: Skeleton,
    floor: float = DECODE_FLOOR,
) -> np.ndarray:
    """Decode a confidence stack into a (K, 3) pose.

    Per keypoint channel: global argmax, subpixel refinement, coordinates
    scaled back by d; score is the raw map value at the argmax clamped to
    [0, 1]. Channels whose max falls below ``floor`` yield missing rows.
    Limb and global channels are ignored.
    """
    if stack.shape[0] != spec.channel_count(skeleton):
        raise HeatmapError(
            f"stack has {stack.shape[0]} channels, spec wants "
            f"{spec.channel_count(skeleton)}"
        )
    k = len(skeleton)
    d = float(spec.downsample)
    pose = empty_pose(k)
    for i in range(k):
        channel = stack[i]
        flat = int(np.argmax(channel))
        v, u = divmod(flat, channel.shape[1])
        peak = float(channel[v, u])
        if peak < floor:
            continue
        dx, dy = subpixel_refine(channel, (v, u))
        pose[i, 0] = (u + dx) * d
        pose[i, 1] = (v + dy) * d
        pose[i, 2] = min(max(peak, 0.0), 1.0)
    return pose


def stack_to_image(stack: np.ndarray) -> np.ndarray:
    """Tile channels horizontally into one uint8 image for inspection."""
    clipped = np.clip(stack, 0.0, 1.0)
    tiled = np.concatenate(list(clipped), axis=1)
    return (tiled * 255.0).round().astype(np.uint8)
