"""Seeded image+pose augmentation.

Spatial transforms (affine, horizontal flip with left/right label swap)
move pixels and keypoints through the same mapping; pixel noise
(contrast, additive Gaussian, blur, dropout) never touches keypoints.
Every draw is reproducible from (config, seed, frame_id).

Images are single-channel float arrays in [0, 1], shape (H, W).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import AugmentError
from .pose import missing_rows


@dataclass(frozen=True)
class AffineSpec:
    """Forward spatial transform: scale, then rotate about center, then translate."""

    rotation: float = 0.0  # degrees
    translation: tuple[float, float] = (0.0, 0.0)  # pixels
    scale: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)  # pixels

    def is_identity(self) -> bool:
        return (
            self.rotation == 0.0
            and self.translation == (0.0, 0.0)
            and self.scale == 1.0
        )

    def matrix(self) -> np.ndarray:
        """3x3 homogeneous forward matrix (y-down pixel coordinates)."""
        if self.scale <= 0:
            raise AugmentError(f"scale must be positive, got {self.scale}")
        theta = math.radians(self.rotation)
        cos, sin = math.cos(theta), math.sin(theta)
        cx, cy = self.center
        tx, ty = self.translation
        a = self.scale * cos
        b = self.scale * sin
        # T(trans) . T(center) . R . S . T(-center)
        return np.array(
            [
                [a, -b, cx + tx - a * cx + b * cy],
                [b, a, cy + ty - b * cx - a * cy],
                [0.0, 0.0, 1.0],
            ],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Pixel-only noise; the defaults are a no-op."""

    dropout_fraction: float = 0.0
    additive_noise_sigma: float = 0.0
    blur_sigma: float = 0.0
    contrast_factor: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_fraction <= 1.0:
            raise AugmentError(f"dropout_fraction out of [0,1]: {self.dropout_fraction}")
        if self.additive_noise_sigma < 0 or self.blur_sigma < 0:
            raise AugmentError("noise sigmas must be non-negative")
        if self.contrast_factor <= 0:
            raise AugmentError(f"contrast_factor must be positive: {self.contrast_factor}")


@dataclass(frozen=True)
class AugmentConfig:
    """Uniform sampling ranges for every augmentation parameter.

    Defaults are mild, suited to a fixed overhead camera: rotation within
    +-30 degrees, translation within +-5% of the frame side, scale in
    [0.9, 1.1], horizontal flip half the time, light pixel noise.
    """

    rotation_range: tuple[float, float] = (-30.0, 30.0)
    translation_frac_range: tuple[float, float] = (-0.05, 0.05)
    scale_range: tuple[float, float] = (0.9, 1.1)
    flip_probability: float = 0.5
    additive_sigma_range: tuple[float, float] = (0.0, 0.03)
    blur_sigma_range: tuple[float, float] = (0.0, 1.0)
    dropout_range: tuple[float, float] = (0.0, 0.02)
    contrast_range: tuple[float, float] = (0.8, 1.25)
    seed: int = 0

    @staticmethod
    def identity(seed: int = 0) -> "AugmentConfig":
        """Point ranges that always produce the identity augmentation."""
        return AugmentConfig(
            rotation_range=(0.0, 0.0),
            translation_frac_range=(0.0, 0.0),
            scale_range=(1.0, 1.0),
            flip_probability=0.0,
            additive_sigma_range=(0.0, 0.0),
            blur_sigma_range=(0.0, 0.0),
            dropout_range=(0.0, 0.0),
            contrast_range=(1.0, 1.0),
            seed=seed,
        )


def _in_frame(x: float, y: float, width: int, height: int) -> bool:
    return 0.0 <= x <= width - 1 and 0.0 <= y <= height - 1


def transform_points(points: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Apply a 3x3 homogeneous matrix to (n, 2) points."""
    pts = np.asarray(points, dtype=np.float64)
    ones = np.ones((pts.shape[0], 1))
    out = np.hstack([pts, ones]) @ matrix.T
    return out[:, :2]


def apply_affine(
    image: np.ndarray, pose: np.ndarray, spec: AffineSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Warp image and pose by the same forward affine transform.

    The image is resampled bilinearly with out-of-bounds filled black;
    keypoints landing outside the frame become missing. An identity spec
    bypasses resampling entirely.
    """
    if spec.scale <= 0:
        raise AugmentError(f"scale must be positive, got {spec.scale}")
    if spec.is_identity():
        return image.copy(), pose.copy()

    height, width = image.shape[:2]
    m = spec.matrix()
    warped = cv2.warpAffine(
        image,
        m[:2],
        (width, height),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0.0,
    )

    out = pose.copy()
    present = ~missing_rows(pose)
    if present.any():
        moved = transform_points(pose[present, :2], m)
        out[present, 0] = moved[:, 0]
        out[present, 1] = moved[:, 1]
        for idx, (x, y) in zip(np.nonzero(present)[0], moved):
            if not _in_frame(x, y, width, height):
                out[idx] = np.nan
    return warped, out


def flip_horizontal(
    image: np.ndarray, pose: np.ndarray, swap_permutation: list[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Mirror about the vertical axis and relabel left/right keypoints.

    x' = (width - 1) - x for every keypoint, then row i takes the flipped
    row of its swap partner. Applying the op twice restores the input
    exactly.
    """
    width = image.shape[1]
    mirrored = image[:, ::-1].copy()
    flipped = pose.copy()
    present = ~missing_rows(pose)
    flipped[present, 0] = (width - 1) - pose[present, 0]
    out = flipped[np.asarray(swap_permutation)]
    return mirrored, out


def apply_noise(image: np.ndarray, spec: NoiseSpec, seed) -> np.ndarray:
    """Pixel noise in fixed order: contrast, additive Gaussian, blur, dropout.

    ``seed`` may be an int or a numpy Generator. Output is clamped to
    [0, 1]; keypoints are never involved.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = image.astype(np.float64, copy=True)
    if spec.contrast_factor != 1.0:
        out = 0.5 + spec.contrast_factor * (out - 0.5)
    if spec.additive_noise_sigma > 0:
        out = out + rng.normal(0.0, spec.additive_noise_sigma, size=out.shape)
    if spec.blur_sigma > 0:
        out = cv2.GaussianBlur(out, (0, 0), spec.blur_sigma)
    if spec.dropout_fraction > 0:
        drop = rng.random(out.shape) < spec.dropout_fraction
        out[drop] = 0.0
    return np.clip(out, 0.0, 1.0)


def sample_augmentation(
    config: AugmentConfig, rng_state: np.random.Generator
) -> tuple[AffineSpec, NoiseSpec, bool]:
    """Draw one augmentation uniformly from the configured ranges.

    The draw order is fixed so a given generator state always yields the
    same parameters. The affine center is filled in by the caller (it
    depends on the frame size).
    """

    def draw(lo: float, hi: float) -> float:
        if lo == hi:
            return lo
        return float(rng_state.uniform(lo, hi))

    affine = AffineSpec(
        rotation=draw(*config.rotation_range),
        translation=(
            draw(*config.translation_frac_range),
            draw(*config.translation_frac_range),
        ),
        scale=draw(*config.scale_range),
    )
    noise = NoiseSpec(
        contrast_factor=draw(*config.contrast_range),
        additive_noise_sigma=draw(*config.additive_sigma_range),
        blur_sigma=draw(*config.blur_sigma_range),
        dropout_fraction=draw(*config.dropout_range),
    )
    flip = bool(config.flip_probability > 0 and rng_state.random() < config.flip_probability)
    return affine, noise, flip


def rng_for_frame(seed: int, frame_id: int, epoch: int = 0) -> np.random.Generator:
    """Per-frame RNG stream: parallel application order never changes results."""
    return np.random.default_rng(np.random.SeedSequence((seed, frame_id, epoch)))


def augment_sample(
    image: np.ndarray,
    pose: np.ndarray,
    swap_permutation: list[int],
    config: AugmentConfig,
    frame_id: int,
    epoch: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Full augmentation of one training sample: flip, affine, pixel noise.

    Translation fractions are scaled by the frame sides; rotation and
    scale pivot on the image center.
    """
    rng = rng_for_frame(config.seed, frame_id, epoch)
    affine, noise, flip = sample_augmentation(config, rng)
    height, width = image.shape[:2]

    img, pse = image, pose
    if flip:
        img, pse = flip_horizontal(img, pse, swap_permutation)
    affine = AffineSpec(
        rotation=affine.rotation,
        translation=(
            affine.translation[0] * width,
            affine.translation[1] * height,
        ),
        scale=affine.scale,
        center=((width - 1) / 2.0, (height - 1) / 2.0),
    )
    img, pse = apply_affine(img, pse, affine)
    img = apply_noise(img, noise, rng)
    return img, pse
