"""Procedural synthetic frames shared by the test suite.

draw_pig() renders a pig-like blob (body ellipse, head disc, bright
snout dot, four legs with side-dependent brightness, tail stroke) and
returns the image together with its ground-truth 9-keypoint pose in the
canonical skeleton row order.
"""

from __future__ import annotations

import math

import cv2
import numpy as np


def draw_pig(side: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One (side, side) float image in [0, 1] and its (9, 3) pose."""
    img = np.zeros((side, side), dtype=np.float64)
    cx = rng.uniform(0.35, 0.65) * side
    cy = rng.uniform(0.35, 0.65) * side
    angle = rng.uniform(0.0, 2.0 * math.pi)
    scale = rng.uniform(0.9, 1.1) * side / 96.0
    body_len = 34.0 * scale
    body_w = 13.0 * scale

    ca, sa = math.cos(angle), math.sin(angle)

    def at(fwd: float, right: float) -> tuple[float, float]:
        # body frame: +fwd toward the head, +right toward the right flank
        return (cx + fwd * ca - right * sa, cy + fwd * sa + right * ca)

    def px(p):
        return int(round(p[0])), int(round(p[1]))

    neck = at(body_len * 0.5, 0.0)
    tailbase = at(-body_len * 0.5, 0.0)
    head = at(body_len * 0.5 + 7.0 * scale, 0.0)
    snout = at(body_len * 0.5 + 13.0 * scale, 0.0)
    tailtip = at(-body_len * 0.5 - 9.0 * scale, 3.0 * scale)
    # L/R in the pig's own frame; left is -right when facing +fwd
    foreleg_l = at(body_len * 0.32, -body_w - 5.0 * scale)
    foreleg_r = at(body_len * 0.32, body_w + 5.0 * scale)
    hindleg_l = at(-body_len * 0.32, -body_w - 5.0 * scale)
    hindleg_r = at(-body_len * 0.32, body_w + 5.0 * scale)

    cv2.ellipse(
        img,
        px((cx, cy)),
        (int(round(body_len * 0.55)), int(round(body_w))),
        math.degrees(angle),
        0,
        360,
        0.55,
        -1,
    )
    cv2.circle(img, px(head), int(round(6.5 * scale)), 0.75, -1)
    cv2.circle(img, px(snout), int(round(2.5 * scale)), 1.0, -1)
    cv2.line(img, px(tailbase), px(tailtip), 0.45, 2)
    for start_frac, end, shade in (
        (0.32, foreleg_l, 0.85),
        (0.32, foreleg_r, 0.30),
        (-0.32, hindleg_l, 0.85),
        (-0.32, hindleg_r, 0.30),
    ):
        start = at(body_len * start_frac, 0.0)
        cv2.line(img, px(start), px(end), shade, 2)
        cv2.circle(img, px(end), 2, shade, -1)

    # row order: snout, head, neck, forelegL1, forelegR1, hindlegL1,
    # hindlegR1, tailbase, tailtip
    points = [
        snout,
        head,
        neck,
        foreleg_l,
        foreleg_r,
        hindleg_l,
        hindleg_r,
        tailbase,
        tailtip,
    ]
    pose = np.array([[p[0], p[1], 1.0] for p in points], dtype=np.float64)
    pose[:, 0] = np.clip(pose[:, 0], 1.0, side - 2.0)
    pose[:, 1] = np.clip(pose[:, 1], 1.0, side - 2.0)
    return np.clip(img, 0.0, 1.0), pose


def pig_frames(count: int, side: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack of frames (count, side, side) and poses (count, 9, 3)."""
    rng = np.random.default_rng(seed)
    imgs, poses = [], []
    for _ in range(count):
        img, pose = draw_pig(side, rng)
        imgs.append(img)
        poses.append(pose)
    return np.stack(imgs), np.stack(poses)


def template_frames(
    n_templates: int,
    per_template: int,
    side: int,
    seed: int,
    total: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Frames drawn from n_templates base pigs plus per-frame pixel noise.

    Returns (frames, template_labels); frames of one template differ only
    by mild additive noise, so clusters should recover the templates.
    When ``total`` is given, leftover frames beyond per_template x
    n_templates are spread over the first templates.
    """
    rng = np.random.default_rng(seed)
    templates = [draw_pig(side, rng)[0] for _ in range(n_templates)]
    counts = [per_template] * n_templates
    if total is not None:
        extra = total - per_template * n_templates
        assert 0 <= extra < n_templates
        for t in range(extra):
            counts[t] += 1
    frames, labels = [], []
    for t, base in enumerate(templates):
        for _ in range(counts[t]):
            noisy = np.clip(base + rng.normal(0.0, 0.02, base.shape), 0.0, 1.0)
            frames.append(noisy)
            labels.append(t)
    return np.stack(frames), np.array(labels)
