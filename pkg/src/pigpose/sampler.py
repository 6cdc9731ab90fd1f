"""Keyframe selection: mini-batch k-means over grayscale thumbnails.

Frames are featurized as flattened 32x32 grayscale thumbnails in [0, 1];
mini-batch k-means (streaming per-center means with cumulative counts,
low-share center reassignment) clusters them, and the members nearest
each center become the annotation keyframes (~10% of the pool with the
default per-cluster count).
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import SamplerError


@dataclass(frozen=True)
class FrameFeature:
    frame_id: int
    vector: np.ndarray  # flattened thumbnail, values in [0, 1]


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 100
    batch_size: int = 100
    reassignment_ratio: float = 0.01
    tol: float = 0.0  # 0.0 runs to max_iterations
    max_iterations: int = 100
    seed: int = 0
    verbose: bool = False
    kmeans_plus_plus: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise SamplerError(f"k must be >= 1, got {self.k}")
        if self.batch_size < 1:
            raise SamplerError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.reassignment_ratio < 0:
            raise SamplerError("reassignment_ratio must be >= 0")
        if self.tol < 0:
            raise SamplerError("tol must be >= 0")


@dataclass
class Clustering:
    centers: np.ndarray  # (k, dim)
    assignment: dict[int, int]  # frame_id -> cluster
    per_center_counts: np.ndarray  # (k,)
    inertia: float


def featurize(frame: np.ndarray, thumb_side: int = 32) -> np.ndarray:
    """Grayscale (luma 0.299/0.587/0.114), bilinear resize, flatten to [0, 1].

    Accepts uint8 images in [0, 255] (2D grayscale or 3D RGB) or float
    images already in [0, 1].
    """
    arr = np.asarray(frame)
    if arr.ndim == 3:
        arr = (
            0.299 * arr[..., 0].astype(np.float64)
            + 0.587 * arr[..., 1].astype(np.float64)
            + 0.114 * arr[..., 2].astype(np.float64)
        )
    elif arr.ndim != 2:
        raise SamplerError(f"expected 2D or 3D image, got shape {arr.shape}")
    arr = arr.astype(np.float64)
    if frame.dtype == np.uint8:
        arr = arr / 255.0
    thumb = cv2.resize(arr, (thumb_side, thumb_side), interpolation=cv2.INTER_LINEAR)
    vec = thumb.reshape(-1)
    if not np.isfinite(vec).all():
        raise SamplerError("non-finite values in feature vector")
    return vec


def _pairwise_sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (x * x).sum(axis=1)[:, None]
        + (centers * centers).sum(axis=1)[None, :]
        - 2.0 * (x @ centers.T)
    )
    return np.maximum(d2, 0.0)


def _init_centers(
    x: np.ndarray, k: int, rng: np.random.Generator, plus_plus: bool
) -> np.ndarray:
    n = x.shape[0]
    if not plus_plus:
        idx = rng.choice(n, size=k, replace=False)
        return x[idx].copy()
    # k-means++: D^2-weighted seeding.
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(0, n))
    centers[0] = x[first]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[int(rng.integers(0, n))]
        else:
            centers[j] = x[int(rng.choice(n, p=d2 / total))]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def minibatch_kmeans(
    features: list[FrameFeature],
    config: KMeansConfig,
    log=None,
) -> Clustering:
    """Cluster frame features; fully deterministic given config.seed.

    Per iteration: sample batch_size points uniformly with replacement
    (the full dataset is used as the batch whenever batch_size >= n),
    assign to the nearest center by squared Euclidean distance, update
    each center as a streaming mean with learning rate 1/count (counts
    cumulative across iterations), then reinitialize starved centers
    (cumulative share below reassignment_ratio x the mean share, checked
    every 10*k processed samples) to random data points. Stops at
    max_iterations, or earlier when the squared center movement drops to
    tol (tol = 0.0 disables the movement stop).
    """
    if not features:
        raise SamplerError("no features to cluster")
    ids = [f.frame_id for f in features]
    x = np.stack([np.asarray(f.vector, dtype=np.float64) for f in features])
    n, dim = x.shape
    if config.k > n:
        raise SamplerError(f"k={config.k} exceeds number of frames n={n}")
    if not np.isfinite(x).all():
        raise SamplerError("non-finite feature values")

    rng = np.random.default_rng(config.seed)
    centers = _init_centers(x, config.k, rng, config.kmeans_plus_plus)
    counts = np.zeros(config.k, dtype=np.int64)
    full_batch = config.batch_size >= n
    since_reassign = 0

    for it in range(config.max_iterations):
        if full_batch:
            batch = x
        else:
            batch_idx = rng.integers(0, n, size=config.batch_size)
            batch = x[batch_idx]
        labels = np.argmin(_pairwise_sq_dists(batch, centers), axis=1)

        old_centers = centers.copy()
        batch_counts = np.bincount(labels, minlength=config.k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, batch)
        touched = batch_counts > 0
        new_total = counts + batch_counts
        centers[touched] = (
            counts[touched, None] * centers[touched] + sums[touched]
        ) / new_total[touched, None]
        counts = new_total

        # Starved-center reassignment, evaluated every 10*k processed
        # samples: a fresh center gets a grace window before its cumulative
        # share (vs reassignment_ratio x the mean share) can starve it.
        since_reassign += len(batch)
        if config.reassignment_ratio > 0 and since_reassign >= 10 * config.k:
            since_reassign = 0
            threshold = config.reassignment_ratio * counts.mean()
            starved = counts < threshold
            cap = max(1, int(0.5 * len(batch)))
            if starved.sum() > cap:
                keep = np.argsort(counts)[cap:]
                starved[keep] = False
            if starved.any():
                fed_counts = counts[~starved]
                refill = int(fed_counts.min()) if fed_counts.size else 1
                for c in np.nonzero(starved)[0]:
                    centers[c] = x[int(rng.integers(0, n))]
                    counts[c] = max(1, refill)

        movement = float(((centers - old_centers) ** 2).sum())
        if log is not None and config.verbose:
            inertia = float(_pairwise_sq_dists(x, centers).min(axis=1).sum())
            log(f"iter {it + 1} inertia {inertia!r} movement {movement!r}")
        if config.tol > 0 and movement <= config.tol:
            break

    d2 = _pairwise_sq_dists(x, centers)
    final_labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), final_labels].sum())
    return Clustering(
        centers=centers,
        assignment={fid: int(lbl) for fid, lbl in zip(ids, final_labels)},
        per_center_counts=np.bincount(final_labels, minlength=config.k),
        inertia=inertia,
    )


def default_per_cluster(n_frames: int, k: int, fraction: float = 0.10) -> int:
    """ceil(fraction * n / k): reproduces ~10% selection at the usual scale."""
    return max(1, int(np.ceil(fraction * n_frames / k)))


def select_keyframes(
    clustering: Clustering,
    features: list[FrameFeature],
    per_cluster: int,
) -> list[int]:
    """Per cluster, the per_cluster members nearest their center.

    Ties break toward the lower frame_id; empty clusters contribute
    nothing; the result is duplicate-free and sorted by frame_id.
    """
    if per_cluster < 1:
        raise SamplerError(f"per_cluster must be >= 1, got {per_cluster}")
    by_cluster: dict[int, list[tuple[float, int]]] = {}
    for f in features:
        c = clustering.assignment[f.frame_id]
        dist = float(((np.asarray(f.vector) - clustering.centers[c]) ** 2).sum())
        by_cluster.setdefault(c, []).append((dist, f.frame_id))
    selected: set[int] = set()
    for members in by_cluster.values():
        members.sort()
        selected.update(fid for _, fid in members[:per_cluster])
    return sorted(selected)


def cluster_report(
    clustering: Clustering, features: list[FrameFeature]
) -> list[tuple[int, int, float]]:
    """(cluster_id, size, inertia_share) rows, one per cluster."""
    k = clustering.centers.shape[0]
    per_cluster = np.zeros(k)
    sizes = np.zeros(k, dtype=int)
    for f in features:
        c = clustering.assignment[f.frame_id]
        per_cluster[c] += float(
            ((np.asarray(f.vector) - clustering.centers[c]) ** 2).sum()
        )
        sizes[c] += 1
    total = per_cluster.sum()
    shares = per_cluster / total if total > 0 else np.zeros(k)
    return [(c, int(sizes[c]), float(shares[c])) for c in range(k)]


def uniform_keyframes(frame_ids: list[int], count: int, seed: int) -> list[int]:
    """Seeded uniform baseline: ``count`` ids without replacement, sorted."""
    if count >= len(frame_ids):
        return sorted(frame_ids)
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(frame_ids), size=count, replace=False)
    return sorted(frame_ids[i] for i in picked)
