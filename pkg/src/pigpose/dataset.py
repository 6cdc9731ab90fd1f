"""Persistent frame/annotation store.

Layout under a dataset root:

    root/manifest.json      canonical JSON (sorted keys, stable formatting)
    root/frames/*.png       one PNG per frame
    root/annotations.csv    frame_id,keypoint_name,x,y,score (missing = empty)
    root/outliers.json      ordered flagged frame ids + detector params
    root/runs.log           append-only run log

Reads are lock-free; every write goes through a per-root file lock and a
write-to-temp-then-rename so readers never observe torn files. Pose
coordinates survive a save/load round trip bit-exactly (floats are
serialized with repr). Timestamps are deliberately excluded from the
manifest so repeated saves are byte-identical.
"""

from __future__ import annotations

import json
import os
import re
import hashlib
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from filelock import FileLock

from .errors import DatasetError
from .pose import empty_pose, missing_rows, validate_pose
from .skeleton import Skeleton, parse_skeleton

MANIFEST_VERSION = 1
TRAIN, VALIDATION = "train", "validation"


@dataclass
class FrameRecord:
    id: int
    width: int
    height: int
    image_path: str  # relative to the dataset root (or source dir before save)
    annotated: bool = False
    source_index: int = 0


def _natural_key(name: str) -> tuple:
    parts = re.split(r"(\d+)", name)
    return tuple(int(p) if p.isdigit() else p for p in parts)


def _fmt(value: float) -> str:
    return repr(float(value))


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".tmp-{path.name}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def load_gray(path: Path) -> np.ndarray:
    """Load an image as float64 grayscale in [0, 1]."""
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise DatasetError(f"cannot decode image {path}")
    return img.astype(np.float64) / 255.0


class PoseDataset:
    """Frames, annotations, skeleton and split assignments for one project."""

    def __init__(
        self,
        skeleton: Skeleton,
        frames: list[FrameRecord],
        rng_seed: int = 0,
        root: Path | None = None,
    ):
        self.skeleton = skeleton
        self.frames = frames
        self.rng_seed = rng_seed
        self.root = root  # dataset root; None until save() binds one
        self._image_base = root  # where image_path is relative to
        self.split_map: dict[int, str] = {}
        self.poses: dict[int, np.ndarray] = {}
        self._by_id = {f.id: f for f in frames}

    # ------------------------------------------------------------------ info

    def __len__(self) -> int:
        return len(self.frames)

    def frame(self, frame_id: int) -> FrameRecord:
        try:
            return self._by_id[frame_id]
        except KeyError:
            raise DatasetError(f"unknown frame id {frame_id}") from None

    def annotated_ids(self) -> list[int]:
        return [f.id for f in self.frames if f.annotated]

    def split_ids(self, part: str) -> list[int]:
        """Annotated ids on one side of the split.

        Frames annotated after the last split() default to the train side
        until split() is rerun.
        """
        if part not in (TRAIN, VALIDATION):
            raise DatasetError(f"unknown split part {part!r}")
        return [
            fid
            for fid in self.annotated_ids()
            if self.split_map.get(fid, TRAIN) == part
        ]

    def image(self, frame_id: int) -> np.ndarray:
        rec = self.frame(frame_id)
        base = self._image_base if self._image_base is not None else Path(".")
        return load_gray(base / rec.image_path)

    def image_bytes(self, frame_id: int) -> bytes:
        rec = self.frame(frame_id)
        base = self._image_base if self._image_base is not None else Path(".")
        return (base / rec.image_path).read_bytes()

    # ------------------------------------------------------------- mutations

    def set_pose(self, frame_id: int, pose: np.ndarray) -> None:
        """Store an annotation; persists immediately when bound to a root."""
        rec = self.frame(frame_id)
        arr = validate_pose(pose, len(self.skeleton))
        self.poses[frame_id] = arr
        rec.annotated = True
        if self.root is not None:
            self._persist()

    def get_pose(self, frame_id: int) -> np.ndarray:
        self.frame(frame_id)
        if frame_id not in self.poses:
            raise DatasetError(f"frame {frame_id} has no annotation")
        return self.poses[frame_id].copy()

    def split(self, validation_fraction: float, seed: int) -> None:
        """Assign floor(fraction * n_annotated) frames to validation.

        Seeded uniform shuffle over the annotated ids; deterministic for a
        given seed. Fraction 0 leaves the validation side empty.
        """
        if not 0.0 <= validation_fraction < 1.0:
            raise DatasetError(
                f"validation_fraction must be in [0, 1), got {validation_fraction}"
            )
        annotated = sorted(self.annotated_ids())
        if not annotated:
            raise DatasetError("no annotated frames to split")
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(annotated))
        n_val = int(np.floor(validation_fraction * len(annotated)))
        val_ids = {annotated[i] for i in order[:n_val]}
        self.split_map = {
            fid: (VALIDATION if fid in val_ids else TRAIN) for fid in annotated
        }
        self.rng_seed = seed
        if self.root is not None:
            self._persist()

    # ----------------------------------------------------------- persistence

    def _manifest_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "rng_seed": self.rng_seed,
            "skeleton_csv": self.skeleton.to_csv(),
            "annotations_sha256": hashlib.sha256(
                self._annotations_csv().encode("utf-8")
            ).hexdigest(),
            "frames": [
                {
                    "id": f.id,
                    "width": f.width,
                    "height": f.height,
                    "image_path": f.image_path,
                    "annotated": f.annotated,
                    "source_index": f.source_index,
                }
                for f in self.frames
            ],
            "split": {str(fid): part for fid, part in sorted(self.split_map.items())},
        }

    def _annotations_csv(self) -> str:
        lines = ["frame_id,keypoint_name,x,y,score"]
        for fid in sorted(self.poses):
            pose = self.poses[fid]
            miss = missing_rows(pose)
            for i, name in enumerate(self.skeleton.names):
                if miss[i]:
                    lines.append(f"{fid},{name},,,")
                else:
                    x, y, s = pose[i]
                    lines.append(f"{fid},{name},{_fmt(x)},{_fmt(y)},{_fmt(s)}")
        return "\n".join(lines) + "\n"

    def _persist(self) -> None:
        assert self.root is not None
        with FileLock(str(self.root / ".lock")):
            _atomic_write(
                self.root / "annotations.csv",
                self._annotations_csv().encode("utf-8"),
            )
            manifest = json.dumps(self._manifest_dict(), sort_keys=True, indent=2)
            _atomic_write(self.root / "manifest.json", (manifest + "\n").encode("utf-8"))

    def save(self, root: Path | str) -> "PoseDataset":
        """Write the full layout under root, importing frame images as PNG."""
        root = Path(root)
        (root / "frames").mkdir(parents=True, exist_ok=True)
        base = self._image_base if self._image_base is not None else Path(".")
        for rec in self.frames:
            dest_rel = f"frames/frame_{rec.id:06d}.png"
            dest = root / dest_rel
            src = base / rec.image_path
            if src.resolve() != dest.resolve():
                img = cv2.imread(str(src), cv2.IMREAD_UNCHANGED)
                if img is None:
                    raise DatasetError(f"cannot decode image {src}")
                if not cv2.imwrite(str(dest), img):
                    raise DatasetError(f"cannot write {dest}")
            rec.image_path = dest_rel
        self.root = root
        self._image_base = root
        self._persist()
        return self

    @classmethod
    def load(cls, root: Path | str) -> "PoseDataset":
        root = Path(root)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise DatasetError(f"manifest not found under {root}")
        try:
            data = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DatasetError(f"corrupt manifest: {exc}") from exc
        if data.get("version") != MANIFEST_VERSION:
            raise DatasetError(f"unsupported manifest version {data.get('version')!r}")

        skeleton = parse_skeleton(data["skeleton_csv"])
        frames = [
            FrameRecord(
                id=f["id"],
                width=f["width"],
                height=f["height"],
                image_path=f["image_path"],
                annotated=f["annotated"],
                source_index=f["source_index"],
            )
            for f in data["frames"]
        ]
        ds = cls(skeleton, frames, rng_seed=data["rng_seed"], root=root)

        ann_path = root / "annotations.csv"
        text = ann_path.read_text(encoding="utf-8") if ann_path.exists() else ""
        if not text:
            text = "frame_id,keypoint_name,x,y,score\n"
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        if digest != data["annotations_sha256"]:
            raise DatasetError("annotations.csv checksum mismatch")
        ds.poses = _parse_annotations(text, skeleton)

        annotated_set = set(ds.poses)
        for rec in ds.frames:
            if rec.annotated and rec.id not in annotated_set:
                raise DatasetError(f"frame {rec.id} marked annotated but has no pose")
        split_map = {int(k): v for k, v in data.get("split", {}).items()}
        for fid, part in split_map.items():
            if part not in (TRAIN, VALIDATION):
                raise DatasetError(f"bad split value {part!r} for frame {fid}")
            if fid not in annotated_set:
                raise DatasetError(f"split references unannotated frame {fid}")
        ds.split_map = split_map
        return ds

    def equals(self, other: "PoseDataset") -> bool:
        """Field-for-field equality, pose coordinates compared bit-exactly."""
        if self._manifest_dict() != other._manifest_dict():
            return False
        if set(self.poses) != set(other.poses):
            return False
        for fid, pose in self.poses.items():
            a, b = pose, other.poses[fid]
            if not np.array_equal(a, b, equal_nan=True):
                return False
        return True


def _parse_annotations(text: str, skeleton: Skeleton) -> dict[int, np.ndarray]:
    lines = text.strip("\n").split("\n")
    if lines and lines[0] != "frame_id,keypoint_name,x,y,score":
        raise DatasetError(f"bad annotations header: {lines[0]!r}")
    name_to_idx = {n: i for i, n in enumerate(skeleton.names)}
    poses: dict[int, np.ndarray] = {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != 5:
            raise DatasetError(f"annotations.csv line {ln}: expected 5 cells")
        fid = int(cells[0])
        name = cells[1]
        if name not in name_to_idx:
            raise DatasetError(f"annotations.csv line {ln}: unknown keypoint {name!r}")
        pose = poses.setdefault(fid, empty_pose(len(skeleton)))
        if cells[2] == "" and cells[3] == "" and cells[4] == "":
            continue
        pose[name_to_idx[name]] = [float(cells[2]), float(cells[3]), float(cells[4])]
    return poses


def ingest_frames(
    directory: Path | str,
    pattern: str = "*.png",
    skeleton: Skeleton | None = None,
) -> PoseDataset:
    """Build an in-memory dataset from a directory of same-sized frames.

    Frames are ordered by natural filename sort (frame2 before frame10)
    and source_index follows that order; nothing is annotated. Call
    ``save(root)`` to import the images into a dataset root.
    """
    from .skeleton import pig_skeleton

    directory = Path(directory)
    paths = sorted(directory.glob(pattern), key=lambda p: _natural_key(p.name))
    if not paths:
        raise DatasetError(f"no frames matching {pattern!r} under {directory}")

    frames: list[FrameRecord] = []
    dims: tuple[int, int] | None = None
    for idx, path in enumerate(paths):
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise DatasetError(f"cannot decode image {path}")
        h, w = img.shape[:2]
        if dims is None:
            dims = (w, h)
        elif (w, h) != dims:
            raise DatasetError(
                f"mixed frame dimensions: {path.name} is {w}x{h}, "
                f"expected {dims[0]}x{dims[1]}"
            )
        frames.append(
            FrameRecord(
                id=idx,
                width=w,
                height=h,
                image_path=path.name,
                annotated=False,
                source_index=idx,
            )
        )
    ds = PoseDataset(skeleton or pig_skeleton(), frames)
    ds._image_base = directory
    return ds


def write_pose_csv(path: Path | str, poses: dict[int, np.ndarray], skeleton: Skeleton) -> None:
    """Write poses in the annotations.csv schema (used for predictions too)."""
    lines = ["frame_id,keypoint_name,x,y,score"]
    for fid in sorted(poses):
        pose = poses[fid]
        miss = missing_rows(pose)
        for i, name in enumerate(skeleton.names):
            if miss[i]:
                lines.append(f"{fid},{name},,,")
            else:
                x, y, s = pose[i]
                lines.append(f"{fid},{name},{_fmt(x)},{_fmt(y)},{_fmt(s)}")
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def read_pose_csv(path: Path | str, skeleton: Skeleton) -> dict[int, np.ndarray]:
    """Read a pose CSV written by write_pose_csv (or annotations.csv)."""
    return _parse_annotations(Path(path).read_text(encoding="utf-8"), skeleton)
