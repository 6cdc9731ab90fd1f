"""Keypoint graph: names, parent hierarchy and left/right swap pairs.

A skeleton is defined by a small CSV with header ``name,parent,swap``.
Empty cells mean "no parent" / "no swap partner"; surrounding whitespace
is trimmed; names are case-sensitive. Keypoint order is row order and is
the canonical channel/row order everywhere downstream.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass

from .errors import SkeletonError

CSV_HEADER = ["name", "parent", "swap"]

# The default 9-keypoint pig skeleton used throughout the docs and tests:
# head chain (snout-head-neck), paired legs hanging off neck/tailbase, and
# the tail. Left/right leg pairs exchange labels under mirroring.
PIG_SKELETON_CSV = """\
name,parent,swap
snout,,
head,snout,
neck,head,
forelegL1,neck,forelegR1
forelegR1,neck,forelegL1
hindlegL1,tailbase,hindlegR1
hindlegR1,tailbase,hindlegL1
tailbase,,
tailtip,tailbase,
"""


@dataclass(frozen=True)
class KeypointDef:
    """One keypoint: its name and optional parent/swap indices."""

    name: str
    parent: int | None = None
    swap: int | None = None


@dataclass(frozen=True)
class Skeleton:
    keypoints: tuple[KeypointDef, ...]

    def __len__(self) -> int:
        return len(self.keypoints)

    @property
    def names(self) -> list[str]:
        return [kp.name for kp in self.keypoints]

    def index(self, name: str) -> int:
        for i, kp in enumerate(self.keypoints):
            if kp.name == name:
                return i
        raise SkeletonError(f"unknown keypoint {name!r}")

    def edges(self) -> list[tuple[int, int]]:
        """(parent_index, child_index) pairs, sorted by child index."""
        return [
            (kp.parent, child)
            for child, kp in enumerate(self.keypoints)
            if kp.parent is not None
        ]

    def swap_permutation(self) -> list[int]:
        """Index map applied to pose rows when an image is mirrored.

        Index i maps to its swap partner when one is declared, otherwise to
        itself; the result is an involution.
        """
        return [
            kp.swap if kp.swap is not None else i
            for i, kp in enumerate(self.keypoints)
        ]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for kp in self.keypoints:
            writer.writerow(
                [
                    kp.name,
                    self.keypoints[kp.parent].name if kp.parent is not None else "",
                    self.keypoints[kp.swap].name if kp.swap is not None else "",
                ]
            )
        return out.getvalue()

    def content_hash(self) -> str:
        """sha256 of the canonical CSV; checkpoints refuse to load across it."""
        return hashlib.sha256(self.to_csv().encode("utf-8")).hexdigest()


def parse_skeleton(csv_text: str) -> Skeleton:
    """Parse and validate a ``name,parent,swap`` CSV into a Skeleton.

    Raises SkeletonError (with the offending 1-based data row number) on
    duplicate names, unknown parent/swap references, parent cycles and
    asymmetric or self-referencing swaps.
    """
    reader = csv.reader(io.StringIO(csv_text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise SkeletonError("empty skeleton CSV")
    header = [cell.strip() for cell in rows[0]]
    if header != CSV_HEADER:
        raise SkeletonError(
            f"skeleton CSV header must be {','.join(CSV_HEADER)!r}, "
            f"got {','.join(header)!r}"
        )

    names: list[str] = []
    parents: list[str] = []
    swaps: list[str] = []
    for r, row in enumerate(rows[1:], start=1):
        cells = [cell.strip() for cell in row] + [""] * (3 - len(row))
        name, parent, swap = cells[:3]
        if not name:
            raise SkeletonError(f"empty keypoint name at row {r}")
        if name in names:
            raise SkeletonError(f"duplicate keypoint name {name!r} at row {r}")
        names.append(name)
        parents.append(parent)
        swaps.append(swap)

    index = {name: i for i, name in enumerate(names)}

    def resolve(ref: str, kind: str, row: int) -> int | None:
        if not ref:
            return None
        if ref not in index:
            raise SkeletonError(f"unknown {kind} {ref!r} at row {row}")
        return index[ref]

    parent_idx = [resolve(p, "parent", i + 1) for i, p in enumerate(parents)]
    swap_idx = [resolve(s, "swap", i + 1) for i, s in enumerate(swaps)]

    # Parent cycles: walk each chain; anything revisited is a cycle.
    for start in range(len(names)):
        seen = set()
        node: int | None = start
        while node is not None:
            if node in seen:
                raise SkeletonError(f"parent cycle at row {start + 1}")
            seen.add(node)
            node = parent_idx[node]

    for i, s in enumerate(swap_idx):
        if s is None:
            continue
        if s == i:
            raise SkeletonError(f"keypoint swaps with itself at row {i + 1}")
        if swap_idx[s] != i:
            # Blame the partner row that fails to point back.
            raise SkeletonError(f"asymmetric swap at row {s + 1}")

    return Skeleton(
        keypoints=tuple(
            KeypointDef(name=n, parent=p, swap=s)
            for n, p, s in zip(names, parent_idx, swap_idx)
        )
    )


def pig_skeleton() -> Skeleton:
    """The default 9-keypoint pig skeleton (7 edges, 2 swap pairs)."""
    return parse_skeleton(PIG_SKELETON_CSV)
