"""Pydantic request/response models for the annotation API.

Error bodies carry a machine code from a closed set:
``not_found``, ``row_count_mismatch``, ``invalid_payload``,
``no_checkpoint``, ``dataset_error``.
"""

from __future__ import annotations

from pydantic import BaseModel


class KeypointOut(BaseModel):
    name: str
    parent: str | None = None
    swap: str | None = None


class SkeletonOut(BaseModel):
    keypoints: list[KeypointOut]


class FrameOut(BaseModel):
    id: int
    width: int
    height: int
    annotated: bool
    outlier: bool


class FrameListOut(BaseModel):
    frames: list[FrameOut]


class KeypointRow(BaseModel):
    name: str
    x: float | None = None
    y: float | None = None
    score: float | None = None


class PosePayload(BaseModel):
    rows: list[KeypointRow]


class OutliersOut(BaseModel):
    frame_ids: list[int]
    prominence_multiplier: float | None = None
    min_separation: int | None = None


class ErrorBody(BaseModel):
    code: str
    message: str


class ApiError(Exception):
    """Carried through FastAPI's exception handler into an ErrorBody."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
