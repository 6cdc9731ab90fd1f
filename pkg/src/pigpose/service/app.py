"""HTTP service backing the browser annotator and the review loop.

All endpoints live under /api; the built annotator client (when present
under frontend/dist) is served statically at /. Long-running work (train,
sample, outlier mining) stays in the CLI; the service only reads frames,
reads/writes annotations, reports the outlier queue and offers one-frame
warm-start predictions from an optional checkpoint.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..dataset import PoseDataset
from ..errors import DatasetError, PigposeError
from ..network import load_checkpoint, predict
from ..pose import empty_pose
from .schemas import (
    ApiError,
    ErrorBody,
    FrameListOut,
    FrameOut,
    KeypointOut,
    KeypointRow,
    OutliersOut,
    PosePayload,
    SkeletonOut,
)


def _pose_to_payload(pose: np.ndarray, names: list[str]) -> PosePayload:
    rows = []
    for i, name in enumerate(names):
        if math.isnan(pose[i, 0]):
            rows.append(KeypointRow(name=name))
        else:
            rows.append(
                KeypointRow(
                    name=name,
                    x=float(pose[i, 0]),
                    y=float(pose[i, 1]),
                    score=float(pose[i, 2]),
                )
            )
    return PosePayload(rows=rows)


def _payload_to_pose(payload: PosePayload, names: list[str]) -> np.ndarray:
    if len(payload.rows) != len(names):
        raise ApiError(
            422,
            "row_count_mismatch",
            f"expected {len(names)} rows, got {len(payload.rows)}",
        )
    pose = empty_pose(len(names))
    index = {n: i for i, n in enumerate(names)}
    seen = set()
    for row in payload.rows:
        if row.name not in index:
            raise ApiError(422, "invalid_payload", f"unknown keypoint {row.name!r}")
        if row.name in seen:
            raise ApiError(422, "invalid_payload", f"duplicate keypoint {row.name!r}")
        seen.add(row.name)
        present = [v is not None for v in (row.x, row.y, row.score)]
        if any(present) and not all(present):
            raise ApiError(
                422,
                "invalid_payload",
                f"keypoint {row.name!r} must set x, y and score together or none",
            )
        if all(present):
            pose[index[row.name]] = [row.x, row.y, row.score]
    return pose


def read_outlier_queue(root: Path) -> tuple[list[int], dict]:
    path = root / "outliers.json"
    if not path.exists():
        return [], {}
    data = json.loads(path.read_text(encoding="utf-8"))
    return list(data.get("frame_ids", [])), data.get("params", {})


def create_app(
    dataset_root: Path | str,
    checkpoint: Path | str | None = None,
    static_dir: Path | str | None = None,
) -> FastAPI:
    root = Path(dataset_root)
    dataset = PoseDataset.load(root)
    model = None
    if checkpoint is not None:
        params, net_config, map_spec, _ = load_checkpoint(checkpoint, dataset.skeleton)
        model = (params, net_config, map_spec)

    app = FastAPI(title="pigpose annotator service")

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content=ErrorBody(code=exc.code, message=exc.message).model_dump(),
        )

    @app.exception_handler(PigposeError)
    async def domain_error_handler(request: Request, exc: PigposeError):
        return JSONResponse(
            status_code=400,
            content=ErrorBody(code="dataset_error", message=str(exc)).model_dump(),
        )

    @app.get("/api/skeleton", response_model=SkeletonOut)
    def get_skeleton():
        kps = dataset.skeleton.keypoints
        names = dataset.skeleton.names
        return SkeletonOut(
            keypoints=[
                KeypointOut(
                    name=kp.name,
                    parent=names[kp.parent] if kp.parent is not None else None,
                    swap=names[kp.swap] if kp.swap is not None else None,
                )
                for kp in kps
            ]
        )

    @app.get("/api/frames", response_model=FrameListOut)
    def list_frames():
        flagged, _ = read_outlier_queue(root)
        flagged_set = set(flagged)
        return FrameListOut(
            frames=[
                FrameOut(
                    id=f.id,
                    width=f.width,
                    height=f.height,
                    annotated=f.annotated,
                    outlier=f.id in flagged_set,
                )
                for f in dataset.frames
            ]
        )

    def _frame_or_404(frame_id: int):
        try:
            return dataset.frame(frame_id)
        except DatasetError:
            raise ApiError(404, "not_found", f"no frame {frame_id}") from None

    @app.get("/api/frames/{frame_id}/image")
    def get_image(frame_id: int):
        _frame_or_404(frame_id)
        return Response(content=dataset.image_bytes(frame_id), media_type="image/png")

    @app.get("/api/frames/{frame_id}/keypoints", response_model=PosePayload)
    def get_keypoints(frame_id: int):
        rec = _frame_or_404(frame_id)
        if not rec.annotated:
            return _pose_to_payload(empty_pose(len(dataset.skeleton)), dataset.skeleton.names)
        return _pose_to_payload(dataset.get_pose(frame_id), dataset.skeleton.names)

    @app.put("/api/frames/{frame_id}/keypoints", response_model=PosePayload)
    def put_keypoints(frame_id: int, payload: PosePayload):
        _frame_or_404(frame_id)
        pose = _payload_to_pose(payload, dataset.skeleton.names)
        dataset.set_pose(frame_id, pose)
        return _pose_to_payload(dataset.get_pose(frame_id), dataset.skeleton.names)

    @app.get("/api/outliers", response_model=OutliersOut)
    def get_outliers():
        flagged, params = read_outlier_queue(root)
        return OutliersOut(
            frame_ids=flagged,
            prominence_multiplier=params.get("prominence_multiplier"),
            min_separation=params.get("min_separation"),
        )

    @app.post("/api/predict/{frame_id}", response_model=PosePayload)
    def predict_frame(frame_id: int):
        rec = _frame_or_404(frame_id)
        if model is None:
            raise ApiError(409, "no_checkpoint", "no checkpoint loaded")
        params, net_config, map_spec = model
        img = dataset.image(frame_id)
        side = net_config.input_side
        if img.shape != (side, side):
            import cv2

            img = cv2.resize(img, (side, side), interpolation=cv2.INTER_LINEAR)
        pose = predict(params, net_config, map_spec, dataset.skeleton, img[None])[0]
        pose[:, 0] *= rec.width / side
        pose[:, 1] *= rec.height / side
        return _pose_to_payload(pose, dataset.skeleton.names)

    dist = (
        Path(static_dir)
        if static_dir is not None
        else Path(__file__).resolve().parents[3] / "frontend" / "dist"
    )
    if dist.is_dir():
        app.mount("/", StaticFiles(directory=dist, html=True), name="annotator")

    return app
