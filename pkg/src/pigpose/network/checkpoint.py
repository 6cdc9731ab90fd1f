"""Deterministic checkpoint container.

Layout: magic line, 8-byte little-endian header length, canonical JSON
header (sorted keys; tensor names, dtypes, shapes, offsets; network and
map configs; skeleton CSV + sha256), then the raw little-endian tensor
bytes. Loading verifies the magic and refuses a checkpoint trained
against a different skeleton. Identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import NetworkError
from ..heatmap import MapSpec
from ..skeleton import Skeleton, parse_skeleton
from .model import NetworkConfig

MAGIC = b"pigpose-checkpoint-v1\n"


def save_checkpoint(
    path: Path | str,
    params: dict[str, np.ndarray],
    net_config: NetworkConfig,
    map_spec: MapSpec,
    skeleton: Skeleton,
) -> None:
    tensors = []
    blob = bytearray()
    for name, arr in params.items():
        a = np.ascontiguousarray(arr)
        if a.dtype.byteorder == ">":
            a = a.astype(a.dtype.newbyteorder("<"))
        tensors.append(
            {
                "name": name,
                "dtype": np.dtype(a.dtype).str,
                "shape": list(a.shape),
                "offset": len(blob),
            }
        )
        blob += a.tobytes()
    header = json.dumps(
        {
            "format_version": 1,
            "net_config": asdict(net_config),
            "map_spec": asdict(map_spec),
            "skeleton_sha256": skeleton.content_hash(),
            "skeleton_csv": skeleton.to_csv(),
            "tensors": tensors,
        },
        sort_keys=True,
    ).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(f".tmp-{path.name}")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        fh.write(bytes(blob))
    os.replace(tmp, path)


def load_checkpoint(
    path: Path | str,
    skeleton: Skeleton | None = None,
) -> tuple[dict[str, np.ndarray], NetworkConfig, MapSpec, Skeleton]:
    """Load params + configs; verifies the skeleton hash when one is given."""
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise NetworkError(f"{path} is not a pigpose checkpoint")
    pos = len(MAGIC)
    header_len = int.from_bytes(data[pos : pos + 8], "little")
    pos += 8
    header = json.loads(data[pos : pos + header_len].decode("utf-8"))
    pos += header_len
    if header.get("format_version") != 1:
        raise NetworkError(f"unsupported checkpoint version {header.get('format_version')!r}")

    ckpt_skeleton = parse_skeleton(header["skeleton_csv"])
    if skeleton is not None and skeleton.content_hash() != header["skeleton_sha256"]:
        raise NetworkError(
            "checkpoint was trained against a different skeleton "
            f"(hash {header['skeleton_sha256'][:12]}...)"
        )
    params: dict[str, np.ndarray] = {}
    for t in header["tensors"]:
        dt = np.dtype(t["dtype"])
        shape = tuple(t["shape"])
        nbytes = dt.itemsize * int(np.prod(shape)) if shape else dt.itemsize
        start = pos + t["offset"]
        params[t["name"]] = np.frombuffer(
            data[start : start + nbytes], dtype=dt
        ).reshape(shape).copy()
    net_config = NetworkConfig(**header["net_config"])
    map_spec = MapSpec(**header["map_spec"])
    return params, net_config, map_spec, ckpt_skeleton
