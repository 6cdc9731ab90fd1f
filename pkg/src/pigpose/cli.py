"""Command-line entry points for the whole pipeline.

Subcommands: ingest, sample, augment-preview, train, predict, evaluate,
outliers, serve. Every command accepting randomness takes --seed; every
command takes --config FILE (JSON of option defaults, explicit flags
win). Exit codes: 0 success, 1 usage error, 2 data error. Mutating
commands append one entry to <root>/runs.log.
"""

from __future__ import annotations

import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import cv2
import numpy as np

from .analysis import evaluate as run_evaluate
from .analysis import mine_outliers
from .augment import AugmentConfig, augment_sample
from .dataset import PoseDataset, ingest_frames, read_pose_csv, write_pose_csv
from .errors import PigposeError
from .heatmap import MapSpec, stack_to_image
from .network import (
    NetworkConfig,
    TrainConfig,
    forward,
    load_checkpoint,
    predict as run_predict,
    save_checkpoint,
    train as run_train,
)
from .sampler import (
    FrameFeature,
    KMeansConfig,
    cluster_report,
    default_per_cluster,
    featurize,
    minibatch_kmeans,
    select_keyframes,
    uniform_keyframes,
)
from .skeleton import parse_skeleton, pig_skeleton


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PigposeError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise PigposeError(f"config file {path} must hold a JSON object")
    return data


def _resolve(flag, config: dict, key: str, default):
    """Explicit flag > config-file entry > built-in default."""
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _append_run_log(root: Path, command: str, resolved: dict, lines: list[str]) -> None:
    entry = {
        "ts": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "config": resolved,
    }
    with open(root / "runs.log", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")
        for line in lines:
            fh.write(f"  {line}\n")


class _ResizedView:
    """Dataset adapter that presents frames at a fixed square side.

    Poses are rescaled into the resized space; everything else passes
    through. Used by train so the library never resizes implicitly.
    """

    def __init__(self, dataset: PoseDataset, side: int):
        self._ds = dataset
        self._side = side
        self.skeleton = dataset.skeleton

    def annotated_ids(self):
        return self._ds.annotated_ids()

    def split(self, fraction, seed):
        return self._ds.split(fraction, seed)

    def split_ids(self, part):
        return self._ds.split_ids(part)

    def image(self, frame_id):
        img = self._ds.image(frame_id)
        if img.shape == (self._side, self._side):
            return img
        return cv2.resize(
            img, (self._side, self._side), interpolation=cv2.INTER_LINEAR
        )

    def get_pose(self, frame_id):
        pose = self._ds.get_pose(frame_id)
        rec = self._ds.frame(frame_id)
        pose[:, 0] *= self._side / rec.width
        pose[:, 1] *= self._side / rec.height
        return pose


@click.group()
def cli():
    """Farm-animal keypoint estimation toolkit."""


@cli.command()
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True))
@click.option("--pattern", default=None, help="Glob for frame files (default *.png).")
@click.option("--skeleton", "skeleton_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_root", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def ingest(frames_dir, pattern, skeleton_path, out_root, config_path):
    """Import a directory of frames into a new dataset root."""
    config = _load_config(config_path)
    pattern = _resolve(pattern, config, "pattern", "*.png")
    skeleton = (
        parse_skeleton(Path(skeleton_path).read_text(encoding="utf-8"))
        if skeleton_path
        else pig_skeleton()
    )
    ds = ingest_frames(frames_dir, pattern, skeleton)
    ds.save(out_root)
    resolved = {"frames": str(frames_dir), "pattern": pattern, "out": str(out_root)}
    _append_run_log(Path(out_root), "ingest", resolved, [f"frames {len(ds)}"])
    click.echo(f"ingested {len(ds)} frames into {out_root}")


@cli.command()
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--k", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--reassignment-ratio", type=float, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--iters", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--per-cluster", type=int, default=None)
@click.option("--thumb", type=int, default=None, help="Thumbnail side in pixels.")
@click.option("--kmeanspp", is_flag=True, default=False, help="k-means++ seeding.")
@click.option("--uniform", is_flag=True, default=False, help="Uniform random baseline.")
@click.option("--verbose", is_flag=True, default=False)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def sample(root, k, batch, reassignment_ratio, tol, iters, seed, per_cluster,
           thumb, kmeanspp, uniform, verbose, config_path):
    """Select annotation keyframes with mini-batch k-means."""
    config = _load_config(config_path)
    root = Path(root)
    ds = PoseDataset.load(root)
    k = _resolve(k, config, "k", 100)
    batch = _resolve(batch, config, "batch", 100)
    reassignment_ratio = _resolve(reassignment_ratio, config, "reassignment_ratio", 0.01)
    tol = _resolve(tol, config, "tol", 0.0)
    iters = _resolve(iters, config, "iters", 100)
    seed = _resolve(seed, config, "seed", 0)
    thumb = _resolve(thumb, config, "thumb", 32)

    features = [
        FrameFeature(f.id, featurize(ds.image(f.id), thumb)) for f in ds.frames
    ]
    per_cluster = _resolve(
        per_cluster, config, "per_cluster", default_per_cluster(len(features), k)
    )
    resolved = {
        "k": k, "batch": batch, "reassignment_ratio": reassignment_ratio,
        "tol": tol, "iters": iters, "seed": seed, "per_cluster": per_cluster,
        "thumb": thumb, "kmeanspp": kmeanspp, "uniform": uniform,
    }
    log_lines: list[str] = []
    if uniform:
        target = min(len(features), per_cluster * k)
        selected = uniform_keyframes([f.frame_id for f in features], target, seed)
        report_rows = []
    else:
        kconfig = KMeansConfig(
            k=k, batch_size=batch, reassignment_ratio=reassignment_ratio,
            tol=tol, max_iterations=iters, seed=seed, verbose=verbose,
            kmeans_plus_plus=kmeanspp,
        )
        clustering = minibatch_kmeans(features, kconfig, log=log_lines.append)
        selected = select_keyframes(clustering, features, per_cluster)
        report_rows = cluster_report(clustering, features)
        log_lines.append(f"inertia {clustering.inertia!r}")

    (root / "keyframes.txt").write_text(
        "".join(f"{fid}\n" for fid in selected), encoding="utf-8"
    )
    lines = ["cluster_id,size,inertia_share"]
    lines += [f"{c},{size},{share!r}" for c, size, share in report_rows]
    (root / "cluster_report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _append_run_log(root, "sample", resolved, log_lines)
    click.echo(f"selected {len(selected)} keyframes -> {root / 'keyframes.txt'}")


@cli.command("augment-preview")
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--rows", type=int, default=None)
@click.option("--cols", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def augment_preview(root, rows, cols, seed, out_path, config_path):
    """Render a contact sheet of augmented samples for visual inspection."""
    config = _load_config(config_path)
    rows = _resolve(rows, config, "rows", 3)
    cols = _resolve(cols, config, "cols", 4)
    seed = _resolve(seed, config, "seed", 0)
    ds = PoseDataset.load(root)
    ids = ds.annotated_ids() or [f.id for f in ds.frames]
    aug = AugmentConfig(seed=seed)
    perm = ds.skeleton.swap_permutation()
    tiles = []
    for i in range(rows * cols):
        fid = ids[i % len(ids)]
        img = ds.image(fid)
        pose = (
            ds.get_pose(fid)
            if ds.frame(fid).annotated
            else np.full((len(ds.skeleton), 3), np.nan)
        )
        aimg, apose = augment_sample(img, pose, perm, aug, frame_id=fid, epoch=i)
        tile = (np.clip(aimg, 0, 1) * 255).astype(np.uint8)
        tile = cv2.cvtColor(tile, cv2.COLOR_GRAY2BGR)
        for r in range(apose.shape[0]):
            if not math.isnan(apose[r, 0]):
                cv2.drawMarker(
                    tile,
                    (int(round(apose[r, 0])), int(round(apose[r, 1]))),
                    (0, 255, 0),
                    cv2.MARKER_CROSS,
                    6,
                    1,
                )
        tiles.append(tile)
    h, w = tiles[0].shape[:2]
    sheet = np.zeros((rows * h, cols * w, 3), dtype=np.uint8)
    for i, tile in enumerate(tiles):
        r, c = divmod(i, cols)
        sheet[r * h : (r + 1) * h, c * w : (c + 1) * w] = tile
    cv2.imwrite(str(out_path), sheet)
    click.echo(f"wrote {rows}x{cols} contact sheet to {out_path}")


@cli.command()
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path())
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--validation-fraction", type=float, default=None)
@click.option("--input-side", type=int, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--downsample", type=int, default=None)
@click.option("--stacks", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--no-augment", is_flag=True, default=False)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def train(root, checkpoint_path, epochs, batch_size, learning_rate,
          validation_fraction, input_side, sigma, downsample, stacks, seed,
          no_augment, config_path):
    """Train the stacked hourglass on the annotated frames."""
    config = _load_config(config_path)
    root = Path(root)
    ds = PoseDataset.load(root)
    if not ds.annotated_ids():
        raise PigposeError("no annotated frames")
    epochs = _resolve(epochs, config, "epochs", 400)
    batch_size = _resolve(batch_size, config, "batch_size", 4)
    learning_rate = _resolve(learning_rate, config, "learning_rate", 1e-3)
    validation_fraction = _resolve(validation_fraction, config, "validation_fraction", 0.0)
    input_side = _resolve(input_side, config, "input_side", 96)
    sigma = _resolve(sigma, config, "sigma", 5.0)
    downsample = _resolve(downsample, config, "downsample", 2)
    stacks = _resolve(stacks, config, "stacks", 2)
    seed = _resolve(seed, config, "seed", 0)

    map_spec = MapSpec(sigma=sigma, downsample=downsample)
    net_config = NetworkConfig(
        input_side=input_side,
        stacks=stacks,
        out_channels=map_spec.channel_count(ds.skeleton),
        downsample=downsample,
        seed=seed,
    )
    train_config = TrainConfig(
        batch_size=batch_size,
        max_epochs=epochs,
        learning_rate=learning_rate,
        validation_fraction=validation_fraction,
        seed=seed,
    )
    aug = AugmentConfig.identity(seed=seed) if no_augment else AugmentConfig(seed=seed)
    view = _ResizedView(ds, input_side)

    resolved = {
        "epochs": epochs, "batch_size": batch_size, "learning_rate": learning_rate,
        "validation_fraction": validation_fraction, "input_side": input_side,
        "sigma": sigma, "downsample": downsample, "stacks": stacks, "seed": seed,
        "no_augment": no_augment, "checkpoint": str(checkpoint_path),
    }
    log_lines: list[str] = []
    params, history = run_train(
        view, aug, map_spec, net_config, train_config, log=log_lines.append
    )
    save_checkpoint(checkpoint_path, params, net_config, map_spec, ds.skeleton)
    (root / "train_history.csv").write_text(history.to_csv(), encoding="utf-8")
    _append_run_log(root, "train", resolved, log_lines)
    last = history.rows[-1]
    click.echo(
        f"trained {len(history.rows)} epochs ({history.stop_reason}), "
        f"final loss {last.train_loss:.6g}; checkpoint -> {checkpoint_path}"
    )


@cli.command()
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--frames", "frame_ids", default=None,
              help="Comma-separated frame ids (default: all frames).")
@click.option("--dump-maps", "dump_dir", default=None, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def predict(root, checkpoint_path, out_path, frame_ids, dump_dir, config_path):
    """Predict 9x3 poses for frames; write them as a pose CSV."""
    _load_config(config_path)
    root = Path(root)
    ds = PoseDataset.load(root)
    params, net_config, map_spec, _ = load_checkpoint(checkpoint_path, ds.skeleton)
    ids = (
        [int(t) for t in frame_ids.split(",")]
        if frame_ids
        else [f.id for f in ds.frames]
    )
    out_path = Path(out_path) if out_path else root / "predictions.csv"
    side = net_config.input_side
    poses = {}
    for fid in ids:
        rec = ds.frame(fid)
        img = ds.image(fid)
        if img.shape != (side, side):
            img = cv2.resize(img, (side, side), interpolation=cv2.INTER_LINEAR)
        pose = run_predict(params, net_config, map_spec, ds.skeleton, img[None])[0]
        pose[:, 0] *= rec.width / side
        pose[:, 1] *= rec.height / side
        poses[fid] = pose
        if dump_dir is not None:
            Path(dump_dir).mkdir(parents=True, exist_ok=True)
            _, final = forward(params, net_config, img[None])
            cv2.imwrite(
                str(Path(dump_dir) / f"maps_{fid:06d}.png"),
                stack_to_image(final[0]),
            )
    write_pose_csv(out_path, poses, ds.skeleton)
    _append_run_log(
        root, "predict",
        {"checkpoint": str(checkpoint_path), "out": str(out_path), "frames": len(ids)},
        [],
    )
    click.echo(f"predicted {len(ids)} frames -> {out_path}")


@cli.command()
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--radius", type=float, default=None)
@click.option("--out-dir", "out_dir", default=None, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def evaluate(root, pred_path, radius, out_dir, config_path):
    """Threshold-sweep metrics of predictions against the annotations."""
    config = _load_config(config_path)
    root = Path(root)
    radius = _resolve(radius, config, "radius", 10.0)
    ds = PoseDataset.load(root)
    preds = read_pose_csv(pred_path, ds.skeleton)
    ids = [fid for fid in sorted(preds) if fid in set(ds.annotated_ids())]
    if not ids:
        raise PigposeError("no annotated frames among the predictions")
    report = run_evaluate(
        [preds[fid] for fid in ids],
        [ds.get_pose(fid) for fid in ids],
        radius=radius,
    )
    out_dir = Path(out_dir) if out_dir else root
    (out_dir / "metrics.csv").write_text(report.to_csv(), encoding="utf-8")
    (out_dir / "per_keypoint_error.csv").write_text(
        report.errors_to_csv(ds.skeleton.names), encoding="utf-8"
    )
    _append_run_log(
        root, "evaluate",
        {"predictions": str(pred_path), "radius": radius, "frames": len(ids)},
        [],
    )
    for m in report.per_threshold:
        click.echo(
            f"t={m.threshold:.2f} precision={m.precision:.3f} "
            f"recall={m.recall:.3f} F={m.f_measure:.3f}"
        )


@cli.command()
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--prominence", "-c", "prominence", type=float, default=None)
@click.option("--min-separation", type=int, default=None)
@click.option("--position-weight", type=float, default=None)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def outliers(root, pred_path, prominence, min_separation, position_weight, config_path):
    """Mine outlier frames from prediction confidence/position derivatives."""
    config = _load_config(config_path)
    root = Path(root)
    prominence = _resolve(prominence, config, "prominence", 3.0)
    min_separation = _resolve(min_separation, config, "min_separation", 1)
    position_weight = _resolve(position_weight, config, "position_weight", 1.0)
    ds = PoseDataset.load(root)
    preds = read_pose_csv(pred_path, ds.skeleton)
    frames = sorted(
        (f for f in ds.frames if f.id in preds), key=lambda f: f.source_index
    )
    if len(frames) < 2:
        raise PigposeError("need predictions for at least 2 frames")
    sequence = [preds[f.id] for f in frames]
    report = mine_outliers(
        sequence,
        (frames[0].width, frames[0].height),
        prominence_multiplier=prominence,
        min_separation=min_separation,
        position_weight=position_weight,
    )
    flagged_ids = [frames[i].id for i in report.flagged]
    lines = ["frame_id,score,flagged"]
    flagged_set = set(report.flagged)
    for i, f in enumerate(frames):
        lines.append(f"{f.id},{report.scores[i]!r},{int(i in flagged_set)}")
    (root / "outlier_scores.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (root / "outliers.json").write_text(
        json.dumps(
            {
                "frame_ids": flagged_ids,
                "params": {
                    "prominence_multiplier": prominence,
                    "min_separation": min_separation,
                    "position_weight": position_weight,
                },
            },
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    _append_run_log(
        root, "outliers",
        {"predictions": str(pred_path), "prominence": prominence,
         "min_separation": min_separation, "position_weight": position_weight},
        [f"flagged {flagged_ids}"],
    )
    click.echo(f"flagged {len(flagged_ids)} outlier frames: {flagged_ids}")


@cli.command()
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "checkpoint_path", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--static-dir", default=None, type=click.Path(exists=True))
def serve(root, checkpoint_path, host, port, static_dir):
    """Serve the annotation API (and the browser annotator, when built)."""
    import uvicorn

    from .service import create_app

    app = create_app(root, checkpoint_path, static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


def main(argv=None) -> int:
    """Dispatch with the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except PigposeError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
