"""Training loop: Adam, reduce-on-plateau and early stopping.

The monitored metric is the validation loss, or the training loss when
the validation split is empty. No improvement beyond min_delta for
``plateau_patience`` consecutive epochs multiplies the learning rate by
``plateau_factor`` (and resets that counter); ``early_stop_patience``
consecutive non-improving epochs end the run. The parameters achieving
the best monitored value are the ones returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..augment import AugmentConfig, augment_sample
from ..errors import NetworkError
from ..heatmap import MapSpec, encode
from .model import NetworkConfig, forward, loss_and_gradients, loss_value


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    max_epochs: int = 400
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    plateau_factor: float = 0.2
    plateau_patience: int = 20
    min_delta: float = 0.0
    early_stop_patience: int = 100
    validation_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.plateau_factor < 1:
            raise NetworkError(f"plateau_factor must be in (0,1): {self.plateau_factor}")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise NetworkError("patience values must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise NetworkError("batch_size and max_epochs must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    validation_loss: float | None
    learning_rate: float  # in effect after the epoch-end plateau adjustment


@dataclass
class TrainHistory:
    rows: list[EpochRecord] = field(default_factory=list)
    stop_reason: str = "max_epochs"

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,lr"]
        for r in self.rows:
            val = "" if r.validation_loss is None else repr(r.validation_loss)
            lines.append(f"{r.epoch},{r.train_loss!r},{val},{r.learning_rate!r}")
        return "\n".join(lines) + "\n"


class Monitor:
    """Best-value tracker with Keras-style wait counting (strict when min_delta=0)."""

    def __init__(self, min_delta: float = 0.0):
        self.best = math.inf
        self.wait = 0
        self.min_delta = min_delta

    def update(self, value: float) -> bool:
        if value < self.best - self.min_delta:
            self.best = value
            self.wait = 0
            return True
        self.wait += 1
        return False


class Adam:
    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.lr = config.learning_rate
        self.b1, self.b2, self.eps = config.beta1, config.beta2, config.epsilon
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, p in params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _epoch_batches(ids: list[int], batch_size: int, seed: int, epoch: int) -> list[list[int]]:
    rng = np.random.default_rng(np.random.SeedSequence((seed, epoch)))
    order = [ids[i] for i in rng.permutation(len(ids))]
    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def train(
    dataset,
    augment_config: AugmentConfig,
    map_spec: MapSpec,
    net_config: NetworkConfig,
    train_config: TrainConfig,
    params: dict[str, np.ndarray] | None = None,
    log=None,
) -> tuple[dict[str, np.ndarray], TrainHistory]:
    """Fit the network on a dataset's annotated frames.

    Per epoch: seeded shuffle, per-sample augmentation, target encoding,
    one Adam step per batch. Deterministic for fixed seeds. Frames must
    already be square at config.input_side (the CLI resizes beforehand).
    """
    from .model import build

    skeleton = dataset.skeleton
    if net_config.out_channels != map_spec.channel_count(skeleton):
        raise NetworkError(
            f"net_config.out_channels={net_config.out_channels} does not match "
            f"map spec channel count {map_spec.channel_count(skeleton)}"
        )
    if train_config.validation_fraction > 0:
        dataset.split(train_config.validation_fraction, train_config.seed)
        train_ids = dataset.split_ids("train")
        val_ids = dataset.split_ids("validation")
    else:
        train_ids = sorted(dataset.annotated_ids())
        val_ids = []
    if not train_ids:
        raise NetworkError("no annotated frames to train on")

    dtype = net_config.np_dtype
    side = net_config.input_side
    images: dict[int, np.ndarray] = {}
    for fid in train_ids + val_ids:
        img = dataset.image(fid)
        if img.shape != (side, side):
            raise NetworkError(
                f"frame {fid} is {img.shape[1]}x{img.shape[0]}, expected "
                f"{side}x{side} (resize frames before training)"
            )
        images[fid] = img.astype(dtype)
    swap_perm = skeleton.swap_permutation()

    if params is None:
        params = build(net_config)
    optimizer = Adam(params, train_config)
    best_tracker = Monitor(train_config.min_delta)
    plateau = Monitor(train_config.min_delta)
    early = Monitor(train_config.min_delta)
    best_params = {k: v.copy() for k, v in params.items()}
    history = TrainHistory()

    val_targets = {
        fid: encode(dataset.get_pose(fid), side, side, map_spec, skeleton).astype(dtype)
        for fid in val_ids
    }

    for epoch in range(1, train_config.max_epochs + 1):
        total = 0.0
        count = 0
        for batch_ids in _epoch_batches(
            train_ids, train_config.batch_size, train_config.seed, epoch
        ):
            xs, ys = [], []
            for fid in batch_ids:
                img, pose = augment_sample(
                    images[fid],
                    dataset.get_pose(fid),
                    swap_perm,
                    augment_config,
                    frame_id=fid,
                    epoch=epoch,
                )
                xs.append(img.astype(dtype))
                ys.append(encode(pose, side, side, map_spec, skeleton).astype(dtype))
            x = np.stack(xs)
            y = np.stack(ys)
            loss, grads = loss_and_gradients(params, net_config, x, y)
            optimizer.step(params, grads)
            total += loss * len(batch_ids)
            count += len(batch_ids)
        train_loss = total / count

        val_loss: float | None = None
        if val_ids:
            vtotal = 0.0
            for fid in val_ids:
                inter, final = forward(params, net_config, images[fid][None])
                vtotal += loss_value(final, inter, val_targets[fid][None])
            val_loss = vtotal / len(val_ids)

        monitored = val_loss if val_loss is not None else train_loss
        if best_tracker.update(monitored):
            best_params = {k: v.copy() for k, v in params.items()}
        improved_plateau = plateau.update(monitored)
        if not improved_plateau and plateau.wait >= train_config.plateau_patience:
            optimizer.lr *= train_config.plateau_factor
            plateau.wait = 0
        improved_early = early.update(monitored)

        history.rows.append(
            EpochRecord(epoch, train_loss, val_loss, optimizer.lr)
        )
        if log is not None:
            val_txt = "" if val_loss is None else f" val_loss {val_loss:.6g}"
            log(f"epoch {epoch} loss {train_loss:.6g}{val_txt} lr {optimizer.lr:.3g}")

        if not improved_early and early.wait >= train_config.early_stop_patience:
            history.stop_reason = "early_stop"
            break
    else:
        history.stop_reason = "max_epochs"

    return best_params, history
