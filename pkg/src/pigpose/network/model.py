"""The two-stack dense-net hourglass.

Architecture: a 3x3 stem conv, average pooling down to the map
resolution, then per stack an encoder (dense block + 1x1 compression +
2x2 average pool per level), a bottleneck dense block, and a decoder
(2x nearest-neighbor upsample + 3x3 conv, concatenated with the
same-resolution encoder features). Each stack ends in a linear 1x1 head;
later stacks consume the previous stack's pre-head features concatenated
with its head output. Hidden activations are ReLU throughout; dense
blocks grow by ``growth`` channels per layer with full in-block
concatenation.

The first head is the intermediate output, the last head the final one;
both are supervised (see train.loss_value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NetworkError
from . import ops
from .ops import Node, value_of


@dataclass(frozen=True)
class NetworkConfig:
    input_side: int = 96
    stacks: int = 2
    depth: int = 2  # encoder/decoder levels per stack
    block_layers: int = 2  # convs per dense block
    growth: int = 8
    stem_channels: int = 8
    compression: float = 0.5
    out_channels: int = 17
    downsample: int = 2  # map resolution = input / downsample
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.stacks < 1 or self.growth < 1 or self.block_layers < 1:
            raise NetworkError("stacks, growth and block_layers must be >= 1")
        if not 0 < self.compression <= 1:
            raise NetworkError(f"compression must be in (0, 1], got {self.compression}")
        if self.downsample not in (1, 2, 4, 8):
            raise NetworkError(f"downsample must be 1, 2, 4 or 8, got {self.downsample}")
        total = self.depth + int(math.log2(self.downsample))
        if self.input_side % (2**total):
            raise NetworkError(
                f"input_side {self.input_side} not divisible by 2^{total}"
            )

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


class _ParamBuilder:
    """Creates He-initialized parameters in forward encounter order."""

    def __init__(self, config: NetworkConfig):
        self.rng = np.random.default_rng(config.seed)
        self.dtype = config.np_dtype
        self.params: dict[str, np.ndarray] = {}

    def conv(self, name, x, ksize, out_c, activate):
        in_c = value_of(x).shape[3]
        fan_in = in_c * ksize * ksize
        w = (
            self.rng.standard_normal((ksize, ksize, in_c, out_c))
            * math.sqrt(2.0 / fan_in)
        ).astype(self.dtype)
        b = np.zeros(out_c, dtype=self.dtype)
        self.params[f"{name}.w"] = w
        self.params[f"{name}.b"] = b
        y = ops.conv2d(x, w, b)
        return ops.relu(y) if activate else y


class _ParamRunner:
    """Replays stored parameters, validating names and shapes."""

    def __init__(self, params: dict, wrap: bool):
        if wrap:
            self.params = {k: Node(v) for k, v in params.items()}
        else:
            self.params = params

    def conv(self, name, x, ksize, out_c, activate):
        try:
            w = self.params[f"{name}.w"]
            b = self.params[f"{name}.b"]
        except KeyError:
            raise NetworkError(f"missing parameter {name!r} in model") from None
        wv = value_of(w)
        in_c = value_of(x).shape[3]
        if wv.shape != (ksize, ksize, in_c, out_c):
            raise NetworkError(
                f"parameter {name!r} has shape {wv.shape}, expected "
                f"{(ksize, ksize, in_c, out_c)}"
            )
        y = ops.conv2d(x, w, b)
        return ops.relu(y) if activate else y

    def gradients(self) -> dict[str, np.ndarray]:
        return {
            k: (n.grad if n.grad is not None else np.zeros_like(n.value))
            for k, n in self.params.items()
        }


def _dense_block(store, prefix: str, f, config: NetworkConfig):
    for j in range(1, config.block_layers + 1):
        y = store.conv(f"{prefix}.l{j}", f, 3, config.growth, activate=True)
        f = ops.concat([f, y])
    return f


def _compressed(channels: int, theta: float) -> int:
    return max(1, int(channels * theta))


def _forward_impl(store, config: NetworkConfig, x):
    f = store.conv("stem", x, 3, config.stem_channels, activate=True)
    for _ in range(int(math.log2(config.downsample))):
        f = ops.avg_pool2(f)

    intermediate = None
    head = None
    feat = f
    for s in range(1, config.stacks + 1):
        f = feat
        skips = []
        for lvl in range(1, config.depth + 1):
            f = _dense_block(store, f"stack{s}.enc{lvl}", f, config)
            skips.append(f)
            c_out = _compressed(value_of(f).shape[3], config.compression)
            f = store.conv(f"stack{s}.enc{lvl}.squeeze", f, 1, c_out, activate=True)
            f = ops.avg_pool2(f)
        f = _dense_block(store, f"stack{s}.mid", f, config)
        for lvl in range(config.depth, 0, -1):
            f = ops.upsample2(f)
            c_out = _compressed(value_of(f).shape[3], config.compression)
            f = store.conv(f"stack{s}.dec{lvl}", f, 3, c_out, activate=True)
            f = ops.concat([f, skips[lvl - 1]])
        head = store.conv(f"stack{s}.head", f, 1, config.out_channels, activate=False)
        if s == 1:
            intermediate = head
        if s < config.stacks:
            feat = ops.concat([f, head])
    return intermediate, head


def build(config: NetworkConfig) -> dict[str, np.ndarray]:
    """Create all parameters, deterministically from config.seed.

    Conv kernels use He fan-in scaling, biases start at zero. Parameter
    order is the forward encounter order.
    """
    builder = _ParamBuilder(config)
    side = 2 ** (config.depth + int(math.log2(config.downsample)))
    probe = np.zeros((1, side, side, 1), dtype=config.np_dtype)
    with ops.no_grad():
        _forward_impl(builder, config, probe)
    return builder.params


def forward(
    params: dict[str, np.ndarray],
    config: NetworkConfig,
    images: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the network on (N, side, side) grayscale images in [0, 1].

    Returns (intermediate, final) stacks of shape (N, C, side/d, side/d);
    values are unbounded (linear heads). With a single stack both outputs
    are the same head's output.
    """
    x = _check_input(images, config)
    store = _ParamRunner(params, wrap=False)
    with ops.no_grad():
        intermediate, final = _forward_impl(store, config, x)
    return (
        np.ascontiguousarray(intermediate.transpose(0, 3, 1, 2)),
        np.ascontiguousarray(final.transpose(0, 3, 1, 2)),
    )


def loss_value(final, intermediate, target) -> float:
    """Intermediate-supervision MSE: both output stacks against one target.

    Each term is averaged over the element count of a single stack, so a
    one-everywhere error on one stack contributes exactly 1.0.
    """
    f, i, t = np.asarray(final), np.asarray(intermediate), np.asarray(target)
    if f.shape != t.shape or i.shape != t.shape:
        raise NetworkError(f"shape mismatch: {f.shape}, {i.shape} vs {t.shape}")
    n = t.size
    df = f.astype(np.float64) - t
    di = i.astype(np.float64) - t
    return float((df * df).sum() / n + (di * di).sum() / n)


def loss_and_gradients(
    params: dict[str, np.ndarray],
    config: NetworkConfig,
    images: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Exact reverse-mode gradients of the mean batch loss.

    targets is (N, C, side/d, side/d), matching forward()'s output layout.
    """
    x = _check_input(images, config)
    if targets.shape[0] != x.shape[0]:
        raise NetworkError("batch size mismatch between images and targets")
    store = _ParamRunner(params, wrap=True)
    intermediate, final = _forward_impl(store, config, x)
    t = np.ascontiguousarray(
        targets.astype(config.np_dtype, copy=False).transpose(0, 2, 3, 1)
    )
    loss = ops.add(ops.mse(final, t), ops.mse(intermediate, t))
    ops.backward(loss)
    return float(loss.value), store.gradients()


def gradients(params, config, images, targets) -> dict[str, np.ndarray]:
    return loss_and_gradients(params, config, images, targets)[1]


def _check_input(images: np.ndarray, config: NetworkConfig) -> np.ndarray:
    """Normalize (N, side, side) grayscale input to internal NHWC layout."""
    x = np.asarray(images)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise NetworkError(f"expected (N, side, side) grayscale input, got {x.shape}")
    if x.shape[1] != config.input_side or x.shape[2] != config.input_side:
        raise NetworkError(
            f"input is {x.shape[1]}x{x.shape[2]}, config wants "
            f"{config.input_side}x{config.input_side}"
        )
    return x.astype(config.np_dtype, copy=False)[:, :, :, None]


def parameter_count(params: dict[str, np.ndarray]) -> int:
    return sum(int(a.size) for a in params.values())
