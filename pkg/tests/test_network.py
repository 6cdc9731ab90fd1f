import math

import numpy as np
import pytest

from pigpose.errors import NetworkError
from pigpose.heatmap import MapSpec
from pigpose.network import (
    NetworkConfig,
    build,
    forward,
    gradients,
    load_checkpoint,
    loss_and_gradients,
    loss_value,
    parameter_count,
    predict,
    save_checkpoint,
)
from pigpose.skeleton import parse_skeleton, pig_skeleton

TINY = NetworkConfig(
    input_side=16, stacks=1, depth=1, block_layers=1, growth=2,
    stem_channels=2, compression=0.5, out_channels=4, downsample=2,
    seed=3, dtype="float64",
)


def expected_param_count(cfg: NetworkConfig) -> int:
    """Closed-form shape bookkeeping, independent of the builder."""

    def conv(in_c, out_c, k):
        return k * k * in_c * out_c + out_c

    total = conv(1, cfg.stem_channels, 3)
    c = cfg.stem_channels
    for s in range(cfg.stacks):
        skips = []
        for _ in range(cfg.depth):
            for _ in range(cfg.block_layers):
                total += conv(c, cfg.growth, 3)
                c += cfg.growth
            skips.append(c)
            out = max(1, int(c * cfg.compression))
            total += conv(c, out, 1)
            c = out
        for _ in range(cfg.block_layers):
            total += conv(c, cfg.growth, 3)
            c += cfg.growth
        for lvl in range(cfg.depth, 0, -1):
            out = max(1, int(c * cfg.compression))
            total += conv(c, out, 3)
            c = out + skips[lvl - 1]
        total += conv(c, cfg.out_channels, 1)
        if s < cfg.stacks - 1:
            c = c + cfg.out_channels
    return total


# ----------------------------------------------------------------- reference

def ref_conv2d(x, w, b):
    """Direct nested-loop convolution (NHWC in, NHWC out)."""
    n, h, wid, c = x.shape
    k, _, _, out_c = w.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    y = np.zeros((n, h, wid, out_c), dtype=x.dtype)
    for bi in range(n):
        for i in range(h):
            for j in range(wid):
                patch = xp[bi, i : i + k, j : j + k, :]
                for o in range(out_c):
                    y[bi, i, j, o] = (patch * w[:, :, :, o]).sum() + b[o]
    return y


def ref_pool(x):
    n, h, w, c = x.shape
    y = np.zeros((n, h // 2, w // 2, c), dtype=x.dtype)
    for i in range(h // 2):
        for j in range(w // 2):
            y[:, i, j, :] = x[:, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2, :].mean(axis=(1, 2))
    return y


def ref_upsample(x):
    n, h, w, c = x.shape
    y = np.zeros((n, 2 * h, 2 * w, c), dtype=x.dtype)
    for i in range(2 * h):
        for j in range(2 * w):
            y[:, i, j, :] = x[:, i // 2, j // 2, :]
    return y


def ref_forward_tiny(params, cfg, images):
    """Straight-line replay of the tiny S=1, L=1, n=1 architecture."""
    assert cfg.stacks == 1 and cfg.depth == 1 and cfg.block_layers == 1
    relu = lambda a: np.maximum(a, 0)
    x = np.asarray(images, dtype=cfg.np_dtype)[:, :, :, None]
    f = relu(ref_conv2d(x, params["stem.w"], params["stem.b"]))
    for _ in range(int(math.log2(cfg.downsample))):
        f = ref_pool(f)
    f = np.concatenate(
        [f, relu(ref_conv2d(f, params["stack1.enc1.l1.w"], params["stack1.enc1.l1.b"]))],
        axis=3,
    )
    skip = f
    f = relu(ref_conv2d(f, params["stack1.enc1.squeeze.w"], params["stack1.enc1.squeeze.b"]))
    f = ref_pool(f)
    f = np.concatenate(
        [f, relu(ref_conv2d(f, params["stack1.mid.l1.w"], params["stack1.mid.l1.b"]))],
        axis=3,
    )
    f = ref_upsample(f)
    f = relu(ref_conv2d(f, params["stack1.dec1.w"], params["stack1.dec1.b"]))
    f = np.concatenate([f, skip], axis=3)
    head = ref_conv2d(f, params["stack1.head.w"], params["stack1.head.b"])
    return head.transpose(0, 3, 1, 2)


class TestBuild:
    def test_deterministic_given_seed(self):
        a = build(TINY)
        b = build(TINY)
        assert list(a) == list(b)
        for k in a:
            assert np.array_equal(a[k], b[k])

    def test_different_seed_differs(self):
        other = NetworkConfig(**{**TINY.__dict__, "seed": 4})
        a, b = build(TINY), build(other)
        assert not np.array_equal(a["stem.w"], b["stem.w"])

    @pytest.mark.parametrize(
        "cfg",
        [
            TINY,
            NetworkConfig(),
            NetworkConfig(input_side=32, stacks=3, depth=2, block_layers=1,
                          growth=3, stem_channels=4, out_channels=6, downsample=1),
        ],
    )
    def test_param_count_matches_shape_oracle(self, cfg):
        assert parameter_count(build(cfg)) == expected_param_count(cfg)

    def test_two_heads_with_default_skeleton_channels(self):
        cfg = NetworkConfig()
        params = build(cfg)
        assert MapSpec().channel_count(pig_skeleton()) == cfg.out_channels == 17
        assert params["stack1.head.w"].shape[3] == 17
        assert params["stack2.head.w"].shape[3] == 17

    def test_zero_biases(self):
        params = build(TINY)
        for name, arr in params.items():
            if name.endswith(".b"):
                assert not arr.any()

    def test_invalid_configs(self):
        with pytest.raises(NetworkError):
            NetworkConfig(input_side=20)  # not divisible by 2^(depth+log2 d)
        with pytest.raises(NetworkError):
            NetworkConfig(compression=0.0)
        with pytest.raises(NetworkError):
            NetworkConfig(stacks=0)
        with pytest.raises(NetworkError):
            NetworkConfig(downsample=3)


class TestForward:
    def test_zero_weights_zero_output(self):
        params = {k: np.zeros_like(v) for k, v in build(TINY).items()}
        x = np.random.default_rng(0).random((2, 16, 16))
        inter, final = forward(params, TINY, x)
        assert not inter.any() and not final.any()

    def test_single_stack_intermediate_is_final(self):
        params = build(TINY)
        x = np.random.default_rng(1).random((2, 16, 16))
        inter, final = forward(params, TINY, x)
        assert np.array_equal(inter, final)

    def test_deterministic(self):
        params = build(TINY)
        x = np.random.default_rng(2).random((3, 16, 16))
        a = forward(params, TINY, x)
        b = forward(params, TINY, x)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_matches_reference_implementation(self):
        params = build(TINY)
        rng = np.random.default_rng(5)
        for k in params:
            params[k] = params[k] + rng.normal(0, 0.1, params[k].shape)
        x = rng.random((2, 16, 16))
        _, final = forward(params, TINY, x)
        ref = ref_forward_tiny(params, TINY, x)
        assert np.abs(final - ref).max() < 1e-6

    @pytest.mark.parametrize("side,d,depth", [(16, 2, 1), (32, 4, 2), (24, 1, 3)])
    def test_output_shape_is_input_over_d(self, side, d, depth):
        cfg = NetworkConfig(input_side=side, stacks=1, depth=depth, block_layers=1,
                            growth=2, stem_channels=2, out_channels=3, downsample=d)
        params = build(cfg)
        inter, final = forward(params, cfg, np.zeros((1, side, side)))
        assert final.shape == (1, 3, side // d, side // d)
        assert inter.shape == final.shape

    def test_shape_mismatch_rejected(self):
        params = build(TINY)
        with pytest.raises(NetworkError, match="config wants"):
            forward(params, TINY, np.zeros((1, 8, 8)))


class TestLoss:
    def test_zero_when_exact(self):
        t = np.random.default_rng(0).random((2, 4, 8, 8))
        assert loss_value(t, t, t) == 0.0

    def test_unit_offset_gives_one(self):
        t = np.random.default_rng(1).random((2, 4, 8, 8))
        assert loss_value(t + 1.0, t, t) == pytest.approx(1.0, abs=1e-12)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        f, i, t = rng.random((2, 3, 4, 4)), rng.random((2, 3, 4, 4)), rng.random((2, 3, 4, 4))
        acc = 0.0
        for idx in np.ndindex(f.shape):
            acc += (f[idx] - t[idx]) ** 2 + (i[idx] - t[idx]) ** 2
        assert loss_value(f, i, t) == pytest.approx(acc / f.size, abs=1e-12)

    def test_single_stack_degenerates_to_double_mse(self):
        rng = np.random.default_rng(3)
        out, t = rng.random((1, 4, 8, 8)), rng.random((1, 4, 8, 8))
        assert loss_value(out, out, t) == pytest.approx(
            2.0 * ((out - t) ** 2).mean(), abs=1e-12
        )

    def test_shape_mismatch(self):
        with pytest.raises(NetworkError):
            loss_value(np.zeros((1, 2, 2, 2)), np.zeros((1, 2, 2, 2)), np.zeros((1, 2, 2, 3)))


class TestGradients:
    def test_zero_everything_zero_gradients(self):
        params = {k: np.zeros_like(v) for k, v in build(TINY).items()}
        x = np.zeros((1, 16, 16))
        y = np.zeros((1, 4, 8, 8))
        grads = gradients(params, TINY, x, y)
        assert set(grads) == set(params)
        for g in grads.values():
            assert not g.any()

    def test_finite_differences_spot_check(self):
        rng = np.random.default_rng(7)
        params = build(TINY)
        for k in params:
            params[k] = params[k] + rng.normal(0, 0.05, params[k].shape)
        x = rng.random((2, 16, 16))
        y = rng.random((2, 4, 8, 8))
        _, grads = loss_and_gradients(params, TINY, x, y)
        h = 1e-5
        for name in params:
            flat = params[name].ravel()
            gf = grads[name].ravel()
            for i in np.linspace(0, flat.size - 1, min(8, flat.size), dtype=int):
                orig = flat[i]
                flat[i] = orig + h
                i1, f1 = forward(params, TINY, x)
                lp = loss_value(f1, i1, y)
                flat[i] = orig - h
                i2, f2 = forward(params, TINY, x)
                lm = loss_value(f2, i2, y)
                flat[i] = orig
                fd = (lp - lm) / (2 * h)
                err = abs(fd - gf[i])
                assert err <= 1e-8 or err / max(abs(fd), abs(gf[i])) <= 1e-4, name

    def test_duplicated_batch_leaves_gradients_unchanged(self):
        rng = np.random.default_rng(8)
        params = build(TINY)
        x = rng.random((2, 16, 16))
        y = rng.random((2, 4, 8, 8))
        g1 = gradients(params, TINY, x, y)
        g2 = gradients(params, TINY, np.concatenate([x, x]), np.concatenate([y, y]))
        for k in g1:
            assert np.abs(g1[k] - g2[k]).max() < 1e-12

    def test_batch_order_invariance(self):
        rng = np.random.default_rng(9)
        params = build(TINY)
        x = rng.random((3, 16, 16))
        y = rng.random((3, 4, 8, 8))
        l1, _ = loss_and_gradients(params, TINY, x, y)
        perm = [2, 0, 1]
        l2, _ = loss_and_gradients(params, TINY, x[perm], y[perm])
        assert l1 == pytest.approx(l2, rel=1e-12)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        cfg = TINY
        params = build(cfg)
        spec = MapSpec(sigma=4.0, downsample=2)
        sk = parse_skeleton("name,parent,swap\na,,\nb,a,\n")
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, cfg, spec, sk)
        loaded, cfg2, spec2, sk2 = load_checkpoint(path, sk)
        assert cfg2 == cfg
        assert spec2 == spec
        assert sk2.keypoints == sk.keypoints
        assert list(loaded) == list(params)
        for k in params:
            assert np.array_equal(loaded[k], params[k])

    def test_deterministic_bytes(self, tmp_path):
        params = build(TINY)
        spec = MapSpec()
        sk = pig_skeleton()
        save_checkpoint(tmp_path / "a.ckpt", params, TINY, spec, sk)
        save_checkpoint(tmp_path / "b.ckpt", params, TINY, spec, sk)
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_refuses_foreign_skeleton(self, tmp_path):
        params = build(TINY)
        sk = pig_skeleton()
        other = parse_skeleton("name,parent,swap\na,,\n")
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, TINY, MapSpec(), sk)
        with pytest.raises(NetworkError, match="different skeleton"):
            load_checkpoint(path, other)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(NetworkError, match="not a pigpose checkpoint"):
            load_checkpoint(path)


class TestPredict:
    def test_nine_by_three_shape(self):
        sk = pig_skeleton()
        spec = MapSpec(sigma=5.0, downsample=2)
        cfg = NetworkConfig(input_side=32, stacks=1, depth=1, block_layers=1,
                            growth=2, stem_channels=2,
                            out_channels=spec.channel_count(sk), downsample=2)
        params = build(cfg)
        poses = predict(params, cfg, spec, sk, np.random.default_rng(0).random((2, 32, 32)))
        assert len(poses) == 2
        assert all(p.shape == (9, 3) for p in poses)

    def test_zero_network_all_missing(self):
        sk = pig_skeleton()
        spec = MapSpec(sigma=5.0, downsample=2)
        cfg = NetworkConfig(input_side=32, stacks=1, depth=1, block_layers=1,
                            growth=2, stem_channels=2,
                            out_channels=spec.channel_count(sk), downsample=2)
        params = {k: np.zeros_like(v) for k, v in build(cfg).items()}
        pose = predict(params, cfg, spec, sk, np.ones((1, 32, 32)))[0]
        assert np.isnan(pose).all()
