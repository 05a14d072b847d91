"""Squeeze-excitation residual encoder with projection and classification heads.

The encoder is a small four-stage residual network. Each stage holds one or
more residual blocks (two 3x3 convolutions plus an optional SE block before
the residual add); stages are joined by stride-2 downsampling convolutions.
A stride-8 stem brings 224x224 inputs down to 28x28 so CPU epochs stay cheap.

Parameters live in a flat dict keyed by dotted names ("stage0.block0.conv1.w").
Each tensor is initialized from its own named seed stream, so adding or
removing SE blocks never shifts the draws of unrelated parameters.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    DEFAULT_DTYPE,
    Tensor,
    add,
    conv2d,
    dense,
    global_avg_pool,
    l2_normalize,
    relu,
    scale_channels,
    sigmoid,
)
from .errors import ShapeMismatch


@dataclass
class EncoderConfig:
    stage_channels: tuple[int, ...] = (16, 32, 64, 128)
    blocks_per_stage: int = 1
    se_enabled: bool = True
    se_ratio: int = 8
    embedding_dim: int = 128
    projection_hidden: int = 128
    projection_dim: int = 64
    num_classes: int = 2
    in_channels: int = 3
    input_hw: int = 224
    stem_kernel: int = 8
    stem_stride: int = 8
    stem_padding: int = 0

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        widths = self.stage_channels + (
            self.embedding_dim, self.projection_hidden, self.projection_dim,
            self.num_classes, self.in_channels)
        if not self.stage_channels or any(w < 1 for w in widths):
            raise ValueError(f"all widths must be >= 1, got {widths}")
        if self.se_ratio < 1:
            raise ValueError(f"se_ratio must be >= 1, got {self.se_ratio}")
        if self.blocks_per_stage < 1:
            raise ValueError("blocks_per_stage must be >= 1")


@dataclass
class SeBlockParams:
    """Squeeze (w1: C -> hidden) and gate (w2: hidden -> C) layers."""
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    r: int = 8


def se_hidden_width(channels: int, ratio: int) -> int:
    return max(1, channels // ratio)


def se_params_from(params: dict[str, Tensor], prefix: str, ratio: int) -> SeBlockParams:
    return SeBlockParams(
        w1=params[prefix + ".w1"], b1=params[prefix + ".b1"],
        w2=params[prefix + ".w2"], b2=params[prefix + ".b2"], r=ratio)


def se_gates(x: Tensor, p: SeBlockParams) -> Tensor:
    """Per-sample, per-channel gate values in (0,1)."""
    squeezed = global_avg_pool(x)
    hidden = relu(dense(squeezed, p.w1, p.b1))
    return sigmoid(dense(hidden, p.w2, p.b2))


def se_forward(x: Tensor, p: SeBlockParams) -> Tensor:
    """Rescale each channel map by its learned gate."""
    return scale_channels(x, se_gates(x, p))


def _down_geometry(h: int) -> tuple[int, int, int]:
    """Stride-2 conv geometry (kernel, stride, padding) with integral output."""
    if h % 2 == 0:
        return 2, 2, 0
    return 3, 2, 1


def _conv_out(h: int, k: int, s: int, p: int) -> int:
    if (h + 2 * p - k) % s:
        raise ValueError(f"non-integral conv output for h={h} k={k} s={s} p={p}")
    return (h + 2 * p - k) // s + 1


def _param_spec(cfg: EncoderConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """(name, shape, fan_in) for every tensor; fan_in 0 means zero-init."""
    spec = []

    def conv(name, cout, cin, k):
        spec.append((name + ".w", (cout, cin, k, k), cin * k * k))
        spec.append((name + ".b", (cout,), 0))

    def fc(name, din, dout):
        spec.append((name + ".w", (din, dout), din))
        spec.append((name + ".b", (dout,), 0))

    conv("stem", cfg.stage_channels[0], cfg.in_channels, cfg.stem_kernel)
    h = _conv_out(cfg.input_hw, cfg.stem_kernel, cfg.stem_stride, cfg.stem_padding)
    prev = cfg.stage_channels[0]
    for i, c in enumerate(cfg.stage_channels):
        if i > 0:
            k, s, p = _down_geometry(h)
            conv(f"stage{i}.down", c, prev, k)
            h = _conv_out(h, k, s, p)
        for j in range(cfg.blocks_per_stage):
            block = f"stage{i}.block{j}"
            conv(block + ".conv1", c, c, 3)
            conv(block + ".conv2", c, c, 3)
            hid = se_hidden_width(c, cfg.se_ratio)
            spec.append((block + ".se.w1", (c, hid), c))
            spec.append((block + ".se.b1", (hid,), 0))
            spec.append((block + ".se.w2", (hid, c), hid))
            spec.append((block + ".se.b2", (c,), 0))
        prev = c
    if cfg.embedding_dim != cfg.stage_channels[-1]:
        fc("adapter", cfg.stage_channels[-1], cfg.embedding_dim)
    fc("proj.fc1", cfg.embedding_dim, cfg.projection_hidden)
    fc("proj.fc2", cfg.projection_hidden, cfg.projection_dim)
    fc("head", cfg.embedding_dim, cfg.num_classes)
    return spec


def init_params(cfg: EncoderConfig, seed: int, dtype=None) -> dict[str, Tensor]:
    """He-normal weights (std sqrt(2/fan_in)), zero biases.

    Every tensor draws from its own stream keyed by (seed, crc32(name)), so
    the set of other parameters in the model never affects its values.
    """
    dtype = DEFAULT_DTYPE if dtype is None else dtype
    params: dict[str, Tensor] = {}
    for name, shape, fan_in in _param_spec(cfg):
        if fan_in == 0:
            data = np.zeros(shape)
        else:
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, zlib.crc32(name.encode())]))
            data = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        params[name] = Tensor(data, requires_grad=True, dtype=dtype)
    return params


def encoder_forward(images: Tensor, cfg: EncoderConfig,
                    params: dict[str, Tensor]) -> Tensor:
    """Images (N, C, H, W) in [0,1] -> embeddings (N, embedding_dim)."""
    if images.data.ndim != 4 or images.data.shape[1] != cfg.in_channels:
        raise ShapeMismatch(
            f"expected (N, {cfg.in_channels}, H, W), got {images.data.shape}")
    x = relu(conv2d(images, params["stem.w"], params["stem.b"],
                    stride=cfg.stem_stride, padding=cfg.stem_padding))
    for i in range(len(cfg.stage_channels)):
        if i > 0:
            k, s, p = _down_geometry(x.data.shape[2])
            x = relu(conv2d(x, params[f"stage{i}.down.w"],
                            params[f"stage{i}.down.b"], stride=s, padding=p))
        for j in range(cfg.blocks_per_stage):
            block = f"stage{i}.block{j}"
            y = relu(conv2d(x, params[block + ".conv1.w"],
                            params[block + ".conv1.b"], stride=1, padding=1))
            y = conv2d(y, params[block + ".conv2.w"],
                       params[block + ".conv2.b"], stride=1, padding=1)
            if cfg.se_enabled:
                y = se_forward(y, se_params_from(params, block + ".se", cfg.se_ratio))
            x = relu(add(y, x))
    h = global_avg_pool(x)
    if "adapter.w" in params:
        h = dense(h, params["adapter.w"], params["adapter.b"])
    return h


def project(h: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Embeddings -> unit-norm rows in the contrastive space."""
    z = dense(relu(dense(h, params["proj.fc1.w"], params["proj.fc1.b"])),
              params["proj.fc2.w"], params["proj.fc2.b"])
    return l2_normalize(z)


def classify(h: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Linear probe: embeddings -> logits (N, num_classes)."""
    return dense(h, params["head.w"], params["head.b"])


ENCODER_PREFIXES = ("stem.", "stage", "adapter.")


def param_subset(params: dict[str, Tensor], *prefixes: str) -> dict[str, Tensor]:
    return {k: v for k, v in params.items() if k.startswith(prefixes)}


def encoder_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return param_subset(params, *ENCODER_PREFIXES)


def projection_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return param_subset(params, "proj.")


def head_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return param_subset(params, "head.")
