"""Contrastive pretraining: augmentation pairs, the NT-Xent loss, and the loop.

Two stochastically augmented views of each image form a positive pair; all
other views in the batch act as negatives. Views sit in adjacent rows (2k,
2k+1), so the positive partner of row i is row i^1.

Every sample index owns its own RNG stream, seeded by (master seed, epoch,
dataset index). View generation is therefore reproducible regardless of how
samples are sharded across workers, and resuming at an epoch boundary
regenerates the exact views the uninterrupted run would have seen.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    AdamState,
    Tape,
    Tensor,
    adam_step,
    add,
    backward,
    matmul,
    mean,
    mul,
    row_logsumexp,
    sub,
    sum_,
    transpose,
    zero_grads,
)
from .errors import (
    BatchTooSmall,
    EmptyDataset,
    NonPositiveTemperature,
    NonUnitRows,
    ShapeMismatch,
)
from .model import EncoderConfig, encoder_forward, init_params, project

NEG_MASK = -1e30  # exp(NEG_MASK / tau - max) underflows to exactly 0.0
UNIT_TOL = 1e-4

AUG_KINDS = ("rotate90", "gaussian_blur", "gaussian_noise", "crop_resize", "cutout")


@dataclass(frozen=True)
class AugOp:
    """One augmentation: kind, gate probability, and a kind-specific range."""
    kind: str
    probability: float = 1.0
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind not in AUG_KINDS:
            raise ValueError(f"unknown augmentation kind {self.kind!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")
        if self.hi < self.lo:
            raise ValueError(f"range [{self.lo}, {self.hi}] is inverted")


@dataclass(frozen=True)
class AugmentationSpec:
    ops: tuple[AugOp, ...]

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if not self.ops:
            raise ValueError("at least one augmentation op is required")

    @classmethod
    def default(cls) -> "AugmentationSpec":
        return cls(ops=(
            AugOp("crop_resize", probability=1.0, lo=0.6, hi=1.0),
            AugOp("gaussian_noise", probability=1.0, lo=0.0, hi=0.05),
        ))


def rotate90(view: np.ndarray, k: int) -> np.ndarray:
    """Rotate a CHW image by k quarter turns."""
    return np.ascontiguousarray(np.rot90(view, k=k, axes=(1, 2)))


def _nearest_rows_cols(out_h, out_w, in_h, in_w):
    rows = (np.arange(out_h) * in_h) // out_h
    cols = (np.arange(out_w) * in_w) // out_w
    return rows, cols


def _apply_op(view: np.ndarray, op: AugOp, rng: np.random.Generator) -> np.ndarray:
    c, h, w = view.shape
    if op.kind == "rotate90":
        return rotate90(view, int(rng.integers(0, 4)))
    if op.kind == "gaussian_blur":
        sigma = float(rng.uniform(op.lo, op.hi))
        if sigma < 1e-8:
            return view
        radius = max(1, int(np.ceil(2.0 * sigma)))
        t = np.arange(-radius, radius + 1, dtype=np.float64)
        taps = np.exp(-0.5 * (t / sigma) ** 2)
        taps /= taps.sum()
        for axis in (1, 2):
            pad = [(0, 0)] * 3
            pad[axis] = (radius, radius)
            padded = np.pad(view, pad, mode="reflect")
            acc = np.zeros_like(view)
            for i, tap in enumerate(taps):
                sl = [slice(None)] * 3
                sl[axis] = slice(i, i + view.shape[axis])
                acc += tap * padded[tuple(sl)]
            view = acc
        return view
    if op.kind == "gaussian_noise":
        sigma = float(rng.uniform(op.lo, op.hi))
        noisy = view + rng.normal(0.0, 1.0, size=view.shape) * sigma
        return np.clip(noisy, 0.0, 1.0)
    if op.kind == "crop_resize":
        scale = float(rng.uniform(op.lo, op.hi))
        ch = min(h, max(1, round(scale * h)))
        cw = min(w, max(1, round(scale * w)))
        top = int(rng.integers(0, h - ch + 1))
        left = int(rng.integers(0, w - cw + 1))
        crop = view[:, top:top + ch, left:left + cw]
        rows, cols = _nearest_rows_cols(h, w, ch, cw)
        return crop[:, rows[:, None], cols[None, :]]
    if op.kind == "cutout":
        frac = float(rng.uniform(op.lo, op.hi))
        side = min(min(h, w), max(1, round(frac * min(h, w))))
        top = int(rng.integers(0, h - side + 1))
        left = int(rng.integers(0, w - side + 1))
        out = view.copy()
        out[:, top:top + side, left:left + side] = 0.0
        return out
    raise ValueError(f"unknown augmentation kind {op.kind!r}")


def _as_chw(img) -> np.ndarray:
    pixels = getattr(img, "pixels", img)
    arr = np.asarray(pixels)
    if arr.ndim == 3 and arr.shape[2] == 3 and arr.dtype == np.uint8:
        return arr.astype(np.float64).transpose(2, 0, 1) / 255.0
    if arr.ndim == 3 and arr.shape[0] == 3:
        return arr.astype(np.float64)
    raise ShapeMismatch(f"expected HWC uint8 or CHW float image, got {arr.shape}")


def _draw_view(source: np.ndarray, spec: AugmentationSpec,
               rng: np.random.Generator) -> np.ndarray:
    view = source
    for op in spec.ops:
        if rng.random() < op.probability:
            view = _apply_op(view, op, rng)
    return view


def augment_pair(img, spec: AugmentationSpec,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two independent augmented views of one image, as CHW float32 in [0,1]."""
    source = _as_chw(img)
    a = _draw_view(source, spec, rng)
    b = _draw_view(source, spec, rng)
    return a.astype(np.float32), b.astype(np.float32)


# --- NT-Xent loss -------------------------------------------------------------

@dataclass(frozen=True)
class NtXentConfig:
    temperature: float = 0.5
    batch_size: int = 1

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise NonPositiveTemperature(f"temperature {self.temperature} <= 0")
        if self.batch_size < 1:
            raise ValueError(f"batch_size {self.batch_size} < 1")


def nt_xent_loss(z: Tensor, tau: float = 0.5) -> Tensor:
    """Normalized-temperature cross entropy over adjacent-row positive pairs.

    z holds 2N unit rows; rows 2k and 2k+1 are the two views of sample k.
    The per-row term is -log softmax of the positive similarity against all
    2N-1 others; the result is the mean over all 2N rows.
    """
    if tau <= 0.0:
        raise NonPositiveTemperature(f"temperature {tau} <= 0")
    if z.data.ndim != 2 or z.data.shape[0] < 2 or z.data.shape[0] % 2:
        raise ShapeMismatch(f"expected (2N, d) with N >= 1, got {z.data.shape}")
    norms = np.sqrt((z.data * z.data).sum(axis=1))
    worst = float(np.abs(norms - 1.0).max())
    if worst > UNIT_TOL:
        raise NonUnitRows(f"row norm deviates from 1 by {worst:.2e}")
    n2 = z.data.shape[0]
    sims = mul(matmul(z, transpose(z)), 1.0 / tau)
    diag = Tensor(np.diag(np.full(n2, NEG_MASK)).astype(z.data.dtype))
    masked = add(sims, diag)
    pair = np.zeros((n2, n2), dtype=z.data.dtype)
    pair[np.arange(n2), np.arange(n2) ^ 1] = 1.0
    positives = sum_(mul(masked, Tensor(pair)), axis=1)
    return mean(sub(row_logsumexp(masked), positives))


# --- pretraining loop ---------------------------------------------------------

@dataclass
class PretrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    temperature: float = 0.5
    seed: int = 0
    checkpoint_every: int = 1
    augment: AugmentationSpec = field(default_factory=AugmentationSpec.default)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs {self.epochs} < 1")
        if self.batch_size < 1:
            raise ValueError(f"batch_size {self.batch_size} < 1")
        NtXentConfig(temperature=self.temperature, batch_size=self.batch_size)


def trainable_pretrain_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    """Everything the contrastive stage updates (encoder + projection head)."""
    return {k: v for k, v in params.items() if not k.startswith("head.")}


def pretrain(dataset, cfg: PretrainConfig, params: dict[str, Tensor] | None = None,
             opt_state: AdamState | None = None, start_epoch: int = 0,
             on_epoch=None) -> tuple[dict[str, Tensor], list[dict]]:
    """Contrastive training; returns final params and per-epoch loss history.

    on_epoch(epoch, params, opt_state, entry) fires on the checkpoint cadence
    and always on the final epoch. start_epoch resumes mid-run: epochs before
    it are skipped, and epoch-keyed RNG streams make the remainder identical
    to an uninterrupted run.
    """
    if len(dataset) == 0:
        raise EmptyDataset("pretraining requires at least one image")
    if params is None:
        params = init_params(cfg.encoder, cfg.seed)
    trainable = trainable_pretrain_params(params)
    if opt_state is None:
        opt_state = AdamState.for_params(trainable)

    n = min(cfg.batch_size, len(dataset))
    if n < cfg.batch_size:
        warnings.warn(BatchTooSmall(
            f"dataset ({len(dataset)}) smaller than batch_size "
            f"({cfg.batch_size}); using one batch of {n}"))
    if n < 2:
        warnings.warn(BatchTooSmall(
            "a single-sample batch has no negatives; the loss is identically 0"))

    history: list[dict] = []
    for epoch in range(start_epoch, cfg.epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, epoch])).permutation(len(dataset))
        losses = []
        for b in range(len(dataset) // n):
            batch = order[b * n:(b + 1) * n]
            views = None
            for p, idx in enumerate(batch):
                stream = np.random.default_rng(
                    np.random.SeedSequence([cfg.seed, epoch, int(idx)]))
                va, vb = augment_pair(dataset[idx], cfg.augment, stream)
                if views is None:
                    views = np.empty((2 * n,) + va.shape, dtype=np.float32)
                views[2 * p] = va
                views[2 * p + 1] = vb
            zero_grads(trainable)
            with Tape() as tape:
                z = project(encoder_forward(Tensor(views), cfg.encoder, params),
                            params)
                loss = nt_xent_loss(z, cfg.temperature)
                backward(tape, loss)
            adam_step(trainable, opt_state, lr=cfg.lr)
            losses.append(float(loss.data))
        entry = {
            "epoch": epoch,
            "mean_loss": float(np.mean(losses)) if losses else 0.0,
            "wall_ms": int(round((time.perf_counter() - t0) * 1000.0)),
        }
        history.append(entry)
        last = epoch == cfg.epochs - 1
        due = cfg.checkpoint_every > 0 and (epoch + 1) % cfg.checkpoint_every == 0
        if on_epoch is not None and (due or last):
            on_epoch(epoch, params, opt_state, entry)
    return params, history
