"""Windowed EEG block to RGB image transformation, plus image storage.

The transform: slice the window into short temporal segments, flatten each
segment channel-major into one matrix column, normalize every column to
[0, 1], map values through a 256-entry color table, and scale the result to
the target size with nearest-neighbor sampling so no colors outside the
table ever appear.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _viridis
from .errors import (
    BadMagic,
    NonIntegralSegment,
    ShapeMismatch,
    TrailingGarbage,
    TruncatedPayload,
    ValueOutOfRange,
    VersionMismatch,
    ZeroDimension,
)
from .ingest.windows import WindowSpec, _exact_samples

EEGIMG_MAGIC = b"EEGI"
EEGIMG_VERSION = 1

# Rec. 709 luma weights, used only as a perceptual-ordering proxy.
_LUMA = np.array([0.2126, 0.7152, 0.0722])


def luminance(rgb: np.ndarray) -> np.ndarray:
    return np.asarray(rgb, dtype=np.float64) @ _LUMA


@dataclass
class ColorLut:
    entries: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.uint8)
        if self.entries.shape != (256, 3):
            raise ValueError(f"need 256 rgb entries, got shape {self.entries.shape}")

    @classmethod
    def default(cls) -> "ColorLut":
        table = np.frombuffer(_viridis.TABLE_BYTES, dtype=np.uint8).reshape(256, 3)
        return cls(entries=table.copy(), name="viridis")

    @classmethod
    def from_file(cls, path: str | Path) -> "ColorLut":
        raw = Path(path).read_bytes()
        if len(raw) != 768:
            raise ValueError(f"LUT file must be 768 bytes (256 rgb triples), got {len(raw)}")
        return cls(entries=np.frombuffer(raw, dtype=np.uint8).reshape(256, 3).copy(),
                   name=Path(path).stem)


@dataclass
class SegmentMatrix:
    """cols temporal segments, each flattened channel-major into a column."""

    values: np.ndarray
    channels: int
    samples_per_segment: int

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass
class EegImage:
    pixels: np.ndarray
    label: int | None = None
    source_id: str = ""
    window_index: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"pixels must be h x w x 3, got {self.pixels.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def segment_window(block: np.ndarray, spec: WindowSpec, rate: float) -> SegmentMatrix:
    """Arrange a channels x m window into the raw (pre-normalization) matrix.

    Column j is temporal segment j flattened channel-major: channel 0's
    samples, then channel 1's, and so on.
    """
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2:
        raise ShapeMismatch(f"block must be channels x m, got {block.shape}")
    c, m = block.shape
    s = _exact_samples(spec.segment_ms / 1000.0, rate, "segment")
    expected_m = _exact_samples(spec.window_s, rate, "window")
    if m != expected_m:
        raise ShapeMismatch(f"block has {m} samples per channel, spec expects {expected_m}")
    cols = m // s
    # (c, cols, s) -> (cols, c, s): each row group keeps channel order
    values = block.reshape(c, cols, s).transpose(1, 0, 2).reshape(cols, c * s).T
    return SegmentMatrix(values=np.ascontiguousarray(values), channels=c, samples_per_segment=s)


def normalize_segment(column: np.ndarray) -> np.ndarray:
    """Affine-map one column to [0, 1]; a flat column maps to all 0.5."""
    column = np.asarray(column, dtype=np.float64)
    if column.size == 0:
        raise ValueError("empty column")
    lo, hi = column.min(), column.max()
    if hi == lo:
        return np.full_like(column, 0.5)
    return (column - lo) / (hi - lo)


def normalize_matrix(matrix: SegmentMatrix) -> SegmentMatrix:
    v = matrix.values
    lo = v.min(axis=0, keepdims=True)
    hi = v.max(axis=0, keepdims=True)
    span = hi - lo
    flat = span == 0.0
    span = np.where(flat, 1.0, span)
    out = (v - lo) / span
    out = np.where(flat, 0.5, out)
    return SegmentMatrix(values=out, channels=matrix.channels,
                         samples_per_segment=matrix.samples_per_segment)


def apply_colormap(matrix: SegmentMatrix | np.ndarray, lut: ColorLut) -> np.ndarray:
    """Map normalized values to rgb via index = round-half-up(v * 255)."""
    v = matrix.values if isinstance(matrix, SegmentMatrix) else np.asarray(matrix)
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise ValueOutOfRange(f"values span [{v.min()}, {v.max()}], expected [0, 1]")
    idx = np.floor(v * 255.0 + 0.5).astype(np.intp)
    return lut.entries[idx]


def resize_nearest(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor scale: output(y, x) = input(floor(y*h/out_h), floor(x*w/out_w))."""
    if out_h < 1 or out_w < 1:
        raise ZeroDimension(f"target {out_h} x {out_w}")
    h, w = img.shape[:2]
    ys = (np.arange(out_h) * h) // out_h
    xs = (np.arange(out_w) * w) // out_w
    return img[ys[:, None], xs[None, :]]


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear alternative for visual output; blends colors outside the LUT."""
    if out_h < 1 or out_w < 1:
        raise ZeroDimension(f"target {out_h} x {out_w}")
    h, w = img.shape[:2]
    fy = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    fx = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    y0 = np.clip(np.floor(fy).astype(np.intp), 0, h - 1)
    x0 = np.clip(np.floor(fx).astype(np.intp), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(fy - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(fx - x0, 0.0, 1.0)[None, :, None]
    p = img.astype(np.float64)
    top = p[y0[:, None], x0[None, :]] * (1 - wx) + p[y0[:, None], x1[None, :]] * wx
    bot = p[y1[:, None], x0[None, :]] * (1 - wx) + p[y1[:, None], x1[None, :]] * wx
    out = top * (1 - wy) + bot * wy
    return np.clip(np.floor(out + 0.5), 0, 255).astype(img.dtype)


def encode_window(
    block: np.ndarray,
    spec: WindowSpec,
    rate: float,
    lut: ColorLut | None = None,
    out_h: int = 224,
    out_w: int = 224,
    label: int | None = None,
    source_id: str = "",
    window_index: int = 0,
    resize_mode: str = "nearest",
) -> EegImage:
    """Full window-to-image pipeline; pure, so equal inputs give equal bytes."""
    lut = lut or ColorLut.default()
    matrix = normalize_matrix(segment_window(block, spec, rate))
    small = apply_colormap(matrix, lut)
    if resize_mode == "nearest":
        pixels = resize_nearest(small, out_h, out_w)
    elif resize_mode == "bilinear":
        pixels = resize_bilinear(small, out_h, out_w)
    else:
        raise ValueError(f"unknown resize_mode {resize_mode!r}")
    return EegImage(pixels=pixels, label=label, source_id=source_id,
                    window_index=window_index)


# --- .eegimg container -------------------------------------------------

def image_to_bytes(img: EegImage) -> bytes:
    sid = img.source_id.encode("utf-8")
    if len(sid) > 0xFFFF:
        raise ValueError("source_id too long")
    label = -1 if img.label is None else int(img.label)
    head = EEGIMG_MAGIC + struct.pack(
        "<HHHh", EEGIMG_VERSION, img.height, img.width, label
    ) + struct.pack("<H", len(sid)) + sid + struct.pack("<I", img.window_index)
    return head + np.ascontiguousarray(img.pixels).tobytes()


def image_from_bytes(data: bytes) -> EegImage:
    if len(data) < 4 or data[:4] != EEGIMG_MAGIC:
        raise BadMagic(f"not an image container: leading bytes {data[:4]!r}")
    if len(data) < 14:
        raise TruncatedPayload(f"header needs 14 bytes, got {len(data)}")
    version, h, w, label = struct.unpack_from("<HHHh", data, 4)
    if version != EEGIMG_VERSION:
        raise VersionMismatch(f"file version {version}, reader supports {EEGIMG_VERSION}")
    (sid_len,) = struct.unpack_from("<H", data, 12)
    offset = 14 + sid_len
    if len(data) < offset + 4:
        raise TruncatedPayload("source id or window index cut short")
    sid = data[14:14 + sid_len].decode("utf-8")
    (window_index,) = struct.unpack_from("<I", data, offset)
    offset += 4
    need = h * w * 3
    have = len(data) - offset
    if have < need:
        raise TruncatedPayload(f"pixel payload holds {have} bytes, header declares {need}")
    if have > need:
        raise TrailingGarbage(f"{have - need} bytes past the pixel payload")
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=offset).reshape(h, w, 3)
    return EegImage(pixels=pixels.copy(), label=None if label < 0 else label,
                    source_id=sid, window_index=window_index)


def write_image(img: EegImage, path: str | Path) -> None:
    Path(path).write_bytes(image_to_bytes(img))


def read_image(path: str | Path) -> EegImage:
    return image_from_bytes(Path(path).read_bytes())


def write_png(img: EegImage, path: str | Path) -> None:
    """Export for human inspection; never read back."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.image as mpimg

    mpimg.imsave(str(path), img.pixels)


def manifest_line(filename: str, img: EegImage) -> str:
    return json.dumps(
        {"file": filename, "label": img.label, "source_id": img.source_id,
         "window_index": img.window_index},
        sort_keys=True,
    )


def read_manifest(path: str | Path) -> list[dict]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows
