"""Binary checkpoints: parameters, optimizer state, epoch, and RNG state.

Layout (all integers little-endian):
    magic "SSEE" | version u16 | config u32 length + UTF-8 JSON |
    tensor count u32 | tensors | optimizer tensor count u32 | tensors |
    epoch u32 | RNG state 32 bytes
Each tensor record is: name u16 length + UTF-8 | dtype u8 (0=f32, 1=f64) |
rank u8 | one u32 per dim | raw data.

Tensors are written sorted by name and the config JSON canonically, so
save -> load -> save is byte-identical.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import AdamState, Tensor
from .errors import BadMagic, TrailingGarbage, TruncatedPayload, VersionMismatch

MAGIC = b"SSEE"
VERSION = 1
_DTYPE_TAGS = {np.dtype("float32"): 0, np.dtype("float64"): 1}
_TAG_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


@dataclass
class LoadedCheckpoint:
    config: dict
    params: dict[str, np.ndarray]
    optimizer: dict[str, np.ndarray]
    epoch: int
    rng_bytes: bytes


def seed_rng_bytes(seed: int) -> bytes:
    """PCG64 (state, inc) of the generator derived from the master seed."""
    state = np.random.default_rng(
        np.random.SeedSequence([seed])).bit_generator.state["state"]
    return (state["state"].to_bytes(16, "little")
            + state["inc"].to_bytes(16, "little"))


def rng_from_bytes(blob: bytes) -> np.random.Generator:
    if len(blob) != 32:
        raise ValueError(f"RNG state must be 32 bytes, got {len(blob)}")
    bg = np.random.PCG64()
    st = bg.state
    st["state"]["state"] = int.from_bytes(blob[:16], "little")
    st["state"]["inc"] = int.from_bytes(blob[16:], "little")
    bg.state = st
    return np.random.Generator(bg)


def _encode_tensor(name: str, arr: np.ndarray) -> bytes:
    tag = _DTYPE_TAGS.get(arr.dtype)
    if tag is None:
        raise ValueError(f"{name}: unsupported dtype {arr.dtype}")
    encoded = name.encode("utf-8")
    if len(encoded) > 0xFFFF:
        raise ValueError(f"tensor name too long: {name[:40]}...")
    if arr.ndim > 0xFF:
        raise ValueError(f"{name}: rank {arr.ndim} too large")
    out = bytearray(struct.pack("<H", len(encoded)))
    out += encoded
    out += struct.pack("<BB", tag, arr.ndim)
    for dim in arr.shape:
        out += struct.pack("<I", dim)
    out += np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
    return bytes(out)


def _encode_tensor_block(tensors: dict[str, np.ndarray]) -> bytes:
    out = bytearray(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        out += _encode_tensor(name, tensors[name])
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.data):
            raise TruncatedPayload(
                f"checkpoint ends inside {what}: need {n} bytes at "
                f"offset {self.off}, have {len(self.data) - self.off}")
        chunk = self.data[self.off:self.off + n]
        self.off += n
        return chunk

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def _decode_tensor_block(r: _Reader, what: str) -> dict[str, np.ndarray]:
    count = r.u32(f"{what} count")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u16(f"{what} name length"), f"{what} name").decode("utf-8")
        tag = r.take(1, f"{name} dtype")[0]
        if tag not in _TAG_DTYPES:
            raise ValueError(f"{name}: unknown dtype tag {tag}")
        rank = r.take(1, f"{name} rank")[0]
        shape = tuple(r.u32(f"{name} dim") for _ in range(rank))
        dtype = _TAG_DTYPES[tag]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        raw = r.take(nbytes, f"{name} data")
        tensors[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    return tensors


def checkpoint_bytes(config: dict, params: dict[str, Tensor] | dict[str, np.ndarray],
                     optimizer: dict[str, np.ndarray], epoch: int,
                     rng_bytes: bytes) -> bytes:
    if len(rng_bytes) != 32:
        raise ValueError(f"RNG state must be 32 bytes, got {len(rng_bytes)}")
    arrays = {k: (v.data if isinstance(v, Tensor) else np.asarray(v))
              for k, v in params.items()}
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = bytearray(MAGIC)
    out += struct.pack("<H", VERSION)
    out += struct.pack("<I", len(blob))
    out += blob
    out += _encode_tensor_block(arrays)
    out += _encode_tensor_block(optimizer)
    out += struct.pack("<I", epoch)
    out += rng_bytes
    return bytes(out)


def parse_checkpoint(data: bytes) -> LoadedCheckpoint:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r} header, got {data[:4]!r}")
    r = _Reader(data)
    r.take(4, "magic")
    version = r.u16("version")
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version} != {VERSION}")
    cfg_raw = r.take(r.u32("config length"), "config JSON")
    config = json.loads(cfg_raw.decode("utf-8"))
    params = _decode_tensor_block(r, "parameter")
    optimizer = _decode_tensor_block(r, "optimizer")
    epoch = r.u32("epoch")
    rng_bytes = r.take(32, "RNG state")
    if r.off != len(data):
        raise TrailingGarbage(
            f"{len(data) - r.off} unexpected bytes after checkpoint payload")
    return LoadedCheckpoint(config=config, params=params, optimizer=optimizer,
                            epoch=epoch, rng_bytes=bytes(rng_bytes))


def save_checkpoint(path: str | Path, config: dict,
                    params: dict[str, Tensor], opt_state: AdamState,
                    epoch: int, seed: int) -> None:
    payload = checkpoint_bytes(config, params, pack_optimizer(opt_state),
                               epoch, seed_rng_bytes(seed))
    Path(path).write_bytes(payload)


def load_checkpoint(path: str | Path) -> LoadedCheckpoint:
    return parse_checkpoint(Path(path).read_bytes())


def pack_optimizer(state: AdamState) -> dict[str, np.ndarray]:
    packed: dict[str, np.ndarray] = {"t": np.array(float(state.t), dtype=np.float64)}
    for name, arr in state.m.items():
        packed["m." + name] = arr
    for name, arr in state.v.items():
        packed["v." + name] = arr
    return packed


def unpack_optimizer(tensors: dict[str, np.ndarray]) -> AdamState:
    t = int(tensors.get("t", np.array(0.0)))
    m = {k[2:]: v for k, v in tensors.items() if k.startswith("m.")}
    v = {k[2:]: v for k, v in tensors.items() if k.startswith("v.")}
    return AdamState(m=m, v=v, t=t)


def tensors_to_params(tensors: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {name: Tensor(arr, requires_grad=True, dtype=arr.dtype)
            for name, arr in sorted(tensors.items())}
