"""EDF reading and writing.

Covers plain uniform-rate EDF: a 256-byte ASCII header, 256 more bytes per
signal, then data records of 16-bit little-endian two's-complement samples,
record-interleaved (all of signal 0's samples for the record, then signal
1's, ...). Annotation channels, per-signal rates and 24-bit BDF are out of
scope; mixed rates are rejected rather than resampled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    BadMagic,
    InconsistentRates,
    ScaleUndefined,
    TruncatedHeader,
    TruncatedPayload,
)
from .recording import EegRecording


@dataclass
class EdfSignal:
    label: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    samples_per_record: int


@dataclass
class EdfHeader:
    version: str
    recording_id: str
    num_records: int
    record_duration_s: float
    signals: list[EdfSignal]

    @property
    def num_signals(self) -> int:
        return len(self.signals)

    @property
    def header_bytes(self) -> int:
        return 256 + 256 * self.num_signals


def _ascii(data: bytes, start: int, width: int) -> str:
    return data[start:start + width].decode("ascii", errors="replace").strip()


def _ascii_block(data: bytes, start: int, width: int, count: int) -> list[str]:
    return [_ascii(data, start + i * width, width) for i in range(count)]


def parse_header(data: bytes) -> EdfHeader:
    if len(data) < 256:
        raise TruncatedHeader(f"need 256 header bytes, got {len(data)}")
    version = _ascii(data, 0, 8)
    if version != "0":
        raise BadMagic(f"version field {version!r} is not '0'")
    try:
        ns = int(_ascii(data, 252, 256 - 252))
        num_records = int(_ascii(data, 236, 8))
        record_duration = float(_ascii(data, 244, 8))
    except ValueError as e:
        raise BadMagic(f"non-numeric header field: {e}") from None
    if ns < 1:
        raise BadMagic(f"number of signals {ns} < 1")
    total = 256 + 256 * ns
    if len(data) < total:
        raise TruncatedHeader(f"need {total} header bytes for {ns} signals, got {len(data)}")

    base = 256
    labels = _ascii_block(data, base, 16, ns)
    pmin = _ascii_block(data, base + ns * (16 + 80 + 8), 8, ns)
    pmax = _ascii_block(data, base + ns * (16 + 80 + 8 + 8), 8, ns)
    dmin = _ascii_block(data, base + ns * (16 + 80 + 8 + 8 + 8), 8, ns)
    dmax = _ascii_block(data, base + ns * (16 + 80 + 8 + 8 + 8 + 8), 8, ns)
    spr = _ascii_block(data, base + ns * (16 + 80 + 8 + 8 + 8 + 8 + 8 + 80), 8, ns)

    signals = []
    for i in range(ns):
        try:
            sig = EdfSignal(
                label=labels[i],
                physical_min=float(pmin[i]),
                physical_max=float(pmax[i]),
                digital_min=int(dmin[i]),
                digital_max=int(dmax[i]),
                samples_per_record=int(spr[i]),
            )
        except ValueError as e:
            raise BadMagic(f"signal {i}: non-numeric field: {e}") from None
        if sig.digital_max <= sig.digital_min:
            raise ScaleUndefined(
                f"signal {i}: digital range [{sig.digital_min}, {sig.digital_max}] "
                "defines no scale"
            )
        signals.append(sig)

    rates = {s.samples_per_record for s in signals}
    if len(rates) > 1:
        raise InconsistentRates(
            f"signals disagree on samples_per_record: {sorted(rates)}; "
            "only uniform-rate files are supported"
        )
    if record_duration <= 0:
        raise BadMagic(f"record duration {record_duration} must be positive")
    return EdfHeader(
        version=version,
        recording_id=_ascii(data, 88, 80),
        num_records=num_records,
        record_duration_s=record_duration,
        signals=signals,
    )


def parse_edf(data: bytes) -> EegRecording:
    """Parse a complete EDF byte stream into a physical-unit recording.

    Physical values come from the per-signal linear scale:
    physical = physical_min + (digital - digital_min) * (physical_max -
    physical_min) / (digital_max - digital_min).
    """
    hdr = parse_header(data)
    ns = hdr.num_signals
    spr = hdr.signals[0].samples_per_record
    record_words = ns * spr
    payload = data[hdr.header_bytes:]
    if hdr.num_records < 0:
        num_records = len(payload) // (record_words * 2)
    else:
        num_records = hdr.num_records
    need = num_records * record_words * 2
    if len(payload) < need:
        raise TruncatedPayload(
            f"data section holds {len(payload)} bytes, header declares {need}"
        )

    digital = np.frombuffer(payload, dtype="<i2", count=num_records * record_words)
    digital = digital.reshape(num_records, ns, spr)
    samples = np.empty((ns, num_records * spr), dtype=np.float64)
    for i, sig in enumerate(hdr.signals):
        scale = (sig.physical_max - sig.physical_min) / (sig.digital_max - sig.digital_min)
        chan = digital[:, i, :].reshape(-1).astype(np.float64)
        samples[i] = sig.physical_min + (chan - sig.digital_min) * scale

    return EegRecording(
        sample_rate_hz=spr / hdr.record_duration_s,
        samples=samples,
        channel_labels=[s.label for s in hdr.signals],
        source_id=hdr.recording_id or "edf",
    )


def _fit8(value: float) -> str:
    """Format a float into at most 8 ASCII chars, reparsable by float()."""
    if value == int(value) and abs(value) < 1e7:
        s = str(int(value))
        if len(s) <= 8:
            return s
    for prec in range(7, 0, -1):
        s = f"{value:.{prec}g}"
        if len(s) <= 8:
            return s
    raise ValueError(f"cannot format {value} in 8 chars")


def _pad(s: str, width: int) -> bytes:
    b = s.encode("ascii")
    if len(b) > width:
        b = b[:width]
    return b.ljust(width)


def write_edf(rec: EegRecording, digital_min: int = -32768, digital_max: int = 32767) -> bytes:
    """Serialize a recording to plain EDF bytes.

    Records are 1 s long, so the sample rate must be a positive integer.
    Quantization uses the 8-char ASCII rendering of each channel's physical
    range, which keeps the parse-back error within one digital unit. A
    trailing partial record is dropped. Labels are not representable in plain
    EDF; callers persist them separately.
    """
    rate = rec.sample_rate_hz
    spr = int(round(rate))
    if abs(rate - spr) > 1e-9 or spr < 1:
        raise ValueError(f"EDF writer needs an integral sample rate, got {rate}")
    num_records = rec.n_samples // spr
    if num_records < 1:
        raise ValueError("recording shorter than one 1 s record")
    ns = rec.channels
    drange = digital_max - digital_min
    if drange <= 0:
        raise ScaleUndefined("digital_max must exceed digital_min")

    pmins, pmaxs, digital = [], [], np.empty((ns, num_records * spr), dtype="<i2")
    for i in range(ns):
        chan = rec.samples[i, :num_records * spr]
        lo, hi = float(chan.min()), float(chan.max())
        if hi == lo:
            hi = lo + 1.0
        # quantize against the values the header will actually carry
        lo, hi = float(_fit8(lo)), float(_fit8(hi))
        if hi <= lo:
            hi = lo + 1.0
        q = np.floor((chan - lo) * (drange / (hi - lo)) + 0.5) + digital_min
        digital[i] = np.clip(q, digital_min, digital_max).astype("<i2")
        pmins.append(lo)
        pmaxs.append(hi)

    parts = [
        _pad("0", 8),
        _pad("synthetic", 80),
        _pad(rec.source_id, 80),
        _pad("01.01.00", 8),
        _pad("00.00.00", 8),
        _pad(str(256 + 256 * ns), 8),
        _pad("", 44),
        _pad(str(num_records), 8),
        _pad("1", 8),
        _pad(str(ns), 4),
    ]
    fields = [
        (rec.channel_labels, 16),
        (["synthesized"] * ns, 80),
        (["uV"] * ns, 8),
        ([_fit8(v) for v in pmins], 8),
        ([_fit8(v) for v in pmaxs], 8),
        ([str(digital_min)] * ns, 8),
        ([str(digital_max)] * ns, 8),
        ([""] * ns, 80),
        ([str(spr)] * ns, 8),
        ([""] * ns, 32),
    ]
    for values, width in fields:
        parts.extend(_pad(v, width) for v in values)

    body = digital.reshape(ns, num_records, spr).transpose(1, 0, 2).tobytes()
    return b"".join(parts) + body
