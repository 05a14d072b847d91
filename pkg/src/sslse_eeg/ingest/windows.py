"""Fixed-duration window iteration over recordings."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import NonIntegralSegment, WindowLongerThanRecording
from .recording import EegRecording


@dataclass
class WindowSpec:
    """Windowing geometry; stride defaults to the window (non-overlapping)."""

    window_s: float = 5.0
    segment_ms: float = 50.0
    stride_s: float | None = None

    def __post_init__(self):
        if self.window_s <= 0 or self.segment_ms <= 0:
            raise ValueError("window_s and segment_ms must be positive")
        if self.stride_s is None:
            self.stride_s = self.window_s
        if self.stride_s <= 0:
            raise ValueError("stride_s must be positive")
        cols = self.window_s * 1000.0 / self.segment_ms
        if abs(cols - round(cols)) > 1e-9 or round(cols) < 1:
            raise ValueError(
                f"window_s ({self.window_s} s) is not an integer multiple of "
                f"segment_ms ({self.segment_ms} ms)"
            )

    @property
    def num_segments(self) -> int:
        return round(self.window_s * 1000.0 / self.segment_ms)


def _exact_samples(seconds: float, rate: float, what: str) -> int:
    n = seconds * rate
    if abs(n - round(n)) > 1e-6 or round(n) < 1:
        raise NonIntegralSegment(f"{what} of {seconds} s is {n} samples at {rate} Hz")
    return round(n)


def iter_windows(
    rec: EegRecording, spec: WindowSpec
) -> Iterator[tuple[int, np.ndarray, int | None]]:
    """Yield (window_index, channels x m block, label) in time order.

    The trailing partial window is dropped. Labels come from
    rec.window_labels and are only meaningful when the spec matches the
    windowing the labels were assigned under.
    """
    m = _exact_samples(spec.window_s, rec.sample_rate_hz, "window")
    stride = _exact_samples(spec.stride_s, rec.sample_rate_hz, "stride")
    n = rec.n_samples
    if m > n:
        raise WindowLongerThanRecording(
            f"window of {m} samples exceeds recording of {n}"
        )
    count = (n - m) // stride + 1
    labels = rec.window_labels or {}
    for w in range(count):
        start = w * stride
        yield w, rec.samples[:, start:start + m], labels.get(w)
