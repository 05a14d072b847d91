"""Core recording container shared by every ingestion path."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EegRecording:
    """A multichannel EEG recording in physical units (microvolts).

    samples is a channels x n float array; all channels share one sampling
    rate. window_labels, when present, maps a window index (under the
    recording's native non-overlapping windowing) to a class id.
    """

    sample_rate_hz: float
    samples: np.ndarray
    channel_labels: list[str] = field(default_factory=list)
    window_labels: dict[int, int] | None = None
    num_classes: int | None = None
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ValueError("samples must be a channels x n matrix with >= 1 channel")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if not self.channel_labels:
            self.channel_labels = [f"ch{i}" for i in range(self.samples.shape[0])]
        if len(self.channel_labels) != self.samples.shape[0]:
            raise ValueError("one label per channel required")
        if self.window_labels is not None and self.num_classes is not None:
            bad = [w for w, c in self.window_labels.items() if not 0 <= c < self.num_classes]
            if bad:
                raise ValueError(f"window {bad[0]} has class id outside [0, {self.num_classes})")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz
