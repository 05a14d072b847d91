"""Synthetic frequency-coded recordings for calibration and tests.

Each window carries one class; class k is a sinusoid at f0 + k * delta_f
plus white Gaussian noise, so class separability is a single knob
(noise_sigma) and the dominant frequency is checkable with an FFT.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .recording import EegRecording


@dataclass
class SynthSpec:
    classes: int = 2
    windows_per_class: int = 10
    sample_rate_hz: float = 500.0
    channels: int = 1
    noise_sigma: float = 2.0
    seed: int = 0
    f0_hz: float = 8.0
    delta_f_hz: float = 4.0
    window_s: float = 5.0
    amplitude: float = 50.0

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("classes must be >= 2")
        if self.windows_per_class < 1:
            raise ValueError("windows_per_class must be >= 1")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.sample_rate_hz <= 0 or self.window_s <= 0:
            raise ValueError("rate and window_s must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        top = self.f0_hz + (self.classes - 1) * self.delta_f_hz
        if top >= self.sample_rate_hz / 2:
            raise ValueError(f"class frequency {top} Hz at or above Nyquist")


def synthesize_recording(spec: SynthSpec) -> EegRecording:
    """Build a labeled recording; windows are round-robin over classes.

    Window w gets class w mod classes. Time restarts at 0 inside every
    window, so with noise_sigma 0 all windows of a class are exact repeats.
    Channel c is phase-shifted by c/channels of a cycle. Deterministic:
    equal specs produce identical sample bytes.
    """
    m = round(spec.window_s * spec.sample_rate_hz)
    if abs(m - spec.window_s * spec.sample_rate_hz) > 1e-9 or m < 1:
        raise ValueError("window_s * sample_rate_hz must be a positive integer")
    n_windows = spec.classes * spec.windows_per_class
    t = np.arange(m) / spec.sample_rate_hz
    phase = 2.0 * np.pi * np.arange(spec.channels) / spec.channels

    rng = np.random.default_rng(np.random.SeedSequence([0x5EE6, spec.seed]))
    samples = np.empty((spec.channels, n_windows * m), dtype=np.float64)
    labels = {}
    for w in range(n_windows):
        k = w % spec.classes
        labels[w] = k
        f = spec.f0_hz + k * spec.delta_f_hz
        clean = spec.amplitude * np.sin(2.0 * np.pi * f * t[None, :] + phase[:, None])
        noise = rng.normal(0.0, spec.noise_sigma, size=(spec.channels, m)) \
            if spec.noise_sigma > 0 else 0.0
        samples[:, w * m:(w + 1) * m] = clean + noise

    return EegRecording(
        sample_rate_hz=spec.sample_rate_hz,
        samples=samples,
        window_labels=labels,
        num_classes=spec.classes,
        source_id=f"synth-c{spec.classes}-s{spec.seed}",
    )
