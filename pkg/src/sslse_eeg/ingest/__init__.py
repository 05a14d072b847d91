from .edf import EdfHeader, EdfSignal, parse_edf, parse_header, write_edf
from .recording import EegRecording
from .synth import SynthSpec, synthesize_recording
from .text import parse_csv
from .windows import WindowSpec, iter_windows

__all__ = [
    "EdfHeader",
    "EdfSignal",
    "EegRecording",
    "SynthSpec",
    "WindowSpec",
    "iter_windows",
    "parse_csv",
    "parse_edf",
    "parse_header",
    "synthesize_recording",
    "write_edf",
]
