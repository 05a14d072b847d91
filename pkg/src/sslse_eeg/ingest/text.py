"""CSV ingestion: rows are samples, columns are channels."""
from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyInput, NonNumericCell, RaggedRow
from .recording import EegRecording


def _parse_cell(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise NonNumericCell(f"row {row}, column {col}: {cell!r}") from None
    if not math.isfinite(v):
        raise NonNumericCell(f"row {row}, column {col}: non-finite value {cell!r}")
    return v


def parse_csv(text: str, sample_rate_hz: float, source_id: str = "csv") -> EegRecording:
    """Parse comma-separated samples at a caller-supplied rate.

    The format carries no rate, so one is required. A single leading row
    whose cells do not all parse as numbers is treated as a header naming
    the channels.
    """
    rows = [line.split(",") for line in text.replace("\r\n", "\n").split("\n") if line.strip()]
    if not rows:
        raise EmptyInput("no data rows")

    labels = None
    first = rows[0]
    try:
        [_parse_cell(c, 0, j) for j, c in enumerate(first)]
    except NonNumericCell:
        labels = [c.strip() for c in first]
        rows = rows[1:]
        if not rows:
            raise EmptyInput("header row but no data rows") from None

    width = len(rows[0])
    data = np.empty((len(rows), width), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRow(f"row {i} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            data[i, j] = _parse_cell(cell, i, j)

    return EegRecording(
        sample_rate_hz=sample_rate_hz,
        samples=data.T,
        channel_labels=labels or [],
        source_id=source_id,
    )
