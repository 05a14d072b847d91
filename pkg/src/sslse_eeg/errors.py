"""Error types shared across the pipeline.

Every failure the library raises deliberately is a subclass of PipelineError,
so callers (and the CLI) can catch one base and report the category by class
name. BatchTooSmall is a warning, not an error: a 1-pair contrastive batch is
degenerate but well defined.
"""


class PipelineError(Exception):
    """Base class for all deliberate failures in this package."""


# --- ingestion ---

class TruncatedHeader(PipelineError):
    """EDF input shorter than its declared header."""


class BadMagic(PipelineError):
    """Leading identifier bytes are not the expected magic."""


class InconsistentRates(PipelineError):
    """EDF signals disagree on samples per record; only uniform-rate files are supported."""


class ScaleUndefined(PipelineError):
    """EDF signal has digital_max == digital_min, so the physical scale is undefined."""


class RaggedRow(PipelineError):
    """CSV row with a different cell count than the first row."""


class NonNumericCell(PipelineError):
    """CSV cell that does not parse as a decimal real."""


class EmptyInput(PipelineError):
    """CSV input with no data rows."""


class WindowLongerThanRecording(PipelineError):
    """Requested window exceeds the recording duration."""


# --- imaging ---

class NonIntegralSegment(PipelineError):
    """segment_ms at the given rate does not yield a whole number of samples."""


class ValueOutOfRange(PipelineError):
    """Normalized value outside [0, 1] reached the colormap."""


class ZeroDimension(PipelineError):
    """Resize target with a zero height or width."""


class VersionMismatch(PipelineError):
    """Serialized file carries an unsupported format version."""


class TruncatedPayload(PipelineError):
    """Serialized file ends before its declared payload."""


class TrailingGarbage(PipelineError):
    """Serialized file has bytes past the end of its declared payload."""


# --- autodiff / model ---

class ShapeMismatch(PipelineError):
    """Operand shapes incompatible with the operation's contract."""


class NonIntegralOutput(PipelineError):
    """Convolution geometry does not produce integer output dimensions."""


class LabelOutOfRange(PipelineError):
    """Class label outside [0, K)."""


class NonScalarLoss(PipelineError):
    """backward() called on a non-scalar tensor."""


class DoubleBackward(PipelineError):
    """backward() called twice on the same tape without reset."""


class DegenerateNorm(PipelineError):
    """l2_normalize input row with norm at or below the stability threshold."""


# --- contrastive ---

class NonUnitRows(PipelineError):
    """Contrastive embeddings whose rows are not unit-norm."""


class NonPositiveTemperature(PipelineError):
    """Temperature must be strictly positive."""


class EmptyDataset(PipelineError):
    """Training requested on an empty image collection."""


class BatchTooSmall(UserWarning):
    """Effective contrastive batch has a single pair; contrast is degenerate."""


# --- evaluation ---

class MissingLabels(PipelineError):
    """Fine-tuning requested on images without labels."""


class SingleClassSplit(PipelineError):
    """A train or held-out split ended up with fewer than 2 classes."""


class EmptyMatrix(PipelineError):
    """Metrics requested on a confusion matrix with zero total count."""


# --- cli ---

class ConfigParse(PipelineError):
    """Configuration file rejected; message names the offending key or value."""


class MissingInput(PipelineError):
    """A path named by the configuration does not exist."""


class SchemaVersionMismatch(PipelineError):
    """Configuration schema version not supported by this build."""
