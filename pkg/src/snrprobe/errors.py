"""Exception types raised across the toolkit.

Grouped here so callers (and the CLI) can catch the shared base class.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


# --- audio / wav ---

class UnsupportedFormat(ToolkitError):
    """WAV codec, channel count, or sample rate outside the supported set."""


class CorruptFile(ToolkitError):
    """Truncated or structurally invalid container."""


class EmptyNoise(ToolkitError):
    """Noise recording has no samples."""


class SilentInput(ToolkitError):
    """Signal power is zero where a nonzero level is required."""


class TooShort(ToolkitError):
    """Clip shorter than one loudness gating block."""


class AllGated(ToolkitError):
    """Every gating block fell below the absolute loudness gate."""


class SweepError(ToolkitError):
    """Mixture sweep could not produce any valid mixture for an utterance."""


# --- tensors / embeddings ---

class BadMagic(ToolkitError):
    """Container does not start with a known magic byte sequence."""


class UnsupportedDtype(ToolkitError):
    """Tensor dtype outside little-endian f4/f8."""


class ShapeOverflow(ToolkitError):
    """Declared shape disagrees with the payload size."""


class EmptyAxis(ToolkitError):
    """Pooling axis has zero length."""


class DimensionMismatch(ToolkitError):
    """Vectors that must share a dimension do not."""


# --- cka / regression ---

class TooFewRows(ToolkitError):
    """Matrix has fewer rows than the operation requires."""


class RowMismatch(ToolkitError):
    """Paired matrices disagree on row count or row alignment."""


class DegenerateInput(ToolkitError):
    """Centered matrix is identically zero; similarity undefined."""


class MissingCell(ToolkitError):
    """No embeddings stored for a requested (layer, noise, SNR) cell."""


class ConstantPredictor(ToolkitError):
    """Regression predictor has zero variance."""


class LengthMismatch(ToolkitError):
    """Paired sequences have different lengths."""


class AllTied(ToolkitError):
    """Rank correlation undefined: one input is fully tied."""


class IncompleteGrid(ToolkitError):
    """A layer lacks values for part of the SNR grid."""


# --- diffusion ---

class BadEpsilon(ToolkitError):
    """Kernel bandwidth is not positive."""


class ZeroRow(ToolkitError):
    """Affinity row sums to zero (isolated point)."""


class EigenFailure(ToolkitError):
    """Eigendecomposition failed or produced an unusable spectrum."""


# --- pipeline / rendering ---

class ConfigError(ToolkitError):
    """Invalid or inconsistent pipeline configuration."""


class MissingInput(ToolkitError):
    """A stage prerequisite file does not exist."""


class EmptyMatrix(ToolkitError):
    """Nothing to render."""


class StageFailure(ToolkitError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
