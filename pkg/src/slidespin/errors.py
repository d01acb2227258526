"""Exception hierarchy shared by all slidespin modules.

Builtins are used where they are the obvious idiom: missing files raise
``FileNotFoundError``, bad patch indices raise ``IndexError`` and violated
call preconditions raise ``ValueError``.
"""

from __future__ import annotations


class SlideSpinError(Exception):
    """Base class for all slidespin-specific errors."""


# --- slide I/O -------------------------------------------------------------

class UnsupportedFormatError(SlideSpinError):
    """File is not a supported slide format (untiled, unknown compression...)."""


class CorruptHeaderError(SlideSpinError):
    """Slide metadata is internally inconsistent (e.g. non-decreasing levels)."""


class InvalidLevelError(SlideSpinError):
    """Requested pyramid level does not exist."""


class ReadFailureError(SlideSpinError):
    """Pixel data could not be read or decoded."""


# --- tissue ----------------------------------------------------------------

class EmptyHistogramError(SlideSpinError):
    """Histogram contains no pixels."""


# --- patching --------------------------------------------------------------

class BadSpacingError(SlideSpinError):
    """Requested sampling spacing is finer than the slide's native resolution."""


# --- encoder ---------------------------------------------------------------

class UnknownEncoderError(SlideSpinError):
    """Encoder id is not registered and cannot be resolved to a file."""


class ShapeMismatchError(SlideSpinError):
    """Tensor or model I/O shape disagrees with the declared spec."""


class SizeMismatchError(SlideSpinError):
    """Patch size does not match the encoder input size."""


class EncoderBackendUnavailableError(SlideSpinError):
    """The runtime needed to execute this encoder is not installed."""


class NonFiniteEmbeddingError(SlideSpinError):
    """An embedding row contains NaN or Inf."""


# --- aggregator ------------------------------------------------------------

class EmptyBagError(SlideSpinError):
    """Aggregation requested over zero patches."""


class DimMismatchError(SlideSpinError):
    """Embedding dimension disagrees with the aggregator weights."""


class NonFiniteInputError(SlideSpinError):
    """Numeric input contains NaN or Inf."""


class MissingTensorError(SlideSpinError):
    """A required tensor is absent from the weights document."""


class NonFiniteWeightError(SlideSpinError):
    """A weight tensor contains NaN or Inf."""


# --- zoo -------------------------------------------------------------------

class ManifestParseError(SlideSpinError):
    """Manifest text is not valid JSON."""


class SchemaError(SlideSpinError):
    """Manifest schema_version is missing or unknown."""


class FieldError(SlideSpinError):
    """One or more manifest fields are invalid; message lists all of them."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid manifest: " + "; ".join(self.problems))


class FetchError(SlideSpinError):
    """Remote bundle file could not be fetched."""


class ChecksumMismatchError(SlideSpinError):
    """Downloaded file does not match its manifest sha256."""

    def __init__(self, filename: str, expected: str, actual: str):
        self.filename = filename
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"checksum mismatch for {filename}: expected {expected}, got {actual}"
        )


class IncompleteBundleError(SlideSpinError):
    """Bundle directory is missing files listed in its manifest."""


# --- engine ----------------------------------------------------------------

class LengthMismatchError(SlideSpinError):
    """Paired sequences have different lengths."""


class EmptyInputError(SlideSpinError):
    """An operation that needs at least one element received none."""


class InvalidPolygonError(SlideSpinError):
    """Region polygon is not a simple closed ring."""


class PipelineError(SlideSpinError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {cause}")
