"""Exception types shared across the package.

Every domain failure raises a subclass of AttnMemError so the CLI can map
them to exit code 1 with a typed message.
"""


class AttnMemError(Exception):
    """Base class for all domain errors."""


# --- tensor container ---------------------------------------------------

class TensorFormatError(AttnMemError):
    """Malformed tensor file; `offset` is the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagic(TensorFormatError):
    pass


class BadHeader(TensorFormatError):
    pass


class UnsupportedDtype(TensorFormatError):
    pass


class TruncatedPayload(TensorFormatError):
    pass


class IoFailure(AttnMemError):
    pass


# --- CSV loaders --------------------------------------------------------

class CsvError(AttnMemError):
    """Invalid CSV row; `row` is the 1-based data-row number."""

    def __init__(self, message, row):
        super().__init__(f"{message} (row {row})")
        self.row = row


class ScoreOutOfRange(CsvError):
    pass


class DuplicateVideoId(CsvError):
    pass


class NegativeCoordinate(CsvError):
    pass


class BadCsvHeader(AttnMemError):
    pass


# --- model --------------------------------------------------------------

class ShapeMismatch(AttnMemError):
    def __init__(self, expected, got):
        super().__init__(f"expected shape {expected}, got {got}")
        self.expected = expected
        self.got = got


class TooFewFrames(AttnMemError):
    pass


class OddDim(AttnMemError):
    pass


class MissingCache(AttnMemError):
    pass


class NonFiniteLoss(AttnMemError):
    pass


# --- fixation maps ------------------------------------------------------

class NoParticipants(AttnMemError):
    pass


class OutOfBoundsFixation(AttnMemError):
    pass


class AllBelowThreshold(AttnMemError):
    pass


class NotNormalized(AttnMemError):
    pass


# --- metrics ------------------------------------------------------------

class DegenerateFixations(AttnMemError):
    pass


class ZeroVariance(AttnMemError):
    pass


class EmptyMap(AttnMemError):
    pass


class EmptyPool(AttnMemError):
    pass


class TooFew(AttnMemError):
    pass


class EmptyBin(AttnMemError):
    pass


# --- analysis -----------------------------------------------------------

class RasterMismatch(AttnMemError):
    pass


class UnknownLabelId(AttnMemError):
    pass


class MixedT(AttnMemError):
    pass


class DimMismatch(AttnMemError):
    pass


class LabelAbsent(AttnMemError):
    pass


# --- study --------------------------------------------------------------

class TooFewPoints(AttnMemError):
    pass


class InsufficientVideos(AttnMemError):
    pass


class ConstraintUnsatisfiable(AttnMemError):
    def __init__(self, attempts):
        super().__init__(f"no valid sequence found after {attempts} attempts")
        self.attempts = attempts
