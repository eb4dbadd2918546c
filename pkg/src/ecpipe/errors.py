"""Exception hierarchy shared across the pipeline.

Two broad families map onto CLI exit codes: ``ValidationError`` (bad
configuration or malformed inputs, exit 2) and ``DataError`` (inputs that are
well-formed but unusable, exit 3).
"""


class EcpipeError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(EcpipeError):
    """Configuration or input fails validation (CLI exit code 2)."""


class DataError(EcpipeError):
    """Data is missing or unusable (CLI exit code 3)."""


# --- price series / labels ---

class MissingPrice(DataError):
    """A required closing price is not available."""


class NoNeighbor(MissingPrice):
    """No trading day exists on the requested side within the allowed gap."""


class InvalidTau(ValidationError):
    pass


class InvalidK(ValidationError):
    pass


# --- corpus ---

class FileUnreadable(DataError):
    pass


class UnknownSector(ValidationError):
    pass


# --- sentiment lexicon ---

class LexiconParseError(ValidationError):
    """Lexicon file is malformed; message carries the offending line number."""


class DuplicateCategory(LexiconParseError):
    pass


# --- text graphs ---

class EmptyDocument(DataError):
    pass


class DimensionMismatch(ValidationError):
    pass


# --- neural ---

class ShapeMismatch(ValidationError):
    pass


class EmptyGraph(DataError):
    pass


class NonFiniteLoss(EcpipeError):
    """Training produced a NaN or infinite loss; message carries diagnostics."""


# --- document embeddings ---

class EmptyVocab(DataError):
    pass


# --- classifiers ---

class DegenerateLabels(DataError):
    """Only one class present; a discriminative fit is impossible."""


class EmptyInput(ValidationError):
    pass


# --- econometrics ---

class RankDeficient(DataError):
    """Design matrix is not full rank; message lists offending columns."""


class Separation(DataError):
    """Perfect separation: coefficients diverge under maximum likelihood."""


class NonConvergence(EcpipeError):
    pass


# --- harness ---

class InsufficientData(DataError):
    pass
