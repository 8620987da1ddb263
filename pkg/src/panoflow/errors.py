"""Exception hierarchy shared across the package."""


class PanoflowError(Exception):
    """Base class for all package errors."""


class ValidationError(PanoflowError, ValueError):
    """Invalid argument, malformed input file, or broken invariant."""


class FlowFormatError(ValidationError):
    """Flow-field file cannot be parsed."""


class FlowMagicError(FlowFormatError):
    """Flow-field file does not start with the expected magic tag."""


class FlowTruncatedError(FlowFormatError):
    """Flow-field file payload is shorter than its header declares."""


class FlowNonFiniteError(FlowFormatError):
    """Flow-field file contains NaN or infinite components."""


class MatrixFormatError(ValidationError):
    """Flow-matrix file cannot be parsed."""


class MatrixVersionError(MatrixFormatError):
    """Flow-matrix file was written by an unsupported format version."""


class MatrixTruncatedError(MatrixFormatError):
    """Flow-matrix file payload is shorter than its header declares."""


class MatrixChecksumError(MatrixFormatError):
    """Flow-matrix payload checksum does not match the header."""


class GridMatrixMismatchError(ValidationError):
    """FlowMatrix was built for a different window grid."""


class VideoMismatchError(ValidationError):
    """Frame sequence does not hash-match the manifest it is used with."""
