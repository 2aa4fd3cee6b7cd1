"""Exception hierarchy shared across the pipeline.

DataError covers malformed or unusable inputs (exit code 2 from the CLI),
NumericalError covers solver/convergence failures (exit code 3).
"""


class PipelineError(Exception):
    exit_code = 2


class DataError(PipelineError):
    exit_code = 2


class UnsupportedCodecError(DataError):
    """WAV container holds an encoding outside 8/16/24/32-bit PCM or float32."""


class EmptyStreamError(DataError):
    """WAV data chunk contains zero samples."""


class SilentRecordingError(DataError):
    """Integrated loudness is -inf; gain normalization is undefined."""


class ShortRecordingError(DataError):
    """Recording shorter than the minimum the operation requires."""


class ManifestError(DataError):
    """Manifest/prediction file malformed: bad columns, duplicate or missing ids."""


class ModelFormatError(DataError):
    """Persisted model file has a wrong magic, schema, or feature-table version."""


class NumericalError(PipelineError):
    exit_code = 3


class ConvergenceError(NumericalError):
    """Iterative solver hit its cap without reaching tolerance."""


class ShortRecordingWarning(UserWarning):
    """Recording shorter than 1 s: framing yields no frames."""
