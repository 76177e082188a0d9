"""Exception hierarchy shared by every module.

Two failure families matter to callers: problems with the input data
(malformed files, impossible requests against a dataset) and problems that
arise while executing a run (numerical blow-ups, shape violations inside the
compute graph).  The CLI maps ``DataError`` to exit code 2 and ``RunError``
to exit code 3; anything else is a bug and propagates as a plain traceback.
"""

from __future__ import annotations


class BenchmarkError(Exception):
    """Base class for all errors raised deliberately by this package."""


class DataError(BenchmarkError):
    """Input data or a request against it is invalid."""


class RunError(BenchmarkError):
    """A training or inference run failed while executing."""


class CheckpointRequired(BenchmarkError):
    """The request needs a trained checkpoint that was not supplied.

    This is a usage problem, not a data or run failure, so the CLI maps
    it to exit code 1 alongside argument errors.
    """


# --- data-side errors ---------------------------------------------------


class MalformedHeader(DataError):
    """A .ts header directive is missing, duplicated, or unparseable."""


class RaggedSample(DataError):
    """Series lengths or channel counts disagree within a dataset."""


class UnknownLabel(DataError):
    """A data row carries a label not declared in the header."""


class NonNumericValue(DataError):
    """A series value could not be parsed as a finite float."""


class SplitMismatch(DataError):
    """Train and test splits disagree on dimensions, length, or labels."""


class DatasetNotFound(DataError):
    """The requested dataset directory or split file does not exist."""


class CacheInvalid(DataError):
    """A binary dataset cache has a bad magic, version, or payload."""


class MissingSamplingFrequency(DataError):
    """A frequency-domain feature was requested without a sampling rate."""


class SeriesTooShort(DataError):
    """The series is too short for the requested transform."""


class DimensionMismatch(DataError):
    """An array has the wrong shape for the requested operation."""


class IsolatedNode(DataError):
    """An adjacency row is entirely zero, so attention cannot normalise."""


class EmptyEvaluationSet(DataError):
    """Accuracy was requested over zero samples."""


# --- run-side errors ----------------------------------------------------


class NonFiniteDetected(RunError):
    """A NaN or infinity appeared in a tensor operation's output."""


class NonFiniteLoss(RunError):
    """An epoch's mean training loss was NaN or infinite."""


class ShapeMismatch(RunError):
    """Tensor operands have incompatible shapes."""


class NotScalar(RunError):
    """backward() was called on a tensor that is not a scalar."""
