"""Exception hierarchy shared by all odscale modules."""

from __future__ import annotations


class OdscaleError(Exception):
    """Base class for all errors raised by this package."""


# --- network construction -------------------------------------------------

class MissingReference(OdscaleError):
    """An id refers to an object that does not exist."""


class DuplicateId(OdscaleError):
    """An id occurs more than once where uniqueness is required."""


class InvalidSegment(OdscaleError):
    """Segment attributes violate their invariants."""


class InvalidPath(OdscaleError):
    """Path structure violates its invariants (e.g. empty)."""


class NegativeDemand(OdscaleError):
    """OD demand is negative."""


class InvalidAssignment(OdscaleError):
    """Assignment entry outside [0, 1] or referentially broken."""


# --- flow model -----------------------------------------------------------

class InvalidParams(OdscaleError):
    """Model parameters violate their invariants."""


class XOutOfBounds(OdscaleError):
    """Scaling factor outside the configured [x_lower, x_upper] interval."""


class NonFiniteResult(OdscaleError):
    """A model evaluation produced NaN or infinity."""


# --- estimation -----------------------------------------------------------

class UnknownPath(OdscaleError):
    """Ground truth references a path the network does not define."""


class EmptyGroundTruth(OdscaleError):
    """No usable ground-truth terms (no paths, or all weights zero)."""


class EmptyGrid(OdscaleError):
    """Grid specification yields no evaluation points."""


# --- metrics --------------------------------------------------------------

class EmptyCollection(OdscaleError):
    """Observation collection is empty."""


class ZeroGroundTruthSum(OdscaleError):
    """Ground-truth values sum to zero, so nRMSE is undefined."""


class ZeroBaseline(OdscaleError):
    """Baseline nRMSE is zero, so relative improvement is undefined."""


class ZeroBenchmark(OdscaleError):
    """Benchmark value is zero, so the gap metric is undefined."""


# --- scenario files -------------------------------------------------------

class ParseError(OdscaleError):
    """A file could not be parsed; carries file/line/column context."""

    def __init__(self, message: str, file: str, line: int | None = None,
                 column: str | None = None):
        where = file
        if line is not None:
            where += f":{line}"
        if column is not None:
            where += f" (column {column!r})"
        super().__init__(f"{where}: {message}")
        self.file = file
        self.line = line
        self.column = column


class SchemaError(OdscaleError):
    """Parsed content violates a schema constraint."""


class UnitError(OdscaleError):
    """A column carries an unrecognized unit tag."""


class InfeasibleSpec(OdscaleError):
    """Synthetic scenario specification cannot be realized."""


class NoSensors(OdscaleError):
    """Count validation requested but no sensor data is available."""
