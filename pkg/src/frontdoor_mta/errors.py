"""Exception hierarchy shared by every frontdoor_mta module."""

from typing import Optional


class FrontdoorMtaError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FrontdoorMtaError, ValueError):
    """A configuration value violates its documented range or invariant."""


class CapabilityError(FrontdoorMtaError, RuntimeError):
    """The request is valid but exceeds what the implementation can compute."""


class ContractViolation(FrontdoorMtaError, ValueError):
    """A caller broke a precondition (shape, index, normalization, tape structure)."""


class NumericError(FrontdoorMtaError, ArithmeticError):
    """A non-finite value reached a computation that requires finite input."""


class VocabularyError(FrontdoorMtaError, KeyError):
    """A cluster id or proxy bin falls outside the model vocabulary."""


class PositivityError(FrontdoorMtaError, ValueError):
    """A support cell needed by an adjustment formula has no data."""

    def __init__(self, message: str, cell: Optional[tuple] = None):
        super().__init__(message)
        self.cell = cell


class DegenerateBatchError(FrontdoorMtaError, ValueError):
    """A contrastive batch lacks in-batch negatives."""


class DegenerateStratificationError(FrontdoorMtaError, ValueError):
    """Too few units to form the requested propensity buckets."""


class UndefinedMetricError(FrontdoorMtaError, ValueError):
    """A metric is undefined on the given input (single class, zero mass)."""


class TrainingAbortedError(FrontdoorMtaError, RuntimeError):
    """Training hit a non-finite loss; a diagnostic snapshot was written."""

    def __init__(self, message: str, snapshot_path: Optional[str] = None):
        super().__init__(message)
        self.snapshot_path = snapshot_path


class DataError(FrontdoorMtaError, IOError):
    """A required artifact is missing, unreadable or belongs to another config."""


class PipelineStageError(FrontdoorMtaError, RuntimeError):
    """A multi-stage evaluation pipeline failed; names the failing stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"Stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
