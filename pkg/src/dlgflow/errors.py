"""Exception hierarchy shared across the package.

Every domain failure derives from DlgflowError so callers (CLI, HTTP layer)
can distinguish domain errors from genuine bugs.
"""

from __future__ import annotations


class DlgflowError(Exception):
    """Base class for all domain errors."""

    code = "Error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


# flow documents

class FlowSyntaxError(DlgflowError):
    code = "SyntaxError"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message, line=line, column=column)
        self.line = line
        self.column = column


class FlowSchemaError(DlgflowError):
    code = "SchemaError"


class FlowReferenceError(DlgflowError):
    code = "ReferenceError"


class InvalidFlowError(DlgflowError):
    code = "InvalidFlow"


# compilation

class WalkExplosionError(DlgflowError):
    code = "WalkExplosion"


class NoEndReachableError(DlgflowError):
    code = "NoEndReachable"


class InconsistentDialogsError(DlgflowError):
    code = "InconsistentDialogs"


# entity module

class UnknownEntityError(DlgflowError):
    code = "UnknownEntity"


class MissingEntityError(DlgflowError):
    code = "MissingEntity"


# policy engine

class EmptyCorpusError(DlgflowError):
    code = "EmptyCorpus"


class NonFiniteActivationError(DlgflowError):
    code = "NonFiniteActivation"


class EmptyMaskError(DlgflowError):
    code = "EmptyMask"


class ActionLoopError(DlgflowError):
    code = "ActionLoop"


class LabelOutOfRangeError(DlgflowError):
    code = "LabelOutOfRange"


class DivergedError(DlgflowError):
    code = "Diverged"


class BadMagicError(DlgflowError):
    code = "BadMagic"


class DimMismatchError(DlgflowError):
    code = "DimMismatch"


class TruncatedFileError(DlgflowError):
    code = "TruncatedFile"


# teaching service

class UnknownLogError(DlgflowError):
    code = "UnknownLog"


class InvalidTurnError(DlgflowError):
    code = "InvalidTurn"


class UnknownTemplateError(DlgflowError):
    code = "UnknownTemplate"


class ConflictingCorrectionError(DlgflowError):
    code = "ConflictingCorrection"


class RetrainInProgressError(DlgflowError):
    code = "RetrainInProgress"


class TrainingFailedError(DlgflowError):
    code = "TrainingFailed"


# regression tester

class TranscriptMismatchError(DlgflowError):
    code = "TranscriptMismatch"


class DuplicateRatingError(DlgflowError):
    code = "DuplicateRating"
