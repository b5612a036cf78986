# errors.py

class CraicError(Exception):
    """Base class for every error the toolkit reports."""

    code = "CraicError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class UnterminatedLiteral(CraicError):
    code = "UnterminatedLiteral"


class UnterminatedComment(CraicError):
    code = "UnterminatedComment"


class BraceImbalance(CraicError):
    code = "BraceImbalance"


class EmptyCorpus(CraicError):
    code = "EmptyCorpus"


class InsufficientPairs(CraicError):
    code = "InsufficientPairs"


class EmptyStream(CraicError):
    code = "EmptyStream"


class NonFiniteState(CraicError):
    code = "NonFiniteState"


class DivergenceDetected(CraicError):
    code = "DivergenceDetected"


class ZeroLength(CraicError):
    code = "ZeroLength"


class VocabMismatch(CraicError):
    code = "VocabMismatch"


class UnknownPairId(CraicError):
    code = "UnknownPairId"


class MissingArtifact(CraicError):
    code = "MissingArtifact"


class ConfigInvalid(CraicError):
    code = "ConfigInvalid"


class StaleArtifact(CraicError):
    """An input artifact changed since the stage that produced it ran."""
    code = "StaleArtifact"


class WorkDirLocked(CraicError):
    code = "WorkDirLocked"
