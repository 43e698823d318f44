"""Error hierarchy. The CLI prints ``err.code`` verbatim on domain failures."""

from __future__ import annotations


class LWFSError(Exception):
    """Base class for every domain error raised by the engine."""

    @property
    def code(self) -> str:
        return type(self).__name__


# tensor-core
class DimensionMismatch(LWFSError):
    pass


class UnknownLabel(LWFSError):
    pass


class NotAProjector(LWFSError):
    pass


class NotUnitary(LWFSError):
    pass


class KrausIncomplete(LWFSError):
    pass


class BasisNotOrthonormal(LWFSError):
    pass


class NumericalIntegrityError(LWFSError):
    """A probability fell outside [-eps, 1 + eps]."""


class SizeGuardExceeded(LWFSError):
    pass


# scenario-model / compiler
class InvalidAgentIndex(LWFSError):
    pass


class PinnedSettingViolated(LWFSError):
    pass


class ValidationFailed(LWFSError):
    def __init__(self, report):
        self.report = report
        lines = "; ".join(f"{v.code}: {v.detail}" for v in report.violations)
        super().__init__(lines or "invalid scenario")


class MemoryReuseDetected(LWFSError):
    def __init__(self, indices):
        self.indices = tuple(indices)
        shown = ",".join(str(i) for i in self.indices)
        super().__init__(f"memories of agents {{{shown}}} are touched after being written")


# prediction-engine
class SettingOutcomeMismatch(LWFSError):
    pass


class ConditioningOnNullEvent(LWFSError):
    pass


class PriorSupportInsufficient(LWFSError):
    pass


class InvalidPrior(LWFSError):
    pass


class UnknownOutcome(LWFSError):
    pass


# epistemic-engine
class ChainError(LWFSError):
    pass


class SettingMismatch(ChainError):
    pass


class GivensNotEntailed(ChainError):
    pass


class NotChainable(ChainError):
    """Chaining needs two logical statements of polarity certain."""


class IndependenceNotVerified(LWFSError):
    pass


class BudgetExceeded(LWFSError):
    pass


# library
class WrongScenario(LWFSError):
    pass


class LibraryIntegrityError(LWFSError):
    pass


class UnknownScenario(LWFSError):
    pass


# formats
class ScenarioSyntaxError(LWFSError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")

    @property
    def code(self) -> str:
        return "SyntaxError"


class SchemaError(LWFSError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
