"""
Domain exceptions.

`InputError` and its subclasses signal bad user input (CLI exit status 1);
`AnalysisError` and its subclasses signal a statistic that is undefined for
the data at hand.
"""
from .utils._types import Any, List, Sequence


class MetaReduceError(Exception):
    """
    Root of every domain error. Subclasses declare a `__desc__` template that is
    filled with the positional arguments given to the constructor.
    """
    __name__ = "MetaReduceError"  # type: ignore
    __desc__ = "{}"

    def __init__(self, *args: Any) -> None:
        self.message = self.__desc__.format(*args)
        super().__init__(self.message)

    def oneline(self) -> str:
        """Single-line form used for CLI diagnostics."""
        lines = self.message.splitlines() or [""]
        extra = f" (+{len(lines) - 1} more lines)" if len(lines) > 1 else ""
        return f"{self.__class__.__name__}: {lines[0]}{extra}"


class InputError(MetaReduceError):
    __name__ = "InputError"  # type: ignore


class AnalysisError(MetaReduceError):
    __name__ = "AnalysisError"  # type: ignore


# Input errors

class SchemaViolation(InputError):
    """
    Raised when an evaluation record stream fails to parse. Carries every
    row-numbered diagnostic.
    """
    __name__ = "SchemaViolation"  # type: ignore
    __desc__ = "{} rejected row(s) in {}:\n{}"

    def __init__(self, source: str, diagnostics: Sequence[str]) -> None:
        self.diagnostics: List[str] = list(diagnostics)
        super().__init__(len(self.diagnostics), source, "\n".join(f"- {d}" for d in self.diagnostics))


class DuplicateRecord(InputError):
    __name__ = "DuplicateRecord"  # type: ignore
    __desc__ = "Conflicting duplicate ok-record for {} (errors {} and {})."


class MixedFolds(InputError):
    __name__ = "MixedFolds"  # type: ignore
    __desc__ = "Base `{}` declares {} folds but row {} has fold_index {}."


class UnknownIdentifier(InputError):
    __name__ = "UnknownIdentifier"  # type: ignore
    __desc__ = "Unknown {} `{}`."


class MalformedLabel(InputError):
    __name__ = "MalformedLabel"  # type: ignore
    __desc__ = "Malformed strategy label `{}`: {}."


class RosterError(InputError):
    __name__ = "RosterError"  # type: ignore
    __desc__ = "Roster problem: {}."


class UnsupportedAlpha(InputError):
    __name__ = "UnsupportedAlpha"  # type: ignore
    __desc__ = "Unsupported alpha {}; expected one of {}."


# Analysis errors

class UndefinedCorrelation(AnalysisError):
    __name__ = "UndefinedCorrelation"  # type: ignore
    __desc__ = "Correlation is undefined: {}."


class UndefinedChallenge(AnalysisError):
    __name__ = "UndefinedChallenge"  # type: ignore
    __desc__ = "Skewness is undefined: {}."


class UnsolvableProfile(AnalysisError):
    __name__ = "UnsolvableProfile"  # type: ignore
    __desc__ = "Landmark profile of dataset `{}` is unsolvable: no landmarker was evaluated."


class DegeneratePriors(AnalysisError):
    __name__ = "DegeneratePriors"  # type: ignore
    __desc__ = "No usable prior landmark profile for dataset `{}`."


class UntestableSample(AnalysisError):
    __name__ = "UntestableSample"  # type: ignore
    __desc__ = "Sample cannot be tested: {}."


class MissingLandmarkResult(AnalysisError):
    __name__ = "MissingLandmarkResult"  # type: ignore
    __desc__ = "Strategy `{}` needs a landmark result for dataset `{}`."


class EmptyPool(AnalysisError):
    __name__ = "EmptyPool"  # type: ignore
    __desc__ = "Predictor pool is empty{}."
