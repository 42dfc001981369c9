"""Exception types shared across the package."""


class MvetError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MvetError, ValueError):
    pass


class AllMasked(MvetError, ValueError):
    pass


class AllViewsMissing(AllMasked):
    pass


class NonFiniteFunctionValue(MvetError, ArithmeticError):
    pass


class DomainError(MvetError, ArithmeticError):
    pass


class TraceMismatch(MvetError, ValueError):
    pass


class ShapeMismatch(MvetError, ValueError):
    pass


class ConfigInvalid(MvetError, ValueError):
    def __init__(self, key, reason):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason


class ParseError(MvetError, ValueError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DimMismatch(ParseError):
    pass


class UnknownType(ParseError):
    pass


class DuplicateToken(ParseError):
    pass


class EmptyDataset(MvetError, ValueError):
    pass


class EmptyStratumViolation(EmptyDataset):
    pass


class EmptySplit(MvetError, ValueError):
    pass


class EmptyName(MvetError, ValueError):
    pass


class EmptyDescription(MvetError, ValueError):
    pass


class EmptyCorpus(MvetError, ValueError):
    pass


class SourceMissing(MvetError, FileNotFoundError):
    pass


class SpecMismatch(MvetError, ValueError):
    pass


class ViewUnknown(MvetError, KeyError):
    pass


class NoExamples(MvetError, ValueError):
    pass
