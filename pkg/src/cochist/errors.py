"""Exception types raised across the package."""


class CocError(Exception):
    """Base class for all package errors."""


class DecreasingInput(CocError, ValueError):
    pass


class TotalMismatch(CocError, ValueError):
    pass


class InfeasibleBounds(CocError, ValueError):
    pass


class InfeasibleTotal(CocError, ValueError):
    pass


class InfeasibleAllocation(CocError, ValueError):
    pass


class NonPositiveLevels(CocError, ValueError):
    pass


class NonPositiveVariance(CocError, ValueError):
    pass


class EmptyHistogram(CocError, ValueError):
    pass


class StructureError(CocError, ValueError):
    pass


class DegenerateRatio(CocError, ValueError):
    pass


class DataError(CocError):
    """Problem with an input file; carries the offending line when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class MissingGroup(DataError):
    pass


class MissingRegion(DataError):
    pass


class DuplicateId(DataError):
    pass


class MalformedRow(DataError):
    pass
