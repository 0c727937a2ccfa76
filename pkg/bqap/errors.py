from typing import Optional


class BqapError(Exception):
    """Base class for every library error; carries the CLI exit code"""
    exit_code = 1


class ValidationError(BqapError, ValueError):
    pass


class ParseError(ValidationError):
    def __init__(
        self,
        message: str,
        expected: Optional[int] = None,
        found: Optional[int] = None,
        line: Optional[int] = None,
    ):
        self.expected = expected
        self.found = found
        self.line = line
        super().__init__(message)


class GenerationError(BqapError):
    pass


class InfeasibleError(BqapError):
    """A binary assignment breaks a row (g1) or column (g2) exactly-one constraint"""

    def __init__(self, constraint: str, index: int, total: int):
        self.constraint = constraint
        self.index = index
        self.total = total
        super().__init__(f"constraint {constraint}[{index}] sums to {total}, expected 1")


class CapacityError(BqapError):
    pass


class DegenerateFrontError(ValidationError):
    pass


class DegeneratePairError(ValidationError):
    pass


class BackendError(BqapError):
    pass


class IoError(BqapError):
    exit_code = 2
