"""Exception types raised by mrect."""

from __future__ import annotations


class MrectError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(MrectError, ValueError):
    pass


class DegenerateSpan(MrectError, ValueError):
    """Vectors do not span a subspace of the requested dimension."""


class ZeroDirection(MrectError, ValueError):
    pass


class RepeatedVertex(MrectError, ValueError):
    pass


class EmptyBall(MrectError):
    """The queried closed ball carries no mass."""


class NoFatTuple(MrectError):
    """No fat, unfiltered tuple was found at some scale."""

    def __init__(self, message: str, *, delta: float | None = None, M: float | None = None,
                 radius: float | None = None):
        super().__init__(message)
        self.delta = delta
        self.M = M
        self.radius = radius


class NoValidBranch(MrectError):
    """Neither alternative of the balanced-balls dichotomy certified on the data."""

    def __init__(self, message: str, *, failures: dict | None = None):
        super().__init__(message)
        self.failures = failures or {}


class CsvFormatError(MrectError, ValueError):
    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.column = column
