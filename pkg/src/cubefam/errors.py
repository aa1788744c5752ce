"""Exception taxonomy shared across the package.

Each class maps to one CLI exit code (see cli.EXIT_CODES): parse errors,
precondition violations, exhausted search budgets and certification
failures are distinct, so callers never have to guess which contract
broke.
"""


class CubefamError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CubefamError, ValueError):
    """A family/poset/report file or literal does not parse."""


class PreconditionError(CubefamError, ValueError):
    """An operation was called outside its stated domain."""


class SearchBudgetExceeded(CubefamError, RuntimeError):
    """A backtracking search hit its node budget before completing.

    Deliberately distinct from "absent": the search result is unknown.
    """

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes


class CertificationError(CubefamError, AssertionError):
    """An internally produced object failed its own re-verification.

    This always indicates an implementation bug, never a data error, and
    therefore derives from AssertionError on purpose.
    """
