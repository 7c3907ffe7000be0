"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: invalid input is 1, an exhausted
budget is 2 and a broken internal invariant is 3.
"""


class WorkbenchError(Exception):
    exit_code = 1


class InputError(WorkbenchError, ValueError):
    """Malformed user input (files, terms, tables)."""


class ParseError(InputError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class BudgetExceeded(WorkbenchError):
    exit_code = 2


class PreconditionError(WorkbenchError, ValueError):
    pass


class InvariantViolation(WorkbenchError, AssertionError):
    exit_code = 3
