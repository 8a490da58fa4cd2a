"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so every failure raised from library
code should derive from :class:`LmpcastError`.
"""


class LmpcastError(Exception):
    exit_code = 3


class CaseError(LmpcastError, ValueError):
    """Malformed case document or violated case invariant."""

    exit_code = 1


class DisconnectedNetworkError(CaseError):
    pass


class InfeasibleError(LmpcastError):
    exit_code = 2


class UnboundedError(LmpcastError):
    pass


class SolverError(LmpcastError):
    """Iteration limit or numerical breakdown inside the active-set solver."""


class DegenerateActiveSetError(LmpcastError):
    pass


class EmptyRegionError(LmpcastError):
    exit_code = 2


class BudgetExceededError(LmpcastError):
    pass
