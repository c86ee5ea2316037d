from typing import List, Optional, Any


class PdscrException(Exception):
    """Generic exception for pdscr"""

    pass


class CaseValidationError(PdscrException):
    """The case file failed schema or cross-reference checks"""

    def __init__(self, message: str, diagnostics: Optional[List[Any]] = None):
        super().__init__(message)
        self.diagnostics: List[Any] = diagnostics or []


class SolverConfigError(PdscrException):
    """A problem could not be handed to the solver as configured"""

    pass


class InfeasibleError(PdscrException):
    """The optimization model has no feasible point"""

    pass


class SolverLimitError(PdscrException):
    """The solver stopped on a node/iteration/time limit before proving optimality"""

    pass


class StructuralError(PdscrException):
    """The network cannot carry a power flow (e.g. it is disconnected)"""

    pass


class FrozenVariableError(PdscrException):
    """An intraday dispatch changed a decision fixed by the day-ahead stage"""

    pass


class StageError(PdscrException):
    """A pipeline stage failed; the partial manifest is attached"""

    def __init__(self, message: str, manifest: Any = None):
        super().__init__(message)
        self.manifest = manifest
