"""
Mixed-integer linear programming layer shared by every optimization model
"""

from .problem import (
    MilpProblem,
    Variable,
    Constraint,
    PiecewiseBlock,
    Relation,
    Sense,
    VarType,
    LinExpr,
    linearize_quadratic,
    quadratic_error_bound,
    add_complementarity,
    row_range,
)
from .engine import (
    SolverConfig,
    SolveStatus,
    MilpSolution,
    DEFAULT_SOLVER_CONFIG,
    solve_lp,
    solve_milp,
    solve,
    require_optimal,
)

__all__ = [
    "MilpProblem",
    "Variable",
    "Constraint",
    "PiecewiseBlock",
    "Relation",
    "Sense",
    "VarType",
    "LinExpr",
    "linearize_quadratic",
    "quadratic_error_bound",
    "add_complementarity",
    "row_range",
    "SolverConfig",
    "SolveStatus",
    "MilpSolution",
    "DEFAULT_SOLVER_CONFIG",
    "solve_lp",
    "solve_milp",
    "solve",
    "require_optimal",
]
