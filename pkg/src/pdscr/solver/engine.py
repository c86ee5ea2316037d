"""
LP and MILP solves for MilpProblem

LP relaxations go through HiGHS (dual simplex) via scipy.optimize.linprog.
Binaries are handled by a best-first branch and bound in this module; larger
models can be handed to HiGHS' own MIP search via scipy.optimize.milp.
Problems with complementarity switches first try rounding the root relaxation.
"""

import os
import math
import heapq
from enum import Enum
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, List, Dict, Any

import numpy as np
from scipy.optimize import linprog, milp, LinearConstraint, Bounds  # type: ignore[import]

from .problem import MilpProblem, CompiledProblem
from ..exceptions import SolverConfigError, InfeasibleError, SolverLimitError
from ..log import logger
from ..utils import hash_text

METHODS = ("auto", "bnb", "highs")


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


# scipy's status codes (shared by linprog and milp)
_SCIPY_STATUS = {
    0: SolveStatus.OPTIMAL,
    1: SolveStatus.ITERATION_LIMIT,
    2: SolveStatus.INFEASIBLE,
    3: SolveStatus.UNBOUNDED,
    4: SolveStatus.ITERATION_LIMIT,
}


@dataclass(frozen=True)
class SolverConfig:
    """All tolerances and limits used by the solves"""

    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-6
    integrality_tol: float = 1e-6
    mip_gap: float = 1e-6
    max_binaries: int = 256
    node_limit: int = 20000
    method: str = "auto"
    # 'auto' runs the in-package branch and bound up to this many binaries
    bnb_auto_limit: int = 8
    time_limit: Optional[float] = None
    big_m_safety: float = 10.0
    pw_segments: int = 8
    dump_lp_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise SolverConfigError(f"unknown solve method '{self.method}', expected one of {METHODS}")

    def with_options(self, **kwargs: Any) -> "SolverConfig":
        return replace(self, **kwargs)


DEFAULT_SOLVER_CONFIG = SolverConfig()


@dataclass
class MilpSolution:
    status: SolveStatus
    values: np.ndarray
    objective: float
    # ∂objective/∂rhs per constraint, in the problem's own sense
    duals: Optional[np.ndarray] = None
    # reduced costs on the (lower, upper) variable bounds
    bound_duals: Optional[Tuple[np.ndarray, np.ndarray]] = None
    dual_objective: Optional[float] = None
    bound: Optional[float] = None
    nodes: int = 0
    branches: int = 0
    message: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL

    @property
    def has_values(self) -> bool:
        return self.values.size > 0 and bool(np.all(np.isfinite(self.values)))

    def value(self, var: int) -> float:
        return float(self.values[var])

    def take(self, index: np.ndarray) -> np.ndarray:
        """values for an integer index array of any shape"""
        return self.values[np.asarray(index, dtype=int)]


def _bounds_list(lower: np.ndarray, upper: np.ndarray) -> List[Tuple[Optional[float], Optional[float]]]:
    return [
        (None if math.isinf(lo) else float(lo), None if math.isinf(hi) else float(hi))
        for lo, hi in zip(lower, upper)
    ]


def _linprog(
    cp: CompiledProblem, lower: np.ndarray, upper: np.ndarray, config: SolverConfig
) -> Any:
    options: Dict[str, Any] = {
        "primal_feasibility_tolerance": config.feasibility_tol,
        "dual_feasibility_tolerance": config.feasibility_tol,
        "presolve": True,
    }
    if config.time_limit is not None:
        options["time_limit"] = config.time_limit

    def run() -> Any:
        return linprog(
            cp.c,
            A_ub=cp.a_ub,
            b_ub=cp.b_ub if cp.a_ub is not None else None,
            A_eq=cp.a_eq,
            b_eq=cp.b_eq if cp.a_eq is not None else None,
            bounds=_bounds_list(lower, upper),
            method="highs-ds",
            options=options,
        )

    res = run()
    if int(res.status) == 4:
        # presolve can stop at "unbounded or infeasible"; the full simplex tells them apart
        options["presolve"] = False
        res = run()
    return res


def _dump(problem: MilpProblem, config: SolverConfig) -> None:
    if config.dump_lp_dir is None:
        return
    text = problem.to_lp_text()
    os.makedirs(config.dump_lp_dir, exist_ok=True)
    target = os.path.join(config.dump_lp_dir, f"{problem.name}-{hash_text(text)[:10]}.lp")
    with open(target, "w") as f:
        f.write(text)


def _lp_solution(
    problem: MilpProblem, cp: CompiledProblem, res: Any, lower: np.ndarray, upper: np.ndarray
) -> MilpSolution:
    status = _SCIPY_STATUS.get(int(res.status), SolveStatus.ITERATION_LIMIT)
    n = len(problem.variables)
    if status != SolveStatus.OPTIMAL or res.x is None:
        return MilpSolution(status, np.full(n, np.nan), math.nan, message=str(res.message))
    x = np.asarray(res.x, dtype=float)
    objective = cp.flip * (float(res.fun) + cp.constant)

    duals = np.zeros(len(problem.constraints))
    dual_obj = cp.constant
    if cp.a_ub is not None:
        marg = np.asarray(res.ineqlin.marginals, dtype=float)
        for (k, sign), m in zip(cp.ub_rows, marg):
            duals[k] = cp.flip * sign * m
        dual_obj += float(marg @ cp.b_ub)
    if cp.a_eq is not None:
        marg = np.asarray(res.eqlin.marginals, dtype=float)
        for k, m in zip(cp.eq_rows, marg):
            duals[k] = cp.flip * m
        dual_obj += float(marg @ cp.b_eq)
    lo_m = np.asarray(res.lower.marginals, dtype=float)
    hi_m = np.asarray(res.upper.marginals, dtype=float)
    finite_lo = np.isfinite(lower)
    finite_hi = np.isfinite(upper)
    dual_obj += float(lo_m[finite_lo] @ lower[finite_lo]) + float(hi_m[finite_hi] @ upper[finite_hi])
    return MilpSolution(
        status,
        x,
        objective,
        duals=duals,
        bound_duals=(cp.flip * lo_m, cp.flip * hi_m),
        dual_objective=cp.flip * dual_obj,
        bound=objective,
        nodes=1,
        message=str(res.message),
    )


def solve_lp(problem: MilpProblem, config: SolverConfig = DEFAULT_SOLVER_CONFIG) -> MilpSolution:
    """
    Solves a problem without binaries; infeasible/unbounded come back as a status

    >>> p = MilpProblem("bound")
    >>> x = p.add_variable("x", 3.0, 10.0)
    >>> p.set_objective({x: 1.0})
    >>> sol = solve_lp(p)
    >>> sol.status.value, round(sol.objective, 9)
    ('optimal', 3.0)
    """
    if problem.binaries:
        raise SolverConfigError(f"'{problem.name}' has binaries, use solve_milp")
    problem.validate()
    _dump(problem, config)
    cp = problem.compile()
    res = _linprog(cp, cp.lower, cp.upper, config)
    sol = _lp_solution(problem, cp, res, cp.lower, cp.upper)
    logger.debug(f"LP '{problem.name}' ({len(problem)} vars, {len(problem.constraints)} rows): {sol.status.value}")
    return sol


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixings: Tuple[Tuple[int, int], ...] = field(compare=False)
    x: np.ndarray = field(compare=False)


def _most_fractional(x: np.ndarray, binaries: List[int], tol: float) -> Optional[int]:
    best: Optional[int] = None
    best_dist = math.inf
    for i in binaries:
        frac = x[i] - math.floor(x[i])
        if min(frac, 1.0 - frac) <= tol:
            continue
        dist = abs(frac - 0.5)
        # strict comparison keeps the lowest index on ties
        if dist < best_dist - 1e-12:
            best, best_dist = i, dist
    return best


def _branch_and_bound(
    problem: MilpProblem, cp: CompiledProblem, config: SolverConfig
) -> Tuple[SolveStatus, Optional[np.ndarray], float, float, int, int]:
    binaries = problem.binaries
    seq = 0
    nodes = 0
    branches = 0

    def relax(fixings: Tuple[Tuple[int, int], ...]) -> Any:
        lower = cp.lower.copy()
        upper = cp.upper.copy()
        for i, v in fixings:
            lower[i] = upper[i] = float(v)
        return _linprog(cp, lower, upper, config)

    root = relax(())
    nodes += 1
    root_status = _SCIPY_STATUS.get(int(root.status), SolveStatus.ITERATION_LIMIT)
    if root_status != SolveStatus.OPTIMAL:
        return root_status, None, math.inf, math.inf, nodes, branches

    heap: List[_Node] = [_Node(float(root.fun), seq, (), np.asarray(root.x))]
    incumbent: Optional[np.ndarray] = None
    best = math.inf

    def gap_reached(bound: float) -> bool:
        return bound >= best - config.mip_gap * max(1.0, abs(best))

    while heap:
        if nodes >= config.node_limit:
            bound = heap[0].bound
            logger.warning(
                f"'{problem.name}': node limit {config.node_limit} reached (incumbent {best}, bound {bound})"
            )
            return SolveStatus.ITERATION_LIMIT, incumbent, best, bound, nodes, branches
        node = heapq.heappop(heap)
        if incumbent is not None and gap_reached(node.bound):
            # best-first: every remaining node is at least as bad
            heap.clear()
            break
        var = _most_fractional(node.x, binaries, config.integrality_tol)
        if var is None:
            if node.bound < best:
                best = node.bound
                incumbent = node.x.copy()
            continue
        branches += 1
        for value in (0, 1):
            child = node.fixings + ((var, value),)
            res = relax(child)
            nodes += 1
            code = int(res.status)
            if code == 2:
                continue
            if code != 0:
                # the subtree is unexplored, so the incumbent is not proven optimal
                bound = min([node.bound] + [n.bound for n in heap])
                logger.warning(f"'{problem.name}': node LP stopped with status {code} ({res.message})")
                return SolveStatus.ITERATION_LIMIT, incumbent, best, bound, nodes, branches
            obj = float(res.fun)
            if incumbent is not None and gap_reached(obj):
                continue
            seq += 1
            heapq.heappush(heap, _Node(obj, seq, child, np.asarray(res.x)))

    if incumbent is None:
        return SolveStatus.INFEASIBLE, None, math.inf, math.inf, nodes, branches
    return SolveStatus.OPTIMAL, incumbent, best, best, nodes, branches


def _highs_milp(
    cp: CompiledProblem, config: SolverConfig
) -> Tuple[SolveStatus, Optional[np.ndarray], float, float, int]:
    constraints = []
    if cp.a_ub is not None:
        constraints.append(LinearConstraint(cp.a_ub, -np.inf, cp.b_ub))
    if cp.a_eq is not None:
        constraints.append(LinearConstraint(cp.a_eq, cp.b_eq, cp.b_eq))
    options: Dict[str, Any] = {
        "mip_rel_gap": config.mip_gap,
        "node_limit": config.node_limit,
        "presolve": True,
    }
    if config.time_limit is not None:
        options["time_limit"] = config.time_limit
    res = milp(
        cp.c,
        constraints=constraints,
        integrality=cp.integrality,
        bounds=Bounds(cp.lower, cp.upper),
        options=options,
    )
    status = _SCIPY_STATUS.get(int(res.status), SolveStatus.ITERATION_LIMIT)
    x = None if res.x is None else np.asarray(res.x, dtype=float)
    fun = math.inf if res.fun is None else float(res.fun)
    dual_bound = getattr(res, "mip_dual_bound", None)
    bound = fun if dual_bound is None else float(dual_bound)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if status == SolveStatus.OPTIMAL and x is None:
        status = SolveStatus.INFEASIBLE
    return status, x, fun, bound, nodes


def _polish(
    problem: MilpProblem, x: np.ndarray, config: SolverConfig
) -> Optional[MilpSolution]:
    """Re-solves the LP with every binary fixed at its rounded value"""
    fixed = problem.copy()
    for i in problem.binaries:
        fixed.fix(i, float(round(x[i])))
    fixed.name = f"{problem.name}-fixed"
    cp = fixed.compile()
    res = _linprog(cp, cp.lower, cp.upper, config)
    sol = _lp_solution(fixed, cp, res, cp.lower, cp.upper)
    return sol if sol.optimal else None


def _round_switches(
    problem: MilpProblem, cp: CompiledProblem, config: SolverConfig
) -> Optional[MilpSolution]:
    """
    Rounds the root relaxation (a complementarity switch follows whether its
    multiplier is positive) and keeps the fixed-binary LP if it closes the gap
    """
    root = _linprog(cp, cp.lower, cp.upper, config)
    if int(root.status) != 0:
        return None
    x = np.asarray(root.x, dtype=float).copy()
    scale = max([1.0] + [abs(x[m]) for m in problem.switches.values()])
    for i in problem.binaries:
        if i in problem.switches:
            x[i] = 1.0 if x[problem.switches[i]] > config.feasibility_tol * scale else 0.0
        else:
            x[i] = float(round(x[i]))
    polished = _polish(problem, x, config)
    if polished is None:
        return None
    bound = float(root.fun)
    found = cp.flip * polished.objective - cp.constant
    if found > bound + config.mip_gap * max(1.0, abs(bound)):
        return None
    polished.bound = cp.flip * (bound + cp.constant)
    polished.nodes = 1
    polished.branches = 0
    polished.extra["method"] = "rounding"
    return polished


def solve_milp(problem: MilpProblem, config: SolverConfig = DEFAULT_SOLVER_CONFIG) -> MilpSolution:
    """
    Solves a problem with binaries. Reported continuous values and duals come
    from a final LP with the binaries fixed.

    >>> p = MilpProblem("one-binary")
    >>> x = p.add_binary("x")
    >>> p.set_objective({x: -1.0})
    >>> sol = solve_milp(p)
    >>> sol.status.value, sol.value(x), sol.objective
    ('optimal', 1.0, -1.0)
    """
    binaries = problem.binaries
    if not binaries:
        return solve_lp(problem, config)
    if len(binaries) > config.max_binaries:
        raise SolverConfigError(
            f"'{problem.name}' has {len(binaries)} binaries, above the configured cap of {config.max_binaries}"
        )
    problem.validate()
    _dump(problem, config)
    cp = problem.compile()
    if problem.switches:
        rounded = _round_switches(problem, cp, config)
        if rounded is not None:
            for i in binaries:
                rounded.values[i] = float(round(rounded.values[i]))
            logger.debug(f"MILP '{problem.name}': root rounding closed the gap")
            return rounded
    method = config.method
    if method == "auto":
        method = "bnb" if len(binaries) <= config.bnb_auto_limit else "highs"

    branches = 0
    if method == "bnb":
        status, x, fun, bound, nodes, branches = _branch_and_bound(problem, cp, config)
    else:
        status, x, fun, bound, nodes = _highs_milp(cp, config)
    logger.debug(
        f"MILP '{problem.name}' via {method}: {status.value}, {len(binaries)} binaries, {nodes} nodes"
    )

    n = len(problem.variables)
    if x is None:
        if status == SolveStatus.OPTIMAL:
            status = SolveStatus.INFEASIBLE
        return MilpSolution(status, np.full(n, np.nan), math.nan, nodes=nodes, branches=branches)

    polished = _polish(problem, x, config)
    if polished is None:
        logger.warning(f"'{problem.name}': fixed-binary LP did not solve, keeping raw MIP values")
        values = x.copy()
        for i in binaries:
            values[i] = float(round(values[i]))
        sol = MilpSolution(status, values, problem.evaluate_objective(values))
    else:
        sol = polished
        sol.status = status
    for i in binaries:
        sol.values[i] = float(round(sol.values[i]))
    sol.bound = cp.flip * (bound + cp.constant) if math.isfinite(bound) else None
    sol.nodes = nodes
    sol.branches = branches
    sol.extra["method"] = method
    return sol


def solve(problem: MilpProblem, config: SolverConfig = DEFAULT_SOLVER_CONFIG) -> MilpSolution:
    """Dispatches on whether the problem has binaries"""
    if problem.binaries:
        return solve_milp(problem, config)
    return solve_lp(problem, config)


def require_optimal(sol: MilpSolution, what: str) -> MilpSolution:
    """Turns a non-optimal status into the matching exception"""
    if sol.status == SolveStatus.OPTIMAL:
        return sol
    if sol.status == SolveStatus.ITERATION_LIMIT:
        raise SolverLimitError(f"{what}: solver stopped on a limit ({sol.message or 'node limit'})")
    raise InfeasibleError(f"{what}: model is {sol.status.value}")
