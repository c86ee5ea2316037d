"""
Day-ahead dispatch: the utility sets per-slot tariffs and commits its fleet
while the industrial producer answers with its cheapest schedule.

The producer's answer enters as its optimality conditions (see pmp.emit_kkt),
which turns the leader/follower pair into one MILP. Thermal cost (J1) and
line loading (J2 = 1 − ASC) are traded off by an ε-constraint sweep on J2.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import SolverConfigError, InfeasibleError, SolverLimitError
from .grid import (
    UcVariables,
    build_uc_constraints,
    add_fuel_epigraphs,
    compute_asc,
    total_fuel,
    total_startup,
)
from .log import logger
from .model import GridCase, DayAheadSolution
from .pareto import non_dominated, pick_compromise as _pick_index
from .pmp import PmpVariables, KktBlock, add_pmp_primal, add_strong_duality, emit_kkt, solve_pmp
from .replay import replay_dayahead
from .solver import (
    MilpProblem,
    MilpSolution,
    Relation,
    LinExpr,
    SolverConfig,
    solve,
    require_optimal,
)

# $ per unit of J2 added to J1 in ε-points so that ties go to the safer dispatch
AUGMENTATION = 1.0
# relative slack when a lexicographic stage pins the previous optimum
LEX_TOL = 1e-6


@dataclass(frozen=True)
class PriceProgram:
    """
    Per-slot tariff picked from a tier set, all in $/MWh

    >>> PriceProgram((167.9, 82.74), (0, 1, 1)).prices().tolist()
    [167.9, 82.74, 82.74]
    """

    tiers: Tuple[float, ...]
    choice: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.tiers:
            raise SolverConfigError("a price program needs at least one tier")
        if any(t <= 0 for t in self.tiers):
            raise ValueError(f"price tiers must be positive: {self.tiers}")
        if any(not 0 <= k < len(self.tiers) for k in self.choice):
            raise ValueError(f"tier choice out of range: {self.choice}")

    def prices(self) -> np.ndarray:
        return np.asarray([self.tiers[k] for k in self.choice], dtype=float)

    @classmethod
    def from_solution(cls, tiers: Sequence[float], solution: DayAheadSolution) -> "PriceProgram":
        return cls(tuple(tiers), tuple(int(k) for k in solution.tiers))


@dataclass
class BilevelModel:
    """The single-level MILP plus where each part of it lives"""

    problem: MilpProblem
    case: GridCase
    tiers: Tuple[float, ...]
    uc: UcVariables
    pmp: PmpVariables
    kkt: Optional[KktBlock]
    tier_choice: Optional[np.ndarray]
    products: Optional[np.ndarray]
    j_pmp: int
    fuel: np.ndarray
    j1: LinExpr = field(default_factory=dict)

    def extract(self, sol: MilpSolution, epsilon: Optional[float] = None) -> DayAheadSolution:
        case = self.case
        status = self.uc.commitment(sol)
        power = sol.take(self.uc.power)
        power[status < 0.5] = 0.0
        wind = sol.take(self.uc.wind)
        flows = sol.take(self.uc.flow)
        if self.tier_choice is None:
            tiers = np.zeros(case.horizon, dtype=int)
        else:
            tiers = np.argmax(sol.take(self.tier_choice), axis=1)
        prices = np.asarray([self.tiers[k] for k in tiers], dtype=float)
        schedule = self.pmp.schedule(sol)
        j1 = float(total_fuel(case, power, status).sum() + total_startup(case, status).sum())
        j2 = 1.0 - compute_asc(flows, case.network.ratings()) if flows.size else 0.0
        reserve = (
            sol.take(self.uc.reserve) if self.uc.reserve is not None else np.zeros_like(power)
        )
        return DayAheadSolution(
            status=status,
            power=power,
            reserve=reserve,
            wind=wind,
            prices=prices,
            tiers=tiers,
            theta=sol.take(self.uc.theta),
            flows=flows,
            pmp=schedule,
            j1=j1,
            j2=max(j2, 0.0),
            j_pmp=schedule.bill(case.pmp, prices),
            curtailment=float((case.forecast() - wind).sum()),
            epsilon=epsilon,
        )


def _j1_expression(uc: UcVariables, fuel: np.ndarray) -> LinExpr:
    expr: LinExpr = {int(v): 1.0 for v in fuel.ravel()}
    if uc.start_cost is not None:
        for v in uc.start_cost.ravel():
            expr[int(v)] = 1.0
    return expr


def build_bilevel(case: GridCase, tiers: Optional[Sequence[float]] = None) -> BilevelModel:
    """
    Leader (commitment, dispatch, reserves, wind, tariff choice) with the
    producer's schedule constrained to be optimal for the chosen tariff.
    The objective is left at J1; callers set caps and weights.
    """
    tiers = tuple(case.dr.price_tiers if tiers is None else tiers)
    if not tiers:
        raise SolverConfigError("the price program declares no tiers")
    if any(t <= 0 for t in tiers):
        raise SolverConfigError(f"price tiers must be positive: {tiers}")
    case.pmp.check_capacity()
    T, K = case.horizon, len(tiers)
    problem = MilpProblem(f"dayahead-{case.name}")
    system = case.pmp
    pmp_vars, _ = add_pmp_primal(problem, system)
    demand = [pmp_vars.demand_expr(system, t) for t in range(T)]
    d_max = system.max_load_mw()

    choice: Optional[np.ndarray] = None
    products: Optional[np.ndarray] = None
    price_exprs: List[Tuple[LinExpr, float]] = []
    j_pmp = problem.add_variable("j_pmp", -np.inf, np.inf)
    bill: LinExpr = {j_pmp: 1.0}
    if K == 1:
        for t in range(T):
            price_exprs.append(({}, float(tiers[0])))
            for v, c in demand[t].items():
                bill[v] = bill.get(v, 0.0) - tiers[0] * c
    else:
        choice = np.array([[problem.add_binary(f"tier[{t},{k}]") for k in range(K)] for t in range(T)], dtype=int)
        products = np.zeros((T, K), dtype=int)
        for t in range(T):
            problem.add_constraint({int(v): 1.0 for v in choice[t]}, Relation.EQ, 1.0, f"onetier[{t}]")
            price_exprs.append(({int(choice[t, k]): float(tiers[k]) for k in range(K)}, 0.0))
            for k in range(K):
                # q = w·D, exact for binary w and 0 ≤ D ≤ D_max
                q = problem.add_variable(f"q[{t},{k}]", 0.0, d_max)
                products[t, k] = q
                w = int(choice[t, k])
                problem.add_constraint({q: 1.0, w: -d_max}, Relation.LE, 0.0, f"q_w[{t},{k}]")
                le: LinExpr = {q: 1.0}
                ge: LinExpr = {q: 1.0, w: -d_max}
                for v, c in demand[t].items():
                    le[v] = le.get(v, 0.0) - c
                    ge[v] = ge.get(v, 0.0) - c
                problem.add_constraint(le, Relation.LE, 0.0, f"q_d[{t},{k}]")
                problem.add_constraint(ge, Relation.GE, -d_max, f"q_dw[{t},{k}]")
                bill[q] = -float(tiers[k])
    problem.add_constraint(bill, Relation.EQ, system.fixed_cost, "bill")

    kkt = emit_kkt(
        problem,
        system,
        pmp_vars,
        price_exprs,
        max_price=max(tiers),
        safety=case.solver.big_m_safety,
    )
    # j_pmp − fixed charge is Σ α_t·D_t, exact once the tier binaries are integral
    add_strong_duality(problem, kkt, {j_pmp: 1.0}, -system.fixed_cost)
    uc = build_uc_constraints(problem, case, case.forecast(), pmp_demand=demand, security_cap=1.0)
    fuel = add_fuel_epigraphs(problem, case, uc, case.solver.pw_segments)
    j1 = _j1_expression(uc, fuel)
    problem.set_objective(j1)
    logger.debug(
        f"bilevel model '{problem.name}': {len(problem.variables)} variables, "
        f"{len(problem.constraints)} rows, {len(problem.binaries)} binaries"
    )
    return BilevelModel(problem, case, tiers, uc, pmp_vars, kkt, choice, products, j_pmp, fuel, j1)


def _solve_model(
    model: BilevelModel,
    minimize: str,
    config: SolverConfig,
    j2_cap: Optional[float] = None,
    j1_cap: Optional[float] = None,
    augment: float = 0.0,
) -> MilpSolution:
    problem = model.problem.copy()
    security = model.uc.security
    if j2_cap is not None:
        problem.set_bounds(security, 0.0, max(0.0, min(1.0, j2_cap)))
    if j1_cap is not None:
        problem.add_constraint(model.j1, Relation.LE, j1_cap, "j1_cap")
    if minimize == "j1":
        objective = dict(model.j1)
        if augment:
            objective[security] = objective.get(security, 0.0) + augment
    elif minimize == "j2":
        objective = {security: 1.0}
    else:
        raise ValueError(f"unknown objective '{minimize}'")
    problem.set_objective(objective)
    return require_optimal(solve(problem, config), f"day-ahead ({minimize}, ε={j2_cap})")


def _lexicographic(model: BilevelModel, first: str, config: SolverConfig) -> MilpSolution:
    """Optimizes one objective, then the other with the first pinned at its optimum"""
    sol = _solve_model(model, first, config)
    if first == "j1":
        j1_star = sum(c * sol.value(v) for v, c in model.j1.items())
        return _solve_model(model, "j2", config, j1_cap=j1_star + LEX_TOL * (1.0 + abs(j1_star)))
    j2_star = sol.value(model.uc.security)
    return _solve_model(model, "j1", config, j2_cap=j2_star + LEX_TOL)


def solve_dayahead(
    case: GridCase,
    epsilon: Optional[float] = None,
    config: Optional[SolverConfig] = None,
    model: Optional[BilevelModel] = None,
) -> DayAheadSolution:
    """
    One bilevel solve: minimum J1 subject to J2 ≤ ε (no cap when ε is None).
    Raises InfeasibleError/SolverLimitError.
    """
    config = config or case.solver
    model = model or build_bilevel(case)
    if epsilon is None:
        sol = _lexicographic(model, "j1", config)
    else:
        sol = _solve_model(model, "j1", config, j2_cap=epsilon, augment=AUGMENTATION)
    return model.extract(sol, epsilon)


@dataclass
class FrontPoint:
    j1: float
    j2: float
    curtailment: float
    solution: DayAheadSolution

    def to_dict(self, with_solution: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {"j1": self.j1, "j2": self.j2, "asc": 1.0 - self.j2, "curtailment": self.curtailment}
        if with_solution:
            data["solution"] = self.solution.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FrontPoint":
        return cls(
            float(data["j1"]), float(data["j2"]), float(data["curtailment"]), DayAheadSolution.from_dict(data["solution"])
        )


@dataclass
class ParetoFront:
    """Non-dominated (J1, J2) points sorted by J2 ascending, with the ε grid that produced them"""

    points: List[FrontPoint]
    epsilons: List[float] = field(default_factory=list)
    skipped: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def objectives(self) -> List[Tuple[float, float]]:
        return [(p.j1, p.j2) for p in self.points]

    def to_dict(self, with_solutions: bool = False) -> Dict[str, Any]:
        return {
            "points": [p.to_dict(with_solutions) for p in self.points],
            "epsilons": self.epsilons,
            "skipped": self.skipped,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ParetoFront":
        return cls(
            [FrontPoint.from_dict(p) for p in data["points"]],
            [float(e) for e in data["epsilons"]],
            [float(e) for e in data["skipped"]],
        )


def assemble_front(
    case: GridCase, solutions: Sequence[DayAheadSolution], epsilons: Sequence[float], skipped: Sequence[float]
) -> ParetoFront:
    """Drops points failing the replay check, then the dominated ones"""
    valid: List[DayAheadSolution] = []
    for s in solutions:
        violations = replay_dayahead(case, s)
        if violations:
            logger.error(f"ε={s.epsilon}: dispatch failed replay ({violations[0]}), point dropped")
            continue
        valid.append(s)
    objs = [(s.j1, s.j2) for s in valid]
    keep = non_dominated(objs, tol=1e-9)
    points = [FrontPoint(valid[i].j1, valid[i].j2, valid[i].curtailment, valid[i]) for i in keep]
    return ParetoFront(points, list(epsilons), list(skipped))


def epsilon_sweep(case: GridCase, n: Optional[int] = None, config: Optional[SolverConfig] = None) -> ParetoFront:
    """
    ε-constraint front over (J1, J2): lexicographic anchors give the J2 range,
    interior points minimize J1 with J2 ≤ ε on an even grid
    """
    n = case.scenarios.eps_points if n is None else n
    if n < 2:
        raise ValueError("an ε sweep needs at least 2 grid points")
    config = config or case.solver
    model = build_bilevel(case)
    safe = _lexicographic(model, "j2", config)
    cheap = _lexicographic(model, "j1", config)
    j2_min = safe.value(model.uc.security)
    j2_max = cheap.value(model.uc.security)
    grid = np.linspace(j2_min, j2_max, n).tolist()
    logger.info(f"ε sweep over J2 in [{j2_min:.4f}, {j2_max:.4f}] with {n} points")

    solutions = [model.extract(safe, grid[0])]
    skipped: List[float] = []
    for eps in grid[1:-1]:
        try:
            sol = _solve_model(model, "j1", config, j2_cap=eps, augment=AUGMENTATION)
        except (InfeasibleError, SolverLimitError) as e:
            logger.warning(f"ε={eps:.4f} skipped: {e}")
            skipped.append(eps)
            continue
        solutions.append(model.extract(sol, eps))
    solutions.append(model.extract(cheap, grid[-1]))
    return assemble_front(case, solutions, grid, skipped)


def pick_compromise(front: ParetoFront) -> DayAheadSolution:
    """Front member nearest the ideal point after per-objective min/max scaling"""
    if len(front) == 0:
        raise ValueError("cannot pick a compromise from an empty front")
    return front.points[_pick_index(front.objectives())].solution


def solve_fixed_tariff(
    case: GridCase, prices: Sequence[float], config: Optional[SolverConfig] = None
) -> DayAheadSolution:
    """
    Dispatch for a tariff set in advance: the producer's optimal bill at
    these prices is computed first, then the utility picks its best dispatch
    among the producer's optimal schedules
    """
    config = config or case.solver
    arr = np.asarray(prices, dtype=float)
    _, best_bill = solve_pmp(case.pmp, arr, config)
    problem = MilpProblem(f"fixed-tariff-{case.name}")
    system = case.pmp
    pmp_vars, _ = add_pmp_primal(problem, system)
    demand = [pmp_vars.demand_expr(system, t) for t in range(case.horizon)]
    bill: LinExpr = {}
    for t in range(case.horizon):
        for v, c in demand[t].items():
            bill[v] = bill.get(v, 0.0) + arr[t] * c
    problem.add_constraint(
        bill, Relation.LE, best_bill - system.fixed_cost + LEX_TOL * (1.0 + abs(best_bill)), "optimal_bill"
    )
    uc = build_uc_constraints(problem, case, case.forecast(), pmp_demand=demand, security_cap=1.0)
    fuel = add_fuel_epigraphs(problem, case, uc, case.solver.pw_segments)
    j1 = _j1_expression(uc, fuel)
    problem.set_objective(j1)
    sol = require_optimal(solve(problem, config), "fixed-tariff dispatch")
    tiers = tuple(case.dr.price_tiers) or (float(arr.max()),)
    model = BilevelModel(problem, case, tiers, uc, pmp_vars, None, None, None, -1, fuel, j1)
    out = model.extract(sol)
    out.prices = arr.copy()
    out.tiers = np.asarray([_tier_index(tiers, p) for p in arr], dtype=int)
    out.j_pmp = out.pmp.bill(system, arr)
    return out


def _tier_index(tiers: Sequence[float], price: float) -> int:
    for k, t in enumerate(tiers):
        if abs(t - price) <= 1e-9 * max(1.0, abs(t)):
            return k
    return -1
