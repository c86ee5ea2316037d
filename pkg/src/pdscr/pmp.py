"""
Parallel manufacturing process (PMP) of the industrial producer

A serial line of R procedures, each able to work on up to N_P^max(i) projects
per slot, separated by R-1 buffers. The producer minimizes its energy bill
for a fixed production target; the LP below is its response to the
per-slot tariff, and emit_kkt turns that response into constraints a leader
problem can embed.

Indexing: slots t = 0..T-1, procedures i = 0..R-1, buffers i = 0..R-2.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Any

import numpy as np

from .exceptions import InfeasibleError
from .solver import (
    MilpProblem,
    MilpSolution,
    Relation,
    LinExpr,
    SolverConfig,
    DEFAULT_SOLVER_CONFIG,
    add_complementarity,
    row_range,
    solve_lp,
    solve_milp,
    require_optimal,
)

# ("P", t, i) for procedures, ("B", t, i) for buffers
VarKey = Tuple[str, int, int]
# price of one slot as an affine expression of leader variables
PriceExpr = Tuple[LinExpr, float]


@dataclass(frozen=True)
class PmpSystem:
    procedure_max: Tuple[float, ...]
    procedure_power_mw: Tuple[float, ...]
    buffer_max: Tuple[float, ...]
    buffer_power_mw: Tuple[float, ...]
    target: float
    fixed_cost: float
    horizon: int

    def __post_init__(self) -> None:
        r = len(self.procedure_max)
        if r < 2:
            raise ValueError("a PMP needs at least two procedures")
        if len(self.procedure_power_mw) != r:
            raise ValueError("one power value per procedure is required")
        if len(self.buffer_max) != r - 1 or len(self.buffer_power_mw) != r - 1:
            raise ValueError(f"{r} procedures need exactly {r - 1} buffers")
        for label, values in (
            ("procedure capacity", self.procedure_max),
            ("procedure power", self.procedure_power_mw),
            ("buffer capacity", self.buffer_max),
            ("buffer power", self.buffer_power_mw),
        ):
            if any(v <= 0 for v in values):
                raise ValueError(f"{label} values must be strictly positive: {values}")
        if self.target < 0:
            raise ValueError("production target must be >= 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def procedures(self) -> int:
        return len(self.procedure_max)

    @property
    def buffers(self) -> int:
        return len(self.buffer_max)

    def check_capacity(self) -> None:
        """
        Cheap necessary condition for reaching the target

        >>> PmpSystem((1, 1), (5, 5), (1,), (1,), target=4, fixed_cost=0, horizon=3).check_capacity()
        Traceback (most recent call last):
        ...
        pdscr.exceptions.InfeasibleError: production target 4 exceeds the capacity of the last procedure (3 slots x 1 projects = 3)
        """
        last = self.procedure_max[-1]
        cap = self.horizon * last
        if cap < self.target:
            raise InfeasibleError(
                f"production target {self.target:g} exceeds the capacity of the last procedure "
                f"({self.horizon} slots x {last:g} projects = {cap:g})"
            )

    def max_load_mw(self) -> float:
        return float(
            np.dot(self.procedure_max, self.procedure_power_mw)
            + np.dot(self.buffer_max, self.buffer_power_mw)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "procedure_max": list(self.procedure_max),
            "procedure_power_mw": list(self.procedure_power_mw),
            "buffer_max": list(self.buffer_max),
            "buffer_power_mw": list(self.buffer_power_mw),
            "target": self.target,
            "fixed_cost": self.fixed_cost,
            "horizon": self.horizon,
        }


@dataclass
class PmpSchedule:
    """Projects processed (T x R) and held in buffers (T x R-1) per slot"""

    processed: np.ndarray
    buffered: np.ndarray

    def demand_mw(self, system: PmpSystem) -> np.ndarray:
        return self.processed @ np.asarray(system.procedure_power_mw) + self.buffered @ np.asarray(
            system.buffer_power_mw
        )

    def bill(self, system: PmpSystem, prices: Sequence[float]) -> float:
        """J_PMP for this schedule at the given $/MWh prices, fixed cost included"""
        return float(np.dot(np.asarray(prices, dtype=float), self.demand_mw(system))) + system.fixed_cost

    def to_dict(self) -> Dict[str, Any]:
        return {"processed": self.processed.tolist(), "buffered": self.buffered.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PmpSchedule":
        return cls(
            processed=np.asarray(data["processed"], dtype=float),
            buffered=np.asarray(data["buffered"], dtype=float).reshape(len(data["processed"]), -1),
        )


@dataclass(frozen=True)
class PmpRow:
    family: str
    index: Tuple[int, ...]
    coefs: Tuple[Tuple[VarKey, float], ...]
    relation: Relation
    rhs: float


def pmp_rows(system: PmpSystem) -> List[PmpRow]:
    """
    The production constraints besides the variable boxes:
    flow limit, target, buffer balance, empty end and empty start
    """
    T, R = system.horizon, system.procedures
    rows: List[PmpRow] = []
    for t in range(T - 1):
        for i in range(R - 1):
            rows.append(
                PmpRow(
                    "flow",
                    (t, i),
                    ((("P", t + 1, i + 1), 1.0), (("B", t, i), -1.0)),
                    Relation.LE,
                    float(system.procedure_max[i]),
                )
            )
    rows.append(
        PmpRow(
            "target",
            (),
            tuple((("P", t, R - 1), 1.0) for t in range(T)),
            Relation.GE,
            float(system.target),
        )
    )
    for t in range(T):
        for i in range(R - 1):
            coefs: List[Tuple[VarKey, float]] = [
                (("B", t, i), 1.0),
                (("P", t, i), 1.0),
                (("P", t, i + 1), -1.0),
            ]
            # holdings after the last slot are zero
            if t + 1 < T:
                coefs.append((("B", t + 1, i), -1.0))
            rows.append(PmpRow("balance", (t, i), tuple(coefs), Relation.EQ, 0.0))
    end = [(("P", T - 1, i), 1.0) for i in range(R - 1)] + [(("B", T - 1, i), 1.0) for i in range(R - 1)]
    rows.append(PmpRow("end", (), tuple(end), Relation.EQ, 0.0))
    start = [(("P", 0, i), 1.0) for i in range(1, R)] + [(("B", 0, i), 1.0) for i in range(R - 1)]
    rows.append(PmpRow("start", (), tuple(start), Relation.EQ, 0.0))
    return rows


@dataclass
class PmpVariables:
    processed: np.ndarray
    buffered: np.ndarray

    def index(self, key: VarKey) -> int:
        kind, t, i = key
        return int(self.processed[t, i] if kind == "P" else self.buffered[t, i])

    def keys(self) -> List[VarKey]:
        T, R = self.processed.shape
        return [("P", t, i) for t in range(T) for i in range(R)] + [
            ("B", t, i) for t in range(T) for i in range(self.buffered.shape[1])
        ]

    def demand_expr(self, system: PmpSystem, t: int) -> LinExpr:
        """MW drawn by the line in slot t"""
        expr: LinExpr = {}
        for i, c in enumerate(system.procedure_power_mw):
            expr[int(self.processed[t, i])] = float(c)
        for i, c in enumerate(system.buffer_power_mw):
            expr[int(self.buffered[t, i])] = float(c)
        return expr

    def schedule(self, sol: MilpSolution) -> PmpSchedule:
        return PmpSchedule(processed=sol.take(self.processed), buffered=sol.take(self.buffered))


def add_pmp_primal(
    problem: MilpProblem, system: PmpSystem, prefix: str = "pmp"
) -> Tuple[PmpVariables, List[int]]:
    """Adds N_P, N_B with their boxes and the production rows; returns the row indices too"""
    T, R = system.horizon, system.procedures
    processed = np.zeros((T, R), dtype=int)
    buffered = np.zeros((T, R - 1), dtype=int)
    for t in range(T):
        for i in range(R):
            processed[t, i] = problem.add_variable(f"{prefix}_P[{t},{i}]", 0.0, system.procedure_max[i])
        for i in range(R - 1):
            buffered[t, i] = problem.add_variable(f"{prefix}_B[{t},{i}]", 0.0, system.buffer_max[i])
    variables = PmpVariables(processed, buffered)
    row_ids = []
    for row in pmp_rows(system):
        coefs = {variables.index(k): c for k, c in row.coefs}
        tag = ",".join(str(v) for v in row.index)
        row_ids.append(problem.add_constraint(coefs, row.relation, row.rhs, f"{prefix}_{row.family}[{tag}]"))
    return variables, row_ids


def _check_prices(system: PmpSystem, prices: Sequence[float]) -> np.ndarray:
    arr = np.asarray(prices, dtype=float)
    if arr.shape != (system.horizon,):
        raise ValueError(f"expected {system.horizon} prices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("prices must be finite and non-negative")
    return arr


def _build(system: PmpSystem, prices: Sequence[float]) -> Tuple[MilpProblem, PmpVariables]:
    arr = _check_prices(system, prices)
    system.check_capacity()
    problem = MilpProblem("pmp")
    variables, _ = add_pmp_primal(problem, system)
    objective: LinExpr = {}
    for t in range(system.horizon):
        for idx, power in variables.demand_expr(system, t).items():
            objective[idx] = arr[t] * power
    problem.set_objective(objective, constant=system.fixed_cost)
    return problem, variables


def build_pmp_lp(system: PmpSystem, prices: Sequence[float]) -> MilpProblem:
    """
    The producer's cost-minimizing LP at fixed $/MWh prices
    """
    return _build(system, prices)[0]


def solve_pmp(
    system: PmpSystem, prices: Sequence[float], config: SolverConfig = DEFAULT_SOLVER_CONFIG
) -> Tuple[PmpSchedule, float]:
    problem, variables = _build(system, prices)
    sol = require_optimal(solve_lp(problem, config), "PMP schedule")
    return variables.schedule(sol), sol.objective


@dataclass
class KktCertificate:
    """
    Multiplier values of the producer LP.

    lower_processed/upper_processed/lower_buffered/upper_buffered are the
    multipliers of the variable boxes, flow and target those of the flow limit
    and production target; balance, end and start belong to the equalities.
    """

    lower_processed: np.ndarray
    upper_processed: np.ndarray
    lower_buffered: np.ndarray
    upper_buffered: np.ndarray
    flow: np.ndarray
    target: float
    balance: np.ndarray
    end: float
    start: float

    def inequality_multipliers(self) -> np.ndarray:
        return np.concatenate(
            [
                self.lower_processed.ravel(),
                self.upper_processed.ravel(),
                self.lower_buffered.ravel(),
                self.upper_buffered.ravel(),
                self.flow.ravel(),
                [self.target],
            ]
        )

    def stationarity_residual(self, system: PmpSystem, prices: Sequence[float]) -> float:
        """largest |∂L/∂x| over all schedule variables"""
        T, R = system.horizon, system.procedures
        alpha = np.asarray(prices, dtype=float)
        grad_p = np.outer(alpha, system.procedure_power_mw) - self.lower_processed + self.upper_processed
        grad_b = np.outer(alpha, system.buffer_power_mw) - self.lower_buffered + self.upper_buffered
        mult = {"flow": self.flow, "balance": self.balance}
        for row in pmp_rows(system):
            if row.family in mult:
                m = float(mult[row.family][row.index])
            elif row.family == "target":
                # N_TAR − Σ N_P ≤ 0
                m = -self.target
            else:
                m = self.end if row.family == "end" else self.start
            for (kind, t, i), c in row.coefs:
                if kind == "P":
                    grad_p[t, i] += c * m
                else:
                    grad_b[t, i] += c * m
        return float(max(np.max(np.abs(grad_p)), np.max(np.abs(grad_b)) if R > 1 else 0.0))

    def complementarity_residual(self, system: PmpSystem, schedule: PmpSchedule) -> float:
        """largest |λ·g| over all inequality pairs"""
        P, B = schedule.processed, schedule.buffered
        pmax = np.asarray(system.procedure_max)
        bmax = np.asarray(system.buffer_max)
        parts = [
            np.abs(self.lower_processed * P),
            np.abs(self.upper_processed * (pmax - P)),
            np.abs(self.lower_buffered * B),
            np.abs(self.upper_buffered * (bmax - B)),
        ]
        if system.horizon > 1:
            slack = pmax[:-1][None, :] + B[:-1, :] - P[1:, 1:]
            parts.append(np.abs(self.flow * slack))
        worst = max(float(np.max(p)) if p.size else 0.0 for p in parts)
        produced = float(P[:, -1].sum())
        return max(worst, abs(self.target * (produced - system.target)))


@dataclass
class KktBlock:
    """Multiplier variable indices emitted by emit_kkt"""

    lower_processed: np.ndarray
    upper_processed: np.ndarray
    lower_buffered: np.ndarray
    upper_buffered: np.ndarray
    flow: np.ndarray
    target: int
    balance: np.ndarray
    end: int
    start: int
    switches: List[int] = field(default_factory=list)
    stationarity_rows: List[int] = field(default_factory=list)
    # Σ multiplier · (constant of its row), the producer's dual objective
    dual_objective: LinExpr = field(default_factory=dict)

    def certificate(self, sol: MilpSolution) -> KktCertificate:
        return KktCertificate(
            lower_processed=sol.take(self.lower_processed),
            upper_processed=sol.take(self.upper_processed),
            lower_buffered=sol.take(self.lower_buffered),
            upper_buffered=sol.take(self.upper_buffered),
            flow=sol.take(self.flow),
            target=sol.value(self.target),
            balance=sol.take(self.balance),
            end=sol.value(self.end),
            start=sol.value(self.start),
        )


def multiplier_bound(system: PmpSystem, max_price: float, safety: float) -> float:
    """
    Bound on the producer's multipliers: the most a marginal project can cost,
    pushed through every procedure and held in every buffer for the whole cycle
    """
    per_project = sum(system.procedure_power_mw) + system.horizon * sum(system.buffer_power_mw)
    return safety * max(max_price, 1.0) * per_project


def emit_kkt(
    problem: MilpProblem,
    system: PmpSystem,
    variables: PmpVariables,
    prices: Sequence[PriceExpr],
    max_price: float,
    safety: float = 10.0,
    prefix: str = "kkt",
) -> KktBlock:
    """
    Adds stationarity rows, sign bounds and big-M complementarity for the
    producer LP whose primal rows/boxes were added by add_pmp_primal.
    prices[t] = (coefficients on leader variables, constant) in $/MWh.
    """
    T, R = system.horizon, system.procedures
    if len(prices) != T:
        raise ValueError(f"expected {T} price expressions, got {len(prices)}")
    m_lambda = multiplier_bound(system, max_price, safety)

    def lam(name: str) -> int:
        return problem.add_variable(f"{prefix}_{name}", 0.0, m_lambda)

    def nu(name: str) -> int:
        return problem.add_variable(f"{prefix}_{name}", -math.inf, math.inf)

    lower_p = np.array([[lam(f"lowP[{t},{i}]") for i in range(R)] for t in range(T)], dtype=int)
    upper_p = np.array([[lam(f"upP[{t},{i}]") for i in range(R)] for t in range(T)], dtype=int)
    lower_b = np.array([[lam(f"lowB[{t},{i}]") for i in range(R - 1)] for t in range(T)], dtype=int).reshape(T, R - 1)
    upper_b = np.array([[lam(f"upB[{t},{i}]") for i in range(R - 1)] for t in range(T)], dtype=int).reshape(T, R - 1)
    flow = np.array(
        [[lam(f"flow[{t},{i}]") for i in range(R - 1)] for t in range(T - 1)], dtype=int
    ).reshape(max(T - 1, 0), R - 1)
    target = lam("target")
    balance = np.array([[nu(f"bal[{t},{i}]") for i in range(R - 1)] for t in range(T)], dtype=int).reshape(T, R - 1)
    end = nu("end")
    start = nu("start")
    block = KktBlock(lower_p, upper_p, lower_b, upper_b, flow, target, balance, end, start)

    # stationarity: price term + Σ multiplier · ∂row/∂x = 0, rows written as g(x) ≤ 0
    grad: Dict[VarKey, LinExpr] = {k: {} for k in variables.keys()}
    rhs: Dict[VarKey, float] = {k: 0.0 for k in variables.keys()}

    def acc(key: VarKey, var: int, coef: float) -> None:
        grad[key][var] = grad[key].get(var, 0.0) + coef

    for t in range(T):
        leader, const = prices[t]
        for i in range(R):
            key = ("P", t, i)
            power = system.procedure_power_mw[i]
            for v, c in leader.items():
                acc(key, v, c * power)
            rhs[key] = -const * power
            acc(key, int(lower_p[t, i]), -1.0)
            acc(key, int(upper_p[t, i]), 1.0)
        for i in range(R - 1):
            key = ("B", t, i)
            power = system.buffer_power_mw[i]
            for v, c in leader.items():
                acc(key, v, c * power)
            rhs[key] = -const * power
            acc(key, int(lower_b[t, i]), -1.0)
            acc(key, int(upper_b[t, i]), 1.0)

    for row in pmp_rows(system):
        sign = -1.0 if row.relation == Relation.GE else 1.0
        if row.family == "flow":
            mult = int(flow[row.index])
        elif row.family == "target":
            mult = target
        elif row.family == "balance":
            mult = int(balance[row.index])
        else:
            mult = end if row.family == "end" else start
        for key, c in row.coefs:
            acc(key, mult, sign * c)
        if row.relation == Relation.EQ:
            block.dual_objective[mult] = -row.rhs
        else:
            g = {variables.index(k): sign * c for k, c in row.coefs}
            g_const = -sign * row.rhs
            lo, _ = row_range(g, problem)
            slack_range = max(-(lo + g_const), 1.0)
            block.dual_objective[mult] = g_const
            tag = ",".join(str(v) for v in row.index)
            block.switches.append(
                add_complementarity(
                    problem, g, g_const, mult, safety * slack_range, m_lambda, f"{prefix}_{row.family}[{tag}]"
                )
            )

    # variable boxes
    for kind, arr_low, arr_up, cap in (
        ("P", lower_p, upper_p, system.procedure_max),
        ("B", lower_b, upper_b, system.buffer_max),
    ):
        for t in range(T):
            for i in range(arr_low.shape[1]):
                x = variables.index((kind, t, i))
                span = safety * max(float(cap[i]), 1.0)
                block.dual_objective[int(arr_up[t, i])] = -float(cap[i])
                block.switches.append(
                    add_complementarity(problem, {x: -1.0}, 0.0, int(arr_low[t, i]), span, m_lambda, f"{prefix}_low{kind}[{t},{i}]")
                )
                block.switches.append(
                    add_complementarity(
                        problem, {x: 1.0}, -float(cap[i]), int(arr_up[t, i]), span, m_lambda, f"{prefix}_up{kind}[{t},{i}]"
                    )
                )

    for key in variables.keys():
        kind, t, i = key
        block.stationarity_rows.append(
            problem.add_constraint(grad[key], Relation.EQ, rhs[key], f"{prefix}_stat{kind}[{t},{i}]")
        )
    return block


def add_strong_duality(
    problem: MilpProblem,
    block: KktBlock,
    primal: LinExpr,
    primal_constant: float = 0.0,
    name: str = "kkt_duality",
) -> int:
    """
    Pins the producer's energy cost (primal + primal_constant, without the
    fixed charge) to its dual objective. With primal and dual feasibility this
    forces every complementarity product to zero, so the LP relaxation of the
    switches already holds an optimal schedule.
    """
    coefs: LinExpr = dict(primal)
    for v, c in block.dual_objective.items():
        coefs[v] = coefs.get(v, 0.0) - c
    return problem.add_constraint(coefs, Relation.EQ, -primal_constant, name)


@dataclass
class KktSolve:
    schedule: PmpSchedule
    objective: float
    certificate: KktCertificate
    solution: MilpSolution


def solve_pmp_via_kkt(
    system: PmpSystem,
    prices: Sequence[float],
    config: SolverConfig = DEFAULT_SOLVER_CONFIG,
) -> KktSolve:
    """
    Finds the producer's schedule from its optimality conditions alone
    (primal and dual feasibility, complementarity, zero duality gap) instead
    of the LP
    """
    arr = _check_prices(system, prices)
    system.check_capacity()
    problem = MilpProblem("pmp-kkt")
    variables, _ = add_pmp_primal(problem, system)
    block = emit_kkt(
        problem,
        system,
        variables,
        [({}, float(a)) for a in arr],
        max_price=float(arr.max()) if arr.size else 0.0,
        safety=config.big_m_safety,
    )
    objective: LinExpr = {}
    for t in range(system.horizon):
        for idx, power in variables.demand_expr(system, t).items():
            objective[idx] = arr[t] * power
    add_strong_duality(problem, block, objective)
    problem.set_objective(objective, constant=system.fixed_cost)
    sol = require_optimal(solve_milp(problem, config), "PMP optimality system")
    schedule = variables.schedule(sol)
    return KktSolve(schedule, schedule.bill(system, arr), block.certificate(sol), sol)


def six_procedure_system(horizon: int = 24) -> PmpSystem:
    """
    Six-procedure production line used in the case study: two projects per
    procedure, four per buffer, 25 projects per day
    """
    return PmpSystem(
        procedure_max=(2.0,) * 6,
        procedure_power_mw=(96.0, 64.0, 24.0, 72.0, 64.0, 42.0),
        buffer_max=(4.0,) * 5,
        buffer_power_mw=(8.0,) * 5,
        target=25.0,
        fixed_cost=51.42,
        horizon=horizon,
    )


def schedule_violations(system: PmpSystem, schedule: PmpSchedule, tol: float = 1e-6) -> Dict[str, float]:
    """Largest violation per constraint family, for reporting"""
    out: Dict[str, float] = {}
    P, B = schedule.processed, schedule.buffered
    out["bounds"] = float(
        max(
            np.max(-P),
            np.max(P - np.asarray(system.procedure_max)),
            np.max(-B) if B.size else 0.0,
            np.max(B - np.asarray(system.buffer_max)) if B.size else 0.0,
            0.0,
        )
    )
    values: Dict[VarKey, float] = {}
    for t in range(system.horizon):
        for i in range(system.procedures):
            values[("P", t, i)] = P[t, i]
        for i in range(system.buffers):
            values[("B", t, i)] = B[t, i]
    for row in pmp_rows(system):
        lhs = sum(c * values[k] for k, c in row.coefs)
        if row.relation == Relation.LE:
            v = max(0.0, lhs - row.rhs)
        elif row.relation == Relation.GE:
            v = max(0.0, row.rhs - lhs)
        else:
            v = abs(lhs - row.rhs)
        out[row.family] = max(out.get(row.family, 0.0), float(v))
    return {k: v for k, v in out.items() if v > tol}
