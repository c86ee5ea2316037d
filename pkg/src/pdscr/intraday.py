"""
Intraday cooperative re-dispatch

Commitment, reserves and tariffs stay as decided day-ahead. Inside the
reserve band the plants may cut output so more of the realized wind is used
and the producer may reshuffle its schedule; the resulting profit ψ of each
slot is split by one of the rules in mipdms. A slot only cooperates when
every party comes out no worse; otherwise it follows the day-ahead plan and
buys any shortfall as external reserve.
"""

import copy
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .exceptions import FrozenVariableError, InfeasibleError, SolverLimitError
from .grid import (
    UcVariables,
    build_uc_constraints,
    compute_asc,
    dc_flow,
    net_injections,
    total_fuel,
    total_startup,
)
from .log import logger
from .mipdms import CRITERIA, NON_COOPERATIVE, allocate, no_shares
from .model import GridCase, DayAheadSolution
from .pareto import non_dominated, pick_compromise
from .pmp import PmpSchedule, PmpVariables, add_pmp_primal
from .solver import (
    MilpProblem,
    MilpSolution,
    PiecewiseBlock,
    Relation,
    LinExpr,
    SolverConfig,
    linearize_quadratic,
    solve,
    require_optimal,
)

# $ per unit of J6 added to J5 in ε-points
AUGMENTATION = 1e-3
LEX_TOL = 1e-6
FROZEN_TOL = 1e-6


@dataclass
class IntradayDispatch:
    """Updated operating point; status, reserve and prices are the day-ahead ones"""

    status: np.ndarray
    power: np.ndarray
    reserve: np.ndarray
    wind: np.ndarray
    pmp: PmpSchedule
    purchase: np.ndarray
    prices: np.ndarray
    flows: np.ndarray
    cooperative: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status.astype(int).tolist(),
            "power": self.power.tolist(),
            "reserve": self.reserve.tolist(),
            "wind": self.wind.tolist(),
            "pmp": self.pmp.to_dict(),
            "purchase": self.purchase.tolist(),
            "prices": self.prices.tolist(),
            "flows": self.flows.tolist(),
            "cooperative": self.cooperative.astype(bool).tolist(),
        }


@dataclass
class IncentiveScheme:
    """
    Payments that realize the profit split, per slot ($)

    commendation: $/MWh credited for additional wind used
    budget: commendation paid in the slot (s·ΔP_W when cooperating, else 0)
    ipe: incentive paid to the producer
    plants: incentive paid to each plant (slots x plants)
    income: each plant's share of sales revenue (slots x plants)
    """

    commendation: float
    budget: np.ndarray
    ipe: np.ndarray
    plants: np.ndarray
    income: np.ndarray

    def budget_residual(self) -> np.ndarray:
        return self.budget - self.ipe - self.plants.sum(axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "commendation": self.commendation,
            "budget": self.budget.tolist(),
            "ipe": self.ipe.tolist(),
            "plants": self.plants.tolist(),
            "income": self.income.tolist(),
        }


@dataclass
class ProfitLedger:
    """
    Per-slot accounting of one intraday outcome; utilities are negated costs
    so that u = U − U⁰ and v = V − V⁰ are gains
    """

    plants: List[int]
    psi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    sigma: np.ndarray
    plant_utility: np.ndarray
    plant_utility_base: np.ndarray
    ipe_utility: np.ndarray
    ipe_utility_base: np.ndarray
    fuel_savings: np.ndarray
    delta_wind: np.ndarray
    purchase: np.ndarray
    purchase_cost: np.ndarray
    criteria: List[str]
    incentives: IncentiveScheme
    j3: float
    j4: float

    def identity_residual(self) -> float:
        """largest |ψ − Σu − v| over the slots"""
        return float(np.max(np.abs(self.psi - self.u.sum(axis=1) - self.v))) if self.psi.size else 0.0

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for t in range(len(self.psi)):
            row: Dict[str, Any] = {
                "slot": t,
                "criterion": self.criteria[t],
                "psi": float(self.psi[t]),
                "ipe": float(self.v[t]),
            }
            for k, plant in enumerate(self.plants):
                row[f"plant_{plant}"] = float(self.u[t, k])
            row["purchase_mw"] = float(self.purchase[t])
            row["purchase_cost"] = float(self.purchase_cost[t])
            out.append(row)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "plants": self.plants,
            "psi": self.psi.tolist(),
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "sigma": self.sigma.tolist(),
            "plant_utility": self.plant_utility.tolist(),
            "plant_utility_base": self.plant_utility_base.tolist(),
            "ipe_utility": self.ipe_utility.tolist(),
            "ipe_utility_base": self.ipe_utility_base.tolist(),
            "fuel_savings": self.fuel_savings.tolist(),
            "delta_wind": self.delta_wind.tolist(),
            "purchase": self.purchase.tolist(),
            "purchase_cost": self.purchase_cost.tolist(),
            "criteria": self.criteria,
            "incentives": self.incentives.to_dict(),
            "j3": self.j3,
            "j4": self.j4,
        }


@dataclass
class IntradayOutcome:
    criterion: str
    dispatch: IntradayDispatch
    ledger: ProfitLedger
    j5: float
    j6: float
    total_cost: float
    front: List[Tuple[float, float]] = field(default_factory=list)
    overloads: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def asc(self) -> float:
        return 1.0 - self.j6

    def to_dict(self) -> Dict[str, Any]:
        return {
            "criterion": self.criterion,
            "j5": self.j5,
            "j6": self.j6,
            "asc": self.asc,
            "total_cost": self.total_cost,
            "front": [list(p) for p in self.front],
            "overloads": self.overloads,
            "dispatch": self.dispatch.to_dict(),
            "ledger": self.ledger.to_dict(),
        }


def _check_realized(case: GridCase, realized: np.ndarray) -> np.ndarray:
    arr = np.asarray(realized, dtype=float).reshape(case.horizon, len(case.wind))
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("realized wind must be finite and non-negative")
    return arr


def _income_shares(case: GridCase, power: np.ndarray) -> np.ndarray:
    """(slots x plants) S^V: configured coefficients or each plant's energy share"""
    plants = case.plants
    T = power.shape[0]
    configured = case.dr.income_coefficients
    if configured:
        raw = np.array([configured.get(k, 0.0) for k in plants], dtype=float)
        total = raw.sum()
        row = raw / total if total > 0 else np.full(len(plants), 1.0 / len(plants))
        return np.tile(row, (T, 1))
    by_plant = np.stack([power[:, case.units_of(k)].sum(axis=1) for k in plants], axis=1)
    totals = by_plant.sum(axis=1, keepdims=True)
    equal = np.full_like(by_plant, 1.0 / len(plants))
    return np.where(totals > 0, by_plant / np.where(totals > 0, totals, 1.0), equal)


def _check_frozen(case: GridCase, da: DayAheadSolution, dispatch: IntradayDispatch) -> None:
    if not np.array_equal(np.round(dispatch.status), np.round(da.status)):
        raise FrozenVariableError("intraday dispatch changed the day-ahead commitment")
    if not np.array_equal(dispatch.prices, da.prices):
        raise FrozenVariableError("intraday dispatch changed the day-ahead tariff")
    if not np.allclose(dispatch.reserve, da.reserve, rtol=0.0, atol=FROZEN_TOL):
        raise FrozenVariableError("intraday dispatch changed the day-ahead reserves")
    excess = np.abs(dispatch.power - da.power) - da.reserve
    if np.any(excess > 1e-5):
        t, p = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise FrozenVariableError(
            f"unit {case.units[p].name} moves {excess[t, p]:.4g} MW beyond its reserve in slot {t}"
        )


def updated_costs(
    case: GridCase,
    da: DayAheadSolution,
    realized: np.ndarray,
    dispatch: IntradayDispatch,
    criterion: str,
) -> ProfitLedger:
    """
    Books a trial dispatch: exact fuel savings, commendation, reserve
    purchases, the profit split of every cooperating slot and the incentives
    that realize it
    """
    _check_frozen(case, da, dispatch)
    realized = _check_realized(case, realized)
    T = case.horizon
    plants = case.plants
    n_plants = len(plants)
    s = case.dr.commendation
    price_res = case.network.reserve_price
    system = case.pmp

    fuel_da = total_fuel(case, da.power, da.status)
    fuel_up = total_fuel(case, dispatch.power, dispatch.status)
    fuel_savings = (fuel_da - fuel_up).sum(axis=1)
    delta_wind = dispatch.wind.sum(axis=1) - da.wind.sum(axis=1)
    purchase_cost = price_res * dispatch.purchase
    psi_raw = fuel_savings + s * delta_wind - purchase_cost

    def by_plant(arr: np.ndarray) -> np.ndarray:
        return np.stack([arr[:, case.units_of(k)].sum(axis=1) for k in plants], axis=1)

    sigma = by_plant(da.power - dispatch.power)
    plant_savings = by_plant(fuel_da - fuel_up)
    active = by_plant(dispatch.status) > 0.5
    income = _income_shares(case, dispatch.power)

    demand_da = da.pmp.demand_mw(system)
    demand_up = dispatch.pmp.demand_mw(system)
    bill_da = da.prices * demand_da
    bill_up = dispatch.prices * demand_up
    bill_savings = bill_da - bill_up

    psi = np.zeros(T)
    u = np.zeros((T, n_plants))
    v = np.zeros(T)
    budget = np.zeros(T)
    ipe_incentive = np.zeros(T)
    plant_incentive = np.zeros((T, n_plants))
    criteria: List[str] = []
    for t in range(T):
        shares = no_shares(n_plants)
        if dispatch.cooperative[t] and psi_raw[t] >= -1e-9 and active[t].any():
            clipped = np.where(sigma[t] > -1e-9, np.maximum(sigma[t], 0.0), sigma[t])
            if criterion == "contribution" and np.any(clipped < 0):
                logger.warning(f"slot {t}: a plant raised its output, slot treated as non-cooperative")
            else:
                shares = allocate(max(psi_raw[t], 0.0), criterion, active[t], np.maximum(clipped, 0.0))
        if not shares.cooperative:
            if dispatch.cooperative[t]:
                logger.info(f"slot {t}: no rational split (ψ={psi_raw[t]:.4g}), slot is non-cooperative")
            criteria.append(NON_COOPERATIVE)
            continue
        criteria.append(shares.rule)
        psi[t] = max(psi_raw[t], 0.0)
        u[t] = shares.plants
        v[t] = shares.ipe
        budget[t] = s * delta_wind[t]
        ipe_incentive[t] = v[t] - bill_savings[t]
        plant_incentive[t] = (
            u[t] - plant_savings[t] + income[t] * bill_savings[t] + income[t] * purchase_cost[t]
        )

    # utilities: negated costs, with the incentive and the revenue share
    plant_utility_base = income * bill_da[:, None] - by_plant(fuel_da)
    plant_utility = plant_utility_base + u
    ipe_utility_base = -bill_da
    ipe_utility = ipe_utility_base + v

    j3 = float((bill_up - ipe_incentive).sum()) + system.fixed_cost
    sales = j3 if case.dr.sales_basis == "full" else j3 - system.fixed_cost
    thermal = float(fuel_up.sum() + total_startup(case, dispatch.status).sum())
    j4 = thermal + float(purchase_cost.sum()) - float(plant_incentive.sum()) - sales

    return ProfitLedger(
        plants=plants,
        psi=psi,
        u=u,
        v=v,
        sigma=sigma,
        plant_utility=plant_utility,
        plant_utility_base=plant_utility_base,
        ipe_utility=ipe_utility,
        ipe_utility_base=ipe_utility_base,
        fuel_savings=fuel_savings,
        delta_wind=delta_wind,
        purchase=dispatch.purchase.copy(),
        purchase_cost=purchase_cost,
        criteria=criteria,
        incentives=IncentiveScheme(s, budget, ipe_incentive, plant_incentive, income),
        j3=j3,
        j4=j4,
    )


def total_cost(case: GridCase, dispatch: IntradayDispatch, ledger: ProfitLedger) -> float:
    """fuel + start-up + reserve purchases + fixed cost − commendation paid"""
    fuel = total_fuel(case, dispatch.power, dispatch.status).sum()
    start = total_startup(case, dispatch.status).sum()
    return float(
        fuel + start + ledger.purchase_cost.sum() + case.pmp.fixed_cost - ledger.incentives.budget.sum()
    )


def _overloads(case: GridCase, flows: np.ndarray) -> List[Dict[str, Any]]:
    out = []
    for t in range(flows.shape[0]):
        for j, br in enumerate(case.network.branches):
            excess = abs(float(flows[t, j])) - br.rating
            if excess > 1e-6:
                out.append({"slot": t, "branch": f"{br.from_bus}-{br.to_bus}", "excess_mw": excess})
    if out:
        logger.warning(f"{len(out)} branch overloads remain intraday; listed as load-shed diagnostics")
    return out


def _revert_slots(dispatch: IntradayDispatch, held: IntradayDispatch, slots: np.ndarray) -> IntradayDispatch:
    """dispatch with the given slots replaced by the held-fixed plan"""
    out = copy.deepcopy(dispatch)
    out.power[slots] = held.power[slots]
    out.wind[slots] = held.wind[slots]
    out.purchase[slots] = held.purchase[slots]
    out.flows[slots] = held.flows[slots]
    out.pmp.processed[slots] = held.pmp.processed[slots]
    out.pmp.buffered[slots] = held.pmp.buffered[slots]
    out.cooperative[slots] = False
    return out


def settle(
    case: GridCase,
    da: DayAheadSolution,
    realized: np.ndarray,
    dispatch: IntradayDispatch,
    criterion: str,
    front: Optional[List[Tuple[float, float]]] = None,
) -> IntradayOutcome:
    """
    Books a dispatch. Slots without a rational split run the day-ahead plan
    (held_fixed_dispatch) before curtailment and cost are counted.
    """
    realized = _check_realized(case, realized)
    ledger = updated_costs(case, da, realized, dispatch, criterion)
    rejected = np.array([c == NON_COOPERATIVE for c in ledger.criteria], dtype=bool)
    if rejected.any():
        dispatch = _revert_slots(dispatch, held_fixed_dispatch(case, da, realized), rejected)
        ledger = updated_costs(case, da, realized, dispatch, criterion)
    dispatch.cooperative = np.array([c != NON_COOPERATIVE for c in ledger.criteria], dtype=bool)
    j5 = float((realized - dispatch.wind).sum())
    j6 = 1.0 - compute_asc(dispatch.flows, case.network.ratings()) if dispatch.flows.size else 0.0
    return IntradayOutcome(
        criterion=criterion,
        dispatch=dispatch,
        ledger=ledger,
        j5=j5,
        j6=max(j6, 0.0),
        total_cost=total_cost(case, dispatch, ledger),
        front=front or [(j5, max(j6, 0.0))],
        overloads=_overloads(case, dispatch.flows),
    )


def held_fixed_dispatch(case: GridCase, da: DayAheadSolution, realized: np.ndarray) -> IntradayDispatch:
    """Day-ahead plan under realized wind: wind up to its planned value, the deficit bought"""
    realized = _check_realized(case, realized)
    wind = np.clip(np.minimum(realized, da.wind), 0.0, None)
    demand = da.pmp.demand_mw(case.pmp)
    # whatever the wind no longer covers is bought, so every slot balances exactly
    shortfall = -net_injections(case, da.power, wind, demand).sum(axis=1)
    purchase = np.maximum(shortfall, 0.0)
    inj = net_injections(case, da.power, wind, demand, purchase)
    flows, _ = dc_flow(case.network, inj, case.slack_bus)
    return IntradayDispatch(
        status=da.status.copy(),
        power=da.power.copy(),
        reserve=da.reserve.copy(),
        wind=wind,
        pmp=PmpSchedule(da.pmp.processed.copy(), da.pmp.buffered.copy()),
        purchase=purchase,
        prices=da.prices.copy(),
        flows=np.atleast_2d(flows).reshape(case.horizon, -1),
        cooperative=np.zeros(case.horizon, dtype=bool),
    )


def evaluate_fixed_dayahead(case: GridCase, da: DayAheadSolution, realized: np.ndarray) -> IntradayOutcome:
    """The comparison case where nobody re-dispatches"""
    dispatch = held_fixed_dispatch(case, da, realized)
    return settle(case, da, realized, dispatch, NON_COOPERATIVE)


def _fuel_block(a: float, b: float, c: float, lo: float, mid: float, hi: float, segments: int) -> PiecewiseBlock:
    """chords on [lo, hi] with a breakpoint at the day-ahead output"""
    parts = [linearize_quadratic(a, b, c, x, y, segments) for x, y in ((lo, mid), (mid, hi)) if y > x]
    if not parts:
        return linearize_quadratic(a, b, c, mid, mid, 1)
    block = parts[0]
    for nxt in parts[1:]:
        block = block.concat(nxt)
    return block


@dataclass
class IntradayModel:
    problem: MilpProblem
    case: GridCase
    da: DayAheadSolution
    realized: np.ndarray
    criterion: str
    uc: UcVariables
    pmp: PmpVariables
    cooperate: np.ndarray
    psi: List[LinExpr]
    psi_constant: np.ndarray
    wind_total: LinExpr

    def j5_of(self, sol: MilpSolution) -> float:
        return float(self.realized.sum() - sol.take(self.uc.wind).sum())

    def dispatch(self, sol: MilpSolution) -> IntradayDispatch:
        da = self.da
        power = sol.take(self.uc.power)
        power[da.status < 0.5] = 0.0
        assert self.uc.purchase is not None
        purchase = np.maximum(sol.take(self.uc.purchase), 0.0)
        return IntradayDispatch(
            status=da.status.copy(),
            power=power,
            reserve=da.reserve.copy(),
            wind=sol.take(self.uc.wind),
            pmp=self.pmp.schedule(sol),
            purchase=purchase,
            prices=da.prices.copy(),
            flows=sol.take(self.uc.flow),
            cooperative=np.round(sol.take(self.cooperate)).astype(bool),
        )


def build_intraday(
    case: GridCase,
    da: DayAheadSolution,
    realized: np.ndarray,
    criterion: str,
    j5_cap: Optional[float] = None,
) -> IntradayModel:
    """
    Re-dispatch MILP with one cooperation switch per slot. With the switch
    off, the slot is pinned to the day-ahead plan; with it on, the slot's
    linearized profit must be non-negative and, for the contribution rule,
    no plant may raise its output.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion '{criterion}', expected one of {CRITERIA}")
    realized = _check_realized(case, realized)
    T = case.horizon
    system = case.pmp
    problem = MilpProblem(f"intraday-{criterion}-{case.name}")
    pmp_vars, _ = add_pmp_primal(problem, system, prefix="pmpup")
    demand = [pmp_vars.demand_expr(system, t) for t in range(T)]
    uc = build_uc_constraints(
        problem,
        case,
        realized,
        pmp_demand=demand,
        commitment=da.status,
        reserves=False,
        purchase=True,
        security_cap=None,
        prefix="up",
    )
    assert uc.purchase is not None
    cooperate = np.array([problem.add_binary(f"coop[{t}]") for t in range(T)], dtype=int)
    s = case.dr.commendation
    price_res = case.network.reserve_price
    safety = case.solver.big_m_safety
    held_wind = np.clip(np.minimum(realized, da.wind), 0.0, None)
    wind_total: LinExpr = {}

    psi: List[LinExpr] = []
    psi_constant = np.zeros(T)
    for t in range(T):
        z = int(cooperate[t])
        expr: LinExpr = {}
        const = 0.0
        fuel_range = 0.0
        for p, unit in enumerate(case.units):
            if da.status[t, p] < 0.5:
                continue
            base = min(max(float(da.power[t, p]), unit.p_min), unit.p_max)
            r = max(float(da.reserve[t, p]), 0.0)
            x = int(uc.power[t, p])
            lo, hi = max(unit.p_min, base - r), min(unit.p_max, base + r)
            problem.set_bounds(x, lo, hi)
            if r > 0:
                problem.add_constraint({x: 1.0, z: -r}, Relation.LE, base, f"band+[{t},{p}]")
                problem.add_constraint({x: 1.0, z: r}, Relation.GE, base, f"band-[{t},{p}]")
            block = _fuel_block(unit.a, unit.b, unit.c, lo, base, hi, case.solver.pw_segments)
            f = problem.add_piecewise(x, block, None, f"fuelup[{t},{p}]")
            expr[f] = -1.0
            const += unit.fuel(base)
            fuel_range += abs(unit.fuel(hi) - unit.fuel(lo))
        # the producer keeps its day-ahead schedule unless cooperating
        for i in range(system.procedures):
            x = int(pmp_vars.processed[t, i])
            cap = float(system.procedure_max[i])
            base = min(max(float(da.pmp.processed[t, i]), 0.0), cap)
            problem.add_constraint({x: 1.0, z: -cap}, Relation.LE, base, f"pmpband+[{t},{i}]")
            problem.add_constraint({x: 1.0, z: cap}, Relation.GE, base, f"pmpband-[{t},{i}]")
        for i in range(system.buffers):
            x = int(pmp_vars.buffered[t, i])
            cap = float(system.buffer_max[i])
            base = min(max(float(da.pmp.buffered[t, i]), 0.0), cap)
            problem.add_constraint({x: 1.0, z: -cap}, Relation.LE, base, f"bufband+[{t},{i}]")
            problem.add_constraint({x: 1.0, z: cap}, Relation.GE, base, f"bufband-[{t},{i}]")
        for l in range(len(case.wind)):
            w = int(uc.wind[t, l])
            extra = float(realized[t, l] - held_wind[t, l])
            problem.add_constraint({w: 1.0, z: -extra}, Relation.LE, float(held_wind[t, l]), f"windhold[{t},{l}]")
            expr[w] = expr.get(w, 0.0) + s
            wind_total[w] = 1.0
            const -= s * float(da.wind[t, l])
        out = int(uc.purchase[t])
        expr[out] = -price_res
        psi.append(expr)
        psi_constant[t] = const

        # ψ ≥ 0 when cooperating
        spread = fuel_range + (s + price_res) * (float(da.wind[t].sum()) + float(realized[t].sum()) + 1.0)
        m_psi = safety * spread
        row = dict(expr)
        row[z] = row.get(z, 0.0) - m_psi
        problem.add_constraint(row, Relation.GE, -const - m_psi, f"rational[{t}]")
        if criterion == "contribution":
            for k in case.plants:
                members = [p for p in case.units_of(k) if da.status[t, p] > 0.5]
                band = float(sum(da.reserve[t, p] for p in members))
                if not members or band <= 0:
                    continue
                # σ = Σ (P_DA − P) ≥ 0 when cooperating
                sig: LinExpr = {int(uc.power[t, p]): -1.0 for p in members}
                sig[z] = -band
                rhs = -float(sum(da.power[t, p] for p in members)) - band
                problem.add_constraint(sig, Relation.GE, rhs, f"contrib[{t},{k}]")

    if j5_cap is not None:
        problem.add_constraint(wind_total, Relation.GE, float(realized.sum()) - j5_cap, "j5_cap")
    return IntradayModel(problem, case, da, realized, criterion, uc, pmp_vars, cooperate, psi, psi_constant, wind_total)


def _solve_point(
    model: IntradayModel, config: SolverConfig, j6_cap: Optional[float], first: str = "j5"
) -> MilpSolution:
    """
    Lexicographic solve at one ε: the first objective, then the other pinned,
    then the largest total profit with both pinned
    """
    security = model.uc.security
    realized_total = float(model.realized.sum())

    def run(objective: LinExpr, extra: List[Tuple[LinExpr, Relation, float]], what: str) -> MilpSolution:
        problem = model.problem.copy()
        if j6_cap is not None:
            problem.set_bounds(security, 0.0, max(j6_cap, 0.0))
        for coefs, rel, rhs in extra:
            problem.add_constraint(coefs, rel, rhs)
        problem.set_objective(objective)
        return require_optimal(solve(problem, config), f"intraday {model.criterion} ({what})")

    neg_wind = {v: -1.0 for v in model.wind_total}
    if first == "j5":
        sol = run({**neg_wind, security: AUGMENTATION}, [], "J5")
        j5 = model.j5_of(sol)
        pins = [(dict(model.wind_total), Relation.GE, realized_total - j5 - LEX_TOL * (1.0 + j5))]
        sol = run({security: 1.0}, pins, "J6 at best J5")
        j6 = sol.value(security)
        pins.append(({security: 1.0}, Relation.LE, j6 + LEX_TOL))
    else:
        sol = run({security: 1.0}, [], "J6")
        j6 = sol.value(security)
        pins = [({security: 1.0}, Relation.LE, j6 + LEX_TOL)]
        sol = run(neg_wind, pins, "J5 at best J6")
        j5 = model.j5_of(sol)
        pins.append((dict(model.wind_total), Relation.GE, realized_total - j5 - LEX_TOL * (1.0 + j5)))
    profit: LinExpr = {}
    for expr in model.psi:
        for v, c in expr.items():
            profit[v] = profit.get(v, 0.0) - c
    return run(profit, pins, "profit")


def solve_intraday(
    case: GridCase,
    da: DayAheadSolution,
    realized: np.ndarray,
    criterion: str,
    eps_points: Optional[int] = None,
    config: Optional[SolverConfig] = None,
) -> IntradayOutcome:
    """
    Cooperative re-dispatch for one wind realization: an ε sweep over J6 of
    lexicographic (J5, J6, profit) solves, then the compromise point. No
    solve may curtail more wind than holding the day-ahead plan would.
    """
    config = config or case.solver
    n = case.scenarios.intraday_eps_points if eps_points is None else eps_points
    if n < 1:
        raise ValueError("eps_points must be >= 1")
    realized = _check_realized(case, realized)
    held = held_fixed_dispatch(case, da, realized)
    held_j5 = float((realized - held.wind).sum())
    model = build_intraday(case, da, realized, criterion, j5_cap=held_j5 + LEX_TOL * (1.0 + held_j5))

    while True:
        best_j5 = _solve_point(model, config, None, "j5")
        candidates = [best_j5]
        j6_max = best_j5.value(model.uc.security)
        if n > 1:
            best_j6 = _solve_point(model, config, None, "j6")
            j6_min = best_j6.value(model.uc.security)
            for eps in np.linspace(j6_min, j6_max, n)[1:-1].tolist():
                try:
                    candidates.append(_solve_point(model, config, eps, "j5"))
                except (InfeasibleError, SolverLimitError) as e:
                    logger.warning(f"intraday ε={eps:.4f} skipped: {e}")
            candidates.append(best_j6)

        dispatches = [model.dispatch(sol) for sol in candidates]
        objectives = [
            (
                float((realized - d.wind).sum()),
                max(1.0 - compute_asc(d.flows, case.network.ratings()), 0.0) if d.flows.size else 0.0,
            )
            for d in dispatches
        ]
        keep = non_dominated(objectives, tol=1e-9)
        front = [objectives[i] for i in keep]
        chosen = keep[pick_compromise(front)]
        dispatch = dispatches[chosen]
        ledger = updated_costs(case, da, realized, dispatch, criterion)
        rejected = [t for t, c in enumerate(ledger.criteria) if dispatch.cooperative[t] and c == NON_COOPERATIVE]
        if not rejected:
            break
        # a slot the exact ledger turns down is pinned to the day-ahead plan and the sweep rerun
        logger.info(f"intraday {criterion}: slots {rejected} have no rational split, solving again without them")
        for t in rejected:
            model.problem.fix(int(model.cooperate[t]), 0.0)
    logger.debug(f"intraday {criterion}: front {front}, compromise {objectives[chosen]}")
    return settle(case, da, realized, dispatch, criterion, front)


def slot_profit(model: IntradayModel, sol: MilpSolution) -> np.ndarray:
    """linearized ψ per slot, a lower bound on the exact one"""
    return np.array(
        [sum(c * sol.value(v) for v, c in expr.items()) + model.psi_constant[t] for t, expr in enumerate(model.psi)]
    )
