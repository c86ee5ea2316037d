"""
Transmission grid and thermal fleet

Constraint builders for unit commitment with a DC network, plus the exact
evaluations (fuel, start-up cost, power flow, security coefficient) that
reporting uses instead of the linearized forms.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp  # type: ignore[import]
from scipy.sparse.csgraph import connected_components  # type: ignore[import]
from scipy.sparse.linalg import spsolve  # type: ignore[import]

from .exceptions import StructuralError
from .model import GridCase, Network, ThermalUnit
from .solver import MilpProblem, MilpSolution, Relation, LinExpr, linearize_quadratic

BALANCE_TOL = 1e-6


def fuel_cost(unit: ThermalUnit, power: float, status: float = 1.0) -> float:
    """
    Exact quadratic fuel cost, zero when the unit is off

    >>> u = ThermalUnit("g", 1, 1, 0.01, 20.0, 100.0, 0, 100, 100, 100, 1, 1)
    >>> fuel_cost(u, 50.0)
    1125.0
    >>> fuel_cost(u, 0.0, status=0)
    0.0
    """
    if status < 0.5:
        return 0.0
    return unit.fuel(power)


def startup_costs(unit: ThermalUnit, status: Sequence[float]) -> np.ndarray:
    """
    Per-slot start-up cost of a status trajectory; a start after h hours off
    costs α + β·(1 − exp(−h/τ))

    >>> u = ThermalUnit("g", 1, 1, 0, 10, 0, 0, 50, 50, 50, 1, 1, 100.0, 50.0, 2.0, initial_on=True)
    >>> startup_costs(u, [1, 0, 0, 1]).round(3).tolist()
    [0.0, 0.0, 0.0, 131.606]
    """
    s = np.round(np.asarray(status, dtype=float)).astype(int)
    out = np.zeros(len(s))
    prev = 1 if unit.initial_on else 0
    off = unit.initial_off_hours()
    for t, on in enumerate(s):
        if on and not prev:
            out[t] = unit.start_cost(off)
        off = 0 if on else off + 1
        prev = on
    return out


def _prehistory(unit: ThermalUnit, k: int) -> int:
    """status k slots before the first one (k ≥ 1)"""
    if unit.initial_on:
        return 1
    return 0 if k <= unit.initial_off_hours() else 1


def _incidence(network: Network) -> sp.csr_matrix:
    pos = network.bus_position()
    rows, cols, vals = [], [], []
    for j, br in enumerate(network.branches):
        rows += [j, j]
        cols += [pos[br.from_bus], pos[br.to_bus]]
        vals += [1.0, -1.0]
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(network.branches), len(network.buses)))


def check_connected(network: Network) -> None:
    a = _incidence(network)
    adjacency = (abs(a.T) @ abs(a)).tocsr()
    n, _ = connected_components(adjacency, directed=False)
    if n != 1:
        raise StructuralError(f"network is split into {n} islands, a DC power flow needs one")


def dc_flow(network: Network, injections: np.ndarray, slack_bus: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solves B·θ = P for net bus injections (slots x buses, or one slot), with
    the slack angle at zero. Returns (branch flows, angles) in the same shape
    convention; flows are positive from→to.

    >>> from pdscr.model import Bus, Branch
    >>> net = Network([Bus(1, np.zeros(1)), Bus(2, np.zeros(1))], [Branch(1, 2, 10.0, 100.0)])
    >>> flows, _ = dc_flow(net, np.array([10.0, -10.0]), slack_bus=1)
    >>> flows.round(6).tolist()
    [10.0]
    """
    p = np.asarray(injections, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    imbalance = np.abs(p.sum(axis=1))
    if np.any(imbalance > BALANCE_TOL):
        raise ValueError(f"injections do not balance (worst slot off by {imbalance.max():.3g} MW)")
    check_connected(network)
    pos = network.bus_position()
    if slack_bus not in pos:
        raise ValueError(f"slack bus {slack_bus} is not in the network")
    slack = pos[slack_bus]
    a = _incidence(network)
    b = sp.diags([br.susceptance for br in network.branches])
    bbus = (a.T @ b @ a).tocsc()
    keep = [n for n in range(len(network.buses)) if n != slack]
    reduced = bbus[keep, :][:, keep]
    theta = np.zeros_like(p)
    if keep:
        sol = spsolve(reduced, p[:, keep].T)
        theta[:, keep] = np.asarray(sol).reshape(len(keep), -1).T
    if not np.all(np.isfinite(theta)):
        raise StructuralError("susceptance matrix is singular")
    flows = (b @ a @ theta.T).T
    if single:
        return flows[0], theta[0]
    return flows, theta


def compute_asc(flows: np.ndarray, ratings: np.ndarray) -> float:
    """
    Security coefficient: worst relative branch margin over the horizon

    >>> compute_asc(np.array([[60.0], [-30.0]]), np.array([100.0]))
    0.4
    """
    f = np.atleast_2d(np.asarray(flows, dtype=float))
    r = np.asarray(ratings, dtype=float)
    if np.any(r <= 0):
        raise ValueError("branch ratings must be positive")
    if f.size == 0:
        return 1.0
    peak = np.max(np.abs(f), axis=0)
    return float(np.min((r - peak) / r))


def net_injections(
    case: GridCase,
    power: np.ndarray,
    wind: np.ndarray,
    pmp_demand: np.ndarray,
    purchase: Optional[np.ndarray] = None,
) -> np.ndarray:
    """(T, buses) generation minus load for a dispatch"""
    pos = case.network.bus_position()
    inj = -case.loads()
    for p, unit in enumerate(case.units):
        inj[:, pos[unit.bus]] += power[:, p]
    for l, farm in enumerate(case.wind):
        inj[:, pos[farm.bus]] += wind[:, l]
    inj[:, pos[case.pmp_bus]] -= pmp_demand
    if purchase is not None:
        inj[:, pos[case.reserve_bus]] += purchase
    return inj


@dataclass
class UcVariables:
    """
    Variable indices of the unit-commitment block; status/startup/shutdown/
    start_cost are None when the commitment was given as data
    """

    power: np.ndarray
    wind: np.ndarray
    theta: np.ndarray
    flow: np.ndarray
    security: int
    status: Optional[np.ndarray] = None
    startup: Optional[np.ndarray] = None
    shutdown: Optional[np.ndarray] = None
    start_cost: Optional[np.ndarray] = None
    reserve: Optional[np.ndarray] = None
    purchase: Optional[np.ndarray] = None
    fixed_status: Optional[np.ndarray] = None

    def commitment(self, sol: MilpSolution) -> np.ndarray:
        if self.status is not None:
            return np.round(sol.take(self.status))
        assert self.fixed_status is not None
        return self.fixed_status.copy()


def build_uc_constraints(
    problem: MilpProblem,
    case: GridCase,
    wind_cap: np.ndarray,
    pmp_demand: Optional[Sequence[LinExpr]] = None,
    pmp_fixed_mw: Optional[np.ndarray] = None,
    commitment: Optional[np.ndarray] = None,
    reserves: bool = True,
    purchase: bool = False,
    security_cap: Optional[float] = 1.0,
    prefix: str = "uc",
) -> UcVariables:
    """
    Adds commitment logic, capacity, ramping, wind caps, nodal balance with
    the producer's demand, reserve window and DC flow with the security
    epigraph |flow| ≤ rating·J2.

    pmp_demand gives the producer's MW per slot as expressions,
    pmp_fixed_mw as data. A given commitment (T x units) is used as data and
    no status binaries or reserve variables are created.
    """
    T = case.horizon
    units, net = case.units, case.network
    n_units = len(units)
    cap = np.asarray(wind_cap, dtype=float).reshape(T, len(case.wind))
    if np.any(cap < 0):
        raise ValueError("wind caps must be non-negative")

    if commitment is None:
        status = np.array([[problem.add_binary(f"{prefix}_s[{t},{p}]") for p in range(n_units)] for t in range(T)])
        startup = np.array(
            [[problem.add_variable(f"{prefix}_y[{t},{p}]", 0.0, 1.0) for p in range(n_units)] for t in range(T)]
        )
        shutdown = np.array(
            [[problem.add_variable(f"{prefix}_z[{t},{p}]", 0.0, 1.0) for p in range(n_units)] for t in range(T)]
        )
        start_cost = np.array(
            [[problem.add_variable(f"{prefix}_su[{t},{p}]", 0.0) for p in range(n_units)] for t in range(T)]
        )
        fixed = None
    else:
        status = startup = shutdown = start_cost = None
        fixed = np.round(np.asarray(commitment, dtype=float)).reshape(T, n_units)

    power = np.zeros((T, n_units), dtype=int)
    for t in range(T):
        for p, u in enumerate(units):
            if fixed is None:
                power[t, p] = problem.add_variable(f"{prefix}_P[{t},{p}]", 0.0, u.p_max)
            elif fixed[t, p] > 0.5:
                power[t, p] = problem.add_variable(f"{prefix}_P[{t},{p}]", u.p_min, u.p_max)
            else:
                power[t, p] = problem.add_variable(f"{prefix}_P[{t},{p}]", 0.0, 0.0)
    wind = np.array(
        [[problem.add_variable(f"{prefix}_W[{t},{l}]", 0.0, cap[t, l]) for l in range(len(case.wind))] for t in range(T)],
        dtype=int,
    ).reshape(T, len(case.wind))
    slack = case.slack_bus
    theta = np.zeros((T, len(net.buses)), dtype=int)
    for t in range(T):
        for n, b in enumerate(net.buses):
            bound = 0.0 if b.id == slack else math.inf
            theta[t, n] = problem.add_variable(f"{prefix}_th[{t},{b.id}]", -bound, bound)
    flow = np.array(
        [[problem.add_variable(f"{prefix}_f[{t},{j}]", -math.inf, math.inf) for j in range(len(net.branches))] for t in range(T)],
        dtype=int,
    ).reshape(T, len(net.branches))
    security = problem.add_variable(f"{prefix}_J2", 0.0, math.inf if security_cap is None else security_cap)
    purchases = (
        np.array([problem.add_variable(f"{prefix}_out[{t}]", 0.0) for t in range(T)], dtype=int) if purchase else None
    )

    uv = UcVariables(
        power=power,
        wind=wind,
        theta=theta,
        flow=flow,
        security=security,
        status=status,
        startup=startup,
        shutdown=shutdown,
        start_cost=start_cost,
        purchase=purchases,
        fixed_status=fixed,
    )

    if status is not None:
        _add_commitment_rows(problem, case, uv, prefix)
    _add_ramps(problem, case, uv, prefix)
    if reserves:
        uv.reserve = _add_reserves(problem, case, uv, prefix)
    _add_network(problem, case, uv, pmp_demand, pmp_fixed_mw, prefix)
    return uv


def _add_commitment_rows(problem: MilpProblem, case: GridCase, uv: UcVariables, prefix: str) -> None:
    assert uv.status is not None and uv.startup is not None and uv.shutdown is not None and uv.start_cost is not None
    T = case.horizon
    for p, u in enumerate(case.units):
        s, y, z = uv.status[:, p], uv.startup[:, p], uv.shutdown[:, p]
        init = 1 if u.initial_on else 0
        for t in range(T):
            coefs: LinExpr = {int(y[t]): 1.0, int(z[t]): -1.0, int(s[t]): -1.0}
            rhs = -float(init)
            if t > 0:
                coefs[int(s[t - 1])] = 1.0
                rhs = 0.0
            problem.add_constraint(coefs, Relation.EQ, rhs, f"{prefix}_trans[{t},{p}]")
            problem.add_constraint({int(y[t]): 1.0, int(z[t]): 1.0}, Relation.LE, 1.0, f"{prefix}_onechg[{t},{p}]")
            # windowed minimum up/down
            up = {int(y[n]): 1.0 for n in range(max(0, t - u.min_up + 1), t + 1)}
            up[int(s[t])] = up.get(int(s[t]), 0.0) - 1.0
            problem.add_constraint(up, Relation.LE, 0.0, f"{prefix}_minup[{t},{p}]")
            down = {int(z[n]): 1.0 for n in range(max(0, t - u.min_down + 1), t + 1)}
            down[int(s[t])] = down.get(int(s[t]), 0.0) + 1.0
            problem.add_constraint(down, Relation.LE, 1.0, f"{prefix}_mindn[{t},{p}]")
            # capacity
            problem.add_constraint(
                {int(uv.power[t, p]): 1.0, int(s[t]): -u.p_max}, Relation.LE, 0.0, f"{prefix}_pmax[{t},{p}]"
            )
            problem.add_constraint(
                {int(uv.power[t, p]): 1.0, int(s[t]): -u.p_min}, Relation.GE, 0.0, f"{prefix}_pmin[{t},{p}]"
            )
        # must-run / must-stay-off carried over from before the horizon
        if u.initial_on and 0 < u.initial_hours < u.min_up:
            for t in range(min(T, u.min_up - u.initial_hours)):
                problem.set_bounds(int(s[t]), 1.0, 1.0)
        if not u.initial_on and u.initial_off_hours() < u.min_down:
            for t in range(min(T, u.min_down - u.initial_off_hours())):
                problem.set_bounds(int(s[t]), 0.0, 0.0)
        _add_start_cost_rows(problem, case, uv, p, prefix)


def _add_start_cost_rows(problem: MilpProblem, case: GridCase, uv: UcVariables, p: int, prefix: str) -> None:
    assert uv.status is not None and uv.start_cost is not None
    u = case.units[p]
    if u.startup_alpha == 0.0 and u.startup_beta == 0.0:
        return
    T = case.horizon
    levels = T + u.initial_off_hours()
    for t in range(T):
        for h in range(1, levels + 1):
            k_h = u.start_cost(h)
            # cost_t ≥ K_h·(s_t − Σ_{n=1..h} s_{t−n}); pre-horizon statuses are data
            coefs: LinExpr = {int(uv.start_cost[t, p]): 1.0, int(uv.status[t, p]): -k_h}
            known = 0
            for n in range(1, h + 1):
                if t - n >= 0:
                    idx = int(uv.status[t - n, p])
                    coefs[idx] = coefs.get(idx, 0.0) + k_h
                else:
                    known += _prehistory(u, n - t)
            if known > 0:
                # already switched on within the window, row cannot bind
                continue
            problem.add_constraint(coefs, Relation.GE, 0.0, f"{prefix}_sucost[{t},{p},{h}]")


def _status_term(uv: UcVariables, t: int, p: int) -> Tuple[LinExpr, float]:
    """s(t,p) as (expression, constant)"""
    if uv.status is not None:
        return {int(uv.status[t, p]): 1.0}, 0.0
    assert uv.fixed_status is not None
    return {}, float(uv.fixed_status[t, p])


def _add_ramps(problem: MilpProblem, case: GridCase, uv: UcVariables, prefix: str) -> None:
    for p, u in enumerate(case.units):
        su = max(u.p_min, u.ramp_up)
        sd = max(u.p_min, u.ramp_down)
        for t in range(1, case.horizon):
            # P_t − P_{t−1} ≤ r_u·s_{t−1} + SU·(1 − s_{t−1})
            expr, const = _status_term(uv, t - 1, p)
            coefs: LinExpr = {int(uv.power[t, p]): 1.0, int(uv.power[t - 1, p]): -1.0}
            for v, c in expr.items():
                coefs[v] = coefs.get(v, 0.0) - (u.ramp_up - su) * c
            problem.add_constraint(coefs, Relation.LE, su + (u.ramp_up - su) * const, f"{prefix}_rampup[{t},{p}]")
            # P_{t−1} − P_t ≤ r_d·s_t + SD·(1 − s_t)
            expr, const = _status_term(uv, t, p)
            coefs = {int(uv.power[t - 1, p]): 1.0, int(uv.power[t, p]): -1.0}
            for v, c in expr.items():
                coefs[v] = coefs.get(v, 0.0) - (u.ramp_down - sd) * c
            problem.add_constraint(coefs, Relation.LE, sd + (u.ramp_down - sd) * const, f"{prefix}_rampdn[{t},{p}]")


def _add_reserves(problem: MilpProblem, case: GridCase, uv: UcVariables, prefix: str) -> np.ndarray:
    T, n_units = case.horizon, len(case.units)
    reserve = np.array(
        [[problem.add_variable(f"{prefix}_R[{t},{p}]", 0.0) for p in range(n_units)] for t in range(T)], dtype=int
    ).reshape(T, n_units)
    forecast = case.forecast().sum(axis=1)
    for t in range(T):
        for p, u in enumerate(case.units):
            # R ≤ P_max·s − P
            expr, const = _status_term(uv, t, p)
            coefs: LinExpr = {int(reserve[t, p]): 1.0, int(uv.power[t, p]): 1.0}
            for v, c in expr.items():
                coefs[v] = coefs.get(v, 0.0) - u.p_max * c
            problem.add_constraint(coefs, Relation.LE, u.p_max * const, f"{prefix}_rsv[{t},{p}]")
        problem.add_constraint(
            {int(r): 1.0 for r in reserve[t]},
            Relation.GE,
            case.network.beta * float(forecast[t]),
            f"{prefix}_rsvreq[{t}]",
        )
    return reserve


def _add_network(
    problem: MilpProblem,
    case: GridCase,
    uv: UcVariables,
    pmp_demand: Optional[Sequence[LinExpr]],
    pmp_fixed_mw: Optional[np.ndarray],
    prefix: str,
) -> None:
    net = case.network
    pos = net.bus_position()
    loads = case.loads()
    fixed_pmp = np.zeros(case.horizon) if pmp_fixed_mw is None else np.asarray(pmp_fixed_mw, dtype=float)
    for t in range(case.horizon):
        rows: List[LinExpr] = [{} for _ in net.buses]

        def add(n: int, var: int, c: float) -> None:
            rows[n][var] = rows[n].get(var, 0.0) + c

        for p, u in enumerate(case.units):
            add(pos[u.bus], int(uv.power[t, p]), 1.0)
        for l, farm in enumerate(case.wind):
            add(pos[farm.bus], int(uv.wind[t, l]), 1.0)
        if uv.purchase is not None:
            add(pos[case.reserve_bus], int(uv.purchase[t]), 1.0)
        if pmp_demand is not None:
            for var, c in pmp_demand[t].items():
                add(pos[case.pmp_bus], var, -c)
        for j, br in enumerate(net.branches):
            f = int(uv.flow[t, j])
            add(pos[br.from_bus], f, -1.0)
            add(pos[br.to_bus], f, 1.0)
            # f = b·(θ_from − θ_to)
            problem.add_constraint(
                {f: 1.0, int(uv.theta[t, pos[br.from_bus]]): -br.susceptance, int(uv.theta[t, pos[br.to_bus]]): br.susceptance},
                Relation.EQ,
                0.0,
                f"{prefix}_dc[{t},{j}]",
            )
            problem.add_constraint({f: 1.0, uv.security: -br.rating}, Relation.LE, 0.0, f"{prefix}_lim+[{t},{j}]")
            problem.add_constraint({f: -1.0, uv.security: -br.rating}, Relation.LE, 0.0, f"{prefix}_lim-[{t},{j}]")
        for n, bus in enumerate(net.buses):
            rhs = float(loads[t, n]) + (float(fixed_pmp[t]) if bus.id == case.pmp_bus else 0.0)
            problem.add_constraint(rows[n], Relation.EQ, rhs, f"{prefix}_bal[{t},{bus.id}]")


def add_fuel_epigraphs(problem: MilpProblem, case: GridCase, uv: UcVariables, segments: int) -> np.ndarray:
    """Piecewise overestimate of every unit's fuel cost, switched by its status; returns (T, units) indices"""
    T = case.horizon
    epi = np.zeros((T, len(case.units)), dtype=int)
    for p, u in enumerate(case.units):
        block = linearize_quadratic(u.a, u.b, u.c, u.p_min, u.p_max, segments)
        for t in range(T):
            if uv.status is not None:
                epi[t, p] = problem.add_piecewise(int(uv.power[t, p]), block, int(uv.status[t, p]), f"fuel[{t},{p}]")
            elif uv.fixed_status is not None and uv.fixed_status[t, p] > 0.5:
                epi[t, p] = problem.add_piecewise(int(uv.power[t, p]), block, None, f"fuel[{t},{p}]")
            else:
                epi[t, p] = problem.add_variable(f"fuel[{t},{p}]_f", 0.0, 0.0)
    return epi


def total_fuel(case: GridCase, power: np.ndarray, status: np.ndarray) -> np.ndarray:
    """(T, units) exact fuel cost"""
    out = np.zeros_like(power, dtype=float)
    for p, u in enumerate(case.units):
        for t in range(power.shape[0]):
            out[t, p] = fuel_cost(u, float(power[t, p]), float(status[t, p]))
    return out


def total_startup(case: GridCase, status: np.ndarray) -> np.ndarray:
    """(T, units) exact start-up cost"""
    return np.stack([startup_costs(u, status[:, p]) for p, u in enumerate(case.units)], axis=1)
