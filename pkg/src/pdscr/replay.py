"""
Re-checks a day-ahead dispatch against the physical and market rules from
the raw arrays, without going through the constraint builders
"""

from dataclasses import dataclass
from typing import List, Dict, Any

import numpy as np

from .model import GridCase, DayAheadSolution

TOL = 1e-5


@dataclass(frozen=True)
class Violation:
    family: str
    slot: int
    element: str
    amount: float

    def __str__(self) -> str:
        return f"{self.family} slot {self.slot} {self.element}: off by {self.amount:.3g}"

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "slot": self.slot, "element": self.element, "amount": self.amount}


class _Collector:
    def __init__(self, tol: float) -> None:
        self.tol = tol
        self.found: List[Violation] = []

    def le(self, family: str, slot: int, element: str, lhs: float, rhs: float, scale: float = 1.0) -> None:
        excess = lhs - rhs
        if excess > self.tol * max(1.0, abs(scale)):
            self.found.append(Violation(family, slot, element, float(excess)))

    def eq(self, family: str, slot: int, element: str, lhs: float, rhs: float, scale: float = 1.0) -> None:
        gap = abs(lhs - rhs)
        if gap > self.tol * max(1.0, abs(scale)):
            self.found.append(Violation(family, slot, element, float(gap)))


def _check_commitment(case: GridCase, sol: DayAheadSolution, out: _Collector) -> None:
    T = case.horizon
    for p, u in enumerate(case.units):
        s = sol.status[:, p]
        for t in range(T):
            if min(abs(s[t]), abs(s[t] - 1.0)) > 1e-6:
                out.found.append(Violation("status", t, u.name, float(s[t])))
        on = np.round(s).astype(int)
        history = [1 if u.initial_on else 0] + on.tolist()
        for t in range(T):
            started = history[t + 1] == 1 and history[t] == 0
            stopped = history[t + 1] == 0 and history[t] == 1
            if started:
                for n in range(t, min(T, t + u.min_up)):
                    if on[n] == 0:
                        out.found.append(Violation("min-up", n, u.name, 1.0))
            if stopped:
                for n in range(t, min(T, t + u.min_down)):
                    if on[n] == 1:
                        out.found.append(Violation("min-down", n, u.name, 1.0))
        # state carried in from before the first slot
        if u.initial_on and 0 < u.initial_hours < u.min_up:
            for n in range(min(T, u.min_up - u.initial_hours)):
                if on[n] == 0:
                    out.found.append(Violation("min-up", n, u.name, 1.0))
        off_before = u.initial_hours if u.initial_hours > 0 else u.min_down
        if not u.initial_on and off_before < u.min_down:
            for n in range(min(T, u.min_down - off_before)):
                if on[n] == 1:
                    out.found.append(Violation("min-down", n, u.name, 1.0))


def _check_output(case: GridCase, sol: DayAheadSolution, out: _Collector) -> None:
    T = case.horizon
    forecast_total = sum(w.forecast for w in case.wind) if case.wind else np.zeros(T)
    for t in range(T):
        for p, u in enumerate(case.units):
            s = round(float(sol.status[t, p]))
            P = float(sol.power[t, p])
            R = float(sol.reserve[t, p])
            out.le("capacity", t, u.name, P, u.p_max * s, u.p_max)
            out.le("capacity", t, u.name, u.p_min * s, P, u.p_max)
            out.le("reserve", t, u.name, -R, 0.0)
            out.le("reserve", t, u.name, P + R, u.p_max * s, u.p_max)
            if t > 0:
                prev_s = round(float(sol.status[t - 1, p]))
                prev_P = float(sol.power[t - 1, p])
                up_limit = u.ramp_up if prev_s else max(u.p_min, u.ramp_up)
                down_limit = u.ramp_down if s else max(u.p_min, u.ramp_down)
                out.le("ramp-up", t, u.name, P - prev_P, up_limit, u.p_max)
                out.le("ramp-down", t, u.name, prev_P - P, down_limit, u.p_max)
        out.le(
            "reserve-requirement",
            t,
            "system",
            case.network.beta * float(forecast_total[t]),
            float(sol.reserve[t].sum()),
            float(forecast_total[t]),
        )
        for l, farm in enumerate(case.wind):
            w = float(sol.wind[t, l])
            out.le("wind", t, farm.name, -w, 0.0)
            out.le("wind", t, farm.name, w, float(farm.forecast[t]), float(farm.forecast[t]))


def _pmp_demand(case: GridCase, sol: DayAheadSolution) -> np.ndarray:
    return sol.pmp.processed @ np.asarray(case.pmp.procedure_power_mw) + sol.pmp.buffered @ np.asarray(
        case.pmp.buffer_power_mw
    )


def _check_network(case: GridCase, sol: DayAheadSolution, out: _Collector) -> None:
    T = case.horizon
    net = case.network
    index = {b.id: n for n, b in enumerate(net.buses)}
    demand = _pmp_demand(case, sol)
    for t in range(T):
        nodal = np.zeros(len(net.buses))
        for n, bus in enumerate(net.buses):
            nodal[n] -= float(bus.load[t])
        for p, u in enumerate(case.units):
            nodal[index[u.bus]] += float(sol.power[t, p])
        for l, farm in enumerate(case.wind):
            nodal[index[farm.bus]] += float(sol.wind[t, l])
        nodal[index[case.pmp_bus]] -= float(demand[t])
        scale = float(np.abs(nodal).max()) if nodal.size else 1.0
        out.eq("balance", t, "system", float(nodal.sum()), 0.0, scale)
        out.eq("slack-angle", t, str(case.slack_bus), float(sol.theta[t, index[case.slack_bus]]), 0.0)
        for j, br in enumerate(net.branches):
            f = float(sol.flows[t, j])
            expected = br.susceptance * (sol.theta[t, index[br.from_bus]] - sol.theta[t, index[br.to_bus]])
            out.eq("dc-flow", t, f"{br.from_bus}-{br.to_bus}", f, float(expected), br.rating)
            out.le("line-limit", t, f"{br.from_bus}-{br.to_bus}", abs(f), br.rating * sol.j2, br.rating)
            nodal[index[br.from_bus]] -= f
            nodal[index[br.to_bus]] += f
        for n, bus in enumerate(net.buses):
            out.eq("nodal-balance", t, str(bus.id), float(nodal[n]), 0.0, scale)


def _check_pmp(case: GridCase, sol: DayAheadSolution, out: _Collector) -> None:
    sysm = case.pmp
    T, R = sysm.horizon, sysm.procedures
    P, B = sol.pmp.processed, sol.pmp.buffered
    for t in range(T):
        for i in range(R):
            out.le("projects", t, f"procedure {i}", -P[t, i], 0.0)
            out.le("projects", t, f"procedure {i}", P[t, i], sysm.procedure_max[i])
        for i in range(R - 1):
            out.le("buffer", t, f"buffer {i}", -B[t, i], 0.0)
            out.le("buffer", t, f"buffer {i}", B[t, i], sysm.buffer_max[i])
            if t + 1 < T:
                out.le("project-flow", t, f"procedure {i + 1}", P[t + 1, i + 1], B[t, i] + sysm.procedure_max[i])
            after = B[t + 1, i] if t + 1 < T else 0.0
            out.eq("buffer-balance", t, f"buffer {i}", B[t, i] + P[t, i], P[t, i + 1] + after)
    out.le("target", T - 1, "production", sysm.target, float(P[:, R - 1].sum()), sysm.target)
    out.eq("empty-end", T - 1, "line", float(P[T - 1, : R - 1].sum() + B[T - 1].sum()), 0.0)
    out.eq("empty-start", 0, "line", float(P[0, 1:].sum() + B[0].sum()), 0.0)


def _check_costs(case: GridCase, sol: DayAheadSolution, out: _Collector) -> None:
    fuel = 0.0
    start = 0.0
    for p, u in enumerate(case.units):
        was_on = bool(u.initial_on)
        off = 0 if u.initial_on else (u.initial_hours if u.initial_hours > 0 else u.min_down)
        for t in range(case.horizon):
            on = round(float(sol.status[t, p])) == 1
            if on:
                P = float(sol.power[t, p])
                fuel += u.a * P * P + u.b * P + u.c
                if not was_on:
                    start += u.start_cost(off)
                off = 0
            else:
                off += 1
            was_on = on
    out.eq("j1", case.horizon - 1, "fuel+start", sol.j1, fuel + start, fuel + start)
    allowed = set(round(x, 9) for x in case.dr.price_tiers)
    for t, price in enumerate(sol.prices):
        if round(float(price), 9) not in allowed:
            out.found.append(Violation("price-tier", t, "tariff", float(price)))
    bill = float(np.dot(sol.prices, _pmp_demand(case, sol))) + case.pmp.fixed_cost
    out.eq("j-pmp", case.horizon - 1, "bill", sol.j_pmp, bill, bill)


def replay_dayahead(case: GridCase, solution: DayAheadSolution, tol: float = TOL) -> List[Violation]:
    """
    Every rule the dispatch breaks, by family, slot and element;
    an empty list means the dispatch is valid
    """
    out = _Collector(tol)
    _check_commitment(case, solution, out)
    _check_output(case, solution, out)
    _check_network(case, solution, out)
    _check_pmp(case, solution, out)
    _check_costs(case, solution, out)
    return out.found
