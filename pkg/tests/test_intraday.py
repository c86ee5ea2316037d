from typing import Dict, List

import numpy as np
import pytest

from pdscr.casefile import bundled_case_path, load_case
from pdscr.dayahead import solve_dayahead
from pdscr.exceptions import FrozenVariableError
from pdscr.intraday import (
    IntradayDispatch,
    IntradayOutcome,
    build_intraday,
    evaluate_fixed_dayahead,
    held_fixed_dispatch,
    settle,
    slot_profit,
    solve_intraday,
    updated_costs,
)
from pdscr.model import Branch, Bus, DayAheadSolution, DrSettings, GridCase, Network, ThermalUnit, WindFarm
from pdscr.pmp import PmpSchedule, PmpSystem
from pdscr.scenarios import lhs_sample
from pdscr.solver import require_optimal, solve

FUEL = (0.01, 20.0, 100.0)


def _toy_case() -> GridCase:
    network = Network([Bus(1, np.zeros(2)), Bus(2, np.full(2, 80.0))], [Branch(1, 2, 10.0, 200.0)])
    unit = ThermalUnit("G", 1, 1, *FUEL, 0.0, 100.0, 100.0, 100.0, 1, 1, initial_on=True, initial_hours=4)
    pmp = PmpSystem((1.0, 1.0), (5.0, 5.0), (1.0,), (1.0,), target=0.0, fixed_cost=0.0, horizon=2)
    return GridCase(
        name="toy",
        network=network,
        units=[unit],
        wind=[WindFarm("W", 2, np.full(2, 20.0))],
        pmp=pmp,
        pmp_bus=2,
        dr=DrSettings(price_tiers=(100.0,)),
    )


def _toy_dayahead() -> DayAheadSolution:
    return DayAheadSolution(
        status=np.ones((2, 1)),
        power=np.full((2, 1), 60.0),
        reserve=np.full((2, 1), 15.0),
        wind=np.full((2, 1), 20.0),
        prices=np.full(2, 100.0),
        tiers=np.zeros(2, dtype=int),
        theta=np.zeros((2, 2)),
        flows=np.full((2, 1), -20.0),
        pmp=PmpSchedule(np.zeros((2, 2)), np.zeros((2, 1))),
        j1=0.0,
        j2=0.1,
        j_pmp=0.0,
        curtailment=0.0,
    )


def _trial(da: DayAheadSolution, cuts: List[float], cooperative: List[bool]) -> IntradayDispatch:
    cut = np.asarray(cuts, dtype=float)[:, None]
    return IntradayDispatch(
        status=da.status.copy(),
        power=da.power - cut,
        reserve=da.reserve.copy(),
        wind=da.wind + cut,
        pmp=PmpSchedule(da.pmp.processed.copy(), da.pmp.buffered.copy()),
        purchase=np.zeros(2),
        prices=da.prices.copy(),
        flows=da.flows.copy(),
        cooperative=np.asarray(cooperative),
    )


def _fuel(p: float) -> float:
    a, b, c = FUEL
    return a * p * p + b * p + c


def test_null_response_books_nothing() -> None:
    case, da = _toy_case(), _toy_dayahead()
    ledger = updated_costs(case, da, case.forecast(), _trial(da, [0.0, 0.0], [True, True]), "equal")
    assert np.all(ledger.psi == 0.0)
    assert np.all(ledger.u == 0.0) and np.all(ledger.v == 0.0)
    assert np.all(ledger.incentives.budget == 0.0)


def test_absorbed_wind_profit_and_split() -> None:
    case, da = _toy_case(), _toy_dayahead()
    realized = np.array([[30.0], [20.0]])
    ledger = updated_costs(case, da, realized, _trial(da, [10.0, 0.0], [True, False]), "equal")
    expected = _fuel(60.0) - _fuel(50.0) + case.dr.commendation * 10.0
    assert ledger.psi[0] == pytest.approx(expected)
    assert ledger.u[0, 0] == pytest.approx(expected / 2)
    assert ledger.v[0] == pytest.approx(expected / 2)
    assert ledger.criteria == ["equal", "none"]
    assert ledger.psi[1] == 0.0
    assert ledger.identity_residual() <= 1e-9
    # the commendation paid out is exactly what the incentives hand over
    assert np.max(np.abs(ledger.incentives.budget_residual())) <= 1e-6
    assert ledger.incentives.budget[0] == pytest.approx(1500.0)

    rows = ledger.rows()
    assert rows[0]["criterion"] == "equal"
    assert rows[0]["plant_1"] == pytest.approx(expected / 2)


def test_contribution_with_raised_output_is_non_cooperative() -> None:
    case, da = _toy_case(), _toy_dayahead()
    realized = np.array([[15.0], [20.0]])
    trial = _trial(da, [-5.0, 0.0], [True, False])
    ledger = updated_costs(case, da, realized, trial, "contribution")
    assert ledger.criteria[0] == "none"
    assert ledger.u[0, 0] == 0.0


def test_reserve_purchase_cost() -> None:
    case, da = _toy_case(), _toy_dayahead()
    realized = np.array([[15.0], [20.0]])
    trial = _trial(da, [0.0, 0.0], [False, False])
    trial.wind = np.array([[15.0], [20.0]])
    trial.purchase = np.array([5.0, 0.0])
    ledger = updated_costs(case, da, realized, trial, "equal")
    assert ledger.purchase_cost[0] == pytest.approx(100.0)
    assert ledger.criteria == ["none", "none"]


def test_frozen_decisions() -> None:
    case, da = _toy_case(), _toy_dayahead()
    realized = case.forecast()
    moved_status = _trial(da, [0.0, 0.0], [True, True])
    moved_status.status = np.array([[1.0], [0.0]])
    with pytest.raises(FrozenVariableError):
        updated_costs(case, da, realized, moved_status, "equal")
    repriced = _trial(da, [0.0, 0.0], [True, True])
    repriced.prices = np.array([100.0, 50.0])
    with pytest.raises(FrozenVariableError):
        updated_costs(case, da, realized, repriced, "equal")
    with pytest.raises(FrozenVariableError):
        updated_costs(case, da, np.array([[60.0], [20.0]]), _trial(da, [40.0, 0.0], [True, True]), "equal")


def test_midpoint_profiles_are_realizable() -> None:
    case, da = _toy_case(), _toy_dayahead()
    realized = np.full((2, 1), 40.0)
    rng = np.random.default_rng(3)
    for _ in range(1000):
        a, b = rng.uniform(0.0, 15.0, 2), rng.uniform(0.0, 15.0, 2)
        la = updated_costs(case, da, realized, _trial(da, list(a), [True, True]), "equal")
        lb = updated_costs(case, da, realized, _trial(da, list(b), [True, True]), "equal")
        lm = updated_costs(case, da, realized, _trial(da, list((a + b) / 2), [True, True]), "equal")
        # the midpoint dispatch gives every party at least the averaged gain
        assert np.all(lm.u >= (la.u + lb.u) / 2 - 1e-4)
        assert np.all(lm.v >= (la.v + lb.v) / 2 - 1e-4)


def test_held_fixed_buys_the_deficit() -> None:
    case, da = _toy_case(), _toy_dayahead()
    realized = np.array([[10.0], [25.0]])
    dispatch = held_fixed_dispatch(case, da, realized)
    assert dispatch.purchase.tolist() == pytest.approx([10.0, 0.0])
    assert dispatch.wind[:, 0].tolist() == [10.0, 20.0]
    outcome = evaluate_fixed_dayahead(case, da, realized)
    assert outcome.criterion == "none"
    # 5 MW of surplus wind is curtailed in the second slot
    assert outcome.j5 == pytest.approx(5.0)
    assert outcome.ledger.purchase_cost[0] == pytest.approx(200.0)


def _check_ledger(outcome: IntradayOutcome) -> None:
    ledger = outcome.ledger
    scale = 1.0 + float(np.max(np.abs(ledger.psi)))
    assert ledger.identity_residual() <= 1e-9 * scale
    assert np.max(np.abs(ledger.incentives.budget_residual())) <= 1e-6 * scale
    coop = np.array([c != "none" for c in ledger.criteria])
    assert np.all(ledger.u[coop] >= -1e-9)
    assert np.all(ledger.v[coop] >= -1e-9)
    assert np.all(ledger.psi[~coop] == 0.0)


@pytest.mark.slow
def test_intraday_beats_holding_the_dayahead_plan() -> None:
    case = load_case(bundled_case_path())
    da = solve_dayahead(case)
    scenarios = lhs_sample(case.forecast(), 0.08, 20, seed=case.scenarios.seed)

    # forecast wind: nothing to gain, nothing lost
    same = solve_intraday(case, da, case.forecast(), "equal", eps_points=1)
    assert same.j5 <= da.curtailment + 1e-5
    assert np.array_equal(same.dispatch.prices, da.prices)
    assert np.array_equal(same.dispatch.status, da.status)

    for criterion in ("equal", "contribution"):
        no_worse = 0
        held_costs, coop_costs = [], []
        for k in range(scenarios.count):
            realized = scenarios.scenario(k)
            held = evaluate_fixed_dayahead(case, da, realized)
            coop = solve_intraday(case, da, realized, criterion, eps_points=1)
            _check_ledger(coop)
            if coop.j5 <= held.j5 + 1e-6:
                no_worse += 1
            held_costs.append(held.total_cost)
            coop_costs.append(coop.total_cost)
        assert no_worse >= 18
        assert np.mean(coop_costs) < np.mean(held_costs)


def test_rejected_slot_runs_the_held_plan() -> None:
    case, da = _toy_case(), _toy_dayahead()
    realized = case.forecast()
    # slot 0 raises thermal output to spill 5 MW of wind: no rational split
    outcome = settle(case, da, realized, _trial(da, [-5.0, 0.0], [True, False]), "equal")
    held = evaluate_fixed_dayahead(case, da, realized)
    assert outcome.ledger.criteria == ["none", "none"]
    assert outcome.dispatch.power[:, 0].tolist() == [60.0, 60.0]
    assert outcome.dispatch.wind[:, 0].tolist() == [20.0, 20.0]
    assert outcome.j5 == pytest.approx(0.0)
    assert outcome.total_cost == pytest.approx(held.total_cost)
    assert not outcome.dispatch.cooperative.any()


def test_only_the_rejected_slot_is_reverted() -> None:
    case, da = _toy_case(), _toy_dayahead()
    realized = np.array([[30.0], [20.0]])
    trial = _trial(da, [10.0, -5.0], [True, True])
    outcome = settle(case, da, realized, trial, "equal")
    assert outcome.ledger.criteria == ["equal", "none"]
    assert outcome.dispatch.power[:, 0].tolist() == [50.0, 60.0]
    assert outcome.dispatch.wind[:, 0].tolist() == [30.0, 20.0]
    assert outcome.dispatch.cooperative.tolist() == [True, False]
    assert outcome.j5 == pytest.approx(0.0)
    # the trial itself is left alone
    assert trial.power[1, 0] == 65.0
    _check_ledger(outcome)


def test_linearized_profit_never_exceeds_the_exact_one() -> None:
    case, da = _toy_case(), _toy_dayahead()
    s = case.dr.commendation
    for realized in (np.array([[30.0], [20.0]]), np.array([[35.0], [28.0]]), np.array([[12.0], [20.0]])):
        model = build_intraday(case, da, realized, "equal")
        problem = model.problem.copy()
        profit: Dict[int, float] = {}
        for expr in model.psi:
            for v, c in expr.items():
                profit[v] = profit.get(v, 0.0) - c
        problem.set_objective(profit)
        sol = require_optimal(solve(problem), "most profitable re-dispatch")
        linear = slot_profit(model, sol)
        ledger = updated_costs(case, da, realized, model.dispatch(sol), "equal")
        exact = ledger.fuel_savings + s * ledger.delta_wind - ledger.purchase_cost
        assert np.all(exact >= linear - 1e-6)
