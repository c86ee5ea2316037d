import itertools
import os
import shutil
import tempfile
from types import SimpleNamespace
from typing import Any, List

import numpy as np
import pytest

from pdscr.exceptions import InfeasibleError, SolverConfigError, SolverLimitError
from pdscr.solver import (
    MilpProblem,
    Relation,
    Sense,
    SolverConfig,
    SolveStatus,
    add_complementarity,
    linearize_quadratic,
    quadratic_error_bound,
    require_optimal,
    row_range,
    solve,
    solve_lp,
    solve_milp,
)
from pdscr.solver import engine


def _knapsack() -> MilpProblem:
    p = MilpProblem("knapsack", Sense.MAXIMIZE)
    a, b, c = p.add_binary("a"), p.add_binary("b"), p.add_binary("c")
    p.add_constraint({a: 2.0, b: 3.0, c: 1.0}, Relation.LE, 5.0, "weight")
    p.set_objective({a: 5.0, b: 4.0, c: 3.0})
    return p


def test_lp_objective_and_duals() -> None:
    p = MilpProblem("cover")
    x = p.add_variable("x")
    y = p.add_variable("y")
    row = p.add_constraint({x: 1.0, y: 1.0}, Relation.GE, 4.0, "demand")
    p.set_objective({x: 1.0, y: 2.0})
    sol = solve_lp(p)
    assert sol.optimal
    assert sol.value(x) == pytest.approx(4.0)
    assert sol.value(y) == pytest.approx(0.0)
    assert sol.objective == pytest.approx(4.0)
    assert sol.duals is not None
    # one more unit of demand costs one more unit of x
    assert sol.duals[row] == pytest.approx(1.0)
    assert sol.dual_objective == pytest.approx(sol.objective)


def test_lp_dual_sign_when_maximizing() -> None:
    p = MilpProblem("cap", Sense.MAXIMIZE)
    x = p.add_variable("x")
    row = p.add_constraint({x: 1.0}, Relation.LE, 4.0)
    p.set_objective({x: 3.0}, constant=1.0)
    sol = solve_lp(p)
    assert sol.objective == pytest.approx(13.0)
    assert sol.duals is not None
    assert sol.duals[row] == pytest.approx(3.0)


def test_lp_infeasible_status() -> None:
    p = MilpProblem("empty")
    x = p.add_variable("x", 3.0, 10.0)
    p.add_constraint({x: 1.0}, Relation.LE, 2.0)
    p.set_objective({x: 1.0})
    sol = solve(p)
    assert sol.status == SolveStatus.INFEASIBLE
    assert not sol.has_values
    with pytest.raises(InfeasibleError):
        require_optimal(sol, "empty")


def test_lp_rejects_binaries() -> None:
    with pytest.raises(SolverConfigError):
        solve_lp(_knapsack())


@pytest.mark.parametrize("method", ["bnb", "highs", "auto"])
def test_knapsack(method: str) -> None:
    p = _knapsack()
    sol = solve_milp(p, SolverConfig(method=method))
    assert sol.optimal
    assert sol.objective == pytest.approx(9.0)
    assert [sol.value(i) for i in p.binaries] == [1.0, 1.0, 0.0]
    assert p.max_violation(sol.values) <= 1e-9


def test_bnb_and_highs_agree_on_mixed_problem() -> None:
    # fixed-charge supply: pay 10 to open, then 1 per unit, up to 6 units each
    p = MilpProblem("fixed-charge")
    opens = [p.add_binary(f"open{k}") for k in range(3)]
    flows = [p.add_variable(f"flow{k}", 0.0, 6.0) for k in range(3)]
    for o, f in zip(opens, flows):
        p.add_constraint({f: 1.0, o: -6.0}, Relation.LE, 0.0)
    p.add_constraint({f: 1.0 for f in flows}, Relation.GE, 10.0, "demand")
    p.set_objective({**{o: 10.0 for o in opens}, **{f: 1.0 + 0.1 * k for k, f in enumerate(flows)}})
    a = solve_milp(p, SolverConfig(method="bnb"))
    b = solve_milp(p, SolverConfig(method="highs"))
    assert a.objective == pytest.approx(b.objective, rel=1e-6)
    # two facilities are needed, the two cheapest ones
    assert a.objective == pytest.approx(20.0 + 6.0 + 4.0 * 1.1)


def test_binary_cap_and_unknown_method() -> None:
    with pytest.raises(SolverConfigError):
        solve_milp(_knapsack(), SolverConfig(max_binaries=2))
    with pytest.raises(SolverConfigError):
        SolverConfig(method="gurobi")
    assert SolverConfig().with_options(mip_gap=0.5).mip_gap == 0.5


def test_problem_structure_errors() -> None:
    p = MilpProblem()
    p.add_variable("x")
    with pytest.raises(SolverConfigError):
        p.add_variable("x")
    with pytest.raises(SolverConfigError):
        p.add_variable("y", 2.0, 1.0)
    with pytest.raises(SolverConfigError):
        p.add_constraint({5: 1.0}, Relation.LE, 0.0)


def test_complementarity_switch() -> None:
    # max x + λ with x ≤ 2 and λ·(x − 2) = 0: the multiplier may only be
    # positive when the row is tight
    p = MilpProblem("cmp", Sense.MAXIMIZE)
    x = p.add_variable("x", 0.0, 5.0)
    lam = p.add_variable("lam", 0.0, 10.0)
    p.add_constraint({x: 1.0}, Relation.LE, 2.0, "g")
    lo, hi = row_range({x: -1.0}, p)
    assert (lo, hi) == (-5.0, 0.0)
    z = add_complementarity(p, {x: 1.0}, -2.0, lam, big_m_g=2.0, big_m_lambda=10.0, name="g")
    p.set_objective({x: 1.0, lam: 1.0})
    sol = solve_milp(p)
    assert sol.objective == pytest.approx(12.0)
    assert sol.value(z) == 1.0
    assert p.switches == {z: lam}
    # the root relaxation is already complementary here
    assert sol.extra["method"] == "rounding"
    assert sol.value(lam) * (sol.value(x) - 2.0) == pytest.approx(0.0)


def test_complementarity_needs_bounds() -> None:
    p = MilpProblem()
    x = p.add_variable("x", 0.0, 1.0)
    lam = p.add_variable("lam")
    with pytest.raises(SolverConfigError):
        add_complementarity(p, {x: 1.0}, -1.0, lam, big_m_g=1.0, big_m_lambda=None)


def test_piecewise_cost_with_indicator() -> None:
    a, b, c = 0.01, 20.0, 100.0
    blk = linearize_quadratic(a, b, c, 0.0, 100.0, 4)
    for demand, expect_on in ((30.0, True), (0.0, False)):
        p = MilpProblem("pw")
        s = p.add_binary("s")
        x = p.add_variable("x", 0.0, 100.0)
        p.add_constraint({x: 1.0, s: -100.0}, Relation.LE, 0.0)
        p.add_constraint({x: 1.0}, Relation.GE, demand)
        epi = p.add_piecewise(x, blk, indicator=s, name="fuel")
        p.set_objective({epi: 1.0})
        sol = solve_milp(p)
        if expect_on:
            assert sol.value(s) == 1.0
            assert sol.objective == pytest.approx(blk.evaluate(demand))
            exact = a * demand ** 2 + b * demand + c
            assert 0.0 <= sol.objective - exact <= quadratic_error_bound(a, 0.0, 100.0, 4) + 1e-9
        else:
            assert sol.objective == pytest.approx(0.0)


def test_piecewise_rejects_concave() -> None:
    with pytest.raises(ValueError):
        linearize_quadratic(-1.0, 0.0, 0.0, 0.0, 1.0, 2)


def test_dump_lp_dir() -> None:
    d: str = tempfile.mkdtemp()
    p = _knapsack()
    solve_milp(p, SolverConfig(dump_lp_dir=d))
    dumped = os.listdir(d)
    assert len(dumped) >= 1
    assert any(f.startswith("knapsack-") and f.endswith(".lp") for f in dumped)
    text = p.to_lp_text()
    assert "Maximize" in text and "Binaries" in text
    shutil.rmtree(d)


def _vertex_optimum(c: np.ndarray, A: np.ndarray, b: np.ndarray) -> float:
    """Smallest c·x over every basic feasible point of {x : A x ≤ b}"""
    m, n = A.shape
    combos = np.array(list(itertools.combinations(range(m), n)))
    sub_a = A[combos]
    sub_b = b[combos]
    ok = np.abs(np.linalg.det(sub_a)) > 1e-9
    pts = np.linalg.solve(sub_a[ok], sub_b[ok][..., None])[..., 0]
    feasible = np.all(pts @ A.T <= b + 1e-7, axis=1)
    return float(np.min(pts[feasible] @ c))


def test_lp_matches_vertex_enumeration() -> None:
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 5))
        c = rng.normal(size=n)
        rows = rng.normal(size=(m, n))
        rhs = rng.uniform(0.5, 5.0, size=m)
        upper = rng.uniform(1.0, 4.0, size=n)
        p = MilpProblem("random-lp")
        xs = [p.add_variable(f"x{j}", 0.0, float(upper[j])) for j in range(n)]
        for i in range(m):
            p.add_constraint({x: float(rows[i, j]) for j, x in enumerate(xs)}, Relation.LE, float(rhs[i]))
        p.set_objective({x: float(c[j]) for j, x in enumerate(xs)})
        sol = solve_lp(p)
        assert sol.optimal
        # box bounds as explicit rows for the enumeration
        A = np.vstack([rows, -np.eye(n), np.eye(n)])
        b = np.concatenate([rhs, np.zeros(n), upper])
        assert sol.objective == pytest.approx(_vertex_optimum(c, A, b), abs=1e-6)


def test_milp_matches_exhaustive_enumeration() -> None:
    rng = np.random.default_rng(12)
    for _ in range(200):
        n = int(rng.integers(1, 13))
        m = int(rng.integers(1, 4))
        c = rng.integers(-10, 11, size=n).astype(float)
        rows = rng.integers(-5, 10, size=(m, n)).astype(float)
        rhs = rng.integers(0, 15, size=m).astype(float)
        p = MilpProblem("random-milp")
        xs = [p.add_binary(f"b{j}") for j in range(n)]
        for i in range(m):
            p.add_constraint({x: rows[i, j] for j, x in enumerate(xs)}, Relation.LE, rhs[i])
        p.set_objective({x: c[j] for j, x in enumerate(xs)})
        sol = solve_milp(p)
        assert sol.optimal
        # x = 0 is always feasible since rhs ≥ 0
        grid = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
        feasible = np.all(grid @ rows.T <= rhs, axis=1)
        assert sol.objective == pytest.approx(float(np.min(grid[feasible] @ c)), abs=1e-6)
        assert p.max_violation(sol.values) <= 1e-6


def test_lp_dual_matches_primal_on_random_problems() -> None:
    rng = np.random.default_rng(21)
    relations = (Relation.LE, Relation.GE, Relation.EQ)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 5))
        upper = rng.uniform(1.0, 4.0, size=n)
        inside = rng.uniform(0.0, 1.0, size=n) * upper
        sense = Sense.MINIMIZE if rng.random() < 0.5 else Sense.MAXIMIZE
        p = MilpProblem("random-dual", sense)
        xs = [p.add_variable(f"x{j}", 0.0, float(upper[j])) for j in range(n)]
        for i in range(m):
            row = rng.normal(size=n)
            relation = relations[int(rng.integers(0, 3))]
            # rows are built around an interior point so the problem is feasible
            lhs = float(row @ inside)
            slack = float(rng.uniform(0.0, 2.0))
            rhs = {Relation.LE: lhs + slack, Relation.GE: lhs - slack, Relation.EQ: lhs}[relation]
            p.add_constraint({x: float(row[j]) for j, x in enumerate(xs)}, relation, rhs)
        p.set_objective({x: float(v) for x, v in zip(xs, rng.normal(size=n))}, constant=float(rng.normal()))
        sol = solve_lp(p)
        assert sol.optimal
        assert sol.dual_objective is not None
        assert abs(sol.objective - sol.dual_objective) <= 1e-6 * (1 + abs(sol.objective))


def test_lp_dual_of_a_shared_capacity() -> None:
    p = MilpProblem("shared")
    x = p.add_variable("x")
    y = p.add_variable("y")
    row = p.add_constraint({x: 1.0, y: 1.0}, Relation.LE, 1.0, "cap")
    p.set_objective({x: -1.0, y: -1.0})
    sol = solve_lp(p)
    assert sol.objective == pytest.approx(-1.0)
    assert sol.duals is not None
    assert sol.duals[row] == pytest.approx(-1.0)


def test_lp_unbounded_status() -> None:
    p = MilpProblem("ray")
    x = p.add_variable("x")
    y = p.add_variable("y")
    p.add_constraint({x: 1.0, y: -1.0}, Relation.LE, 1.0)
    p.set_objective({x: -1.0, y: -1.0})
    sol = solve_lp(p)
    assert sol.status == SolveStatus.UNBOUNDED
    assert not sol.has_values
    with pytest.raises(InfeasibleError):
        require_optimal(sol, "ray")


def test_solves_are_deterministic() -> None:
    rng = np.random.default_rng(4)
    p = MilpProblem("repeat")
    xs = [p.add_variable(f"x{j}", 0.0, 3.0) for j in range(6)]
    bs = [p.add_binary(f"b{j}") for j in range(4)]
    for i in range(5):
        coefs = {x: float(v) for x, v in zip(xs + bs, rng.normal(size=10))}
        p.add_constraint(coefs, Relation.LE, float(rng.uniform(1.0, 3.0)))
    p.set_objective({x: float(v) for x, v in zip(xs + bs, rng.normal(size=10))})
    for method in ("bnb", "highs"):
        first = solve_milp(p, SolverConfig(method=method))
        again = solve_milp(p, SolverConfig(method=method))
        assert first.optimal
        assert first.values.tobytes() == again.values.tobytes()
    relaxed = MilpProblem("repeat-lp")
    ys = [relaxed.add_variable(f"y{j}", 0.0, 3.0) for j in range(6)]
    relaxed.add_constraint({y: 1.0 for y in ys}, Relation.GE, 4.0)
    relaxed.set_objective({y: 1.0 + 0.1 * j for j, y in enumerate(ys)})
    assert solve_lp(relaxed).values.tobytes() == solve_lp(relaxed).values.tobytes()


def test_integral_root_needs_no_branching() -> None:
    p = MilpProblem("integral", Sense.MAXIMIZE)
    a, b = p.add_binary("a"), p.add_binary("b")
    p.add_constraint({a: 1.0, b: 1.0}, Relation.LE, 2.0)
    p.set_objective({a: 1.0, b: 2.0})
    sol = solve_milp(p, SolverConfig(method="bnb"))
    assert sol.optimal
    assert sol.objective == pytest.approx(3.0)
    assert sol.branches == 0
    assert sol.nodes == 1


def test_node_lp_on_a_limit_is_not_pruned(monkeypatch: pytest.MonkeyPatch) -> None:
    real = engine._linprog
    calls: List[int] = []

    def stalling(*args: Any) -> Any:
        calls.append(1)
        if len(calls) == 1:
            return real(*args)
        return SimpleNamespace(status=1, message="Iteration limit reached.", x=None, fun=None)

    monkeypatch.setattr(engine, "_linprog", stalling)
    # the knapsack root is fractional, so its children are solved
    sol = solve_milp(_knapsack(), SolverConfig(method="bnb"))
    assert sol.status == SolveStatus.ITERATION_LIMIT
    with pytest.raises(SolverLimitError):
        require_optimal(sol, "knapsack")


def test_infeasible_child_is_pruned() -> None:
    # the root has b = 0.25 and its b = 1 child is infeasible
    p = MilpProblem("prune")
    b = p.add_binary("b")
    x = p.add_variable("x", 0.0, 1.0)
    p.add_constraint({x: 1.0, b: 2.0}, Relation.LE, 1.5)
    p.set_objective({b: -1.0, x: -1.0})
    sol = solve_milp(p, SolverConfig(method="bnb"))
    assert sol.optimal
    assert sol.value(b) == 0.0
    assert sol.objective == pytest.approx(-1.0)
