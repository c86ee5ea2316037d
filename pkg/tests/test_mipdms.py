import numpy as np
import pytest

from pdscr.mipdms import (
    NON_COOPERATIVE,
    allocate,
    mipdms_contribution,
    mipdms_equal,
)


def test_equal_split() -> None:
    s = mipdms_equal(30.0, [True, True])
    assert s.plants.tolist() == [10.0, 10.0]
    assert s.ipe == 10.0
    assert s.total == pytest.approx(30.0)


def test_equal_split_skips_idle_plants() -> None:
    s = mipdms_equal(30.0, [True, False, True])
    assert s.plants.tolist() == [10.0, 0.0, 10.0]
    assert s.ipe == pytest.approx(10.0)


def test_zero_profit_gives_zero_shares() -> None:
    for s in (mipdms_equal(0.0, [True, True]), mipdms_contribution(0.0, [3.0, 1.0])):
        assert s.cooperative
        assert s.total == 0.0
        assert np.all(s.plants == 0.0)


def test_negative_profit_is_non_cooperative() -> None:
    for s in (mipdms_equal(-5.0, [True]), mipdms_contribution(-5.0, [1.0, 2.0])):
        assert s.rule == NON_COOPERATIVE
        assert not s.cooperative
        assert s.total == 0.0


def test_contribution_examples() -> None:
    s = mipdms_contribution(30.0, [4.0, 4.0])
    assert s.plants.tolist() == pytest.approx([10.0, 10.0])
    assert s.ipe == pytest.approx(10.0)
    s = mipdms_contribution(30.0, [8.0, 0.0])
    assert s.plants.tolist() == pytest.approx([15.0, 0.0])
    # upper boundary of the producer's share
    assert s.ipe == pytest.approx(15.0)


def test_contribution_all_zero_falls_back_to_equal() -> None:
    s = mipdms_contribution(30.0, [0.0, 0.0, 0.0], active=[True, True, False])
    assert s.rule == "equal"
    assert s.plants.tolist() == [10.0, 10.0, 0.0]


def test_contribution_rejects_negative_weights() -> None:
    with pytest.raises(ValueError):
        mipdms_contribution(1.0, [1.0, -1.0])
    with pytest.raises(ValueError):
        mipdms_equal(1.0, [False, False])
    with pytest.raises(ValueError):
        allocate(1.0, "nash", [True], [1.0])


def test_random_shares_sum_and_bounds() -> None:
    rng = np.random.default_rng(12345)
    violations = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        psi = float(rng.uniform(0.0, 1000.0))
        sigma = rng.uniform(0.0, 50.0, size=n)
        tol = 1e-9 * max(1.0, psi)

        eq = mipdms_equal(psi, [True] * n)
        assert abs(eq.total - psi) <= tol

        c = mipdms_contribution(psi, sigma)
        assert abs(c.total - psi) <= tol
        if c.ipe < psi / (n + 1) - tol or c.ipe > psi / 2 + tol:
            violations += 1
        if c.ipe > float(np.max(c.plants)) + tol:
            violations += 1

        same = mipdms_contribution(psi, np.full(n, sigma[0]))
        assert np.allclose(same.plants, eq.plants, atol=tol)
        assert same.ipe == pytest.approx(eq.ipe, abs=tol)
    assert violations == 0


def _grid_max_product(psi: float, n: int, steps: int) -> float:
    """largest Π(u)·v over a grid on the simplex Σu + v = ψ"""
    axis = np.arange(steps + 1) * psi / steps
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    plants = np.stack([g.ravel() for g in grids])
    v = psi - plants.sum(axis=0)
    feasible = v >= 0
    prod = np.prod(plants[:, feasible], axis=0) * v[feasible]
    return float(prod.max())


@pytest.mark.parametrize("n, steps, draws", [(1, 200, 100), (2, 200, 100), (3, 60, 5)])
def test_equal_split_maximizes_nash_product(n: int, steps: int, draws: int) -> None:
    rng = np.random.default_rng(n)
    for psi in rng.uniform(1.0, 500.0, size=draws):
        s = mipdms_equal(float(psi), [True] * n)
        best = s.nash_product([True] * n)
        assert _grid_max_product(float(psi), n, steps) <= best * (1 + 1e-6)
