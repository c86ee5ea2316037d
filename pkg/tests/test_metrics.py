import numpy as np
import pytest

from pdscr.metrics import REFERENCE, front_quality, hypervolume, hypervolume_mc, normalize_fronts


def _random_front(rng: np.random.Generator) -> np.ndarray:
    m = int(rng.integers(1, 9))
    xs = np.sort(rng.uniform(0.0, 1.0, m))
    ys = np.sort(rng.uniform(0.0, 1.0, m))[::-1]
    return np.column_stack([xs, ys])


def test_unit_square() -> None:
    assert hypervolume([(1.0, 1.0)], (2.0, 2.0)) == 1.0


def test_two_points_and_duplicates() -> None:
    assert hypervolume([(0.0, 2.0), (2.0, 0.0)], (3.0, 3.0)) == pytest.approx(5.0)
    assert hypervolume([(0.0, 2.0), (2.0, 0.0), (0.0, 2.0)], (3.0, 3.0)) == pytest.approx(5.0)


def test_point_beyond_reference_left_out() -> None:
    assert hypervolume([(1.0, 1.0), (5.0, 0.0)], (2.0, 2.0)) == 1.0
    assert hypervolume([(5.0, 5.0)], (2.0, 2.0)) == 0.0
    assert hypervolume([], (2.0, 2.0)) == 0.0


def test_matches_monte_carlo() -> None:
    rng = np.random.default_rng(2024)
    ref = (1.1, 1.1)
    for k in range(20):
        front = _random_front(rng)
        exact = hypervolume(front, ref)
        estimate = hypervolume_mc(front, ref, samples=1_000_000, seed=k)
        assert estimate == pytest.approx(exact, rel=0.01)


def test_adding_a_point_never_decreases() -> None:
    rng = np.random.default_rng(5)
    ref = (1.1, 1.1)
    for _ in range(50):
        front = _random_front(rng)
        before = hypervolume(front, ref)
        extra = rng.uniform(0.0, 1.0, 2)
        assert hypervolume(np.vstack([front, extra]), ref) >= before - 1e-12


@pytest.mark.parametrize("gamma", [0.5, 3.0, 100.0])
def test_scale_equivariance(gamma: float) -> None:
    front = _random_front(np.random.default_rng(9))
    ref = np.array([1.1, 1.1])
    assert hypervolume(front * gamma, ref * gamma) == pytest.approx(gamma ** 2 * hypervolume(front, ref))


def test_normalized_front_quality() -> None:
    q = front_quality({"held_fixed": [(10.0, 0.5)], "equal": [(5.0, 0.2)]})
    assert q["held_fixed"].reference == REFERENCE
    assert q["held_fixed"].scale == 10.0
    assert q["held_fixed"].hypervolume == pytest.approx(0.1 * 0.5)
    assert q["equal"].hypervolume == pytest.approx(0.6 * 0.8)
    assert q["equal"].to_dict()["points"] == [[0.5, 0.2]]


def test_normalize_all_zero_curtailment() -> None:
    scaled, ref, scale = normalize_fronts({"a": [(0.0, 0.3)]})
    assert scale == 1.0
    assert scaled["a"] == [(0.0, 0.3)]
    assert ref == REFERENCE
