import numpy as np
import pytest

from pdscr.scenarios import ScenarioSet, lhs_sample, stratified_select


FORECAST = np.array([[55.0, 20.0], [50.0, 25.0], [35.0, 30.0]])


@pytest.mark.parametrize("n", [1, 10, 100])
def test_every_stratum_used_once(n: int) -> None:
    s = lhs_sample(FORECAST, 0.08, n, seed=7)
    assert s.realized.shape == (n, 3, 2)
    expected = (np.arange(n) + 0.5) / n
    for t in range(3):
        for l in range(2):
            assert np.allclose(np.sort(s.cdf[:, t, l]), expected)


def test_single_sample_is_forecast() -> None:
    s = lhs_sample(FORECAST, 0.08, 1, seed=0)
    assert np.allclose(s.realized[0], FORECAST)
    assert s.fluctuation.tolist() == pytest.approx([0.0])


def test_mean_close_to_forecast() -> None:
    s = lhs_sample(FORECAST, 0.08, 100, seed=3)
    bound = 3 * 0.08 * FORECAST / np.sqrt(100)
    assert np.all(np.abs(s.realized.mean(axis=0) - FORECAST) <= bound)


def test_clamped_at_zero() -> None:
    # a huge σ pushes the lower strata below zero
    s = lhs_sample(np.array([[1.0]]), 5.0, 50, seed=1)
    assert float(s.realized.min()) == 0.0


def test_seeded_determinism() -> None:
    a = lhs_sample(FORECAST, 0.08, 20, seed=11).to_dict()
    b = lhs_sample(FORECAST, 0.08, 20, seed=11).to_dict()
    c = lhs_sample(FORECAST, 0.08, 20, seed=12).to_dict()
    assert a == b
    assert a != c


def test_round_trip_keeps_ids() -> None:
    s = lhs_sample(FORECAST, 0.08, 10, seed=2).subset([7, 3])
    back = ScenarioSet.from_dict(s.to_dict())
    assert back.ids == [7, 3]
    assert np.allclose(back.realized, s.realized)


def test_bad_arguments() -> None:
    with pytest.raises(ValueError):
        lhs_sample(FORECAST, 0.08, 0, seed=0)
    with pytest.raises(ValueError):
        lhs_sample(FORECAST, 0.0, 5, seed=0)
    s = lhs_sample(FORECAST, 0.08, 5, seed=0)
    with pytest.raises(ValueError):
        stratified_select(s, 6)
    with pytest.raises(ValueError):
        stratified_select(s, 0)


def test_select_all_is_identity() -> None:
    s = lhs_sample(FORECAST, 0.08, 10, seed=4)
    assert sorted(stratified_select(s, 10)) == list(range(10))


def test_select_two_covers_both_signs() -> None:
    forecast = np.array([[10.0]])
    realized = np.array([[[12.0]], [[9.0]], [[10.5]], [[7.0]]])
    s = ScenarioSet(seed=0, sigma_fraction=0.08, forecast=forecast, realized=realized, cdf=np.full((4, 1, 1), 0.5))
    picks = stratified_select(s, 2)
    assert picks == [0, 3]
    assert s.fluctuation[picks[0]] > 0 > s.fluctuation[picks[1]]


def test_select_eleven_of_hundred_is_monotone() -> None:
    s = lhs_sample(FORECAST, 0.08, 100, seed=7)
    picks = stratified_select(s, 11)
    assert len(set(picks)) == 11
    fl = s.fluctuation[picks]
    assert np.all(np.diff(fl) <= 0)
    assert fl[0] == s.fluctuation.max()
    assert fl[-1] == s.fluctuation.min()
