"""
Wind scenarios: Gaussian forecast errors sampled on a Latin hypercube, and
the stratified pick of representative scenarios by total fluctuation
"""

from dataclasses import dataclass, field
from typing import List, Dict, Any, Sequence

import numpy as np
from scipy.stats import norm  # type: ignore[import]

from .log import logger
from .model import GridCase, ScenarioConfig


@dataclass
class ScenarioSet:
    """
    n realized wind profiles around a forecast

    forecast is (T, L); realized and cdf are (n, T, L). cdf holds the
    stratum midpoint each sample was drawn at; ids are the scenario numbers
    in the set the samples were first drawn in.
    """

    seed: int
    sigma_fraction: float
    forecast: np.ndarray
    realized: np.ndarray
    cdf: np.ndarray
    ids: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.ids:
            self.ids = list(range(self.realized.shape[0]))

    @property
    def count(self) -> int:
        return int(self.realized.shape[0])

    @property
    def fluctuation(self) -> np.ndarray:
        """Σ_t,l (realized − forecast) per scenario, in MW"""
        return np.asarray((self.realized - self.forecast[None, :, :]).sum(axis=(1, 2)))

    def scenario(self, k: int) -> np.ndarray:
        return np.asarray(self.realized[k])

    def subset(self, positions: Sequence[int]) -> "ScenarioSet":
        pos = list(positions)
        return ScenarioSet(
            seed=self.seed,
            sigma_fraction=self.sigma_fraction,
            forecast=self.forecast,
            realized=self.realized[pos],
            cdf=self.cdf[pos],
            ids=[self.ids[k] for k in pos],
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "count": self.count,
            "sigma_fraction": self.sigma_fraction,
            "forecast": self.forecast.tolist(),
            "ids": list(self.ids),
            "fluctuation": self.fluctuation.tolist(),
            "realized": self.realized.tolist(),
            "cdf": self.cdf.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioSet":
        return cls(
            seed=int(data["seed"]),
            sigma_fraction=float(data["sigma_fraction"]),
            forecast=np.asarray(data["forecast"], dtype=float),
            realized=np.asarray(data["realized"], dtype=float),
            cdf=np.asarray(data["cdf"], dtype=float),
            ids=[int(i) for i in data["ids"]],
        )


def lhs_sample(forecast: np.ndarray, sigma_fraction: float, n: int, seed: int) -> ScenarioSet:
    """
    Latin hypercube over independent Gaussian errors, one dimension per
    (slot, farm) with σ = sigma_fraction·forecast. Each dimension places
    exactly one sample in each of the n equal-probability strata, at the
    stratum midpoint.

    >>> s = lhs_sample(np.array([[10.0]]), 0.08, 1, seed=3)
    >>> s.realized.tolist(), s.cdf.tolist()
    ([[[10.0]]], [[[0.5]]])
    """
    if n < 1:
        raise ValueError(f"need at least one scenario, got {n}")
    if sigma_fraction <= 0:
        raise ValueError(f"sigma fraction must be positive, got {sigma_fraction}")
    base = np.atleast_2d(np.asarray(forecast, dtype=float))
    T, L = base.shape
    rng = np.random.default_rng(seed)
    # one independent permutation of the strata per dimension, in (t, l) order
    strata = np.empty((n, T, L), dtype=int)
    for t in range(T):
        for l in range(L):
            strata[:, t, l] = rng.permutation(n)
    cdf = (strata + 0.5) / n
    sigma = sigma_fraction * base
    realized = np.maximum(base[None, :, :] + sigma[None, :, :] * norm.ppf(cdf), 0.0)
    logger.debug(f"sampled {n} wind scenarios over {T} slots and {L} farms (seed {seed})")
    return ScenarioSet(seed=seed, sigma_fraction=sigma_fraction, forecast=base, realized=realized, cdf=cdf)


def sample_case(case: GridCase, config: ScenarioConfig) -> ScenarioSet:
    return lhs_sample(case.forecast(), config.sigma_fraction, config.count, config.seed)


def stratified_select(scenarios: ScenarioSet, k: int) -> List[int]:
    """
    Positions of k representative scenarios, ordered from the largest total
    fluctuation to the smallest. The ranked set is cut into k strata of near
    equal size; the top stratum contributes its maximum, the bottom stratum
    its minimum and every other stratum its median.

    >>> s = lhs_sample(np.full((4, 1), 10.0), 0.08, 6, seed=1)
    >>> sorted(stratified_select(s, 6))
    [0, 1, 2, 3, 4, 5]
    """
    n = scenarios.count
    if k < 1 or k > n:
        raise ValueError(f"cannot select {k} of {n} scenarios")
    fluct = scenarios.fluctuation
    # stable sort so ties keep their sampling order
    ranked = np.argsort(-fluct, kind="stable")
    picks: List[int] = []
    for j, stratum in enumerate(np.array_split(ranked, k)):
        if k > 1 and j == 0:
            picks.append(int(stratum[0]))
        elif k > 1 and j == k - 1:
            picks.append(int(stratum[-1]))
        else:
            picks.append(int(stratum[len(stratum) // 2]))
    return picks
