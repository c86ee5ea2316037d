"""
Closed-form splits of a slot's cooperative profit ψ between the thermal
plants and the industrial producer

equal: every active plant and the producer get ψ/(N+1), which maximizes the
product of the gains for a fixed total.
contribution: plant m gets σ_m·ψ/(Σσ + σ_m) where σ is the power each plant
gave up; the producer keeps the rest, which lies in [ψ/(N+1), ψ/2].
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .log import logger

CRITERIA = ("equal", "contribution")
NON_COOPERATIVE = "none"


@dataclass(frozen=True)
class Shares:
    plants: np.ndarray
    ipe: float
    rule: str

    @property
    def cooperative(self) -> bool:
        return self.rule != NON_COOPERATIVE

    @property
    def total(self) -> float:
        return float(self.plants.sum()) + self.ipe

    def nash_product(self, active: Sequence[bool]) -> float:
        """product of the gains of the active plants and the producer"""
        gains = [float(u) for u, a in zip(self.plants, active) if a]
        return float(np.prod(gains)) * self.ipe


def no_shares(n_plants: int) -> Shares:
    return Shares(np.zeros(n_plants), 0.0, NON_COOPERATIVE)


def mipdms_equal(psi: float, active: Sequence[bool]) -> Shares:
    """
    Equal split among the active plants and the producer

    >>> s = mipdms_equal(30.0, [True, True])
    >>> s.plants.tolist(), s.ipe
    ([10.0, 10.0], 10.0)
    >>> mipdms_equal(-1.0, [True]).cooperative
    False
    """
    mask = np.asarray(active, dtype=bool)
    n_active = int(mask.sum())
    if n_active < 1:
        raise ValueError("the equal split needs at least one active plant")
    if psi < 0:
        return no_shares(len(mask))
    share = psi / (n_active + 1)
    plants = np.where(mask, share, 0.0)
    return Shares(plants, float(psi - plants.sum()), "equal")


def mipdms_contribution(psi: float, sigma: Sequence[float], active: Optional[Sequence[bool]] = None) -> Shares:
    """
    Split weighted by the power each plant gave up; with no weight at all
    the active plants (all plants by default) share equally

    >>> s = mipdms_contribution(30.0, [8.0, 0.0])
    >>> s.plants.tolist(), s.ipe
    ([15.0, 0.0], 15.0)
    """
    weights = np.asarray(sigma, dtype=float)
    if weights.size == 0:
        raise ValueError("the contribution split needs at least one plant")
    if np.any(weights < 0):
        raise ValueError(f"contribution weights must be non-negative: {weights.tolist()}")
    if psi < 0:
        return no_shares(len(weights))
    total = float(weights.sum())
    if total == 0.0:
        logger.info("all contribution weights are zero, falling back to the equal split")
        return mipdms_equal(psi, [True] * len(weights) if active is None else active)
    plants = weights * psi / (total + weights)
    return Shares(plants, float(psi - plants.sum()), "contribution")


def allocate(psi: float, criterion: str, active: Sequence[bool], sigma: Sequence[float]) -> Shares:
    if criterion == "equal":
        return mipdms_equal(psi, active)
    if criterion == "contribution":
        return mipdms_contribution(psi, sigma, active)
    raise ValueError(f"unknown criterion '{criterion}', expected one of {CRITERIA}")
