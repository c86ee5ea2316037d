import math
from dataclasses import dataclass, field
from typing import Dict, Any, Optional, List, Tuple

import numpy as np

from .pmp import PmpSystem, PmpSchedule
from .solver import SolverConfig, DEFAULT_SOLVER_CONFIG

SALES_BASES = ("variable", "full")


@dataclass(frozen=True)
class ThermalUnit:
    """
    A thermal generator

    a, b, c: quadratic fuel cost a·P² + b·P + c ($/h when on)
    startup_*: hot/cold start cost α + β·(1 − exp(−h_off/τ))
    initial_on/initial_hours: status before the first slot and how long it has held
    plant: ownership group sharing intraday profit
    """

    name: str
    bus: int
    plant: int
    a: float
    b: float
    c: float
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    min_up: int
    min_down: int
    startup_alpha: float = 0.0
    startup_beta: float = 0.0
    startup_tau: float = 1.0
    initial_on: bool = False
    initial_hours: int = 0

    def fuel(self, p: float) -> float:
        return self.a * p * p + self.b * p + self.c

    def start_cost(self, hours_off: float) -> float:
        """
        >>> ThermalUnit("g", 1, 1, 0, 10, 0, 0, 50, 50, 50, 1, 1, 100.0, 50.0, 2.0).start_cost(0)
        100.0
        """
        return self.startup_alpha + self.startup_beta * (1.0 - math.exp(-hours_off / self.startup_tau))

    def initial_off_hours(self) -> int:
        if self.initial_on:
            return 0
        return self.initial_hours if self.initial_hours > 0 else self.min_down

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "bus": self.bus,
            "plant": self.plant,
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "p_min": self.p_min,
            "p_max": self.p_max,
            "ramp_up": self.ramp_up,
            "ramp_down": self.ramp_down,
            "min_up": self.min_up,
            "min_down": self.min_down,
            "startup_alpha": self.startup_alpha,
            "startup_beta": self.startup_beta,
            "startup_tau": self.startup_tau,
            "initial_on": self.initial_on,
            "initial_hours": self.initial_hours,
        }


@dataclass
class WindFarm:
    name: str
    bus: int
    forecast: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "bus": self.bus, "forecast": self.forecast.tolist()}


@dataclass
class Bus:
    id: int
    load: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "load": self.load.tolist()}


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    susceptance: float
    rating: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "from_bus": self.from_bus,
            "to_bus": self.to_bus,
            "susceptance": self.susceptance,
            "rating": self.rating,
        }


@dataclass
class Network:
    buses: List[Bus]
    branches: List[Branch]
    # reserve requirement as a share of forecast wind
    beta: float = 0.1
    # external reserve price, $/MWh
    reserve_price: float = 20.0
    reserve_bus: Optional[int] = None

    @property
    def bus_ids(self) -> List[int]:
        return [b.id for b in self.buses]

    def bus_position(self) -> Dict[int, int]:
        return {b.id: n for n, b in enumerate(self.buses)}

    def ratings(self) -> np.ndarray:
        return np.array([br.rating for br in self.branches], dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "buses": [b.to_dict() for b in self.buses],
            "branches": [br.to_dict() for br in self.branches],
            "beta": self.beta,
            "reserve_price": self.reserve_price,
            "reserve_bus": self.reserve_bus,
        }


@dataclass(frozen=True)
class DrSettings:
    """
    Demand-response programs, all money in $/MWh

    price_tiers: tariffs the utility may pick per slot
    commendation: credit per MWh of additional wind used intraday
    income_coefficients: per-plant share of sales revenue; None means each
        plant's thermal energy share in the slot
    sales_basis: 'variable' (energy bill only) or 'full' (bill + fixed cost)
    """

    price_tiers: Tuple[float, ...]
    commendation: float = 150.0
    income_coefficients: Optional[Dict[int, float]] = None
    sales_basis: str = "variable"

    def __post_init__(self) -> None:
        if self.sales_basis not in SALES_BASES:
            raise ValueError(f"sales_basis must be one of {SALES_BASES}, got '{self.sales_basis}'")

    @property
    def max_price(self) -> float:
        return max(self.price_tiers) if self.price_tiers else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "price_tiers": list(self.price_tiers),
            "commendation": self.commendation,
            "income_coefficients": self.income_coefficients,
            "sales_basis": self.sales_basis,
        }


@dataclass(frozen=True)
class ScenarioConfig:
    count: int = 100
    sigma_fraction: float = 0.08
    seed: int = 0
    select: int = 11
    eps_points: int = 8
    intraday_eps_points: int = 5


DEFAULT_SCENARIO_CONFIG = ScenarioConfig()


@dataclass
class GridCase:
    """
    A complete dispatch instance: network, generation, wind, the industrial
    producer and its DR programs, plus run settings
    """

    name: str
    network: Network
    units: List[ThermalUnit]
    wind: List[WindFarm]
    pmp: PmpSystem
    pmp_bus: int
    dr: DrSettings
    solver: SolverConfig = DEFAULT_SOLVER_CONFIG
    scenarios: ScenarioConfig = DEFAULT_SCENARIO_CONFIG
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.pmp.horizon

    @property
    def plants(self) -> List[int]:
        return sorted({u.plant for u in self.units})

    def units_of(self, plant: int) -> List[int]:
        return [p for p, u in enumerate(self.units) if u.plant == plant]

    @property
    def slack_bus(self) -> int:
        """lowest-numbered bus hosting a generator"""
        return min(u.bus for u in self.units)

    @property
    def reserve_bus(self) -> int:
        return self.network.reserve_bus if self.network.reserve_bus is not None else self.slack_bus

    def forecast(self) -> np.ndarray:
        """(T, farms) forecast wind"""
        if not self.wind:
            return np.zeros((self.horizon, 0))
        return np.stack([w.forecast for w in self.wind], axis=1)

    def loads(self) -> np.ndarray:
        """(T, buses) traditional load"""
        return np.stack([b.load for b in self.network.buses], axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "network": self.network.to_dict(),
            "units": [u.to_dict() for u in self.units],
            "wind": [w.to_dict() for w in self.wind],
            "pmp": self.pmp.to_dict(),
            "pmp_bus": self.pmp_bus,
            "dr": self.dr.to_dict(),
        }


@dataclass
class DayAheadSolution:
    """
    One day-ahead dispatch with the producer's response

    Arrays are (slots x units) for status/power/reserve, (slots x farms) for
    wind, (slots x buses) for angles and (slots x branches) for flows.
    Prices are $/MWh. j1 is exact fuel + start-up cost, j2 = 1 − ASC and
    j_pmp the producer's bill including its fixed cost.
    """

    status: np.ndarray
    power: np.ndarray
    reserve: np.ndarray
    wind: np.ndarray
    prices: np.ndarray
    tiers: np.ndarray
    theta: np.ndarray
    flows: np.ndarray
    pmp: PmpSchedule
    j1: float
    j2: float
    j_pmp: float
    curtailment: float
    epsilon: Optional[float] = None

    @property
    def asc(self) -> float:
        return 1.0 - self.j2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status.astype(int).tolist(),
            "power": self.power.tolist(),
            "reserve": self.reserve.tolist(),
            "wind": self.wind.tolist(),
            "prices": self.prices.tolist(),
            "tiers": self.tiers.astype(int).tolist(),
            "theta": self.theta.tolist(),
            "flows": self.flows.tolist(),
            "pmp": self.pmp.to_dict(),
            "j1": self.j1,
            "j2": self.j2,
            "j_pmp": self.j_pmp,
            "curtailment": self.curtailment,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DayAheadSolution":
        def arr(key: str) -> np.ndarray:
            return np.asarray(data[key], dtype=float)

        t = len(data["prices"])
        return cls(
            status=arr("status").reshape(t, -1),
            power=arr("power").reshape(t, -1),
            reserve=arr("reserve").reshape(t, -1),
            wind=arr("wind").reshape(t, -1),
            prices=arr("prices"),
            tiers=np.asarray(data["tiers"], dtype=int),
            theta=arr("theta").reshape(t, -1),
            flows=arr("flows").reshape(t, -1),
            pmp=PmpSchedule.from_dict(data["pmp"]),
            j1=float(data["j1"]),
            j2=float(data["j2"]),
            j_pmp=float(data["j_pmp"]),
            curtailment=float(data["curtailment"]),
            epsilon=data.get("epsilon"),
        )
