"""
JSON case files: schema, cross-reference diagnostics and conversion to the
domain types

Field names carry their units. Tariffs and the wind commendation are given
in $/kWh, as DR programs are usually quoted, and converted to $/MWh on load.
"""

import os
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .exceptions import CaseValidationError, SolverConfigError
from .log import logger
from .model import (
    SALES_BASES,
    Branch,
    Bus,
    DrSettings,
    GridCase,
    Network,
    ScenarioConfig,
    ThermalUnit,
    WindFarm,
)
from .pmp import PmpSystem
from .solver import SolverConfig
from .solver.engine import METHODS
from .utils import canonical_json, hash_text, normalize_path, per_kwh_to_per_mwh

SCHEMA_VERSION = 1

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

# diagnostic codes, one per kind of problem
CODES: Dict[str, str] = {
    "E-SCHEMA-01": "unknown field",
    "E-SCHEMA-02": "missing field",
    "E-SCHEMA-03": "invalid value",
    "E-SCHEMA-04": "unsupported schema version",
    "E-SCHEMA-05": "unreadable file",
    "E-NET-01": "branch references a missing bus",
    "E-NET-02": "duplicate bus id",
    "E-NET-03": "reserve bus not in the network",
    "E-NET-04": "branch connects a bus to itself",
    "E-GEN-01": "unit references a missing bus",
    "E-GEN-02": "unit minimum output above its maximum",
    "E-WIND-01": "wind farm references a missing bus",
    "E-PMP-01": "PMP references a missing bus",
    "E-PMP-02": "buffer count does not match the procedures",
    "E-PMP-03": "production target beyond the line's capacity",
    "E-DR-01": "empty price tier set",
    "E-DR-02": "non-positive price tier",
    "E-DR-03": "income coefficient for an unknown plant",
    "E-HOR-01": "profile length differs from the horizon",
    "E-SOLVER-01": "invalid solver setting",
}


@dataclass(frozen=True)
class Diagnostic:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path or '<root>'}: {self.message}"

    def to_dict(self) -> Dict[str, str]:
        return {"code": self.code, "path": self.path, "message": self.message}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BusModel(_Strict):
    id: int
    load_mw: List[float]


class BranchModel(_Strict):
    from_bus: int
    to_bus: int
    susceptance: float = Field(gt=0)
    rating_mw: float = Field(gt=0)


class NetworkModel(_Strict):
    buses: List[BusModel] = Field(min_length=1)
    branches: List[BranchModel]
    reserve_beta: float = Field(default=0.1, ge=0)
    reserve_price_per_mwh: float = Field(default=20.0, ge=0)
    reserve_bus: Optional[int] = None


class UnitModel(_Strict):
    name: str
    bus: int
    plant: int
    fuel_a_per_mw2h: float = Field(ge=0)
    fuel_b_per_mwh: float
    fuel_c_per_h: float
    p_min_mw: float = Field(ge=0)
    p_max_mw: float = Field(gt=0)
    ramp_up_mw: float = Field(gt=0)
    ramp_down_mw: float = Field(gt=0)
    min_up_h: int = Field(ge=1)
    min_down_h: int = Field(ge=1)
    startup_alpha_usd: float = Field(default=0.0, ge=0)
    startup_beta_usd: float = Field(default=0.0, ge=0)
    startup_tau_h: float = Field(default=1.0, gt=0)
    initial_on: bool = False
    initial_hours: int = Field(default=0, ge=0)


class WindModel(_Strict):
    name: str
    bus: int
    forecast_mw: List[float]


class PmpModel(_Strict):
    bus: int
    procedure_max: List[float]
    procedure_power_mw: List[float]
    buffer_max: List[float]
    buffer_power_mw: List[float]
    target: float = Field(ge=0)


class DrModel(_Strict):
    price_tiers_per_kwh: List[float]
    fixed_cost_usd: float = Field(default=0.0, ge=0)
    commendation_per_kwh: float = Field(default=0.15, ge=0)
    income_coefficients: Optional[Dict[str, float]] = None
    sales_basis: str = "variable"


class SolverModel(_Strict):
    feasibility_tol: float = Field(default=1e-7, gt=0)
    optimality_tol: float = Field(default=1e-6, gt=0)
    integrality_tol: float = Field(default=1e-6, gt=0)
    mip_gap: float = Field(default=1e-6, ge=0)
    max_binaries: int = Field(default=256, ge=0)
    node_limit: int = Field(default=20000, ge=1)
    method: str = "auto"
    bnb_auto_limit: int = Field(default=8, ge=0)
    time_limit: Optional[float] = Field(default=None, gt=0)
    big_m_safety: float = Field(default=10.0, ge=1)
    pw_segments: int = Field(default=8, ge=1)


class ScenarioModel(_Strict):
    count: int = Field(default=100, ge=1)
    sigma_fraction: float = Field(default=0.08, gt=0)
    seed: int = 0
    select: int = Field(default=11, ge=1)
    eps_points: int = Field(default=8, ge=1)
    intraday_eps_points: int = Field(default=5, ge=1)


class CaseFile(_Strict):
    schema_version: int
    name: str
    horizon: int = Field(ge=1)
    network: NetworkModel
    units: List[UnitModel] = Field(min_length=1)
    wind: List[WindModel] = Field(default_factory=list)
    pmp: PmpModel
    dr_programs: DrModel
    solver: SolverModel = Field(default_factory=SolverModel)
    scenarios: ScenarioModel = Field(default_factory=ScenarioModel)


def _loc(parts: Tuple[Union[int, str], ...]) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _schema_diagnostics(err: ValidationError) -> List[Diagnostic]:
    diags = []
    for e in err.errors():
        if e["type"] == "extra_forbidden":
            code = "E-SCHEMA-01"
        elif e["type"] == "missing":
            code = "E-SCHEMA-02"
        else:
            code = "E-SCHEMA-03"
        diags.append(Diagnostic(code, _loc(tuple(e["loc"])), e["msg"]))
    return diags


def _cross_reference(cf: CaseFile) -> List[Diagnostic]:
    diags: List[Diagnostic] = []

    def add(code: str, path: str, message: str) -> None:
        diags.append(Diagnostic(code, path, message))

    T = cf.horizon
    seen = set()
    for n, bus in enumerate(cf.network.buses):
        if bus.id in seen:
            add("E-NET-02", f"network.buses[{n}].id", f"bus {bus.id} appears more than once")
        seen.add(bus.id)
        if len(bus.load_mw) != T:
            add("E-HOR-01", f"network.buses[{n}].load_mw", f"{len(bus.load_mw)} values for {T} slots")
    for j, br in enumerate(cf.network.branches):
        for end in ("from_bus", "to_bus"):
            if getattr(br, end) not in seen:
                add("E-NET-01", f"network.branches[{j}].{end}", f"bus {getattr(br, end)} does not exist")
        if br.from_bus == br.to_bus:
            add("E-NET-04", f"network.branches[{j}]", f"bus {br.from_bus} connected to itself")
    if cf.network.reserve_bus is not None and cf.network.reserve_bus not in seen:
        add("E-NET-03", "network.reserve_bus", f"bus {cf.network.reserve_bus} does not exist")

    for p, u in enumerate(cf.units):
        if u.bus not in seen:
            add("E-GEN-01", f"units[{p}].bus", f"bus {u.bus} does not exist")
        if u.p_min_mw > u.p_max_mw:
            add("E-GEN-02", f"units[{p}].p_min_mw", f"{u.p_min_mw} MW above p_max_mw {u.p_max_mw} MW")
    for l, w in enumerate(cf.wind):
        if w.bus not in seen:
            add("E-WIND-01", f"wind[{l}].bus", f"bus {w.bus} does not exist")
        if len(w.forecast_mw) != T:
            add("E-HOR-01", f"wind[{l}].forecast_mw", f"{len(w.forecast_mw)} values for {T} slots")
        elif any(v < 0 for v in w.forecast_mw):
            add("E-SCHEMA-03", f"wind[{l}].forecast_mw", "forecast must be non-negative")

    pmp = cf.pmp
    if pmp.bus not in seen:
        add("E-PMP-01", "pmp.bus", f"bus {pmp.bus} does not exist")
    r = len(pmp.procedure_max)
    if r < 2 or len(pmp.procedure_power_mw) != r:
        add("E-SCHEMA-03", "pmp.procedure_power_mw", "at least two procedures, each with one power value")
    elif len(pmp.buffer_max) != r - 1 or len(pmp.buffer_power_mw) != r - 1:
        add("E-PMP-02", "pmp.buffer_max", f"{r} procedures need {r - 1} buffers")
    elif any(v <= 0 for v in pmp.procedure_max + pmp.procedure_power_mw + pmp.buffer_max + pmp.buffer_power_mw):
        add("E-SCHEMA-03", "pmp", "capacities and powers must be strictly positive")
    elif pmp.target > pmp.procedure_max[-1] * T:
        add("E-PMP-03", "pmp.target", f"target {pmp.target:g} cannot be reached in {T} slots")

    dr = cf.dr_programs
    if not dr.price_tiers_per_kwh:
        add("E-DR-01", "dr_programs.price_tiers_per_kwh", "at least one tariff is required")
    for k, price in enumerate(dr.price_tiers_per_kwh):
        if price <= 0:
            add("E-DR-02", f"dr_programs.price_tiers_per_kwh[{k}]", f"tariff {price} must be positive")
    plants = {str(u.plant) for u in cf.units}
    for key in (dr.income_coefficients or {}):
        if key not in plants:
            add("E-DR-03", f"dr_programs.income_coefficients.{key}", f"plant {key} owns no unit")
    if dr.sales_basis not in SALES_BASES:
        add("E-SCHEMA-03", "dr_programs.sales_basis", f"expected one of {SALES_BASES}")

    if cf.solver.method not in METHODS:
        add("E-SOLVER-01", "solver.method", f"expected one of {METHODS}")
    return diags


def diagnose_text(text: str, source: str = "<string>") -> Tuple[Optional[CaseFile], List[Diagnostic]]:
    """Parses and checks a case; the case is None when it failed the schema"""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        return None, [Diagnostic("E-SCHEMA-05", "", f"{source} is not valid JSON: {e}")]
    if isinstance(raw, dict) and raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        return None, [
            Diagnostic("E-SCHEMA-04", "schema_version", f"got {raw.get('schema_version')}, expected {SCHEMA_VERSION}")
        ]
    try:
        cf = CaseFile.model_validate(raw)
    except ValidationError as e:
        return None, _schema_diagnostics(e)
    return cf, _cross_reference(cf)


def diagnose(path: Union[str, Path]) -> Tuple[Optional[CaseFile], List[Diagnostic]]:
    p = normalize_path(path)
    try:
        text = p.read_text()
    except OSError as e:
        return None, [Diagnostic("E-SCHEMA-05", "", f"cannot read {p}: {e}")]
    return diagnose_text(text, str(p))


def _raise_on(cf: Optional[CaseFile], diags: List[Diagnostic], source: str) -> CaseFile:
    if diags or cf is None:
        for d in diags:
            logger.debug(str(d))
        raise CaseValidationError(f"{source}: {len(diags)} problem(s), first: {diags[0]}", diags)
    return cf


def validate_case(path: Union[str, Path]) -> CaseFile:
    """
    Parses a case file and checks it completely; raises CaseValidationError
    carrying every diagnostic found
    """
    cf, diags = diagnose(path)
    return _raise_on(cf, diags, str(path))


def parse_case(text: str) -> CaseFile:
    cf, diags = diagnose_text(text)
    return _raise_on(cf, diags, "<string>")


def to_grid_case(cf: CaseFile) -> GridCase:
    T = cf.horizon
    net = cf.network
    network = Network(
        buses=[Bus(b.id, np.asarray(b.load_mw, dtype=float)) for b in net.buses],
        branches=[Branch(br.from_bus, br.to_bus, br.susceptance, br.rating_mw) for br in net.branches],
        beta=net.reserve_beta,
        reserve_price=net.reserve_price_per_mwh,
        reserve_bus=net.reserve_bus,
    )
    units = [
        ThermalUnit(
            name=u.name,
            bus=u.bus,
            plant=u.plant,
            a=u.fuel_a_per_mw2h,
            b=u.fuel_b_per_mwh,
            c=u.fuel_c_per_h,
            p_min=u.p_min_mw,
            p_max=u.p_max_mw,
            ramp_up=u.ramp_up_mw,
            ramp_down=u.ramp_down_mw,
            min_up=u.min_up_h,
            min_down=u.min_down_h,
            startup_alpha=u.startup_alpha_usd,
            startup_beta=u.startup_beta_usd,
            startup_tau=u.startup_tau_h,
            initial_on=u.initial_on,
            initial_hours=u.initial_hours,
        )
        for u in cf.units
    ]
    wind = [WindFarm(w.name, w.bus, np.asarray(w.forecast_mw, dtype=float)) for w in cf.wind]
    pmp = PmpSystem(
        procedure_max=tuple(cf.pmp.procedure_max),
        procedure_power_mw=tuple(cf.pmp.procedure_power_mw),
        buffer_max=tuple(cf.pmp.buffer_max),
        buffer_power_mw=tuple(cf.pmp.buffer_power_mw),
        target=cf.pmp.target,
        fixed_cost=cf.dr_programs.fixed_cost_usd,
        horizon=T,
    )
    dr = cf.dr_programs
    income = None
    if dr.income_coefficients is not None:
        income = {int(k): float(v) for k, v in dr.income_coefficients.items()}
    settings = DrSettings(
        price_tiers=tuple(per_kwh_to_per_mwh(p) for p in dr.price_tiers_per_kwh),
        commendation=per_kwh_to_per_mwh(dr.commendation_per_kwh),
        income_coefficients=income,
        sales_basis=dr.sales_basis,
    )
    try:
        solver = SolverConfig(**cf.solver.model_dump())
    except SolverConfigError as e:
        raise CaseValidationError(str(e), [Diagnostic("E-SOLVER-01", "solver", str(e))])
    return GridCase(
        name=cf.name,
        network=network,
        units=units,
        wind=wind,
        pmp=pmp,
        pmp_bus=cf.pmp.bus,
        dr=settings,
        solver=solver,
        scenarios=ScenarioConfig(**cf.scenarios.model_dump()),
    )


def load_case(path: Union[str, Path]) -> GridCase:
    """validate_case, then conversion to domain types"""
    case = to_grid_case(validate_case(path))
    logger.debug(f"loaded case '{case.name}': {len(case.units)} units, {len(case.network.buses)} buses")
    return case


def export_case(cf: CaseFile) -> str:
    """Canonical JSON text of a case file; parses back to an equal case"""
    return json.dumps(json.loads(canonical_json(cf.model_dump(mode="json"))), indent=2, sort_keys=True) + "\n"


def bundled_case_path(name: str = "six_bus") -> str:
    """
    >>> os.path.basename(bundled_case_path())
    'six_bus.json'
    """
    return os.path.join(DATA_DIR, f"{name}.json")


def case_hash(cf: CaseFile) -> str:
    return hash_text(canonical_json(cf.model_dump(mode="json")))
