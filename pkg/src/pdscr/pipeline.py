"""
Runs the strategy end to end: the day-ahead sweep and its compromise, a
batch of wind scenarios, intraday re-dispatch per criterion, then the report.
Every stage result is kept in the stage cache, so a stage that already ran
with the same inputs is read back instead of solved again.
"""

import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from appdirs import user_data_dir  # type: ignore[import]

from .artifacts import ArtifactField, ArtifactType, RunWriter
from .casefile import CaseFile, case_hash, to_grid_case, validate_case
from .dayahead import ParetoFront, epsilon_sweep, pick_compromise
from .exceptions import PdscrException, StageError
from .export import (
    FRONT_COLUMNS,
    PRICE_COLUMNS,
    front_rows,
    ledger_columns,
    pmp_columns,
    pmp_rows,
    price_rows,
    to_csv_text,
)
from .intraday import evaluate_fixed_dayahead, solve_intraday
from .log import DEFAULT_LOGLEVEL, configure, default_logpath, logger
from .metrics import front_quality
from .mipdms import CRITERIA
from .model import DayAheadSolution, GridCase
from .scenarios import ScenarioSet, sample_case, stratified_select
from .stage_cache import StageCache, stage_key
from .utils import canonical_json, hash_text, normalize_path

TOOL_VERSION = "0.1.0"

STAGES = ("dayahead", "scenarios", "intraday", "report")
HELD_FIXED = "held_fixed"

FRONT_CSV = ArtifactField("dayahead/front.csv", ArtifactType.CSV)
POINT_JSON = ArtifactField("dayahead/points/point_{n:02d}.json", ArtifactType.JSON)
COMPROMISE_JSON = ArtifactField("dayahead/compromise.json", ArtifactType.JSON)
PRICES_CSV = ArtifactField("dayahead/prices.csv", ArtifactType.CSV)
PMP_CSV = ArtifactField("dayahead/pmp_schedule.csv", ArtifactType.CSV)
FRONT_SVG = ArtifactField("dayahead/front.svg", ArtifactType.SVG)
SCENARIOS_JSON = ArtifactField("scenarios/scenarios.json", ArtifactType.JSON)
OUTCOME_JSON = ArtifactField("intraday/{criterion}/scenario_{n:03d}.json", ArtifactType.JSON)
LEDGER_CSV = ArtifactField("intraday/{criterion}/ledger_{n:03d}.csv", ArtifactType.CSV)
REPORT_CSV = ArtifactField("report/report.csv", ArtifactType.CSV)
COMPROMISE_CSV = ArtifactField("report/compromise.csv", ArtifactType.CSV)
INTRADAY_SVG = ArtifactField("report/intraday_fronts.svg", ArtifactType.SVG)
RINGS_SVG = ArtifactField("report/profit_rings.svg", ArtifactType.SVG)
MANIFEST_JSON = ArtifactField("manifest.json", ArtifactType.JSON)

COMPROMISE_REPORT_COLUMNS = ["scenario", "criterion", "j5", "j6", "psi_total", "ipe_share", "thermal_share"]


@dataclass
class StageRecord:
    name: str
    status: str = "pending"
    seconds: float = 0.0
    artifacts: Dict[str, str] = field(default_factory=dict)
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status,
            "seconds": self.seconds,
            "artifacts": dict(sorted(self.artifacts.items())),
            "error": self.error,
        }


@dataclass
class RunManifest:
    run_id: str
    input_hash: str
    case: str
    run_dir: str
    criteria: List[str]
    seed: int
    tool_version: str = TOOL_VERSION
    stages: Dict[str, StageRecord] = field(default_factory=dict)

    @property
    def artifacts(self) -> Dict[str, str]:
        out: Dict[str, str] = {}
        for rec in self.stages.values():
            out.update(rec.artifacts)
        return out

    @property
    def complete(self) -> bool:
        return all(rec.status in ("ok", "cached") for rec in self.stages.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "input_hash": self.input_hash,
            "case": self.case,
            "run_dir": self.run_dir,
            "criteria": self.criteria,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "stages": {k: v.to_dict() for k, v in self.stages.items()},
        }


def summarize_outcome(outcome: Dict[str, Any]) -> Dict[str, float]:
    """Report figures of one stored intraday outcome"""
    ledger = outcome["ledger"]
    coop = [c != "none" for c in ledger["criteria"]]
    v = np.asarray(ledger["v"], dtype=float)
    u = np.asarray(ledger["u"], dtype=float).reshape(len(v), -1)
    mask = np.asarray(coop, dtype=bool)
    ipe = float(v[mask].sum()) if mask.any() else 0.0
    thermal = float(u[mask].sum()) if mask.any() else 0.0
    total = ipe + thermal
    return {
        "j5": float(outcome["j5"]),
        "j6": float(outcome["j6"]),
        "asc": float(outcome["asc"]),
        "total_cost": float(outcome["total_cost"]),
        "psi_total": total,
        "ipe_share": ipe / total if total > 0 else 0.0,
        "thermal_share": thermal / total if total > 0 else 0.0,
    }


def report_columns(cases: Sequence[str]) -> List[str]:
    cols = ["scenario", "fluctuation_mw"]
    for c in cases:
        cols += [f"curtailment_mwh_{c}", f"asc_{c}", f"total_cost_{c}", f"hv_{c}"]
    return cols


def report_rows(
    scenarios: ScenarioSet, outcomes: Dict[str, List[Dict[str, Any]]]
) -> List[Dict[str, Any]]:
    """One row per selected scenario with curtailment, ASC, total cost and HV per case"""
    rows = []
    fluct = scenarios.fluctuation
    for k, sid in enumerate(scenarios.ids):
        row: Dict[str, Any] = {"scenario": sid, "fluctuation_mw": float(fluct[k])}
        quality = front_quality({c: [tuple(p) for p in outs[k]["front"]] for c, outs in outcomes.items()})
        for c, outs in outcomes.items():
            s = summarize_outcome(outs[k])
            row[f"curtailment_mwh_{c}"] = s["j5"]
            row[f"asc_{c}"] = s["asc"]
            row[f"total_cost_{c}"] = s["total_cost"]
            row[f"hv_{c}"] = quality[c].hypervolume
        rows.append(row)
    return rows


def compromise_rows(scenarios: ScenarioSet, outcomes: Dict[str, List[Dict[str, Any]]]) -> List[Dict[str, Any]]:
    rows = []
    for c, outs in outcomes.items():
        if c == HELD_FIXED:
            continue
        for k, sid in enumerate(scenarios.ids):
            s = summarize_outcome(outs[k])
            rows.append({"scenario": sid, "criterion": c, **{col: s[col] for col in COMPROMISE_REPORT_COLUMNS[2:]}})
    return rows


class Runner:
    def __init__(
        self,
        loglevel: int = DEFAULT_LOGLEVEL,
        cache_dir: Optional[Union[str, Path]] = None,
        dump_lp: Optional[Union[str, Path]] = None,
    ) -> None:
        """
        Main interface to the pipeline

        cache_dir: where stage results and default run directories live;
                   PDSCR_DIR or the user data directory when not given
        dump_lp: directory that receives every solved problem as LP text
        """
        cdir: Optional[Path] = None
        if cache_dir is not None:
            cdir = normalize_path(cache_dir)
        else:
            if "PDSCR_DIR" in os.environ:
                cdir = Path(os.environ["PDSCR_DIR"])
            else:
                cdir = Path(user_data_dir("pdscr"))

        if cdir.exists() and not cdir.is_dir():
            raise RuntimeError("'cache_dir' '{}' already exists but is not a directory".format(str(cdir)))
        cdir.mkdir(parents=True, exist_ok=True)
        self.base_dir: Path = cdir
        self.cache_dir: Path = self.base_dir / "cache"
        self.runs_dir: Path = self.base_dir / "runs"
        self.stage_cache = StageCache(str(self.cache_dir))
        self.dump_lp: Optional[str] = None if dump_lp is None else str(normalize_path(dump_lp))

        self.logger = configure(loglevel, default_logpath())

    def prepare(
        self,
        case_path: Union[str, Path],
        seed: Optional[int] = None,
        eps_points: Optional[int] = None,
        scenario_count: Optional[int] = None,
    ) -> Tuple[CaseFile, GridCase]:
        """Validates the case and applies command-line overrides to its run settings"""
        cf = validate_case(case_path)
        updates: Dict[str, Any] = {}
        if seed is not None:
            updates["seed"] = seed
        if eps_points is not None:
            updates["eps_points"] = eps_points
        if scenario_count is not None:
            updates["count"] = scenario_count
            updates["select"] = min(cf.scenarios.select, scenario_count)
        if updates:
            cf = cf.model_copy(update={"scenarios": cf.scenarios.model_copy(update=updates)})
        case = to_grid_case(cf)
        if self.dump_lp is not None:
            case = replace(case, solver=case.solver.with_options(dump_lp_dir=self.dump_lp))
        return cf, case

    def dayahead(self, case: GridCase, input_hash: str) -> Tuple[ParetoFront, DayAheadSolution, str, bool]:
        key = stage_key("dayahead", case=input_hash)

        def compute() -> Dict[str, Any]:
            front = epsilon_sweep(case, case.scenarios.eps_points, case.solver)
            return {"front": front.to_dict(with_solutions=True), "compromise": pick_compromise(front).to_dict()}

        data, cached = self.stage_cache.fetch(key, compute)
        return ParetoFront.from_dict(data["front"]), DayAheadSolution.from_dict(data["compromise"]), key, cached

    def scenarios(self, case: GridCase, input_hash: str) -> Tuple[ScenarioSet, List[int], bool]:
        key = stage_key("scenarios", case=input_hash)

        def compute() -> Dict[str, Any]:
            full = sample_case(case, case.scenarios)
            k = min(case.scenarios.select, full.count)
            return {"scenarios": full.to_dict(), "selected": stratified_select(full, k)}

        data, cached = self.stage_cache.fetch(key, compute)
        return ScenarioSet.from_dict(data["scenarios"]), [int(p) for p in data["selected"]], cached

    def intraday(
        self, case: GridCase, da: DayAheadSolution, dayahead_key: str, realized: np.ndarray, criterion: str
    ) -> Tuple[Dict[str, Any], bool]:
        key = stage_key(
            "intraday",
            dayahead=hash_text(dayahead_key),
            realized=hash_text(canonical_json(realized)),
            criterion=criterion,
        )

        def compute() -> Dict[str, Any]:
            if criterion == HELD_FIXED:
                outcome = evaluate_fixed_dayahead(case, da, realized)
            else:
                outcome = solve_intraday(case, da, realized, criterion, config=case.solver)
            data = outcome.to_dict()
            data["ledger_rows"] = outcome.ledger.rows()
            return data

        return self.stage_cache.fetch(key, compute)

    def run(
        self,
        case_path: Union[str, Path],
        stages: Sequence[str] = STAGES,
        criteria: Sequence[str] = CRITERIA,
        out: Optional[Union[str, Path]] = None,
        seed: Optional[int] = None,
        eps_points: Optional[int] = None,
        scenario_count: Optional[int] = None,
    ) -> RunManifest:
        """
        Runs the requested stages; their upstream stages are read from the
        cache or computed. Artifacts of the requested stages go to the run
        directory. A failing stage writes the partial manifest and raises
        StageError chained to the original error.
        """
        for s in stages:
            if s not in STAGES:
                raise ValueError(f"unknown stage '{s}', expected some of {STAGES}")
        for c in criteria:
            if c not in CRITERIA:
                raise ValueError(f"unknown criterion '{c}', expected some of {CRITERIA}")
        cf, case = self.prepare(case_path, seed, eps_points, scenario_count)
        input_hash = case_hash(cf)
        wanted = [s for s in STAGES if s in stages]
        run_id = hash_text(stage_key("run", case=input_hash, stages=wanted, criteria=list(criteria)))[:12]
        run_dir = normalize_path(out) if out is not None else self.runs_dir / run_id
        writer = RunWriter(run_dir)
        manifest = RunManifest(
            run_id=run_id,
            input_hash=input_hash,
            case=case.name,
            run_dir=str(run_dir),
            criteria=list(criteria),
            seed=case.scenarios.seed,
            stages={s: StageRecord(s) for s in wanted},
        )
        state: Dict[str, Any] = {}

        def step(name: str, body: Callable[[], bool]) -> None:
            rec = manifest.stages.get(name)
            started = time.perf_counter()
            before = set(writer.written)
            try:
                cached = body()
            except PdscrException as e:
                if rec is not None:
                    rec.status = "failed"
                    rec.error = str(e)
                    rec.seconds = time.perf_counter() - started
                writer.write(MANIFEST_JSON, manifest.to_dict())
                logger.error(f"stage '{name}' failed: {e}")
                raise StageError(f"stage '{name}' failed: {e}", manifest) from e
            if rec is not None:
                rec.status = "cached" if cached else "ok"
                rec.seconds = time.perf_counter() - started
                rec.artifacts = {k: v for k, v in writer.written.items() if k not in before}
                logger.info(f"stage '{name}' {rec.status} in {rec.seconds:.2f}s")

        def do_dayahead() -> bool:
            front, comp, key, cached = self.dayahead(case, input_hash)
            state.update(front=front, compromise=comp, dayahead_key=key)
            if "dayahead" in wanted:
                self._write_dayahead(writer, case, front, comp)
            return cached

        def do_scenarios() -> bool:
            full, selected, cached = self.scenarios(case, input_hash)
            state.update(scenarios=full, selected=selected)
            if "scenarios" in wanted:
                data = full.to_dict()
                data["selected"] = selected
                data["selected_ids"] = [full.ids[p] for p in selected]
                writer.write(SCENARIOS_JSON, data)
            return cached

        def do_intraday() -> bool:
            chosen = state["scenarios"].subset(state["selected"])
            outcomes: Dict[str, List[Dict[str, Any]]] = {}
            all_cached = True
            for c in [HELD_FIXED] + list(criteria):
                outcomes[c] = []
                for k, sid in enumerate(chosen.ids):
                    data, cached = self.intraday(
                        case, state["compromise"], state["dayahead_key"], chosen.scenario(k), c
                    )
                    all_cached = all_cached and cached
                    outcomes[c].append(data)
                    if "intraday" in wanted:
                        rows = data.pop("ledger_rows")
                        writer.write(OUTCOME_JSON, data, criterion=c, n=sid)
                        writer.write(
                            LEDGER_CSV,
                            to_csv_text(rows, ledger_columns(data["ledger"]["plants"])),
                            criterion=c,
                            n=sid,
                        )
            state.update(chosen=chosen, outcomes=outcomes)
            return all_cached

        def do_report() -> bool:
            chosen, outcomes = state["chosen"], state["outcomes"]
            cases = list(outcomes)
            writer.write(REPORT_CSV, to_csv_text(report_rows(chosen, outcomes), report_columns(cases)))
            writer.write(COMPROMISE_CSV, to_csv_text(compromise_rows(chosen, outcomes), COMPROMISE_REPORT_COLUMNS))
            self._write_report_figures(writer, chosen, outcomes)
            return False

        if any(s in wanted for s in ("dayahead", "intraday", "report")):
            step("dayahead", do_dayahead)
        if any(s in wanted for s in ("scenarios", "intraday", "report")):
            step("scenarios", do_scenarios)
        if any(s in wanted for s in ("intraday", "report")):
            step("intraday", do_intraday)
        if "report" in wanted:
            step("report", do_report)
        writer.write(MANIFEST_JSON, manifest.to_dict())
        return manifest

    def _write_dayahead(
        self, writer: RunWriter, case: GridCase, front: ParetoFront, comp: DayAheadSolution
    ) -> None:
        writer.write(FRONT_CSV, to_csv_text(front_rows(front), FRONT_COLUMNS))
        for n, p in enumerate(front.points):
            writer.write(POINT_JSON, p.to_dict(with_solution=True), n=n)
        writer.write(COMPROMISE_JSON, comp.to_dict())
        writer.write(PRICES_CSV, to_csv_text(price_rows(case, comp), PRICE_COLUMNS))
        writer.write(PMP_CSV, to_csv_text(pmp_rows(case, comp), pmp_columns(case)))
        try:
            from .plotting import front_svg
        except ImportError:
            logger.warning("matplotlib is not importable, skipping the front figure")
            return
        writer.write(FRONT_SVG, front_svg({"day-ahead": front.objectives()}))

    def _write_report_figures(
        self, writer: RunWriter, chosen: ScenarioSet, outcomes: Dict[str, List[Dict[str, Any]]]
    ) -> None:
        try:
            from .plotting import front_svg, profit_ring_svg
        except ImportError:
            logger.warning("matplotlib is not importable, skipping report figures")
            return
        if not chosen.ids:
            return
        # the scenario closest to the forecast stands for the set
        k = int(np.argmin(np.abs(chosen.fluctuation)))
        fronts = {c: [tuple(p) for p in outs[k]["front"]] for c, outs in outcomes.items()}
        writer.write(
            INTRADAY_SVG,
            front_svg(fronts, "J5 wind curtailment (MWh)", "J6 = 1 - ASC", f"scenario {chosen.ids[k]}"),
        )
        rings: Dict[str, Dict[str, float]] = {}
        for c, outs in outcomes.items():
            if c == HELD_FIXED:
                continue
            ledger = outs[k]["ledger"]
            mask = np.asarray([x != "none" for x in ledger["criteria"]], dtype=bool)
            u = np.asarray(ledger["u"], dtype=float).reshape(len(mask), -1)
            split = {"IPE": float(np.asarray(ledger["v"], dtype=float)[mask].sum())}
            for j, plant in enumerate(ledger["plants"]):
                split[f"plant {plant}"] = float(u[mask, j].sum())
            rings[c] = split
        if rings:
            writer.write(RINGS_SVG, profit_ring_svg(rings))


def run_pipeline(
    case_path: Union[str, Path],
    stages: Sequence[str] = STAGES,
    criteria: Sequence[str] = CRITERIA,
    out: Optional[Union[str, Path]] = None,
    cache_dir: Optional[Union[str, Path]] = None,
    seed: Optional[int] = None,
    eps_points: Optional[int] = None,
    scenario_count: Optional[int] = None,
) -> RunManifest:
    return Runner(cache_dir=cache_dir).run(
        case_path,
        stages=stages,
        criteria=criteria,
        out=out,
        seed=seed,
        eps_points=eps_points,
        scenario_count=scenario_count,
    )
