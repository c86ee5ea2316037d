import os
import json
import shutil
import tempfile
from typing import Any, Dict, List

import numpy as np
import pytest
from click.testing import CliRunner

from pdscr.__main__ import EXIT_INFEASIBLE, EXIT_OK, EXIT_VALIDATION, main
from pdscr.casefile import bundled_case_path
from pdscr.exceptions import CaseValidationError, StageError
from pdscr.export import CSV_HEADER, ledger_columns, read_csv_text, to_csv_text
from pdscr.pipeline import (
    HELD_FIXED,
    Runner,
    compromise_rows,
    report_columns,
    report_rows,
    summarize_outcome,
)
from pdscr.scenarios import ScenarioSet
from pdscr.utils import hash_file


def _write_case(d: str, edit: Any) -> str:
    with open(bundled_case_path()) as f:
        raw = json.load(f)
    edit(raw)
    target = os.path.join(d, "case.json")
    with open(target, "w") as f:
        json.dump(raw, f)
    return target


def _outcome(j5: float, psi: List[float], criteria: List[str]) -> Dict[str, Any]:
    return {
        "j5": j5,
        "j6": 0.4,
        "asc": 0.6,
        "total_cost": 1000.0 + j5,
        "front": [[j5, 0.4]],
        "ledger": {
            "plants": [1, 2],
            "criteria": criteria,
            "u": [[p / 3, p / 3] for p in psi],
            "v": [p / 3 for p in psi],
        },
    }


def test_csv_text_is_versioned() -> None:
    text = to_csv_text([{"slot": 0, "psi": 1.5, "criterion": "equal"}], ["slot", "criterion", "psi"])
    assert text.splitlines()[0] == CSV_HEADER
    df = read_csv_text(text)
    assert list(df.columns) == ["slot", "criterion", "psi"]
    assert df["psi"].tolist() == [1.5]
    with pytest.raises(ValueError):
        read_csv_text("slot,psi\n0,1\n")
    assert ledger_columns([1, 2])[-4:] == ["plant_1", "plant_2", "purchase_mw", "purchase_cost"]


def test_report_tables() -> None:
    forecast = np.full((2, 1), 10.0)
    realized = np.array([[[12.0], [11.0]], [[9.0], [8.0]]])
    scenarios = ScenarioSet(0, 0.08, forecast, realized, np.full((2, 2, 1), 0.5), ids=[4, 17])
    outcomes = {
        HELD_FIXED: [_outcome(5.0, [0.0, 0.0], ["none", "none"]), _outcome(1.0, [0.0, 0.0], ["none", "none"])],
        "equal": [_outcome(2.0, [30.0, 0.0], ["equal", "none"]), _outcome(1.0, [0.0, 0.0], ["none", "none"])],
    }
    s = summarize_outcome(outcomes["equal"][0])
    assert s["psi_total"] == pytest.approx(30.0)
    assert s["ipe_share"] == pytest.approx(1 / 3)
    assert s["thermal_share"] == pytest.approx(2 / 3)

    cols = report_columns(list(outcomes))
    rows = report_rows(scenarios, outcomes)
    assert [r["scenario"] for r in rows] == [4, 17]
    assert rows[0]["fluctuation_mw"] == pytest.approx(3.0)
    assert set(rows[0]) == set(cols)
    # less curtailment gives the larger hypervolume
    assert rows[0]["hv_equal"] > rows[0]["hv_held_fixed"]

    comp = compromise_rows(scenarios, outcomes)
    assert [(r["scenario"], r["criterion"]) for r in comp] == [(4, "equal"), (17, "equal")]
    assert comp[1]["psi_total"] == 0.0


def test_scenarios_stage_is_cached() -> None:
    d: str = tempfile.mkdtemp()
    runner = Runner(cache_dir=d)
    out = os.path.join(d, "run")
    manifest = runner.run(bundled_case_path(), stages=["scenarios"], out=out, scenario_count=10)
    assert list(manifest.stages) == ["scenarios"]
    assert manifest.stages["scenarios"].status == "ok"
    assert manifest.complete
    target = os.path.join(out, "scenarios", "scenarios.json")
    assert manifest.artifacts["scenarios/scenarios.json"] == hash_file(target)
    with open(target) as f:
        data = json.load(f)
    assert data["count"] == 10
    assert len(data["selected"]) == 10
    assert os.path.exists(os.path.join(out, "manifest.json"))

    again = runner.run(bundled_case_path(), stages=["scenarios"], out=out, scenario_count=10)
    assert again.stages["scenarios"].status == "cached"
    assert again.artifacts == manifest.artifacts
    assert again.run_id == manifest.run_id

    other = runner.run(bundled_case_path(), stages=["scenarios"], out=out, scenario_count=10, seed=99)
    assert other.artifacts != manifest.artifacts
    shutil.rmtree(d)


def test_runner_rejects_bad_requests() -> None:
    d: str = tempfile.mkdtemp()
    runner = Runner(cache_dir=d)
    with pytest.raises(ValueError):
        runner.run(bundled_case_path(), stages=["forecast"])
    with pytest.raises(ValueError):
        runner.run(bundled_case_path(), criteria=["nash"])
    bad = _write_case(d, lambda raw: raw["network"]["branches"][0].update(to_bus=99))
    with pytest.raises(CaseValidationError):
        runner.run(bad, stages=["scenarios"])
    shutil.rmtree(d)


def test_cli_validate() -> None:
    d: str = tempfile.mkdtemp()
    cli = CliRunner()
    result = cli.invoke(main, ["--cache-dir", d, "validate"])
    assert result.exit_code == EXIT_OK
    assert result.output.strip().endswith(": ok")

    bad = _write_case(d, lambda raw: raw["dr_programs"]["price_tiers_per_kwh"].__setitem__(0, 0.0))
    result = cli.invoke(main, ["--cache-dir", d, "validate", "--case", bad, "--json"])
    assert result.exit_code == EXIT_VALIDATION
    assert [x["code"] for x in json.loads(result.output)] == ["E-DR-02"]

    result = cli.invoke(main, ["--cache-dir", d, "scenarios", "--case", bad])
    assert result.exit_code == EXIT_VALIDATION
    shutil.rmtree(d)


def test_cli_scenarios() -> None:
    d: str = tempfile.mkdtemp()
    out = os.path.join(d, "run")
    result = CliRunner().invoke(main, ["--cache-dir", d, "scenarios", "--scenarios", "10", "--seed", "3", "--out", out])
    assert result.exit_code == EXIT_OK
    printed = json.loads(result.output.strip().splitlines()[-1])
    assert "scenarios/scenarios.json" in printed["artifacts"]
    assert os.path.isdir(printed["run_dir"])
    shutil.rmtree(d)


@pytest.mark.slow
def test_infeasible_case_exit_code() -> None:
    d: str = tempfile.mkdtemp()

    def overload(raw: Dict[str, Any]) -> None:
        raw["network"]["buses"][2]["load_mw"] = [1000.0] * raw["horizon"]

    case = _write_case(d, overload)
    out = os.path.join(d, "run")
    result = CliRunner().invoke(main, ["--cache-dir", d, "dayahead", "--case", case, "--out", out])
    assert result.exit_code == EXIT_INFEASIBLE
    with open(os.path.join(out, "manifest.json")) as f:
        manifest = json.load(f)
    assert manifest["stages"]["dayahead"]["status"] == "failed"

    with pytest.raises(StageError) as excinfo:
        Runner(cache_dir=d).run(case, stages=["dayahead"], out=out)
    assert excinfo.value.manifest is not None
    shutil.rmtree(d)


@pytest.mark.slow
def test_pipeline_is_deterministic() -> None:
    hashes = []
    dirs = []
    for _ in range(2):
        d: str = tempfile.mkdtemp()
        dirs.append(d)
        out = os.path.join(d, "run")
        manifest = Runner(cache_dir=d).run(bundled_case_path(), out=out, eps_points=2, scenario_count=3)
        assert manifest.complete
        assert "report/report.csv" in manifest.artifacts
        assert "dayahead/front.csv" in manifest.artifacts
        assert "dayahead/compromise.json" in manifest.artifacts
        hashes.append(manifest.artifacts)
        report = read_csv_text(open(os.path.join(out, "report", "report.csv")).read())
        assert len(report) == 3
        assert {"curtailment_mwh_held_fixed", "curtailment_mwh_equal", "curtailment_mwh_contribution"} <= set(
            report.columns
        )
    assert hashes[0]["report/report.csv"] == hashes[1]["report/report.csv"]
    assert hashes[0]["report/compromise.csv"] == hashes[1]["report/compromise.csv"]
    for d in dirs:
        shutil.rmtree(d)


def test_figures_are_reproducible() -> None:
    from pdscr.plotting import front_svg, profit_ring_svg

    fronts = {"equal": [(1.0, 0.5), (2.0, 0.3)], "held_fixed": [(3.0, 0.5)]}
    a = front_svg(fronts)
    assert a.lstrip().startswith("<?xml")
    assert a == front_svg(fronts)
    rings = profit_ring_svg({"equal": {"IPE": 10.0, "plant 1": 20.0}, "contribution": {"IPE": 0.0}})
    assert "<svg" in rings
