from pathlib import Path
from typing import Optional, Union

from .casefile import load_case, validate_case, bundled_case_path
from .model import GridCase, DayAheadSolution
from .dayahead import solve_dayahead, epsilon_sweep, pick_compromise, ParetoFront
from .intraday import solve_intraday, evaluate_fixed_dayahead, IntradayOutcome
from .scenarios import lhs_sample, stratified_select, ScenarioSet
from .metrics import hypervolume
from .pipeline import Runner, RunManifest, run_pipeline

# uncustomized, basic entry point to the library
default_runner: Optional[Runner] = None


def run(case_path: Union[str, Path, None] = None) -> RunManifest:
    """Every stage on a case file (the bundled 6-bus case by default)"""
    global default_runner
    if default_runner is None:
        default_runner = Runner()
    return default_runner.run(case_path if case_path is not None else bundled_case_path())
