"""
Tabular exports: every CSV goes through pandas with a fixed column order,
a version header line and a fixed float format, so equal inputs give equal
bytes
"""

import io
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd  # type: ignore[import]

from .dayahead import ParetoFront
from .model import GridCase, DayAheadSolution

CSV_HEADER = "# pdscr-csv v1"
FLOAT_FORMAT = "%.6f"

FRONT_COLUMNS = ["point", "j1", "j2", "asc", "curtailment_mwh", "epsilon"]
PRICE_COLUMNS = ["slot", "price_per_mwh", "tier", "band", "pmp_demand_mw"]
LEDGER_BASE_COLUMNS = ["slot", "criterion", "psi", "ipe"]


def to_csv_text(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
    """
    >>> print(to_csv_text([{"b": 2, "a": 0.5}], ["a", "b"]), end="")
    # pdscr-csv v1
    a,b
    0.500000,2
    """
    df = pd.DataFrame(list(rows), columns=list(columns))
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    df.to_csv(buf, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buf.getvalue()


def read_csv_text(text: str) -> pd.DataFrame:
    first, _, rest = text.partition("\n")
    if first != CSV_HEADER:
        raise ValueError(f"not a pdscr CSV, first line was '{first}'")
    return pd.read_csv(io.StringIO(rest))


def front_rows(front: ParetoFront) -> List[Dict[str, Any]]:
    return [
        {
            "point": n,
            "j1": p.j1,
            "j2": p.j2,
            "asc": 1.0 - p.j2,
            "curtailment_mwh": p.curtailment,
            "epsilon": np.nan if p.solution.epsilon is None else p.solution.epsilon,
        }
        for n, p in enumerate(front.points)
    ]


def price_rows(case: GridCase, solution: DayAheadSolution) -> List[Dict[str, Any]]:
    """Per-slot tariff; the cheaper half of the tiers is the green band, the rest gray"""
    tiers = sorted(case.dr.price_tiers)
    cutoff = tiers[(len(tiers) - 1) // 2] if tiers else 0.0
    demand = solution.pmp.demand_mw(case.pmp)
    return [
        {
            "slot": t,
            "price_per_mwh": float(price),
            "tier": int(solution.tiers[t]),
            "band": "green" if price <= cutoff else "gray",
            "pmp_demand_mw": float(demand[t]),
        }
        for t, price in enumerate(solution.prices)
    ]


def pmp_columns(case: GridCase) -> List[str]:
    return (
        ["slot"]
        + [f"procedure_{i}" for i in range(case.pmp.procedures)]
        + [f"buffer_{i}" for i in range(case.pmp.buffers)]
    )


def pmp_rows(case: GridCase, solution: DayAheadSolution) -> List[Dict[str, Any]]:
    rows = []
    for t in range(case.horizon):
        row: Dict[str, Any] = {"slot": t}
        for i in range(case.pmp.procedures):
            row[f"procedure_{i}"] = float(solution.pmp.processed[t, i])
        for i in range(case.pmp.buffers):
            row[f"buffer_{i}"] = float(solution.pmp.buffered[t, i])
        rows.append(row)
    return rows


def ledger_columns(plants: Sequence[int]) -> List[str]:
    return LEDGER_BASE_COLUMNS + [f"plant_{p}" for p in plants] + ["purchase_mw", "purchase_cost"]
