"""
Solver-facing representation of a mixed-integer linear program

Variables are referenced by the integer index returned from add_variable;
rows are sparse {index: coefficient} mappings. Convex piecewise-linear costs
are compiled into epigraph rows as they are attached, so the engines only
ever see linear rows.
"""

import math
import copy
from enum import Enum
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple, NamedTuple

import numpy as np
from scipy import sparse  # type: ignore[import]

from ..exceptions import SolverConfigError

LinExpr = Dict[int, float]


class Sense(Enum):
    MINIMIZE = "min"
    MAXIMIZE = "max"


class Relation(Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class VarType(Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float
    upper: float
    vtype: VarType = VarType.CONTINUOUS


@dataclass(frozen=True)
class Constraint:
    name: str
    coefs: Tuple[Tuple[int, float], ...]
    relation: Relation
    rhs: float

    def activity(self, values: np.ndarray) -> float:
        return float(sum(c * values[i] for i, c in self.coefs))

    def violation(self, values: np.ndarray) -> float:
        """How far the row is from being satisfied (0 when it holds)"""
        lhs = self.activity(values)
        if self.relation == Relation.LE:
            return max(0.0, lhs - self.rhs)
        if self.relation == Relation.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class PiecewiseBlock:
    """
    A convex piecewise-linear function given by its breakpoints and the
    function values there. Between breakpoints it interpolates linearly.

    >>> blk = PiecewiseBlock((0.0, 1.0, 2.0), (0.0, 1.0, 4.0))
    >>> blk.slopes().tolist()
    [1.0, 3.0]
    >>> blk.evaluate(1.5)
    2.5
    """

    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.breakpoints) == 0 or len(self.breakpoints) != len(self.values):
            raise ValueError("breakpoints and values must be non-empty and aligned")
        bp = np.asarray(self.breakpoints)
        if np.any(np.diff(bp) <= 0):
            raise ValueError(f"breakpoints must be strictly increasing: {self.breakpoints}")
        slopes = self.slopes()
        if len(slopes) > 1:
            tol = 1e-9 * max(1.0, float(np.max(np.abs(slopes))))
            if np.any(np.diff(slopes) < -tol):
                raise ValueError("piecewise block is not convex (slopes decrease)")

    def slopes(self) -> np.ndarray:
        if len(self.breakpoints) < 2:
            return np.zeros(0)
        return np.diff(np.asarray(self.values)) / np.diff(np.asarray(self.breakpoints))

    def intercepts(self) -> np.ndarray:
        """value of each segment's supporting line at x = 0"""
        return np.asarray(self.values[:-1]) - self.slopes() * np.asarray(self.breakpoints[:-1])

    def evaluate(self, x: float) -> float:
        return float(np.interp(x, self.breakpoints, self.values))

    def concat(self, other: "PiecewiseBlock") -> "PiecewiseBlock":
        """
        Joins two blocks where this one ends at other's first breakpoint
        """
        if not math.isclose(self.breakpoints[-1], other.breakpoints[0], abs_tol=1e-12):
            raise ValueError("blocks do not share a breakpoint")
        return PiecewiseBlock(
            self.breakpoints + other.breakpoints[1:], self.values + other.values[1:]
        )


def linearize_quadratic(
    a: float, b: float, c: float, pmin: float, pmax: float, segments: int
) -> PiecewiseBlock:
    """
    Chords of F(P) = a·P² + b·P + c over evenly spaced breakpoints in [pmin, pmax].
    The chords overestimate F by at most a·h²/4 with h the segment width.

    >>> blk = linearize_quadratic(0.0, 20.0, 100.0, 0.0, 100.0, 4)
    >>> blk.evaluate(37.0)
    840.0
    """
    if a < 0:
        raise ValueError(f"non-convex fuel cost (a={a}) is not supported")
    if segments < 1:
        raise ValueError("segments must be >= 1")
    if pmin > pmax:
        raise ValueError(f"empty range [{pmin}, {pmax}]")
    if pmin == pmax:
        bps = np.array([pmin])
    else:
        bps = np.linspace(pmin, pmax, segments + 1)
    vals = a * bps ** 2 + b * bps + c
    return PiecewiseBlock(tuple(float(v) for v in bps), tuple(float(v) for v in vals))


def quadratic_error_bound(a: float, pmin: float, pmax: float, segments: int) -> float:
    """
    >>> quadratic_error_bound(0.01, 10.0, 90.0, 8)
    0.25
    """
    return a * ((pmax - pmin) / segments) ** 2 / 4.0


@dataclass(frozen=True)
class PiecewiseLink:
    variable: int
    epigraph: int
    indicator: Optional[int]
    block: PiecewiseBlock


class CompiledProblem(NamedTuple):
    """Array form of a problem, always as a minimization"""

    c: np.ndarray
    constant: float
    a_ub: Optional[sparse.csr_matrix]
    b_ub: np.ndarray
    a_eq: Optional[sparse.csr_matrix]
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integrality: np.ndarray
    # (constraint index, sign) for every row of a_ub / a_eq
    ub_rows: List[Tuple[int, float]]
    eq_rows: List[int]
    flip: float


class MilpProblem:
    """
    Linear objective, linear rows and optional binaries
    """

    def __init__(self, name: str = "problem", sense: Sense = Sense.MINIMIZE):
        self.name = name
        self.sense = sense
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self.objective: LinExpr = {}
        self.objective_constant: float = 0.0
        self.piecewise: List[PiecewiseLink] = []
        # complementarity switch z -> the multiplier it gates
        self.switches: Dict[int, int] = {}
        self._names: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.variables)

    def copy(self) -> "MilpProblem":
        return copy.deepcopy(self)

    def add_variable(
        self,
        name: str,
        lower: float = 0.0,
        upper: float = math.inf,
        vtype: VarType = VarType.CONTINUOUS,
    ) -> int:
        if name in self._names:
            raise SolverConfigError(f"duplicate variable name '{name}'")
        if lower > upper:
            raise SolverConfigError(f"variable '{name}' has lower {lower} > upper {upper}")
        if vtype == VarType.BINARY:
            lower, upper = 0.0, 1.0
        self.variables.append(Variable(name, float(lower), float(upper), vtype))
        self._names[name] = len(self.variables) - 1
        return len(self.variables) - 1

    def add_binary(self, name: str) -> int:
        return self.add_variable(name, 0.0, 1.0, VarType.BINARY)

    def index(self, name: str) -> int:
        return self._names[name]

    def set_bounds(self, var: int, lower: float, upper: float) -> None:
        v = self.variables[var]
        if lower > upper + 1e-12:
            raise SolverConfigError(f"variable '{v.name}' has lower {lower} > upper {upper}")
        self.variables[var] = Variable(v.name, float(lower), float(max(lower, upper)), v.vtype)

    def fix(self, var: int, value: float) -> None:
        """Pins a variable; a fixed binary is relaxed to continuous so it stays well-formed"""
        v = self.variables[var]
        self.variables[var] = Variable(v.name, float(value), float(value), VarType.CONTINUOUS)

    def add_constraint(
        self,
        coefs: Mapping[int, float],
        relation: Relation,
        rhs: float,
        name: Optional[str] = None,
    ) -> int:
        n = len(self.variables)
        merged: Dict[int, float] = {}
        for i, c in coefs.items():
            if not 0 <= i < n:
                raise SolverConfigError(f"row '{name}' references undeclared variable {i}")
            if c != 0.0:
                merged[i] = merged.get(i, 0.0) + float(c)
        row = Constraint(
            name or f"c{len(self.constraints)}",
            tuple(sorted(merged.items())),
            relation,
            float(rhs),
        )
        self.constraints.append(row)
        return len(self.constraints) - 1

    def set_objective(
        self, coefs: Mapping[int, float], constant: float = 0.0, sense: Optional[Sense] = None
    ) -> None:
        self.objective = {i: float(c) for i, c in coefs.items() if c != 0.0}
        self.objective_constant = float(constant)
        if sense is not None:
            self.sense = sense

    def add_objective_term(self, var: int, coef: float) -> None:
        self.objective[var] = self.objective.get(var, 0.0) + float(coef)

    def add_piecewise(
        self,
        var: int,
        block: PiecewiseBlock,
        indicator: Optional[int] = None,
        name: Optional[str] = None,
    ) -> int:
        """
        Adds an epigraph variable f ≥ block(x). With an on/off indicator s the
        rows become f ≥ slope·x + intercept·s, so f may drop to 0 when s = 0
        (x itself must be forced to 0 by the caller in that case).
        Returns the epigraph variable index; its objective weight is up to the caller.
        """
        label = name or f"pw{len(self.piecewise)}"
        epi = self.add_variable(f"{label}_f", lower=0.0 if min(block.values) >= 0 else -math.inf)
        if len(block.breakpoints) == 1:
            rows = [(0.0, block.values[0])]
        else:
            rows = list(zip(block.slopes().tolist(), block.intercepts().tolist()))
        for k, (slope, icpt) in enumerate(rows):
            coefs: LinExpr = {epi: 1.0}
            if slope != 0.0:
                coefs[var] = -slope
            if indicator is None:
                self.add_constraint(coefs, Relation.GE, icpt, f"{label}_seg{k}")
            else:
                coefs[indicator] = coefs.get(indicator, 0.0) - icpt
                self.add_constraint(coefs, Relation.GE, 0.0, f"{label}_seg{k}")
        self.piecewise.append(PiecewiseLink(var, epi, indicator, block))
        return epi

    @property
    def binaries(self) -> List[int]:
        return [i for i, v in enumerate(self.variables) if v.vtype == VarType.BINARY]

    def validate(self) -> None:
        """Checks the structural invariants; raises SolverConfigError"""
        for v in self.variables:
            if v.lower > v.upper:
                raise SolverConfigError(f"variable '{v.name}' has empty bounds")
            if v.vtype == VarType.BINARY and (v.lower, v.upper) != (0.0, 1.0):
                raise SolverConfigError(f"binary '{v.name}' must have bounds 0/1")
        n = len(self.variables)
        for row in self.constraints:
            for i, _ in row.coefs:
                if not 0 <= i < n:
                    raise SolverConfigError(f"row '{row.name}' references undeclared variable {i}")
        for i in self.objective:
            if not 0 <= i < n:
                raise SolverConfigError(f"objective references undeclared variable {i}")

    def evaluate_objective(self, values: np.ndarray) -> float:
        return float(sum(c * values[i] for i, c in self.objective.items())) + self.objective_constant

    def max_violation(self, values: np.ndarray) -> float:
        worst = 0.0
        for row in self.constraints:
            worst = max(worst, row.violation(values))
        for i, v in enumerate(self.variables):
            worst = max(worst, v.lower - values[i], values[i] - v.upper)
        return worst

    def compile(self) -> CompiledProblem:
        n = len(self.variables)
        flip = -1.0 if self.sense == Sense.MAXIMIZE else 1.0
        c = np.zeros(n)
        for i, coef in self.objective.items():
            c[i] = flip * coef
        ub_r: List[int] = []
        ub_c: List[int] = []
        ub_v: List[float] = []
        b_ub: List[float] = []
        ub_rows: List[Tuple[int, float]] = []
        eq_r: List[int] = []
        eq_c: List[int] = []
        eq_v: List[float] = []
        b_eq: List[float] = []
        eq_rows: List[int] = []
        for k, row in enumerate(self.constraints):
            if row.relation == Relation.EQ:
                r = len(eq_rows)
                for i, coef in row.coefs:
                    eq_r.append(r)
                    eq_c.append(i)
                    eq_v.append(coef)
                b_eq.append(row.rhs)
                eq_rows.append(k)
            else:
                sign = 1.0 if row.relation == Relation.LE else -1.0
                r = len(ub_rows)
                for i, coef in row.coefs:
                    ub_r.append(r)
                    ub_c.append(i)
                    ub_v.append(sign * coef)
                b_ub.append(sign * row.rhs)
                ub_rows.append((k, sign))
        a_ub = (
            sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(ub_rows), n))
            if ub_rows
            else None
        )
        a_eq = (
            sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(eq_rows), n))
            if eq_rows
            else None
        )
        return CompiledProblem(
            c=c,
            constant=flip * self.objective_constant,
            a_ub=a_ub,
            b_ub=np.asarray(b_ub, dtype=float),
            a_eq=a_eq,
            b_eq=np.asarray(b_eq, dtype=float),
            lower=np.array([v.lower for v in self.variables], dtype=float),
            upper=np.array([v.upper for v in self.variables], dtype=float),
            integrality=np.array(
                [1 if v.vtype == VarType.BINARY else 0 for v in self.variables], dtype=int
            ),
            ub_rows=ub_rows,
            eq_rows=eq_rows,
            flip=flip,
        )

    def to_lp_text(self) -> str:
        """CPLEX LP text, for cross-checking with external solvers"""

        def vname(i: int) -> str:
            return "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in self.variables[i].name)

        def expr(coefs: Mapping[int, float]) -> str:
            if not coefs:
                return "0"
            parts = []
            for i, c in sorted(coefs.items()):
                parts.append(f"{'-' if c < 0 else '+'} {abs(c):.12g} {vname(i)}")
            return " ".join(parts)

        ops = {Relation.LE: "<=", Relation.GE: ">=", Relation.EQ: "="}
        lines = ["\\ " + self.name, "Minimize" if self.sense == Sense.MINIMIZE else "Maximize"]
        obj = expr(self.objective)
        if self.objective_constant:
            obj += f" + {self.objective_constant:.12g} __const"
        lines.append(f" obj: {obj}")
        lines.append("Subject To")
        for row in self.constraints:
            lines.append(f" {row.name}: {expr(dict(row.coefs))} {ops[row.relation]} {row.rhs:.12g}")
        if self.objective_constant:
            lines.append(" __const_fix: __const = 1")
        lines.append("Bounds")
        for i, v in enumerate(self.variables):
            lo = "-inf" if math.isinf(v.lower) else f"{v.lower:.12g}"
            hi = "+inf" if math.isinf(v.upper) else f"{v.upper:.12g}"
            lines.append(f" {lo} <= {vname(i)} <= {hi}")
        bins = [vname(i) for i in self.binaries]
        if bins:
            lines.append("Binaries")
            lines.append(" " + " ".join(bins))
        lines.append("End")
        return "\n".join(lines) + "\n"


def add_complementarity(
    problem: MilpProblem,
    g: Mapping[int, float],
    g_constant: float,
    multiplier: int,
    big_m_g: Optional[float],
    big_m_lambda: Optional[float],
    name: Optional[str] = None,
) -> int:
    """
    Enforces λ·g(x) = 0 for g(x) = Σ g[i]·x_i + g_constant ≤ 0 and λ ≥ 0
    with one switching binary z: λ ≤ M_λ·z and −g(x) ≤ M_g·(1 − z).
    The row g(x) ≤ 0 itself must already be part of the problem.
    Returns the index of z, also recorded in problem.switches.
    """
    label = name or f"cmp{len(problem.constraints)}"
    for which, m in (("slack", big_m_g), ("multiplier", big_m_lambda)):
        if m is None or not math.isfinite(m) or m <= 0:
            raise SolverConfigError(f"complementarity pair '{label}' has no valid {which} bound ({m})")
    assert big_m_g is not None and big_m_lambda is not None
    z = problem.add_binary(f"{label}_z")
    problem.add_constraint({multiplier: 1.0, z: -big_m_lambda}, Relation.LE, 0.0, f"{label}_lam")
    coefs: LinExpr = {i: -c for i, c in g.items()}
    coefs[z] = coefs.get(z, 0.0) + big_m_g
    problem.add_constraint(coefs, Relation.LE, big_m_g + g_constant, f"{label}_slack")
    problem.switches[z] = multiplier
    return z


def row_range(coefs: Mapping[int, float], problem: MilpProblem) -> Tuple[float, float]:
    """
    Interval-arithmetic range of Σ coef·x over the variable boxes
    """
    lo = hi = 0.0
    for i, c in coefs.items():
        v = problem.variables[i]
        if c >= 0:
            lo += c * v.lower
            hi += c * v.upper
        else:
            lo += c * v.upper
            hi += c * v.lower
    return lo, hi
