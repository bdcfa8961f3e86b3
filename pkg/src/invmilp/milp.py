"""Small exact MILP solver: dense simplex relaxations, depth-first
branch-and-bound, and an exhaustive enumeration oracle.

All problems are maximizations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import _simplex
from .errors import ResourceLimitError, StructureError, UnsupportedError

FEAS_TOL = 1e-7
INT_TOL = 1e-6
BRUTE_FORCE_MAX_POINTS = 10**7


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "<="
    EQ = "=="
    GE = ">="


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


_SENSE_CODE = {Sense.LE: -1, Sense.EQ: 0, Sense.GE: 1}


@dataclass(frozen=True)
class VarSpec:
    lower: float = 0.0
    upper: float = math.inf
    kind: VarKind = VarKind.CONTINUOUS

    def __post_init__(self):
        kind = VarKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "lower", float(self.lower))
        upper = float(self.upper)
        if kind is VarKind.BINARY:
            if upper == math.inf:
                upper = 1.0
            if self.lower != 0.0 or upper != 1.0:
                raise StructureError("binary variables must have bounds [0, 1]")
        object.__setattr__(self, "upper", upper)
        if math.isnan(self.lower) or math.isnan(upper) or self.lower > upper:
            raise StructureError(f"invalid bounds [{self.lower}, {upper}]")
        if kind is not VarKind.CONTINUOUS and not (
            math.isfinite(self.lower) and math.isfinite(upper)
        ):
            raise StructureError("integer variables need finite bounds")

    @property
    def is_integer(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS


@dataclass(frozen=True)
class LinConstraint:
    coeffs: Mapping[int, float]
    sense: Sense
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "sense", Sense(self.sense))
        object.__setattr__(self, "rhs", float(self.rhs))
        object.__setattr__(
            self, "coeffs", {int(k): float(v) for k, v in self.coeffs.items()}
        )

    def activity(self, point) -> float:
        return sum(a * float(point[j]) for j, a in self.coeffs.items())


@dataclass(frozen=True)
class DenseForm:
    """Array view of a problem; what the solvers actually consume."""

    A: np.ndarray
    rhs: np.ndarray
    senses: np.ndarray
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True, eq=False)
class MilpProblem:
    vars: tuple[VarSpec, ...]
    constraints: tuple[LinConstraint, ...]
    objective: Mapping[int, float]
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(
            self, "objective", {int(k): float(v) for k, v in self.objective.items()}
        )
        n = len(self.vars)
        for j in self.objective:
            if not 0 <= j < n:
                raise StructureError(f"objective references unknown variable {j}")
        for r, con in enumerate(self.constraints):
            for j in con.coeffs:
                if not 0 <= j < n:
                    raise StructureError(f"constraint {r} references unknown variable {j}")

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @cached_property
    def dense(self) -> DenseForm:
        n, m = self.num_vars, self.num_constraints
        A = np.zeros((m, n))
        for r, con in enumerate(self.constraints):
            for j, a in con.coeffs.items():
                A[r, j] = a
        c = np.zeros(n)
        for j, a in self.objective.items():
            c[j] = a
        return DenseForm(
            A=A,
            rhs=np.array([con.rhs for con in self.constraints], dtype=float),
            senses=np.array([_SENSE_CODE[con.sense] for con in self.constraints], dtype=np.int64),
            c=c,
            lower=np.array([v.lower for v in self.vars], dtype=float),
            upper=np.array([v.upper for v in self.vars], dtype=float),
            integer=np.array([v.is_integer for v in self.vars], dtype=bool),
        )

    def with_objective(self, objective: Mapping[int, float]) -> "MilpProblem":
        """Same feasible set, new objective; reuses the cached dense matrix."""
        new = MilpProblem(self.vars, self.constraints, objective, self.name)
        if "dense" in self.__dict__:
            d = self.dense
            new.__dict__["dense"] = DenseForm(
                d.A, d.rhs, d.senses, new.objective_vector(), d.lower, d.upper, d.integer
            )
        return new

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def objective_value(self, point) -> float:
        return float(sum(a * float(point[j]) for j, a in self.objective.items()))

    def relaxed(self) -> "MilpProblem":
        return MilpProblem(
            tuple(VarSpec(v.lower, v.upper, VarKind.CONTINUOUS) for v in self.vars),
            self.constraints,
            self.objective,
            self.name,
        )

    # -- structured-text round trip ---------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "vars": [
                {
                    "lower": _bound_out(v.lower),
                    "upper": _bound_out(v.upper),
                    "kind": v.kind.value,
                }
                for v in self.vars
            ],
            "constraints": [
                {
                    "coeffs": {str(j): a for j, a in sorted(con.coeffs.items())},
                    "sense": con.sense.value,
                    "rhs": con.rhs,
                }
                for con in self.constraints
            ],
            "objective": {str(j): a for j, a in sorted(self.objective.items())},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "MilpProblem":
        try:
            vars_ = tuple(
                VarSpec(
                    _bound_in(v.get("lower"), -math.inf),
                    _bound_in(v.get("upper"), math.inf),
                    v.get("kind", "continuous"),
                )
                for v in doc["vars"]
            )
            cons = tuple(
                LinConstraint(c["coeffs"], c["sense"], c["rhs"]) for c in doc["constraints"]
            )
            return cls(vars_, cons, doc.get("objective", {}), doc.get("name", "problem"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, StructureError):
                raise
            raise StructureError(f"malformed problem document: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "MilpProblem":
        return cls.from_dict(json.loads(text))


def _bound_out(x: float):
    return None if math.isinf(x) else x


def _bound_in(x, default: float) -> float:
    return default if x is None else float(x)


@dataclass
class MilpSolution:
    status: Status
    point: np.ndarray | None = None
    objective_value: float | None = None
    nodes: int = 0
    lp_iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is Status.OPTIMAL


# -- LP relaxation -------------------------------------------------------------


class _StandardForm:
    """Fixed column layout mapping a problem onto ``y >= 0`` variables.

    Variables with a finite lower bound become ``y = x - lower`` (plus an
    upper-bound row if ``upper`` is finite), those bounded only above become
    ``y = upper - x``, free ones split into two columns. The layout is chosen
    once from the root bounds; branching only moves finite bounds of integer
    variables, which changes right-hand sides but never the layout.
    """

    def __init__(self, d: DenseForm, c: np.ndarray):
        self.d = d
        n = d.n
        kinds = np.zeros(n, dtype=np.int64)  # 0 shift, 1 negate, 2 split
        col_var: list[int] = []
        col_sign: list[float] = []
        self.col_of = np.full(n, -1, dtype=np.int64)
        ub_vars: list[int] = []
        for j in range(n):
            lo, hi = d.lower[j], d.upper[j]
            self.col_of[j] = len(col_var)
            if lo > -math.inf:
                col_var.append(j)
                col_sign.append(1.0)
                if hi < math.inf:
                    ub_vars.append(j)
            elif hi < math.inf:
                kinds[j] = 1
                col_var.append(j)
                col_sign.append(-1.0)
            else:
                kinds[j] = 2
                col_var.extend((j, j))
                col_sign.extend((1.0, -1.0))
        self.kinds = kinds
        self.idx = np.array(col_var, dtype=np.int64)
        self.sign = np.array(col_sign)
        self.ub_vars = np.array(ub_vars, dtype=np.int64)
        m = d.A.shape[0]
        self.ub_row = np.full(n, -1, dtype=np.int64)
        self.ub_row[self.ub_vars] = m + np.arange(len(ub_vars))
        nc = len(col_var)
        A = np.zeros((m + len(ub_vars), nc))
        A[:m] = d.A[:, self.idx] * self.sign
        A[m + np.arange(len(ub_vars)), self.col_of[self.ub_vars]] = 1.0
        self.A = A
        self.senses = np.concatenate([d.senses, -np.ones(len(ub_vars), dtype=np.int64)])
        self.c = c[self.idx] * self.sign
        self.obj = c

    def shift(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        return np.where(self.kinds == 0, lower, np.where(self.kinds == 1, upper, 0.0))

    def rhs(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        d = self.d
        base = d.rhs - d.A @ self.shift(lower, upper)
        return np.concatenate([base, upper[self.ub_vars] - lower[self.ub_vars]])

    def point(self, y: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        x = self.shift(lower, upper)
        np.add.at(x, self.idx, self.sign * y)
        return x

    def feas_tol(self, rhs: np.ndarray) -> float:
        return 1e-9 * max(1.0, float(np.abs(rhs).max(initial=0.0)))


@dataclass
class _Node:
    lower: np.ndarray
    upper: np.ndarray
    parent: tuple | None = None  # (T, basis, slack_col, art_start, lower, upper)
    owns: bool = False  # may modify the parent tableau in place


def _node_ok(d: DenseForm, x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> bool:
    slack = FEAS_TOL * np.maximum(1.0, np.abs(lower))
    if np.any(x < lower - slack) or np.any(x > upper + FEAS_TOL * np.maximum(1.0, np.abs(upper))):
        return False
    return _rows_ok(d, x)


def _solve_node(sf: _StandardForm, node: _Node):
    """LP at a node, warm-started from the parent tableau when there is one.

    Returns ``(status, x, tableau_state, iterations)``.
    """
    lower, upper = node.lower, node.upper
    iters = 0
    if sf.A.shape[1] == 0:
        x = sf.shift(lower, upper)
        ok = _rows_ok(sf.d, x)
        return (_simplex.OPTIMAL if ok else _simplex.INFEASIBLE), x, None, 0
    rhs = sf.rhs(lower, upper)
    tol = sf.feas_tol(rhs)
    if node.parent is not None and node.parent[0] is not None:
        T, basis, slack_col, art_start, plower, pupper = node.parent
        if not node.owns:
            T, basis = T.copy(), basis.copy()
        for j in np.flatnonzero(lower != plower):
            _simplex.shift_column(T, sf.col_of[j], lower[j] - plower[j])
        for j in np.flatnonzero(upper != pupper):
            _simplex.shift_column(T, slack_col[sf.ub_row[j]], pupper[j] - upper[j])
        status, iters = _simplex.resolve(T, basis, art_start, tol)
        if status == _simplex.OPTIMAL:
            x = sf.point(_simplex.extract(T, basis, sf.A.shape[1]), lower, upper)
            if _node_ok(sf.d, x, lower, upper):
                return status, x, (T, basis, slack_col, art_start), iters
        elif status == _simplex.INFEASIBLE:
            return status, None, None, iters
        # numerical trouble: fall through to a cold solve
    status, T, basis, slack_col, art_start, it = _simplex.solve_cold(sf.A, rhs, sf.senses, sf.c, tol)
    iters += it
    if status == _simplex.ITERATION_LIMIT:
        raise ResourceLimitError("simplex iteration limit reached")
    if status != _simplex.OPTIMAL:
        return status, None, None, iters
    x = sf.point(_simplex.extract(T, basis, sf.A.shape[1]), lower, upper)
    return status, x, (T, basis, slack_col, art_start), iters


def _rows_ok(d: DenseForm, x: np.ndarray) -> bool:
    act = d.A @ x
    tol = FEAS_TOL * np.maximum(1.0, np.abs(d.rhs))
    le = (d.senses <= 0) & (act > d.rhs + tol)
    ge = (d.senses >= 0) & (act < d.rhs - tol)
    return not (le.any() or ge.any())


_STATUS = {
    _simplex.OPTIMAL: Status.OPTIMAL,
    _simplex.INFEASIBLE: Status.INFEASIBLE,
    _simplex.UNBOUNDED: Status.UNBOUNDED,
}


def solve_lp(problem: MilpProblem) -> MilpSolution:
    """Solve the continuous relaxation (integrality is ignored)."""
    d = problem.dense
    sf = _StandardForm(d, d.c)
    status, x, _, iters = _solve_node(sf, _Node(d.lower, d.upper))
    if status != _simplex.OPTIMAL:
        return MilpSolution(_STATUS[status], lp_iterations=iters)
    return MilpSolution(Status.OPTIMAL, x, float(d.c @ x), nodes=1, lp_iterations=iters)


# -- branch and bound ----------------------------------------------------------


def _branch_var(x: np.ndarray, integer: np.ndarray) -> int:
    """Most fractional integer variable, lowest index on ties; -1 if none."""
    xi = x[integer]
    dist = np.abs(xi - np.round(xi))
    if dist.size == 0 or dist.max() <= INT_TOL:
        return -1
    # fractionality ties within 1e-12 go to the lowest index
    k = int(np.flatnonzero(dist >= dist.max() - 1e-12)[0])
    return int(np.flatnonzero(integer)[k])


def _improves(value: float, best_x, best_val: float) -> bool:
    return best_x is None or value > best_val + 1e-9 * (1.0 + abs(best_val))


def _bnb(d: DenseForm, c: np.ndarray, node_limit: int):
    """Depth-first branch-and-bound; returns (point, value, nodes, iters, root_status)."""
    sf = _StandardForm(d, c)
    stack = [_Node(d.lower.copy(), d.upper.copy())]
    best_x = None
    best_val = -math.inf
    nodes = 0
    iters = 0
    root_status = None
    while stack:
        node = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise ResourceLimitError(
                f"branch-and-bound node limit {node_limit} exceeded",
                incumbent=None if best_x is None else (best_x, best_val),
            )
        status, x, state, it = _solve_node(sf, node)
        iters += it
        if root_status is None:
            root_status = status
            if status == _simplex.UNBOUNDED:
                return None, None, nodes, iters, status
        if status != _simplex.OPTIMAL:
            continue
        value = float(c @ x)
        if not _improves(value, best_x, best_val):
            continue
        j = _branch_var(x, d.integer)
        if j < 0:
            x = x.copy()
            x[d.integer] = np.round(x[d.integer])
            value = float(c @ x)
            if _improves(value, best_x, best_val):
                best_x, best_val = x, value
            continue
        fl = math.floor(x[j])
        parent = None if state is None else (*state, node.lower, node.upper)
        up_lower = node.lower.copy()
        up_lower[j] = fl + 1.0
        down_upper = node.upper.copy()
        down_upper[j] = fl
        # the floor child is solved next and takes the tableau over; by then
        # the ceiling child has made its own copy
        up = _Node(up_lower, node.upper, parent)
        if parent is not None:
            up.parent = (parent[0].copy(), parent[1].copy(), *parent[2:])
            up.owns = True
        stack.append(up)
        stack.append(_Node(node.lower, down_upper, parent, owns=True))
    return best_x, best_val, nodes, iters, root_status


def solve_milp(problem: MilpProblem, node_limit: int = 200_000) -> MilpSolution:
    """Exact optimum by depth-first branch-and-bound.

    Branches on the most fractional integer variable (lowest index on ties),
    exploring the floor child first, so results are reproducible. Child
    relaxations are re-solved from the parent tableau by dual simplex.
    """
    d = problem.dense
    best_x, best_val, nodes, iters, root = _bnb(d, d.c, node_limit)
    if root == _simplex.UNBOUNDED:
        # unbounded relaxation: the MILP is unbounded iff it is feasible at all
        fx, _, n2, it2, _ = _bnb(d, np.zeros(d.n), node_limit)
        status = Status.INFEASIBLE if fx is None else Status.UNBOUNDED
        return MilpSolution(status, nodes=nodes + n2, lp_iterations=iters + it2)
    if best_x is None:
        return MilpSolution(Status.INFEASIBLE, nodes=nodes, lp_iterations=iters)
    return MilpSolution(
        Status.OPTIMAL, best_x, problem.objective_value(best_x), nodes=nodes, lp_iterations=iters
    )


# -- enumeration oracle --------------------------------------------------------


def brute_force_solve(problem: MilpProblem, max_points: int = BRUTE_FORCE_MAX_POINTS) -> MilpSolution:
    """Enumerate every integer point; ties go to the lexicographically smallest."""
    d = problem.dense
    if not d.integer.all():
        raise UnsupportedError("brute force needs all variables integer")
    lo = np.ceil(d.lower - INT_TOL).astype(np.int64)
    hi = np.floor(d.upper + INT_TOL).astype(np.int64)
    sizes = np.maximum(hi - lo + 1, 0)
    total = math.prod(int(s) for s in sizes)
    if total > max_points:
        raise ResourceLimitError(f"enumeration grid has {total} points (limit {max_points})")
    if total == 0:
        return MilpSolution(Status.INFEASIBLE)

    best_x = None
    best_val = -math.inf
    chunk = 1 << 16
    shape = tuple(int(s) for s in sizes)
    tol = FEAS_TOL * np.maximum(1.0, np.abs(d.rhs))
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        pts = (np.stack(np.unravel_index(ids, shape), axis=1) + lo).astype(float)
        if d.A.shape[0]:
            act = pts @ d.A.T
            bad = ((d.senses <= 0) & (act > d.rhs + tol)) | ((d.senses >= 0) & (act < d.rhs - tol))
            pts = pts[~bad.any(axis=1)]
        if not len(pts):
            continue
        vals = pts @ d.c
        top = vals.max()
        # first point (lexicographic order) within rounding of the chunk max
        k = int(np.flatnonzero(vals >= top - 1e-9 * (1.0 + abs(top)))[0])
        val = problem.objective_value(pts[k])
        if best_x is None or val > best_val + 1e-9 * (1.0 + abs(best_val)):
            best_x, best_val = pts[k].copy(), val
    if best_x is None:
        return MilpSolution(Status.INFEASIBLE)
    return MilpSolution(Status.OPTIMAL, best_x, best_val, nodes=total)


# -- feasibility ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # "constraint", "lower", "upper" or "integrality"
    index: int
    amount: float


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.feasible


def check_feasible(problem: MilpProblem, point: Sequence[float], tol: float = FEAS_TOL) -> FeasibilityReport:
    """List every bound, row, and integrality violation beyond tolerance.

    Row tolerance is relative: ``tol * max(1, |rhs|)``.
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (problem.num_vars,):
        raise StructureError(f"point has shape {x.shape}, expected ({problem.num_vars},)")
    out: list[Violation] = []
    for j, v in enumerate(problem.vars):
        if x[j] < v.lower - tol * max(1.0, abs(v.lower)):
            out.append(Violation("lower", j, v.lower - x[j]))
        if x[j] > v.upper + tol * max(1.0, abs(v.upper)):
            out.append(Violation("upper", j, x[j] - v.upper))
        if v.is_integer and abs(x[j] - round(x[j])) > INT_TOL:
            out.append(Violation("integrality", j, abs(x[j] - round(x[j]))))
    for r, con in enumerate(problem.constraints):
        act = con.activity(x)
        lim = tol * max(1.0, abs(con.rhs))
        if con.sense is Sense.LE:
            excess = act - con.rhs
        elif con.sense is Sense.GE:
            excess = con.rhs - act
        else:
            excess = abs(act - con.rhs)
        if excess > lim:
            out.append(Violation("constraint", r, excess))
    return FeasibilityReport(out)


def solve_milp_highs(problem: MilpProblem) -> MilpSolution:
    """Same contract as :func:`solve_milp`, backed by scipy's HiGHS.

    Intended for large scheduling runs; tie-breaking among multiple optima
    follows HiGHS rather than the depth-first rule.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    d = problem.dense
    cons = []
    if d.A.shape[0]:
        lo = np.where(d.senses >= 0, d.rhs, -np.inf)
        hi = np.where(d.senses <= 0, d.rhs, np.inf)
        cons = [LinearConstraint(d.A, lo, hi)]
    res = milp(
        -d.c,
        constraints=cons,
        integrality=d.integer.astype(int),
        bounds=Bounds(d.lower, d.upper),
        options={"mip_rel_gap": 0.0},
    )
    if res.status == 2:
        return MilpSolution(Status.INFEASIBLE)
    if res.status == 3:
        return MilpSolution(Status.UNBOUNDED)
    if res.status != 0:
        raise ResourceLimitError(f"HiGHS stopped: {res.message}")
    x = np.asarray(res.x, dtype=float).copy()
    x[d.integer] = np.round(x[d.integer])
    return MilpSolution(Status.OPTIMAL, x, problem.objective_value(x), nodes=1)
