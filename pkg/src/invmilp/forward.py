"""Parametric forward problems with affine features and threshold constraints.

A model fixes, for one instance ``s``, the affine maps

* ``f(x) = F x + c``            objective features (maximize ``theta @ f(x)``)
* ``h0(x) <= 0``, ``h0_eq(x) == 0``  fixed rows
* ``h_plus(x) + phi_plus <= 0``       threshold rows, upper side
* ``h_minus(x) >= phi_minus_check``   threshold rows, lower side

Both threshold families make the constraint map nondecreasing in ``phi``:
a larger parameter means a tighter (smaller) feasible set. The lattice of
parameters is ordered componentwise and meets are componentwise minima.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import StructureError
from .milp import LinConstraint, MilpProblem, Sense, VarSpec


@dataclass(frozen=True, eq=False)
class AffineMap:
    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        off = np.asarray(self.offset, dtype=float).reshape(-1)
        if mat.shape[0] != off.shape[0]:
            raise StructureError(f"affine map rows {mat.shape[0]} vs offset length {off.shape[0]}")
        mat.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "offset", off)

    @classmethod
    def empty(cls, k: int) -> "AffineMap":
        return cls(np.zeros((0, k)), np.zeros(0))

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float) + self.offset


@dataclass(frozen=True)
class Domain:
    """Admissible values of one parameter component: a finite set or an interval."""

    values: tuple[float, ...] | None = None
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.values is not None:
            vals = tuple(sorted(float(v) for v in self.values))
            if not vals:
                raise StructureError("finite domain must be nonempty")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "lo", vals[0])
            object.__setattr__(self, "hi", vals[-1])
        elif self.lo > self.hi:
            raise StructureError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, v: float) -> bool:
        if self.values is not None:
            return v in self.values
        return self.lo <= v <= self.hi

    def round_down(self, v: float, tol: float = 1e-9) -> float | None:
        """Largest admissible value <= v (up to ``tol``); None if there is none."""
        if self.values is not None:
            i = bisect.bisect_right(self.values, v + tol)
            return self.values[i - 1] if i else None
        if v < self.lo - tol:
            return None
        return max(self.lo, min(v, self.hi))

    def next_up(self, v: float) -> float | None:
        """Smallest admissible value strictly above v, None if exhausted.

        For intervals any increase is admissible; ``v + 1`` (capped) stands in.
        """
        if self.values is not None:
            i = bisect.bisect_right(self.values, v)
            return self.values[i] if i < len(self.values) else None
        if v >= self.hi:
            return None
        return min(v + 1.0, self.hi)

    def to_dict(self) -> dict:
        if self.values is not None:
            return {"values": list(self.values)}
        return {"lo": None if math.isinf(self.lo) else self.lo, "hi": None if math.isinf(self.hi) else self.hi}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Domain":
        if "values" in d:
            return cls(tuple(d["values"]))
        lo, hi = d.get("lo"), d.get("hi")
        return cls(None, -math.inf if lo is None else lo, math.inf if hi is None else hi)


REAL_LINE = Domain()


@dataclass(frozen=True, eq=False)
class PhiParams:
    phi_plus: np.ndarray
    phi_minus_check: np.ndarray

    def __post_init__(self):
        for name in ("phi_plus", "phi_minus_check"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.phi_plus, self.phi_minus_check])

    def meet(self, other: "PhiParams") -> "PhiParams":
        return PhiParams(
            np.minimum(self.phi_plus, other.phi_plus),
            np.minimum(self.phi_minus_check, other.phi_minus_check),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhiParams):
            return NotImplemented
        return np.array_equal(self.phi_plus, other.phi_plus) and np.array_equal(
            self.phi_minus_check, other.phi_minus_check
        )

    def __le__(self, other: "PhiParams") -> bool:
        return bool(np.all(self.vector <= other.vector))

    def to_dict(self) -> dict:
        return {"phi_plus": self.phi_plus.tolist(), "phi_minus_check": self.phi_minus_check.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PhiParams":
        return cls(d["phi_plus"], d["phi_minus_check"])


@dataclass(frozen=True, eq=False)
class ParamFop:
    """One instance of the parametric forward problem."""

    var_specs: tuple[VarSpec, ...]
    features: AffineMap
    h0: AffineMap
    h0_eq: AffineMap
    h_plus: AffineMap
    h_minus: AffineMap
    phi_plus_domain: tuple[Domain, ...] | None = None
    phi_minus_domain: tuple[Domain, ...] | None = None
    name: str = "fop"
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "var_specs", tuple(self.var_specs))
        k = len(self.var_specs)
        for label in ("features", "h0", "h0_eq", "h_plus", "h_minus"):
            m = getattr(self, label)
            if m.cols != k:
                raise StructureError(f"{label} has {m.cols} columns, expected {k}")
        if self.phi_plus_domain is not None and len(self.phi_plus_domain) != self.h_plus.rows:
            raise StructureError("phi_plus_domain length mismatch")
        if self.phi_minus_domain is not None and len(self.phi_minus_domain) != self.h_minus.rows:
            raise StructureError("phi_minus_domain length mismatch")

    @property
    def k(self) -> int:
        return len(self.var_specs)

    @property
    def D(self) -> int:
        return self.features.rows

    @property
    def num_constraints(self) -> int:
        return self.h0.rows + self.h0_eq.rows + self.h_plus.rows + self.h_minus.rows

    def plus_domain(self, j: int) -> Domain:
        return REAL_LINE if self.phi_plus_domain is None else self.phi_plus_domain[j]

    def minus_domain(self, j: int) -> Domain:
        return REAL_LINE if self.phi_minus_domain is None else self.phi_minus_domain[j]

    def check_phi(self, phi: PhiParams) -> None:
        if phi.phi_plus.shape != (self.h_plus.rows,) or phi.phi_minus_check.shape != (self.h_minus.rows,):
            raise StructureError(
                f"phi dims ({phi.phi_plus.size}, {phi.phi_minus_check.size}) vs model "
                f"({self.h_plus.rows}, {self.h_minus.rows})"
            )

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        rows = []
        for kind, amap in (("h0", self.h0), ("h0_eq", self.h0_eq), ("h+", self.h_plus), ("h-", self.h_minus)):
            for j in range(amap.rows):
                rows.append({"kind": kind, "index": j, **_sparse_row(amap.matrix[j], amap.offset[j])})
        doc = {
            "name": self.name,
            "vars": [{"lower": _b(v.lower), "upper": _b(v.upper), "kind": v.kind.value} for v in self.var_specs],
            "features": [_sparse_row(self.features.matrix[i], self.features.offset[i]) for i in range(self.D)],
            "rows": rows,
            "payload": dict(self.payload),
        }
        if self.phi_plus_domain is not None:
            doc["phi_plus_domain"] = [d.to_dict() for d in self.phi_plus_domain]
        if self.phi_minus_domain is not None:
            doc["phi_minus_domain"] = [d.to_dict() for d in self.phi_minus_domain]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ParamFop":
        try:
            specs = tuple(
                VarSpec(
                    -math.inf if v.get("lower") is None else v["lower"],
                    math.inf if v.get("upper") is None else v["upper"],
                    v.get("kind", "continuous"),
                )
                for v in doc["vars"]
            )
            k = len(specs)
            feats = _dense_map(doc["features"], k)
            grouped: dict[str, list] = {"h0": [], "h0_eq": [], "h+": [], "h-": []}
            for row in doc.get("rows", []):
                grouped[row["kind"]].append(row)
            maps = {}
            for kind, rows in grouped.items():
                rows.sort(key=lambda r: r["index"])
                if [r["index"] for r in rows] != list(range(len(rows))):
                    raise StructureError(f"{kind} row indices are not 0..{len(rows) - 1}")
                maps[kind] = _dense_map(rows, k)
            dom_p = doc.get("phi_plus_domain")
            dom_m = doc.get("phi_minus_domain")
            return cls(
                specs,
                feats,
                maps["h0"],
                maps["h0_eq"],
                maps["h+"],
                maps["h-"],
                None if dom_p is None else tuple(Domain.from_dict(d) for d in dom_p),
                None if dom_m is None else tuple(Domain.from_dict(d) for d in dom_m),
                doc.get("name", "fop"),
                doc.get("payload", {}),
            )
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed model document: {exc}") from exc


def _b(x: float):
    return None if math.isinf(x) else x


def _sparse_row(coeffs: np.ndarray, offset: float) -> dict:
    return {"coeffs": {str(j): float(a) for j, a in enumerate(coeffs) if a != 0.0}, "offset": float(offset)}


def _dense_map(rows: Sequence[Mapping], k: int) -> AffineMap:
    mat = np.zeros((len(rows), k))
    off = np.zeros(len(rows))
    for i, row in enumerate(rows):
        for j, a in row.get("coeffs", {}).items():
            j = int(j)
            if not 0 <= j < k:
                raise StructureError(f"coefficient references unknown variable {j}")
            mat[i, j] = a
        off[i] = row.get("offset", 0.0)
    return AffineMap(mat, off)


@dataclass(frozen=True)
class Sample:
    model: ParamFop
    expert: np.ndarray

    def __post_init__(self):
        x = np.array(self.expert, dtype=float).reshape(-1)
        if x.shape != (self.model.k,):
            raise StructureError(f"expert has {x.size} entries, model has {self.model.k} variables")
        x.setflags(write=False)
        object.__setattr__(self, "expert", x)


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    theta_true: np.ndarray | None = None
    phi_true: PhiParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {
            "samples": [{"model": s.model.to_dict(), "expert": s.expert.tolist()} for s in self.samples]
        }
        if self.theta_true is not None:
            doc["theta_true"] = np.asarray(self.theta_true).tolist()
        if self.phi_true is not None:
            doc["phi_true"] = self.phi_true.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Dataset":
        samples = tuple(Sample(ParamFop.from_dict(s["model"]), s["expert"]) for s in doc["samples"])
        theta = doc.get("theta_true")
        phi = doc.get("phi_true")
        return cls(
            samples,
            None if theta is None else np.asarray(theta, dtype=float),
            None if phi is None else PhiParams.from_dict(phi),
        )


# -- operations ----------------------------------------------------------------


def eval_features(model: ParamFop, x) -> np.ndarray:
    x = _point(model, x)
    return model.features(x)


def eval_constraints(model: ParamFop, phi: PhiParams, x) -> np.ndarray:
    """The constraint vector g(x, phi); x is feasible iff every entry is <= 0.

    Equality rows contribute their absolute residual.
    """
    x = _point(model, x)
    model.check_phi(phi)
    return np.concatenate(
        [
            model.h0(x),
            np.abs(model.h0_eq(x)),
            model.h_plus(x) + phi.phi_plus,
            phi.phi_minus_check - model.h_minus(x),
        ]
    )


def _point(model: ParamFop, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.k,):
        raise StructureError(f"point has shape {x.shape}, model has {model.k} variables")
    return x


def _rows(amap: AffineMap, sense: Sense, rhs: np.ndarray) -> list[LinConstraint]:
    out = []
    for i in range(amap.rows):
        row = amap.matrix[i]
        nz = np.flatnonzero(row)
        out.append(LinConstraint({int(j): float(row[j]) for j in nz}, sense, float(rhs[i])))
    return out


def feasible_set(model: ParamFop, phi: PhiParams) -> MilpProblem:
    """The MILP encoding of X(phi, s) with a zero objective.

    Row order: h0, h0_eq, h_plus, h_minus.
    """
    model.check_phi(phi)
    cons = (
        _rows(model.h0, Sense.LE, -model.h0.offset)
        + _rows(model.h0_eq, Sense.EQ, -model.h0_eq.offset)
        + _rows(model.h_plus, Sense.LE, -phi.phi_plus - model.h_plus.offset)
        + _rows(model.h_minus, Sense.GE, phi.phi_minus_check - model.h_minus.offset)
    )
    prob = MilpProblem(model.var_specs, tuple(cons), {}, model.name)
    prob.dense  # noqa: B018 - compile once so with_objective can share it
    return prob


def objective_coeffs(model: ParamFop, theta) -> dict[int, float]:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.D,):
        raise StructureError(f"theta has shape {theta.shape}, model has {model.D} features")
    c = theta @ model.features.matrix
    return {int(j): float(c[j]) for j in np.flatnonzero(c)}


def build_fop(model: ParamFop, theta, phi: PhiParams, base: MilpProblem | None = None) -> MilpProblem:
    """MILP for FOP(theta, phi, s): maximize theta @ F x over X(phi, s).

    The constant ``theta @ c`` is left out of the MILP objective; use
    :func:`eval_features` for objective values in feature space. ``base``
    may pass a precomputed :func:`feasible_set` for the same phi.
    """
    if base is None:
        base = feasible_set(model, phi)
    return base.with_objective(objective_coeffs(model, theta))

