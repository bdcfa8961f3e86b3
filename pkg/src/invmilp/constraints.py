"""Learning threshold parameters from expert decisions.

For one sample the tightest admissible parameter is read off the threshold
maps at the expert point; for a dataset it is the componentwise meet of the
per-sample values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import DataInconsistencyError, UsageError
from .forward import Dataset, ParamFop, PhiParams
from .milp import FEAS_TOL

BINDING_TOL = 1e-9


def _check_fixed_rows(model: ParamFop, x: np.ndarray) -> None:
    h0 = model.h0(x)
    bad = [f"h0[{j}]={v:.3g}" for j, v in enumerate(h0) if v > FEAS_TOL * max(1.0, abs(model.h0.offset[j]))]
    heq = model.h0_eq(x)
    bad += [f"h0_eq[{j}]={v:.3g}" for j, v in enumerate(heq) if abs(v) > FEAS_TOL * max(1.0, abs(model.h0_eq.offset[j]))]
    if bad:
        raise DataInconsistencyError("expert point violates fixed rows: " + ", ".join(bad))


def raw_phi_sup_single(model: ParamFop, expert) -> PhiParams:
    """Unclamped supremum: (-h_plus(x), h_minus(x)) at the expert point."""
    x = np.asarray(expert, dtype=float)
    _check_fixed_rows(model, x)
    return PhiParams(-model.h_plus(x), model.h_minus(x))


def phi_sup_single(model: ParamFop, expert) -> PhiParams:
    """Largest admissible phi keeping ``expert`` feasible for this instance."""
    raw = raw_phi_sup_single(model, expert)
    plus = [_clamp(model.plus_domain(j), v, "phi_plus", j) for j, v in enumerate(raw.phi_plus)]
    minus = [_clamp(model.minus_domain(j), v, "phi_minus_check", j) for j, v in enumerate(raw.phi_minus_check)]
    return PhiParams(plus, minus)


def _clamp(domain, v: float, label: str, j: int) -> float:
    out = domain.round_down(v)
    if out is None:
        raise DataInconsistencyError(
            f"{label}[{j}]: expert needs a value <= {v!r} but the smallest admissible value is {domain.lo!r}"
        )
    return out


def phi_sup_dataset(dataset: Dataset) -> PhiParams:
    if len(dataset) == 0:
        raise UsageError("empty dataset")
    per_sample = []
    for n, s in enumerate(dataset.samples):
        try:
            per_sample.append(phi_sup_single(s.model, s.expert))
        except DataInconsistencyError as exc:
            raise DataInconsistencyError(f"sample {n}: {exc}") from exc
    return reduce(PhiParams.meet, per_sample)


@dataclass
class PhiComponent:
    kind: str  # "+" or "-"
    index: int
    learned: float
    truth: float | None = None
    slack: float | None = None
    binding_sample: int | None = None


@dataclass
class DominanceReport:
    holds: bool
    slack: np.ndarray
    violations: list[int] = field(default_factory=list)


def verify_dominance(learned: PhiParams, truth: PhiParams) -> DominanceReport:
    """Check learned >= truth componentwise; slack = learned - truth."""
    a, b = learned.vector, truth.vector
    if a.shape != b.shape:
        raise UsageError("phi dimension mismatch")
    slack = a - b
    bad = [int(j) for j in np.flatnonzero(slack < 0)]
    return DominanceReport(not bad, slack, bad)


def phi_report(dataset: Dataset, learned: PhiParams) -> list[PhiComponent]:
    """Per-component learned value, truth, slack and first binding sample."""
    per_sample = [phi_sup_single(s.model, s.expert) for s in dataset.samples]
    truth = dataset.phi_true
    out = []
    parts = (("+", "phi_plus"), ("-", "phi_minus_check"))
    for kind, attr in parts:
        values = getattr(learned, attr)
        for j, v in enumerate(values):
            comp = PhiComponent(kind, j, float(v))
            if truth is not None:
                t = float(getattr(truth, attr)[j])
                comp.truth, comp.slack = t, float(v) - t
            for n, ps in enumerate(per_sample):
                if abs(getattr(ps, attr)[j] - v) <= BINDING_TOL:
                    comp.binding_sample = n
                    break
            out.append(comp)
    return out
