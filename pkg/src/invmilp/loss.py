"""Suboptimality loss of an observed decision under candidate parameters."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np

from .errors import ForwardProblemError, UsageError
from .forward import Dataset, ParamFop, PhiParams, build_fop, eval_constraints, eval_features
from .milp import MilpProblem, MilpSolution, solve_milp

ZERO_LOSS = 1e-6

Solver = Callable[[MilpProblem], MilpSolution]


@dataclass(frozen=True)
class LossValue:
    total: float
    optimality_gap: float
    violation_penalty: float
    forward_value: float

    @property
    def is_zero(self) -> bool:
        return self.total < ZERO_LOSS


def forward_optimum(
    model: ParamFop,
    theta,
    phi: PhiParams,
    solver: Solver = solve_milp,
    base: MilpProblem | None = None,
) -> np.ndarray:
    """An optimal point of FOP(theta, phi, s); raises if there is none."""
    sol = solver(build_fop(model, theta, phi, base))
    if not sol.is_optimal:
        raise ForwardProblemError(f"forward problem is {sol.status.value}")
    return sol.point


def loss_from_optimum(model: ParamFop, theta, phi: PhiParams, x, x_star, lam: float = 0.0) -> LossValue:
    theta = np.asarray(theta, dtype=float)
    fwd = float(theta @ eval_features(model, x_star))
    gap = max(fwd - float(theta @ eval_features(model, x)), 0.0)
    pen = 0.0
    if lam:
        pen = lam * float(np.maximum(eval_constraints(model, phi, x), 0.0).sum())
    return LossValue(gap + pen, gap, pen, fwd)


def suboptimality_loss(
    model: ParamFop,
    theta,
    phi: PhiParams,
    x,
    lam: float = 0.0,
    solver: Solver = solve_milp,
) -> LossValue:
    """ReLU(best objective - objective at x) + lam * sum_j ReLU(g_j(x))."""
    if lam < 0:
        raise UsageError("lambda must be nonnegative")
    x_star = forward_optimum(model, theta, phi, solver)
    return loss_from_optimum(model, theta, phi, x, x_star, lam)


def per_sample_losses(
    dataset: Dataset,
    theta,
    phi: PhiParams,
    lam: float = 0.0,
    solver: Solver = solve_milp,
) -> list[LossValue]:
    out = []
    for n, s in enumerate(dataset.samples):
        try:
            out.append(suboptimality_loss(s.model, theta, phi, s.expert, lam, solver))
        except ForwardProblemError as exc:
            raise ForwardProblemError(f"sample {n}: {exc}") from exc
    return out


def mean_loss(values: list[LossValue]) -> LossValue:
    if not values:
        raise UsageError("empty dataset")
    n = len(values)
    total = gap = pen = fwd = 0.0
    for v in values:
        total += v.total
        gap += v.optimality_gap
        pen += v.violation_penalty
        fwd += v.forward_value
    return LossValue(total / n, gap / n, pen / n, fwd / n)


def dataset_loss(
    dataset: Dataset,
    theta,
    phi: PhiParams,
    lam: float = 0.0,
    solver: Solver = solve_milp,
) -> LossValue:
    """Arithmetic mean of per-sample losses, summed in sample order."""
    if len(dataset) == 0:
        raise UsageError("empty dataset")
    return mean_loss(per_sample_losses(dataset, theta, phi, lam, solver))


def write_breakdown_csv(values: list[LossValue], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["sample", "gap", "penalty", "total"])
    for n, v in enumerate(values):
        w.writerow([n, repr(v.optimality_gap), repr(v.violation_penalty), repr(v.total)])

