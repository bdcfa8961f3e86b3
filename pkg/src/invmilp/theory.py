"""Numeric checks of closed-form constants and an empirical generalization probe."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
from scipy import integrate

from .errors import InvMilpError, NumericError, UsageError
from .forward import Dataset
from .loss import Solver
from .milp import solve_milp
from .objective import LearnerConfig
from .pipeline import evaluate, run_pipeline
from .scheduling import THETA_OFFSET, make_dataset, random_truth

DUDLEY_BOUND = 3.01
ZETA_TERMS = 10**6


@dataclass(frozen=True)
class Bounded:
    """A computed value with an absolute error bound."""

    value: float
    error: float


def dudley_simplex_constant() -> Bounded:
    """int_0^1 sqrt(log(2/eps + 1)) deps by adaptive quadrature.

    The integrand is decreasing, so it is bounded below by its value at 1,
    sqrt(log 3); the integral must sit between that and 3.01.
    """
    value, err = integrate.quad(lambda e: math.sqrt(math.log(2.0 / e + 1.0)), 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    if not err < 1e-6:
        raise NumericError(f"quadrature error estimate {err:g} too large")
    if not math.sqrt(math.log(3.0)) <= value <= DUDLEY_BOUND:
        raise NumericError(f"covering integral {value!r} outside [sqrt(log 3), {DUDLEY_BOUND}]")
    return Bounded(value, err)


def zeta_bracket(s: float, terms: int = ZETA_TERMS) -> tuple[float, float]:
    """Interval containing zeta(s), s > 1, from a partial sum and integral tail bounds.

    sum_{n>K} n^-s lies between (K+1)^(1-s)/(s-1) and K^(1-s)/(s-1).
    """
    if s <= 1:
        raise UsageError("zeta series diverges for s <= 1")
    n = np.arange(terms, 0, -1, dtype=float)  # smallest terms first
    partial = float(np.sum(n**-s))
    lo = partial + (terms + 1.0) ** (1.0 - s) / (s - 1.0)
    hi = partial + float(terms) ** (1.0 - s) / (s - 1.0)
    return lo, hi


def zeta_tail_constant(C: float, terms: int = ZETA_TERMS) -> Bounded:
    """2 (zeta(C^2/9 - 2) - 1), midpoint of the bracket."""
    lo, hi = zeta_bracket(C * C / 9.0 - 2.0, terms)
    return Bounded(2.0 * ((lo + hi) / 2.0 - 1.0), hi - lo)


@dataclass(frozen=True)
class TheoryConstants:
    dudley: Bounded
    c_4sqrt2: Bounded
    c_6: Bounded

    def checks(self) -> dict[str, bool]:
        return {
            "dudley<=3.01": self.dudley.value + self.dudley.error <= DUDLEY_BOUND,
            "c_4sqrt2<=3": self.c_4sqrt2.value + self.c_4sqrt2.error <= 3.0,
            "c_6<=1.3": self.c_6.value + self.c_6.error <= 1.3,
        }


def zeta_tail_constants() -> tuple[Bounded, Bounded]:
    """Constants for C = 4 sqrt(2) (exponent 14/9) and C = 6 (exponent 2)."""
    return zeta_tail_constant(4.0 * math.sqrt(2.0)), zeta_tail_constant(6.0)


def theory_constants() -> TheoryConstants:
    c442, c6 = zeta_tail_constants()
    return TheoryConstants(dudley_simplex_constant(), c442, c6)


# -- generalization probe -------------------------------------------------------


@dataclass
class CurveRow:
    N: int
    median_test_loss: float
    phi_mismatch_rate: float
    trials: int
    failures: int = 0
    median_test_loss1: float = math.nan
    median_violation_rate: float = math.nan


@dataclass
class CurveTable:
    rows: list[CurveRow] = field(default_factory=list)
    slope: float | None = None
    losses: dict[int, list[float]] = field(default_factory=dict)

    def write_csv(self, fh: TextIO) -> None:
        """Required columns first; loss with penalty and violation rate follow as diagnostics."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "median_test_loss", "phi_mismatch_rate", "fitted_slope", "median_test_loss1", "median_violation_rate"])
        for r in self.rows:
            w.writerow([r.N, repr(r.median_test_loss), repr(r.phi_mismatch_rate), "",
                        repr(r.median_test_loss1), repr(r.median_violation_rate)])
        w.writerow(["slope", "", "", "" if self.slope is None else repr(self.slope), "", ""])


def loglog_slope(Ns: Sequence[int], medians: Sequence[float]) -> float | None:
    """Least-squares slope of log(median) on log(N) over strictly positive medians."""
    pts = [(math.log(n), math.log(m)) for n, m in zip(Ns, medians) if m > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def generalization_curve(
    D: int,
    Ns: Sequence[int],
    trials: int,
    test_size: int = 200,
    seed: int = 0,
    forced: int = 3,
    max_iters: int = 2000,
    solver: Solver = solve_milp,
) -> CurveTable:
    """Median held-out loss and phi-recovery failure rate as N grows.

    Each trial draws its own ground truth, one training pool of size max(Ns)
    and one test set; the N-sample training sets are prefixes of the pool,
    so comparisons across N are paired within a trial.
    """
    if D < 2 or not Ns or min(Ns) < 1:
        raise UsageError("need D >= 2 and N >= 1")
    Ns = sorted(set(int(n) for n in Ns))
    losses: dict[int, list[float]] = {n: [] for n in Ns}
    losses1: dict[int, list[float]] = {n: [] for n in Ns}
    violations: dict[int, list[float]] = {n: [] for n in Ns}
    mismatch = {n: 0 for n in Ns}
    failures = {n: 0 for n in Ns}
    config = LearnerConfig(max_iters=max_iters, simplex_offset=THETA_OFFSET, record_trace=False)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        truth = random_truth(D, rng, forced)
        pool = make_dataset(D, max(Ns), rng, truth)
        test = make_dataset(D, test_size, rng, truth)
        for n in Ns:
            train = Dataset(pool.samples[:n], pool.theta_true, pool.phi_true)
            try:
                result = run_pipeline(train, config, solver=solver)
                rep = evaluate(result, test, solver)
            except InvMilpError:  # recorded, the sweep goes on
                failures[n] += 1
                continue
            losses[n].append(rep.loss0)
            losses1[n].append(rep.loss1)
            violations[n].append(rep.violation_rate)
            mismatch[n] += int(result.phi != train.phi_true)
    rows = []
    for n in Ns:
        done = len(losses[n])
        rows.append(
            CurveRow(
                N=n,
                median_test_loss=float(np.median(losses[n])) if done else math.nan,
                phi_mismatch_rate=mismatch[n] / done if done else math.nan,
                trials=trials,
                failures=failures[n],
                median_test_loss1=float(np.median(losses1[n])) if done else math.nan,
                median_violation_rate=float(np.median(violations[n])) if done else math.nan,
            )
        )
    slope = loglog_slope([r.N for r in rows], [r.median_test_loss for r in rows])
    return CurveTable(rows, slope, losses)
