"""Two-stage learning: thresholds first, then objective weights.

The constraint stage fixes phi at the meet of per-sample suprema; the
objective stage runs projected subgradient descent with phi held there.
Held-out evaluation is an addition for measuring generalization and is
labelled as such in reports.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .constraints import phi_report, phi_sup_dataset, verify_dominance
from .errors import UsageError
from .forward import Dataset, PhiParams, eval_constraints, eval_features
from .loss import Solver, dataset_loss, forward_optimum, loss_from_optimum
from .milp import FEAS_TOL, MilpProblem, solve_milp
from .objective import LearnerConfig, LearnTrace, run_algorithm1

IMITATION_TOL = 1e-6


@dataclass
class StageTimes:
    """``perf_counter`` stamps; ``first_solve`` is the first forward solve of the objective stage."""

    stage1_start: float = math.nan
    stage1_end: float = math.nan
    stage2_start: float = math.nan
    first_solve: float = math.nan
    stage2_end: float = math.nan

    @property
    def stage1_ms(self) -> float:
        return 1e3 * (self.stage1_end - self.stage1_start)

    @property
    def stage2_ms(self) -> float:
        return 1e3 * (self.stage2_end - self.stage2_start)


@dataclass
class LearnResult:
    theta: np.ndarray
    phi: PhiParams
    trace: LearnTrace
    converged: bool
    train_loss: float
    threshold: float
    config: LearnerConfig
    epsilon: float
    times: StageTimes = field(default_factory=StageTimes)

    @property
    def best_iter(self) -> int:
        return self.trace.best_iter

    def report(self, dataset: Dataset | None = None, trace_path: str | None = None) -> dict:
        """Run-report document. Timing fields sit under ``"timings"`` only."""
        cfg = asdict(self.config)
        if not isinstance(cfg["theta_init"], str):
            cfg["theta_init"] = [float(v) for v in cfg["theta_init"]]
        doc = {
            "config": {**cfg, "epsilon": self.epsilon},
            "theta": [float(v) for v in self.theta],
            "phi": self.phi.to_dict(),
            "converged": self.converged,
            "train_loss": self.train_loss,
            "threshold": self.threshold,
            "iterations": self.trace.iterations,
            "best_iter": self.trace.best_iter,
            "trace_path": trace_path,
            "timings": {"stage1_ms": self.times.stage1_ms, "stage2_ms": self.times.stage2_ms},
        }
        if dataset is not None:
            doc["phi_report"] = [asdict(c) for c in phi_report(dataset, self.phi)]
        return doc


def result_from_report(doc: dict) -> LearnResult:
    """Rebuild the parts of a result that evaluation needs from a run report."""
    cfg = dict(doc.get("config", {}))
    epsilon = float(cfg.pop("epsilon", 0.0))
    return LearnResult(
        theta=np.asarray(doc["theta"], dtype=float),
        phi=PhiParams.from_dict(doc["phi"]),
        trace=LearnTrace(best_iter=doc.get("best_iter", 1), best_loss=doc.get("train_loss", math.inf),
                         iterations=doc.get("iterations", 0)),
        converged=bool(doc.get("converged", False)),
        train_loss=float(doc.get("train_loss", math.inf)),
        threshold=float(doc.get("threshold", 0.0)),
        config=LearnerConfig(**cfg),
        epsilon=epsilon,
    )


def _timed_solver(solver: Solver, times: StageTimes) -> Solver:
    def run(problem: MilpProblem):
        if math.isnan(times.first_solve):
            times.first_solve = time.perf_counter()
        return solver(problem)

    return run


def run_pipeline(
    dataset: Dataset,
    config: LearnerConfig | None = None,
    epsilon: float = 0.0,
    solver: Solver = solve_milp,
) -> LearnResult:
    """Learn (theta, phi) from expert data.

    Constraint-stage inconsistencies raise before any forward solve.
    Non-convergence of the objective stage is reported through
    ``converged``; the best iterate is returned either way.
    """
    if len(dataset) == 0:
        raise UsageError("empty dataset")
    if epsilon < 0:
        raise UsageError("epsilon must be nonnegative")
    config = config or LearnerConfig()
    threshold = max(epsilon, config.zero_threshold)
    times = StageTimes()

    times.stage1_start = time.perf_counter()
    phi = phi_sup_dataset(dataset)
    times.stage1_end = time.perf_counter()

    stage2 = LearnerConfig(**{**asdict(config), "zero_threshold": threshold})
    times.stage2_start = time.perf_counter()
    theta, trace = run_algorithm1(dataset, phi, stage2, _timed_solver(solver, times))
    times.stage2_end = time.perf_counter()

    return LearnResult(
        theta=theta,
        phi=phi,
        trace=trace,
        converged=trace.best_loss <= threshold,
        train_loss=trace.best_loss,
        threshold=threshold,
        config=config,
        epsilon=epsilon,
        times=times,
    )


@dataclass
class EvalReport:
    n: int
    loss0: float | None = None
    loss1: float | None = None
    imitation_rate: float | None = None
    violation_rate: float | None = None
    dominance: bool | None = None
    phi_slack: list[float] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(
    result: LearnResult,
    test: Dataset,
    solver: Solver = solve_milp,
    truth: PhiParams | None = None,
) -> EvalReport:
    """Held-out losses, imitation and violation rates, and dominance against the truth.

    ``truth`` defaults to the test set's recorded phi. The imitation rate
    counts samples where the expert's objective value matches the forward
    optimum; the violation rate counts experts infeasible under the learned phi.
    """
    truth = truth if truth is not None else test.phi_true
    rep = EvalReport(n=len(test))
    if truth is not None:
        dom = verify_dominance(result.phi, truth)
        rep.dominance = dom.holds
        rep.phi_slack = [float(v) for v in dom.slack]
    if len(test) == 0:
        return rep
    theta = result.theta
    l0 = l1 = 0.0
    imitated = violated = 0
    for s in test.samples:
        x_star = forward_optimum(s.model, theta, result.phi, solver)
        v0 = loss_from_optimum(s.model, theta, result.phi, s.expert, x_star, lam=0.0)
        v1 = loss_from_optimum(s.model, theta, result.phi, s.expert, x_star, lam=1.0)
        l0 += v0.total
        l1 += v1.total
        if np.any(eval_constraints(s.model, result.phi, s.expert) > FEAS_TOL):
            violated += 1
        expert_value = float(theta @ eval_features(s.model, s.expert))
        if abs(v0.forward_value - expert_value) <= IMITATION_TOL * max(1.0, abs(expert_value)):
            imitated += 1
    n = len(test)
    rep.loss0, rep.loss1 = l0 / n, l1 / n
    rep.imitation_rate, rep.violation_rate = imitated / n, violated / n
    return rep


def train_loss(result: LearnResult, dataset: Dataset, solver: Solver = solve_milp) -> float:
    """Recompute the training loss of the returned iterate."""
    return dataset_loss(dataset, result.theta, result.phi, 0.0, solver).total


def dump_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
