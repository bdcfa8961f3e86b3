"""Projected subgradient descent on the suboptimality loss.

Step size ``alpha_k = k**-0.5 / ||mean F||``, so each step moves theta a
distance ``k**-0.5`` before projection back onto the weight simplex.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .errors import ForwardProblemError, UsageError
from .forward import Dataset, PhiParams, eval_features, feasible_set
from .loss import ZERO_LOSS, Solver, forward_optimum
from .milp import solve_milp


def project_simplex(v, offset: float = 0.0) -> np.ndarray:
    """Euclidean projection onto {w >= offset, sum(w) = 1 + D * offset}.

    Shifts by ``offset``, projects onto the probability simplex with the
    sort-and-threshold rule, shifts back.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0:
        raise UsageError("cannot project an empty vector")
    D = v.size
    u = v - offset
    s = np.sort(u)[::-1]
    css = np.cumsum(s) - 1.0
    ks = np.arange(1, D + 1)
    rho = np.flatnonzero(s - css / ks > 0)[-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(u - tau, 0.0) + offset


def uniform_theta(D: int, offset: float = 0.0) -> np.ndarray:
    return np.full(D, 1.0 / D + offset)


def in_theta(theta, offset: float = 0.0, tol: float = 1e-9) -> bool:
    theta = np.asarray(theta, dtype=float)
    return bool(np.all(theta >= offset - tol) and abs(theta.sum() - (1.0 + theta.size * offset)) <= tol)


@dataclass
class LearnerConfig:
    max_iters: int = 2000
    zero_threshold: float = ZERO_LOSS
    theta_init: str | Sequence[float] = "uniform"
    simplex_offset: float = 0.0
    record_trace: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise UsageError("max_iters must be >= 1")
        if self.zero_threshold < 0 or self.simplex_offset < 0:
            raise UsageError("thresholds and offsets must be nonnegative")

    def initial_theta(self, D: int) -> np.ndarray:
        if isinstance(self.theta_init, str):
            if self.theta_init != "uniform":
                raise UsageError(f"unknown theta_init {self.theta_init!r}")
            return uniform_theta(D, self.simplex_offset)
        theta = np.asarray(self.theta_init, dtype=float)
        if theta.shape != (D,):
            raise UsageError(f"theta_init has shape {theta.shape}, expected ({D},)")
        return project_simplex(theta, self.simplex_offset)


@dataclass
class TraceRow:
    iteration: int
    loss: float
    step_norm: float
    wallclock_ms: float
    theta: np.ndarray | None = None


@dataclass
class LearnTrace:
    rows: list[TraceRow] = field(default_factory=list)
    best_iter: int = 1
    best_loss: float = math.inf
    converged: bool = False
    iterations: int = 0

    def write_csv(self, fh: TextIO, mask_time: bool = False) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "loss", "step_norm", "wallclock_ms"])
        for r in self.rows:
            w.writerow([r.iteration, repr(r.loss), repr(r.step_norm), "" if mask_time else f"{r.wallclock_ms:.3f}"])


class _ForwardOracle:
    """Per-sample forward solves under a fixed phi, compiled once."""

    def __init__(self, dataset: Dataset, phi: PhiParams, solver: Solver, jobs: int):
        self.dataset = dataset
        self.phi = phi
        self.solver = solver
        self.bases = [feasible_set(s.model, phi) for s in dataset.samples]
        self.expert_feats = np.array([eval_features(s.model, s.expert) for s in dataset.samples])
        self.pool = ThreadPoolExecutor(jobs) if jobs > 1 else None

    def _one(self, n: int, theta: np.ndarray) -> np.ndarray:
        s = self.dataset.samples[n]
        try:
            x_star = forward_optimum(s.model, theta, self.phi, self.solver, self.bases[n])
        except ForwardProblemError as exc:
            raise ForwardProblemError(f"sample {n}: {exc}") from exc
        return eval_features(s.model, x_star)

    def optimum_features(self, theta: np.ndarray) -> np.ndarray:
        idx = range(len(self.bases))
        if self.pool is None:
            return np.array([self._one(n, theta) for n in idx])
        return np.array(list(self.pool.map(lambda n: self._one(n, theta), idx)))

    def evaluate(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        """Mean suboptimality loss (lambda = 0) and mean subgradient at theta."""
        feats = self.optimum_features(theta)
        F = feats - self.expert_feats
        gaps = np.maximum(feats @ theta - self.expert_feats @ theta, 0.0)
        loss = 0.0
        for g in gaps:
            loss += float(g)
        return loss / len(gaps), F.mean(axis=0)

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def subgradient(dataset: Dataset, theta, phi: PhiParams, solver: Solver = solve_milp) -> np.ndarray:
    """(1/N) sum_n [ f(x*(theta, s_n)) - f(x_hat(s_n)) ]."""
    if len(dataset) == 0:
        raise UsageError("empty dataset")
    oracle = _ForwardOracle(dataset, phi, solver, 1)
    return oracle.evaluate(np.asarray(theta, dtype=float))[1]


def run_algorithm1(
    dataset: Dataset,
    phi: PhiParams,
    config: LearnerConfig | None = None,
    solver: Solver = solve_milp,
) -> tuple[np.ndarray, LearnTrace]:
    """Minimize the empirical suboptimality loss over the weight simplex.

    Stops early once the loss drops to ``zero_threshold`` or the mean
    subgradient vanishes; returns the best visited iterate and the trace
    (``trace.converged`` tells whether the threshold was reached).
    """
    config = config or LearnerConfig()
    if len(dataset) == 0:
        raise UsageError("empty dataset")
    D = dataset.samples[0].model.D
    offset = config.simplex_offset
    theta = config.initial_theta(D)
    oracle = _ForwardOracle(dataset, phi, solver, config.jobs)
    trace = LearnTrace()
    best_theta = theta
    t0 = time.perf_counter()
    try:
        for k in range(1, config.max_iters + 1):
            loss, mean_f = oracle.evaluate(theta)
            trace.iterations = k
            norm = float(np.linalg.norm(mean_f))
            if config.record_trace:
                trace.rows.append(
                    TraceRow(k, loss, norm, 1e3 * (time.perf_counter() - t0), theta.copy())
                )
            if loss < trace.best_loss:
                trace.best_loss, trace.best_iter, best_theta = loss, k, theta
            if loss <= config.zero_threshold:
                trace.converged = True
                break
            if norm == 0.0 or k == config.max_iters:
                break
            theta = project_simplex(theta - (k**-0.5 / norm) * mean_f, offset)
    finally:
        oracle.close()
    if not config.record_trace:
        trace.rows = []
    return best_theta, trace
