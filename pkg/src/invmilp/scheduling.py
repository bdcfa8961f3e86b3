"""Single-machine weighted completion time with release dates, 1|r_i|sum theta_i C_i.

Variable layout for D jobs: start times ``b_0..b_{D-1}`` first, then the
precedence binaries ``x_ik`` (job i before job k) for ``i != k`` in
row-major order, D^2 variables in all.

Precedence thresholds use a binary matrix ``phi[i, k]``: ``x_ki <= phi[i, k]``,
so ``phi[i, k] == 0`` forces job i ahead of job k. Inside the generic
model the row ``x_ki <= phi[i, k]`` is written ``x_ki + phi_plus <= 0`` with
``phi_plus = -phi[i, k]``, which keeps the constraint map increasing in the
lattice parameter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ForwardProblemError, UsageError
from .forward import AffineMap, Dataset, Domain, ParamFop, PhiParams, Sample, build_fop
from .milp import VarKind, VarSpec, solve_milp
from .objective import project_simplex

R_RANGE = (0, 10)
P_RANGE = (1, 5)
THETA_OFFSET = 1e-3


@dataclass(frozen=True)
class SchedInstance:
    r: tuple[int, ...]
    p: tuple[int, ...]

    def __post_init__(self):
        r = tuple(int(v) for v in self.r)
        p = tuple(int(v) for v in self.p)
        if len(r) != len(p):
            raise UsageError("release and processing vectors differ in length")
        if any(v < 1 for v in p):
            raise UsageError("processing times must be >= 1")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "p", p)

    @property
    def D(self) -> int:
        return len(self.p)

    @property
    def big_m(self) -> int:
        return max(self.r) + sum(self.p)


@dataclass(frozen=True, eq=False)
class SchedTruth:
    theta: np.ndarray
    phi: np.ndarray  # (D, D) binary, diagonal ignored


@dataclass(frozen=True, eq=False)
class SchedSolution:
    b: np.ndarray
    x: np.ndarray  # (D, D) binary precedence matrix, zero diagonal

    @property
    def order(self) -> list[int]:
        return [int(i) for i in np.argsort(self.b, kind="stable")]


def pairs(D: int) -> list[tuple[int, int]]:
    return [(i, k) for i in range(D) for k in range(D) if i != k]


def x_index(D: int, i: int, k: int) -> int:
    return D + i * (D - 1) + (k if k < i else k - 1)


def gen_instance(D: int, seed: int | np.random.Generator) -> SchedInstance:
    """Integer release times on {0..10} and processing times on {1..5}."""
    if D < 2:
        raise UsageError("need at least two jobs")
    rng = np.random.default_rng(seed)
    r = rng.integers(R_RANGE[0], R_RANGE[1] + 1, size=D)
    p = rng.integers(P_RANGE[0], P_RANGE[1] + 1, size=D)
    return SchedInstance(tuple(r), tuple(p))


def encode_fop(instance: SchedInstance) -> ParamFop:
    D = instance.D
    M = float(instance.big_m)
    k = D * D
    specs = [VarSpec(0.0, M, VarKind.INTEGER) for _ in range(D)]
    specs += [VarSpec(0.0, 1.0, VarKind.BINARY) for _ in range(D * (D - 1))]

    # features f_i = -(b_i + p_i): maximizing theta @ f minimizes weighted completion
    F = np.zeros((D, k))
    F[np.arange(D), np.arange(D)] = -1.0
    feats = AffineMap(F, -np.array(instance.p, dtype=float))

    prs = pairs(D)
    # b_i - b_k + M x_ik + (p_i - M) <= 0, then release r_i - b_i <= 0
    H0 = np.zeros((len(prs) + D, k))
    o0 = np.zeros(len(prs) + D)
    for row, (i, kk) in enumerate(prs):
        H0[row, i] = 1.0
        H0[row, kk] = -1.0
        H0[row, x_index(D, i, kk)] = M
        o0[row] = instance.p[i] - M
    for i in range(D):
        H0[len(prs) + i, i] = -1.0
        o0[len(prs) + i] = instance.r[i]

    Heq = np.zeros((len(prs), k))
    for row, (i, kk) in enumerate(prs):
        Heq[row, x_index(D, i, kk)] = 1.0
        Heq[row, x_index(D, kk, i)] = 1.0
    oeq = -np.ones(len(prs))

    Hp = np.zeros((len(prs), k))
    for row, (i, kk) in enumerate(prs):
        Hp[row, x_index(D, kk, i)] = 1.0

    return ParamFop(
        tuple(specs),
        feats,
        AffineMap(H0, o0),
        AffineMap(Heq, oeq),
        AffineMap(Hp, np.zeros(len(prs))),
        AffineMap.empty(k),
        phi_plus_domain=tuple(Domain((-1.0, 0.0)) for _ in prs),
        phi_minus_domain=(),
        name=f"sched_D{D}",
        payload={"r": list(instance.r), "p": list(instance.p)},
    )


def model_size(D: int) -> tuple[int, int]:
    """(variables, constraints) of the encoding for D jobs."""
    return D * D, 3 * D * (D - 1) + D


def instance_of(model: ParamFop) -> SchedInstance:
    return SchedInstance(tuple(model.payload["r"]), tuple(model.payload["p"]))


def phi_matrix_to_params(phi: np.ndarray) -> PhiParams:
    phi = np.asarray(phi)
    D = phi.shape[0]
    return PhiParams([0.0 - float(phi[i, k]) for i, k in pairs(D)], [])


def params_to_phi_matrix(params: PhiParams, D: int) -> np.ndarray:
    out = np.ones((D, D), dtype=np.int64)
    np.fill_diagonal(out, 0)
    for v, (i, k) in zip(params.phi_plus, pairs(D)):
        out[i, k] = int(round(0.0 - v))
    return out


def all_ones_phi(D: int) -> np.ndarray:
    phi = np.ones((D, D), dtype=np.int64)
    np.fill_diagonal(phi, 0)
    return phi


def decode(point: Sequence[float], D: int) -> SchedSolution:
    point = np.asarray(point, dtype=float)
    b = np.rint(point[:D]).astype(np.int64)
    x = np.zeros((D, D), dtype=np.int64)
    for i, k in pairs(D):
        x[i, k] = int(round(point[x_index(D, i, k)]))
    return SchedSolution(b, x)


def encode_solution(sol: SchedSolution) -> np.ndarray:
    D = len(sol.b)
    point = np.zeros(D * D)
    point[:D] = sol.b
    for i, k in pairs(D):
        point[x_index(D, i, k)] = sol.x[i, k]
    return point


def gen_expert(instance: SchedInstance, truth: SchedTruth) -> SchedSolution:
    """Optimal schedule under the true weights and precedence thresholds."""
    model = encode_fop(instance)
    sol = solve_milp(build_fop(model, truth.theta, phi_matrix_to_params(truth.phi)))
    if not sol.is_optimal:
        raise ForwardProblemError(f"expert generation failed: forward problem {sol.status.value}")
    return decode(sol.point, instance.D)


def learn_phi_sched(solutions: Sequence[SchedSolution]) -> np.ndarray:
    """phi[i, k] = 0 when job i starts no later than job k in every sample, else 1."""
    if not solutions:
        raise UsageError("need at least one solution")
    D = len(solutions[0].b)
    if any(len(s.b) != D for s in solutions):
        raise UsageError("solutions disagree on the number of jobs")
    phi = np.zeros((D, D), dtype=np.int64)
    for i, k in pairs(D):
        always_first = all(s.b[i] <= s.b[k] for s in solutions)
        phi[i, k] = 0 if always_first else 1
    return phi


def random_theta(D: int, rng: np.random.Generator, offset: float = THETA_OFFSET) -> np.ndarray:
    """Uniform draw from the shifted simplex (Dirichlet(1) plus the offset)."""
    w = rng.dirichlet(np.ones(D))
    return project_simplex(w + offset, offset)


def random_phi(D: int, rng: np.random.Generator, forced: int = 0) -> np.ndarray:
    """All-ones thresholds with ``forced`` precedences taken from a random total order."""
    phi = all_ones_phi(D)
    if forced <= 0:
        return phi
    order = rng.permutation(D)
    ahead = [(int(order[a]), int(order[c])) for a in range(D) for c in range(a + 1, D)]
    if forced > len(ahead):
        raise UsageError(f"cannot force {forced} precedences among {D} jobs")
    for idx in rng.choice(len(ahead), size=forced, replace=False):
        i, k = ahead[int(idx)]
        phi[i, k] = 0
    return phi


def random_truth(D: int, rng: np.random.Generator, forced: int = 0) -> SchedTruth:
    return SchedTruth(random_theta(D, rng), random_phi(D, rng, forced))


def make_dataset(D: int, N: int, rng: np.random.Generator, truth: SchedTruth) -> Dataset:
    samples = []
    for _ in range(N):
        inst = gen_instance(D, rng)
        sol = gen_expert(inst, truth)
        samples.append(Sample(encode_fop(inst), encode_solution(sol)))
    return Dataset(tuple(samples), truth.theta, phi_matrix_to_params(truth.phi))


def solutions_of(dataset: Dataset) -> list[SchedSolution]:
    D = dataset.samples[0].model.D
    return [decode(s.expert, D) for s in dataset.samples]


def weighted_completion(instance: SchedInstance, sol: SchedSolution, theta) -> float:
    return float(sum(t * (b + p) for t, b, p in zip(theta, sol.b, instance.p)))


def check_schedule(instance: SchedInstance, sol: SchedSolution) -> bool:
    """Release dates respected and processing intervals pairwise disjoint."""
    D = instance.D
    if any(sol.b[i] < instance.r[i] for i in range(D)):
        return False
    for i, k in pairs(D):
        if i < k:
            si, ei = sol.b[i], sol.b[i] + instance.p[i]
            sk, ek = sol.b[k], sol.b[k] + instance.p[k]
            if si < ek and sk < ei:
                return False
    return True


# -- timing benchmark ------------------------------------------------------------

BENCH_COLUMNS = ["D", "vars", "constraints", "trial", "seed", "stage1_ms", "stage2_ms", "iters", "final_loss", "success"]
SUMMARY_COLUMNS = ["D", "vars", "constraints", "trials", "success_rate", "mean_ms", "max_ms", "median_ms"]
TIMING_COLUMNS = frozenset({"stage1_ms", "stage2_ms", "mean_ms", "max_ms", "median_ms"})


@dataclass
class BenchRow:
    D: int
    trial: int
    seed: int
    iters: int
    final_loss: float
    success: bool
    stage1_ms: float
    stage2_ms: float
    error: str = ""

    @property
    def total_ms(self) -> float:
        return self.stage1_ms + self.stage2_ms


def trial_seed(seed: int, D: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, D, trial]).generate_state(1)[0])


def run_trial(D: int, N: int, seed: int, iter_cap: int, forced: int = 0, jobs: int = 1, solver=solve_milp):
    """Draw a truth and N expert samples from ``seed``, then learn."""
    from .pipeline import run_pipeline
    from .objective import LearnerConfig

    rng = np.random.default_rng(seed)
    truth = random_truth(D, rng, forced)
    data = make_dataset(D, N, rng, truth)
    config = LearnerConfig(max_iters=iter_cap, simplex_offset=THETA_OFFSET, record_trace=False, jobs=jobs)
    return data, run_pipeline(data, config, solver=solver)


def run_benchmark(
    Ds: Sequence[int],
    N: int,
    trials: int,
    iter_cap: int,
    seed: int = 0,
    forced: int = 0,
    jobs: int = 1,
    solver=solve_milp,
) -> list[BenchRow]:
    """Learning time per trial; failures are recorded and the run goes on."""
    from .errors import InvMilpError

    rows = []
    for D in Ds:
        for t in range(trials):
            s = trial_seed(seed, D, t)
            try:
                _, res = run_trial(D, N, s, iter_cap, forced, jobs, solver)
            except InvMilpError as exc:
                rows.append(BenchRow(D, t, s, 0, float("nan"), False, float("nan"), float("nan"), str(exc)))
                continue
            rows.append(
                BenchRow(D, t, s, res.trace.iterations, res.train_loss, res.train_loss < 1e-6,
                         res.times.stage1_ms, res.times.stage2_ms)
            )
    return rows


def summarize_benchmark(rows: Sequence[BenchRow]) -> list[dict]:
    out = []
    for D in sorted({r.D for r in rows}):
        sub = [r for r in rows if r.D == D]
        times = np.array([r.total_ms for r in sub])
        v, c = model_size(D)
        out.append(
            {
                "D": D, "vars": v, "constraints": c, "trials": len(sub),
                "success_rate": sum(r.success for r in sub) / len(sub),
                "mean_ms": float(np.mean(times)), "max_ms": float(np.max(times)),
                "median_ms": float(np.median(times)),
            }
        )
    return out


def write_benchmark_csv(rows: Sequence[BenchRow], fh, mask_time: bool = False) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        v, c = model_size(r.D)
        vals = {"D": r.D, "vars": v, "constraints": c, "trial": r.trial, "seed": r.seed, "iters": r.iters,
                "final_loss": repr(r.final_loss), "success": int(r.success),
                "stage1_ms": f"{r.stage1_ms:.3f}", "stage2_ms": f"{r.stage2_ms:.3f}"}
        w.writerow(["" if mask_time and k in TIMING_COLUMNS else vals[k] for k in BENCH_COLUMNS])


def write_summary_csv(summary: Sequence[dict], fh, mask_time: bool = False) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in summary:
        cells = []
        for k in SUMMARY_COLUMNS:
            v = row[k]
            if k in TIMING_COLUMNS:
                cells.append("" if mask_time else f"{v:.3f}")
            else:
                cells.append(repr(v) if isinstance(v, float) else v)
        w.writerow(cells)
