import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invmilp.errors import UsageError
from invmilp.forward import Dataset, Sample
from invmilp.loss import dataset_loss
from invmilp.objective import LearnerConfig, in_theta, project_simplex, run_algorithm1, subgradient
from invmilp.scheduling import (
    SchedInstance,
    SchedSolution,
    all_ones_phi,
    encode_fop,
    encode_solution,
    make_dataset,
    phi_matrix_to_params,
    random_truth,
    learn_phi_sched,
    solutions_of,
)

INST = SchedInstance((0, 0), (2, 3))
JOB1_FIRST = encode_solution(SchedSolution(np.array([0, 2]), np.array([[0, 1], [0, 0]])))
OPEN = phi_matrix_to_params(all_ones_phi(2))


def grid_projection(v, steps=400):
    """Closest point of a fine grid on the 3-simplex (independent check)."""
    best, arg = np.inf, None
    for i in range(steps + 1):
        for j in range(steps + 1 - i):
            w = np.array([i, j, steps - i - j]) / steps
            d = np.sum((w - v) ** 2)
            if d < best:
                best, arg = d, w
    return arg


def test_projection_examples():
    third = np.full(3, 1 / 3)
    assert np.allclose(project_simplex(third), third)
    out = project_simplex([0.6, 0.6, 0.0])
    assert np.allclose(out, [0.5, 0.5, 0.0])
    assert np.allclose(grid_projection(np.array([0.6, 0.6, 0.0])), out, atol=1e-2)
    inside = np.array([0.2, 0.3, 0.5]) + 0.01
    assert np.allclose(project_simplex(inside, 0.01), inside)


def test_projection_against_grid():
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rng.normal(size=3)
        assert np.allclose(project_simplex(v), grid_projection(v), atol=5e-3)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=16),
    st.sampled_from([0.0, 1e-3, 0.05]),
)
def test_projection_kkt(values, offset):
    v = np.array(values)
    w = project_simplex(v, offset)
    D = v.size
    assert abs(w.sum() - (1 + D * offset)) <= 1e-9
    assert np.all(w >= offset - 1e-12)
    # stationarity: w - v = -tau on the free set, and >= -tau where the bound is active
    free = w > offset + 1e-12
    if free.any():
        tau = np.mean((v - w)[free])
        assert np.allclose((v - w)[free], tau, atol=1e-8)
        assert np.all((v - w)[~free] <= tau + 1e-8)


def test_projection_nonexpansive_and_idempotent():
    rng = np.random.default_rng(1)
    for _ in range(300):
        D = int(rng.integers(1, 17))
        u, v = rng.normal(scale=3, size=D), rng.normal(scale=3, size=D)
        pu, pv = project_simplex(u, 1e-3), project_simplex(v, 1e-3)
        assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-12
        assert np.allclose(project_simplex(pu, 1e-3), pu, atol=1e-12)
    with pytest.raises(UsageError):
        project_simplex([])


def test_subgradient_by_hand():
    ds = Dataset((Sample(encode_fop(INST), JOB1_FIRST),))
    g = subgradient(ds, [0.1, 0.9], OPEN)
    assert g.tolist() == [-3.0, 2.0]
    doubled = Dataset(ds.samples * 2)
    assert subgradient(doubled, [0.1, 0.9], OPEN).tolist() == [-3.0, 2.0]
    assert subgradient(ds, [0.7, 0.3], OPEN).tolist() == [0.0, 0.0]


def test_stops_at_first_iterate_when_expert_optimal():
    ds = Dataset((Sample(encode_fop(INST), JOB1_FIRST),))
    theta, trace = run_algorithm1(ds, OPEN)
    assert trace.iterations == 1 and trace.converged and trace.best_loss == 0.0
    assert np.allclose(theta, [0.5, 0.5])


def test_two_job_convergence_and_trace():
    ds = Dataset((Sample(encode_fop(INST), JOB1_FIRST),))
    theta, trace = run_algorithm1(ds, OPEN, LearnerConfig(theta_init=[0.1, 0.9]))
    assert trace.converged and trace.iterations <= 50
    assert dataset_loss(ds, theta, OPEN).total == 0.0
    assert trace.rows[trace.best_iter - 1].loss == min(r.loss for r in trace.rows)
    buf = io.StringIO()
    trace.write_csv(buf, mask_time=True)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iter,loss,step_norm,wallclock_ms"
    assert lines[1].endswith(",") and lines[1].startswith("1,1.5")


def test_iterates_stay_in_shifted_simplex_and_best_is_prefix_min():
    rng = np.random.default_rng(2)
    truth = random_truth(4, rng, forced=0)
    ds = make_dataset(4, 5, rng, truth)
    phi = phi_matrix_to_params(learn_phi_sched(solutions_of(ds)))
    cfg = LearnerConfig(max_iters=40, simplex_offset=1e-3, zero_threshold=0.0)
    _, trace = run_algorithm1(ds, phi, cfg)
    for r in trace.rows:
        assert in_theta(r.theta, 1e-3)
    prefix = np.minimum.accumulate([r.loss for r in trace.rows])
    assert trace.best_loss == prefix[-1]
    short = LearnerConfig(max_iters=10, simplex_offset=1e-3, zero_threshold=0.0)
    _, t10 = run_algorithm1(ds, phi, short)
    assert t10.best_loss == prefix[min(9, len(prefix) - 1)]


def test_zero_subgradient_means_zero_gap():
    rng = np.random.default_rng(3)
    truth = random_truth(3, rng, forced=1)
    ds = make_dataset(3, 4, rng, truth)
    phi = phi_matrix_to_params(learn_phi_sched(solutions_of(ds)))
    _, trace = run_algorithm1(ds, phi, LearnerConfig(simplex_offset=1e-3))
    last = trace.rows[-1]
    if last.step_norm == 0.0:
        assert last.loss == 0.0


def test_jobs_do_not_change_results():
    rng = np.random.default_rng(4)
    truth = random_truth(4, rng, forced=2)
    ds = make_dataset(4, 6, rng, truth)
    phi = phi_matrix_to_params(learn_phi_sched(solutions_of(ds)))
    a, ta = run_algorithm1(ds, phi, LearnerConfig(max_iters=30, simplex_offset=1e-3))
    b, tb = run_algorithm1(ds, phi, LearnerConfig(max_iters=30, simplex_offset=1e-3, jobs=3))
    assert a.tobytes() == b.tobytes()
    assert [r.loss for r in ta.rows] == [r.loss for r in tb.rows]


def test_config_validation():
    with pytest.raises(UsageError):
        LearnerConfig(max_iters=0)
    with pytest.raises(UsageError):
        LearnerConfig(zero_threshold=-1.0)
    with pytest.raises(UsageError):
        LearnerConfig(theta_init="random").initial_theta(3)
    with pytest.raises(UsageError):
        LearnerConfig(theta_init=[1.0, 0.0]).initial_theta(3)
    assert np.allclose(LearnerConfig(simplex_offset=0.01).initial_theta(4), 0.26)
