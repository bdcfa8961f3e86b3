import io

import numpy as np
import pytest

from invmilp.constraints import phi_sup_dataset
from invmilp.errors import ForwardProblemError, UsageError
from invmilp.forward import Dataset, PhiParams, Sample, build_fop
from invmilp.loss import dataset_loss, per_sample_losses, suboptimality_loss, write_breakdown_csv
from invmilp.milp import solve_milp
from invmilp.scheduling import (
    SchedInstance,
    SchedSolution,
    all_ones_phi,
    encode_fop,
    encode_solution,
    make_dataset,
    phi_matrix_to_params,
    random_truth,
)

INST = SchedInstance((0, 0), (2, 3))
JOB1_FIRST = encode_solution(SchedSolution(np.array([0, 2]), np.array([[0, 1], [0, 0]])))
JOB2_FIRST = encode_solution(SchedSolution(np.array([3, 0]), np.array([[0, 0], [1, 0]])))
OPEN = phi_matrix_to_params(all_ones_phi(2))


def test_gap_by_hand():
    # expert cost 0.1*2 + 0.9*5 = 4.7, best order costs 0.1*5 + 0.9*3 = 3.2
    v = suboptimality_loss(encode_fop(INST), [0.1, 0.9], OPEN, JOB1_FIRST)
    assert v.optimality_gap == pytest.approx(1.5, abs=1e-12)
    assert v.forward_value == pytest.approx(-3.2, abs=1e-12)
    assert v.violation_penalty == 0.0
    assert v.total == v.optimality_gap + v.violation_penalty


def test_optimum_has_zero_loss():
    model = encode_fop(INST)
    sol = solve_milp(build_fop(model, [0.1, 0.9], OPEN))
    assert suboptimality_loss(model, [0.1, 0.9], OPEN, sol.point, lam=1.0).total == 0.0


def test_violation_penalty_scales_with_lambda():
    model = encode_fop(INST)
    forbid = PhiParams([-1.0, 0.0], [])  # x_01 <= 0: job 0 may not precede job 1
    v0 = suboptimality_loss(model, [0.5, 0.5], forbid, JOB1_FIRST, lam=0.0)
    v1 = suboptimality_loss(model, [0.5, 0.5], forbid, JOB1_FIRST, lam=1.0)
    v2 = suboptimality_loss(model, [0.5, 0.5], forbid, JOB1_FIRST, lam=2.5)
    assert v0.violation_penalty == 0.0
    assert v1.violation_penalty == pytest.approx(1.0)
    assert v2.violation_penalty == pytest.approx(2.5)
    assert v0.total <= v1.total <= v2.total


def test_errors():
    model = encode_fop(INST)
    with pytest.raises(UsageError):
        suboptimality_loss(model, [0.5, 0.5], OPEN, JOB1_FIRST, lam=-1.0)
    # both orders forbidden
    with pytest.raises(ForwardProblemError):
        suboptimality_loss(model, [0.5, 0.5], PhiParams([0.0, 0.0], []), JOB1_FIRST)
    ds = Dataset((Sample(model, JOB1_FIRST), Sample(model, JOB2_FIRST)))
    with pytest.raises(UsageError):
        dataset_loss(Dataset(()), [0.5, 0.5], OPEN)
    with pytest.raises(ForwardProblemError, match="sample 0"):
        dataset_loss(ds, [0.5, 0.5], PhiParams([0.0, 0.0], []))


def test_dataset_mean():
    model = encode_fop(INST)
    ds = Dataset((Sample(model, JOB1_FIRST), Sample(model, JOB2_FIRST)))
    theta = [0.1, 0.9]
    parts = [suboptimality_loss(model, theta, OPEN, x, lam=1.0).total for x in (JOB1_FIRST, JOB2_FIRST)]
    assert dataset_loss(ds, theta, OPEN, lam=1.0).total == pytest.approx(sum(parts) / 2)
    single = Dataset(ds.samples[:1])
    doubled = Dataset(ds.samples[:1] * 2)
    assert dataset_loss(single, theta, OPEN).total == dataset_loss(doubled, theta, OPEN).total
    optimal = Dataset((Sample(model, JOB2_FIRST),))
    assert dataset_loss(optimal, theta, OPEN).total == 0.0


def test_truth_weights_under_learned_thresholds_give_zero_loss():
    rng = np.random.default_rng(12)
    for _ in range(5):
        truth = random_truth(3, rng, forced=2)
        ds = make_dataset(3, 6, rng, truth)
        phi = phi_sup_dataset(ds)
        for v in per_sample_losses(ds, truth.theta, phi, lam=1.0):
            assert v.total < 1e-9


def test_breakdown_csv():
    model = encode_fop(INST)
    ds = Dataset((Sample(model, JOB1_FIRST), Sample(model, JOB2_FIRST)))
    buf = io.StringIO()
    write_breakdown_csv(per_sample_losses(ds, [0.1, 0.9], OPEN), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "sample,gap,penalty,total"
    assert len(lines) == 3 and lines[2].startswith("1,0.0,")
