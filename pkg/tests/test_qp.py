import numpy as np
import pytest

from qp_oracles import active_set_box_qp, enumerate_qp, kkt_solve, random_box_qp
from smmpc import DimensionError, QpProblem, solve_qp
from smmpc.qp import make_solver


def test_unconstrained_minimum():
    res = solve_qp(QpProblem(np.eye(2), -np.ones(2)))
    assert res.status == "optimal"
    assert np.allclose(res.z, [1.0, 1.0])


def test_pinned_variable():
    res = solve_qp(QpProblem(np.eye(1), [-2.0], lb=[1.0], ub=[1.0]))
    assert res.status == "optimal" and abs(res.z[0] - 1.0) < 1e-8


def test_objective_includes_constant():
    qp = QpProblem(np.eye(1), [0.0], constant=3.5)
    assert solve_qp(qp).objective == pytest.approx(3.5)


@pytest.mark.parametrize("seed", range(10))
def test_oracles_agree_on_small_instances(seed):
    rng = np.random.default_rng(seed)
    H, f, lb, ub = random_box_qp(rng, 6, unbounded_frac=0.3)
    x_enum, _ = enumerate_qp(H, f, lb, ub)
    assert np.allclose(active_set_box_qp(H, f, lb, ub), x_enum, atol=1e-9)


@pytest.mark.parametrize("seed", range(25))
def test_box_qp_matches_active_set(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 31))
    H, f, lb, ub = random_box_qp(rng, n, cond=10 ** rng.uniform(0, 3), unbounded_frac=0.2)
    res = solve_qp(QpProblem(H, f, lb=lb, ub=ub))
    x = active_set_box_qp(H, f, lb, ub)
    ref = 0.5 * x @ H @ x + f @ x
    assert res.status == "optimal"
    assert abs(res.objective - ref) <= 1e-6 * max(1.0, abs(ref))
    assert np.all(res.z >= lb - 1e-8) and np.all(res.z <= ub + 1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_equality_qp_matches_kkt(seed):
    rng = np.random.default_rng(200 + seed)
    n = int(rng.integers(3, 25))
    m = int(rng.integers(1, n))
    H, f, _, _ = random_box_qp(rng, n)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    res = solve_qp(QpProblem(H, f, A, b))
    z = kkt_solve(H, f, A, b)
    assert np.abs(res.z - z).max() <= 1e-8 * (1.0 + np.abs(z).max())


@pytest.mark.parametrize("seed", range(8))
def test_equality_and_box_match_enumeration(seed):
    rng = np.random.default_rng(300 + seed)
    n = 6
    H, f, lb, ub = random_box_qp(rng, n)
    A = rng.standard_normal((2, n))
    b = A @ rng.uniform(0.5 * lb, 0.5 * ub)  # a strictly feasible point exists
    best = enumerate_qp(H, f, lb, ub, A, b)
    res = solve_qp(QpProblem(H, f, A, b, lb, ub))
    assert res.status == "optimal"
    assert np.abs(res.z - best[0]).max() <= 1e-7


def test_residuals_within_tolerance():
    rng = np.random.default_rng(7)
    H, f, lb, ub = random_box_qp(rng, 15)
    A = rng.standard_normal((3, 15))
    b = A @ np.zeros(15)
    qp = QpProblem(H, f, A, b, lb, ub)
    res = solve_qp(qp, tol=1e-8)
    assert res.primal_residual <= 1e-8 * (1 + np.abs(np.concatenate([b, lb, ub])).max())
    assert res.dual_residual <= 1e-8 * (1 + np.abs(f).max())


def test_infeasible_problem_is_flagged():
    qp = QpProblem(np.eye(2), np.zeros(2), A_eq=[[1.0, 1.0]], b_eq=[5.0],
                   lb=[-1.0, -1.0], ub=[1.0, 1.0], eq_names=["sum"])
    res = solve_qp(qp)
    assert res.status == "infeasible"
    assert "sum" in res.infeasible_rows


def test_unbounded_unconstrained():
    res = solve_qp(QpProblem(np.zeros((2, 2)), [1.0, 0.0]))
    assert res.status == "unbounded"


def test_max_iter_status():
    rng = np.random.default_rng(3)
    H, f, lb, ub = random_box_qp(rng, 10, cond=1e3)
    res = solve_qp(QpProblem(H, f, lb=lb, ub=ub), max_iter=2, polish=False)
    assert res.status == "max_iter" and res.iterations == 2


def test_warm_start_and_reuse_agree():
    rng = np.random.default_rng(4)
    H, f, lb, ub = random_box_qp(rng, 12)
    qp = QpProblem(H, f, lb=lb, ub=ub)
    cold = solve_qp(qp)
    warm = solve_qp(qp, x0=rng.standard_normal(12), y0=rng.standard_normal(12))
    assert np.abs(cold.z - warm.z).max() < 1e-8
    again = solve_qp(qp)
    assert np.array_equal(cold.z, again.z)
    solver = make_solver(qp)
    f2 = rng.standard_normal(12)
    reused = solve_qp(QpProblem(H, f2, lb=lb, ub=ub), solver=solver)
    assert np.allclose(reused.z, active_set_box_qp(H, f2, lb, ub), atol=1e-7)


def test_problem_validation():
    with pytest.raises(DimensionError):
        QpProblem([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(DimensionError):
        QpProblem(np.eye(2), [0.0, 0.0], lb=[1.0, 0.0], ub=[0.0, 1.0])
    with pytest.raises(DimensionError):
        QpProblem(np.eye(2), [0.0])
    assert QpProblem(np.eye(2), np.zeros(2)).is_psd()
    assert not QpProblem(-np.eye(2), np.zeros(2)).is_psd()
