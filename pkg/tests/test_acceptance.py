"""Acceptance criteria 1-9.

Each test records one ``[PASS]``/``[FAIL]`` line that the session prints in
an "acceptance criteria" section at the end of the run.
"""

import functools
import time

import numpy as np
import pytest

from helpers import ACCEPTANCE_LINES, CONFIGS, load_plant, true_trajectory
from qp_oracles import active_set_box_qp, enumerate_qp, kkt_solve, random_box_qp
from smmpc import (NoiseModel, QpProblem, build_blue_predictor, build_smm, collect_record,
                   numerical_rank, predict, random_stable_plant, solve_qp,
                   trajectory_membership)
from smmpc.cli import main as cli_main
from smmpc.harness import Scenario, export, load_indices, run_closed_loop, run_monte_carlo
from smmpc.predictor import build_unbiased_predictor

SIGMA = 0.25


def criterion(n):
    """Record a pass/fail line for criterion ``n``; the test returns its detail text."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except AssertionError as exc:
                msg = str(exc).splitlines()[0] if str(exc) else "assertion failed"
                ACCEPTANCE_LINES[n] = f"[FAIL] criterion {n}: {msg}"
                print(ACCEPTANCE_LINES[n])
                raise
            except Exception as exc:
                ACCEPTANCE_LINES[n] = f"[FAIL] criterion {n}: {type(exc).__name__}: {exc}"
                print(ACCEPTANCE_LINES[n])
                raise
            ACCEPTANCE_LINES[n] = f"[PASS] criterion {n}: {detail}"
            print(ACCEPTANCE_LINES[n])
        return wrapper
    return deco


@pytest.fixture(scope="module")
def desk():
    return load_plant("desk_siso_plant.json")


@pytest.fixture(scope="module")
def exact_model(desk):
    rec = collect_record(desk, 400, 30, None, seed=2024)
    return build_smm(rec, 10, 10)


@criterion(1)
def test_c1_willems_membership(desk, exact_model):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    accepted = rejected = 0
    for _ in range(100):
        u, y = true_trajectory(desk, 20, rng, x0_scale=2.0)
        accepted += trajectory_membership(exact_model, u, y, tol=1e-8)
        y_bad = y.copy()
        y_bad[rng.integers(20), 0] += 1.0
        rejected += not trajectory_membership(exact_model, u, y_bad, tol=1e-8)
    elapsed = time.perf_counter() - t0
    assert accepted == 100, f"only {accepted}/100 true trajectories accepted"
    assert rejected == 100, f"only {rejected}/100 perturbed trajectories rejected"
    assert elapsed < 10.0, f"took {elapsed:.1f} s"
    return f"100/100 accepted, 100/100 perturbed rejected at tol 1e-8 ({elapsed:.2f} s)"


@criterion(2)
def test_c2_factor_structure():
    worst = 0.0
    for i in range(50):
        n_x = 2 + i % 5
        n_u = n_y = 2 if i % 5 == 4 else 1
        ss = random_stable_plant(n_x, n_u, n_y, seed=500 + i)
        pe = n_u * 20 + n_y * 10
        rec = collect_record(ss, max(500, (n_u + 1) * pe + 100), pe, None, seed=i)
        smm = build_smm(rec, 10, 10)
        rank = numerical_rank(smm.L_uf, 1e-9)
        assert rank == n_u * 10, f"case {i}: rank(L_uf) = {rank}, expected {n_u * 10}"
        assert smm.n_x == n_x, f"case {i}: order {smm.n_x}, expected {n_x}"
        assert smm.lyf_ratio < 1e-8, f"case {i}: ||L_yf||/||H_yf|| = {smm.lyf_ratio:.2e}"
        worst = max(worst, smm.lyf_ratio)
    return f"50 plants: rank(L_uf) = n_u*T_f in all, max ||L_yf||/||H_yf|| = {worst:.1e}"


@criterion(3)
def test_c3_predictor_exactness(desk, exact_model):
    pm = build_blue_predictor(exact_model, SIGMA ** 2 * np.eye(1))
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        u, y = true_trajectory(desk, 20, rng, x0_scale=3.0)
        y_hat = predict(pm, u[:10], y[:10], u[10:])
        worst = max(worst, np.linalg.norm(y_hat - y[10:, 0]) / np.linalg.norm(y[10:, 0]))
    assert worst < 1e-6, f"max relative error {worst:.2e}"
    return f"max relative error over 100 slices {worst:.1e} (< 1e-6)"


def _noisy_predictions(pm_list, desk, N, seed):
    """``N`` predictions per predictor from one fixed slice with fresh past noise."""
    rng = np.random.default_rng(seed)
    u, y = true_trajectory(desk, 20, rng, x0_scale=2.0)
    V = SIGMA * rng.standard_normal((N, 10))
    out = []
    for pm in pm_list:
        base = pm.E_up @ u[:10, 0] + pm.E_uf @ u[10:, 0]
        out.append(base + (y[:10, 0] + V) @ pm.E_yp.T)
    return y[10:, 0], out


@criterion(4)
def test_c4_blue_covariance(desk, exact_model):
    t0 = time.perf_counter()
    pm = build_blue_predictor(exact_model, SIGMA ** 2 * np.eye(1))
    N = 10_000
    y_true, (Y,) = _noisy_predictions([pm], desk, N, seed=4)
    emp = np.cov(Y.T)
    rel = np.linalg.norm(emp - pm.cov_yf) / np.linalg.norm(pm.cov_yf)
    bias = np.abs(Y.mean(axis=0) - y_true)
    bound = 4.0 * np.sqrt(np.diag(pm.cov_yf)) / np.sqrt(N)
    elapsed = time.perf_counter() - t0
    assert rel < 0.10, f"relative Frobenius error {rel:.3f}"
    assert np.all(bias <= bound), f"bias exceeds 4 sigma/sqrt(N) at {np.argmax(bias / bound)}"
    assert elapsed < 60.0, f"took {elapsed:.1f} s"
    return (f"cov relative Frobenius error {rel:.3f} (< 0.10), max bias "
            f"{np.max(bias / bound):.2f} of the 4 sigma/sqrt(N) bound ({elapsed:.2f} s)")


@criterion(5)
def test_c5_blue_optimality(desk, exact_model):
    pm = build_blue_predictor(exact_model, SIGMA ** 2 * np.eye(1))
    L = exact_model.L_yp
    proj = np.eye(L.shape[0]) - L @ np.linalg.pinv(L)  # N (I - L L^+) L = 0
    rng = np.random.default_rng(5)
    alts = []
    for _ in range(20):
        Z = rng.standard_normal(pm.E_xy.shape)
        N_perp = Z @ proj
        N_perp *= rng.uniform(0.05, 1.0) * np.linalg.norm(pm.E_xy) / np.linalg.norm(N_perp)
        assert np.abs(N_perp @ L).max() < 1e-10
        alts.append(build_unbiased_predictor(exact_model, pm.E_xy + N_perp))
    _, (Yb, *Ya) = _noisy_predictions([pm] + alts, desk, 10_000, seed=55)
    blue_emp = np.trace(np.cov(Yb.T))
    blue_th = np.trace(pm.cov_yf)
    ratios = [np.trace(np.cov(Y.T)) / max(blue_emp, blue_th) for Y in Ya]
    assert min(ratios) >= 0.98, f"an alternative estimator beat BLUE: ratio {min(ratios):.4f}"
    return (f"20 unbiased alternatives: min trace ratio to BLUE {min(ratios):.3f} "
            f"(>= 0.98)")


@criterion(6)
def test_c6_smmpc_equals_oracle():
    sc = Scenario.load(CONFIGS / "regulation_noise_free.json")
    assert sc.noise is None and sc.sim_length - sc.T_p == 100
    a = run_closed_loop(sc, "smmpc")
    b = run_closed_loop(sc, "oracle_mpc")
    diff = np.abs(a.u - b.u).max()
    assert np.abs(b.u).max() > 0.1, "regulation task is trivial"
    assert diff < 1e-5, f"max input difference {diff:.2e}"
    return f"100-step closed loop, max |u_smmpc - u_oracle| = {diff:.1e} (< 1e-5)"


@criterion(7)
def test_c7_qp_solver():
    rng = np.random.default_rng(7)
    worst_box = 0.0
    for i in range(100):
        n = int(rng.integers(2, 31))
        H, f, lb, ub = random_box_qp(rng, n, cond=10 ** rng.uniform(0, 3), unbounded_frac=0.2)
        x_ref = active_set_box_qp(H, f, lb, ub)
        if n <= 8:
            x_enum, _ = enumerate_qp(H, f, lb, ub)
            assert np.allclose(x_ref, x_enum, atol=1e-9), "oracles disagree"
        ref = 0.5 * x_ref @ H @ x_ref + f @ x_ref
        res = solve_qp(QpProblem(H, f, lb=lb, ub=ub))
        err = abs(res.objective - ref) / max(1.0, abs(ref))
        assert res.status == "optimal" and err <= 1e-6, f"box case {i}: rel error {err:.2e}"
        worst_box = max(worst_box, err)
    worst_eq = 0.0
    for i in range(30):
        n = int(rng.integers(3, 31))
        m = int(rng.integers(1, n))
        H, f, _, _ = random_box_qp(rng, n)
        A, b = rng.standard_normal((m, n)), rng.standard_normal(m)
        z = kkt_solve(H, f, A, b)
        res = solve_qp(QpProblem(H, f, A, b))
        err = np.abs(res.z - z).max() / (1.0 + np.abs(z).max())
        assert err <= 1e-8, f"equality case {i}: error {err:.2e}"
        worst_eq = max(worst_eq, err)
    return (f"100 boxed QPs max objective rel error {worst_box:.1e} (<= 1e-6); "
            f"30 equality QPs max KKT deviation {worst_eq:.1e} (<= 1e-8)")


@pytest.fixture(scope="module")
def protocol_campaign(tmp_path_factory):
    path = CONFIGS / "protocol_step.json"
    sc = Scenario.load(path)
    out = tmp_path_factory.mktemp("protocol")
    t0 = time.perf_counter()
    mc = run_monte_carlo(sc)
    export(mc.results, out, sc)
    return sc, mc, out, time.perf_counter() - t0


# SMMPC and SPC-MPC share one predictor in maximal order mode, so their mean
# indices agree up to rounding; the comparison allows for that tie
TIE_RTOL = 1e-9


@criterion(8)
def test_c8_protocol_comparison(protocol_campaign):
    sc, mc, _, elapsed = protocol_campaign
    assert sc.record_cfg["K"] == 2500 and (sc.T_p, sc.T_f) == (40, 40)
    assert sc.smm_cfg["order_mode"] == "maximal" and sc.mc_runs == 30
    assert np.allclose(sc.noise.sigma_v, SIGMA ** 2)
    assert sc.control.deepc_lambda2 == 0.0 and sc.reference_profile.kind == "step"
    assert not mc.failures, f"failed runs: {mc.failures[:3]}"
    J = {m: mc.aggregate[m].mean.J_y for m in ("smmpc", "spc_mpc", "deepc")}
    rel = (J["smmpc"] - J["spc_mpc"]) / J["spc_mpc"]
    assert J["smmpc"] <= J["spc_mpc"] * (1 + TIE_RTOL), f"SMMPC worse than SPC by {rel:.2e}"
    assert J["deepc"] > J["smmpc"], "DeePC (lambda2=0) did not degrade"
    assert elapsed < 15 * 60, f"campaign took {elapsed:.0f} s"
    return (f"mean J_y smmpc {J['smmpc']:.6g} <= spc_mpc {J['spc_mpc']:.6g} "
            f"(rel diff {rel:.1e}, tie tol {TIE_RTOL:g}); deepc(lambda2=0) {J['deepc']:.6g} "
            f"> smmpc; 30 runs in {elapsed:.0f} s")


@criterion(9)
def test_c9_determinism(protocol_campaign, tmp_path):
    _, _, out, _ = protocol_campaign
    assert cli_main(["montecarlo", "--scenario", str(CONFIGS / "protocol_step.json"),
                     "--out", str(tmp_path)]) == 0
    first = (out / "indices.csv").read_bytes()
    second = (tmp_path / "indices.csv").read_bytes()
    assert first == second, "indices.csv differs between identical campaigns"
    n = len(load_indices(tmp_path))
    return f"indices.csv bit-identical across two campaigns ({n} rows, {len(first)} bytes)"
