"""Receding-horizon controllers: SMMPC, SPC-MPC, DeePC and a true-model MPC.

SMMPC, SPC-MPC and the true-model controller all predict
``y_f = c + E_uf u_f`` with a free response ``c`` fixed at each step, and
share :func:`build_mpc_qp`. DeePC keeps the Hankel combination ``g`` as a
decision variable.
"""

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, InfeasibleError
from .predictor import PredictorMatrices
from .qp import QpProblem, constraint_matrix, make_solver, solve_qp

METHODS = ("smmpc", "spc_mpc", "deepc", "oracle_mpc")


def _spd(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ConfigError(f"{name} must be square")
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ConfigError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ConfigError(f"{name} must be positive definite") from None
    return M


def _bounds(b, n_ch, T_f, name):
    """Expand per-channel or per-horizon bounds to length ``n_ch * T_f``."""
    if b is None:
        return np.full(n_ch * T_f, -np.inf), np.full(n_ch * T_f, np.inf)
    lo, hi = (np.asarray(v, dtype=float).reshape(-1) for v in b)
    out = []
    for v in (lo, hi):
        if v.size == 1:
            v = np.full(n_ch * T_f, v.item())
        elif v.size == n_ch:
            v = np.tile(v, T_f)
        elif v.size != n_ch * T_f:
            raise ConfigError(f"{name} bounds need 1, {n_ch} or {n_ch * T_f} entries")
        out.append(v)
    if np.any(out[0] > out[1]):
        raise ConfigError(f"{name} lower bound exceeds upper bound")
    return out[0], out[1]


@dataclass(frozen=True, eq=False)
class ControlSpec:
    """Cost weights, reference and constraint sets for the horizon ``T_f``.

    ``input_penalty`` selects whether ``R`` weighs the absolute future
    inputs or their increments (the first increment is taken against the
    last applied input). ``u_box``/``y_box`` are ``(lower, upper)`` pairs
    given per channel or per horizon entry; ``None`` means unconstrained.
    An infinite ``slack_weight`` makes the output box hard.
    """

    P: np.ndarray
    R: np.ndarray
    n_u: int
    n_y: int
    T_f: int
    reference: Optional[np.ndarray] = None
    u_box: Optional[tuple] = None
    y_box: Optional[tuple] = None
    slack_weight: float = 1e6
    deepc_lambda1: float = 1e4
    deepc_lambda2: float = 0.0
    input_penalty: str = "absolute"
    u_lower: np.ndarray = field(init=False, repr=False)
    u_upper: np.ndarray = field(init=False, repr=False)
    y_lower: np.ndarray = field(init=False, repr=False)
    y_upper: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ny, nu = self.n_y * self.T_f, self.n_u * self.T_f
        P, R = _spd(self.P, "P"), _spd(self.R, "R")
        if P.shape != (ny, ny) or R.shape != (nu, nu):
            raise ConfigError(f"P must be {ny}x{ny} and R {nu}x{nu}")
        ref = np.zeros(ny) if self.reference is None else np.asarray(self.reference, float)
        ref = self._expand_ref(ref)
        if self.slack_weight < 0:
            raise ConfigError("slack_weight must be >= 0")
        if self.deepc_lambda2 < 0:
            raise ConfigError("deepc_lambda2 must be >= 0")
        if self.input_penalty not in ("absolute", "delta"):
            raise ConfigError("input_penalty must be 'absolute' or 'delta'")
        ul, uu = _bounds(self.u_box, self.n_u, self.T_f, "u_box")
        yl, yu = _bounds(self.y_box, self.n_y, self.T_f, "y_box")
        for k, v in dict(P=P, R=R, reference=ref, u_lower=ul, u_upper=uu,
                         y_lower=yl, y_upper=yu).items():
            object.__setattr__(self, k, v)

    def _expand_ref(self, ref):
        ref = ref.reshape(-1)
        if ref.size == 1:
            return np.full(self.n_y * self.T_f, ref.item())
        if ref.size == self.n_y:
            return np.tile(ref, self.T_f)
        if ref.size != self.n_y * self.T_f:
            raise ConfigError(f"reference needs 1, {self.n_y} or {self.n_y * self.T_f} entries")
        return ref

    @classmethod
    def diagonal(cls, n_u, n_y, T_f, q=1.0, r=0.1, **kw):
        """Spec with ``P = q I`` and ``R = r I``."""
        return cls(q * np.eye(n_y * T_f), r * np.eye(n_u * T_f), n_u, n_y, T_f, **kw)

    def with_reference(self, reference):
        return replace(self, reference=reference)

    @property
    def has_output_box(self):
        return bool(np.any(np.isfinite(self.y_lower)) or np.any(np.isfinite(self.y_upper)))

    def input_cost_terms(self, u_prev):
        """``(D, d0)`` with the input cost ``||D u_f - d0||_R^2``."""
        nu = self.n_u * self.T_f
        if self.input_penalty == "absolute":
            return np.eye(nu), np.zeros(nu)
        D = np.eye(nu) - np.eye(nu, k=-self.n_u)
        d0 = np.zeros(nu)
        d0[:self.n_u] = np.zeros(self.n_u) if u_prev is None else u_prev
        return D, d0


def build_mpc_qp(E_uf, c, spec, u_prev=None):
    """QP over ``[u_f; s; aux]`` for the prediction ``y_f = c + E_uf u_f``.

    The objective equals ``||y_f - ref||_P^2 + input cost + w ||s||^2``
    exactly (``constant`` carries the ``u_f``-independent part). Output
    bounds act on auxiliary variables tied to the prediction by equality
    rows; with a finite slack weight they read ``lb - s <= y_f <= ub + s``.
    """
    nu, ny = E_uf.shape[1], E_uf.shape[0]
    P, R = spec.P, spec.R
    D, d0 = spec.input_cost_terms(u_prev)
    e = c - spec.reference
    H_u = 2.0 * (E_uf.T @ P @ E_uf + D.T @ R @ D)
    f_u = 2.0 * (E_uf.T @ P @ e - D.T @ R @ d0)
    const = float(e @ P @ e + d0 @ R @ d0)

    lo_idx = np.flatnonzero(np.isfinite(spec.y_lower))
    hi_idx = np.flatnonzero(np.isfinite(spec.y_upper))
    soft = spec.has_output_box and np.isfinite(spec.slack_weight)
    ns = ny if soft else 0
    na = lo_idx.size + hi_idx.size
    n = nu + ns + na
    H = np.zeros((n, n))
    H[:nu, :nu] = H_u
    f = np.zeros(n)
    f[:nu] = f_u
    if soft:
        H[nu:nu + ns, nu:nu + ns] = 2.0 * spec.slack_weight * np.eye(ns)
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[:nu], ub[:nu] = spec.u_lower, spec.u_upper
    if soft:
        lb[nu:nu + ns] = 0.0
    names = [f"u_f[{i}]" for i in range(nu)] + [f"s[{i}]" for i in range(ns)]
    A = np.zeros((na, n))
    b = np.zeros(na)
    eq_names = []
    row = 0
    for idx, sign, bound, tag in ((lo_idx, 1.0, spec.y_lower, "y_lo"),
                                  (hi_idx, -1.0, spec.y_upper, "y_hi")):
        for i in idx:
            col = nu + ns + row
            A[row, :nu] = E_uf[i]
            if soft:
                A[row, nu + i] = sign
            A[row, col] = -1.0
            b[row] = -c[i]
            if sign > 0:
                lb[col] = bound[i]
            else:
                ub[col] = bound[i]
            names.append(f"{tag}[{i}]")
            eq_names.append(f"y_f[{i}] {'lower' if sign > 0 else 'upper'}")
            row += 1
    return QpProblem(H, f, A if na else None, b if na else None, lb, ub, const,
                     names, eq_names)


def build_smmpc_qp(pm: PredictorMatrices, spec: ControlSpec, u_p, y_p_meas):
    """SMMPC problem: the predictor substituted into the MPC cost."""
    u_p = np.asarray(u_p, dtype=float).reshape(-1)
    y_p = np.asarray(y_p_meas, dtype=float).reshape(-1)
    if u_p.size != pm.E_up.shape[1] or y_p.size != pm.E_yp.shape[1]:
        raise DimensionError("past signal lengths do not match the predictor")
    if (spec.n_u, spec.n_y, spec.T_f) != (pm.n_u, pm.n_y, pm.T_f):
        raise DimensionError("control spec dimensions do not match the predictor")
    c = pm.E_up @ u_p + pm.E_yp @ y_p
    return build_mpc_qp(pm.E_uf, c, spec, u_p[-pm.n_u:])


def build_deepc_qp(hankels, spec: ControlSpec, u_p, y_p_meas):
    """DeePC problem over ``[g; u_f; y_f; sigma_y]`` with ridge penalty on ``g``."""
    if not spec.deepc_lambda1 > 0:
        raise ConfigError("DeePC needs deepc_lambda1 > 0")
    hs = hankels
    u_p = np.asarray(u_p, dtype=float).reshape(-1)
    y_p = np.asarray(y_p_meas, dtype=float).reshape(-1)
    M = hs.M
    pu, py = hs.n_u * hs.T_p, hs.n_y * hs.T_p
    fu, fy = hs.n_u * hs.T_f, hs.n_y * hs.T_f
    if u_p.size != pu or y_p.size != py:
        raise DimensionError("past signal lengths do not match the Hankel data")
    n = M + fu + fy + py
    iu, iy, isg = M, M + fu, M + fu + fy
    D, d0 = spec.input_cost_terms(u_p[-hs.n_u:])
    H = np.zeros((n, n))
    f = np.zeros(n)
    H[:M, :M] = 2.0 * spec.deepc_lambda2 * np.eye(M)
    H[iu:iy, iu:iy] = 2.0 * D.T @ spec.R @ D
    f[iu:iy] = -2.0 * D.T @ spec.R @ d0
    H[iy:isg, iy:isg] = 2.0 * spec.P
    f[iy:isg] = -2.0 * spec.P @ spec.reference
    H[isg:, isg:] = 2.0 * spec.deepc_lambda1 * np.eye(py)
    const = float(spec.reference @ spec.P @ spec.reference + d0 @ spec.R @ d0)

    A = np.zeros((pu + py + fu + fy, n))
    b = np.zeros(A.shape[0])
    A[:pu, :M] = hs.H_up
    b[:pu] = u_p
    A[pu:pu + py, :M] = hs.H_yp
    A[pu:pu + py, isg:] = np.eye(py)
    b[pu:pu + py] = y_p
    r = pu + py
    A[r:r + fu, :M] = hs.H_uf
    A[r:r + fu, iu:iy] = -np.eye(fu)
    r += fu
    A[r:, :M] = hs.H_yf
    A[r:, iy:isg] = -np.eye(fy)
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[iu:iy], ub[iu:iy] = spec.u_lower, spec.u_upper
    lb[iy:isg], ub[iy:isg] = spec.y_lower, spec.y_upper
    names = ([f"g[{i}]" for i in range(M)] + [f"u_f[{i}]" for i in range(fu)]
             + [f"y_f[{i}]" for i in range(fy)] + [f"sigma_y[{i}]" for i in range(py)])
    eq_names = ([f"H_up g = u_p [{i}]" for i in range(pu)]
                + [f"H_yp g = y_p - sigma_y [{i}]" for i in range(py)]
                + [f"H_uf g = u_f [{i}]" for i in range(fu)]
                + [f"H_yf g = y_f [{i}]" for i in range(fy)])
    return QpProblem(H, f, A, b, lb, ub, const, names, eq_names)


def model_predictor(ss, T_f):
    """``(Gamma, E_uf)`` with ``y_f = Gamma x(k+1) + E_uf u_f`` for a state-space model."""
    n_y, n_u = ss.n_y, ss.n_u
    Gamma = np.zeros((n_y * T_f, ss.n_x))
    markov = [ss.D]
    Ak = np.eye(ss.n_x)
    for j in range(T_f):
        Gamma[j * n_y:(j + 1) * n_y] = ss.C @ Ak
        if j < T_f - 1:
            markov.append(ss.C @ Ak @ ss.B)
        Ak = ss.A @ Ak
    E_uf = np.zeros((n_y * T_f, n_u * T_f))
    for i in range(T_f):
        for j in range(i + 1):
            E_uf[i * n_y:(i + 1) * n_y, j * n_u:(j + 1) * n_u] = markov[i - j]
    return Gamma, E_uf


class Controller:
    """Receding-horizon controller state (single owner, not thread-safe).

    Args:
        method: one of ``smmpc``, ``spc_mpc``, ``deepc``, ``oracle_mpc``.
        spec: the control spec.
        predictor: :class:`PredictorMatrices` for ``smmpc``/``spc_mpc``.
        hankels: :class:`HankelSet` for ``deepc``.
        plant: true :class:`StateSpace` for ``oracle_mpc``.
    """

    def __init__(self, method, spec, predictor=None, hankels=None, plant=None,
                 tol=1e-8, max_iter=20000):
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}")
        self.method = method
        self.spec = spec
        self.predictor = predictor
        self.hankels = hankels
        self.plant = plant
        self.tol = tol
        self.max_iter = max_iter
        self._solver = None
        self._warm = None
        self._dual = None
        if method in ("smmpc", "spc_mpc") and predictor is None:
            raise ConfigError(f"{method} needs predictor matrices")
        if method == "deepc":
            if hankels is None:
                raise ConfigError("deepc needs Hankel data")
            if not spec.deepc_lambda1 > 0:
                raise ConfigError("DeePC needs deepc_lambda1 > 0")
        if method == "oracle_mpc":
            if plant is None:
                raise ConfigError("oracle_mpc needs the plant model")
            self._gamma, self._E_uf = model_predictor(plant, spec.T_f)

    def build_qp(self, u_p, y_p_meas, x_next=None):
        if self.method in ("smmpc", "spc_mpc"):
            return build_smmpc_qp(self.predictor, self.spec, u_p, y_p_meas)
        if self.method == "deepc":
            return build_deepc_qp(self.hankels, self.spec, u_p, y_p_meas)
        if x_next is None:
            raise ConfigError("oracle_mpc needs the next state")
        c = self._gamma @ np.asarray(x_next, dtype=float)
        u_prev = np.asarray(u_p, dtype=float).reshape(-1)[-self.spec.n_u:]
        return build_mpc_qp(self._E_uf, c, self.spec, u_prev)

    def _u_slice(self):
        fu = self.spec.n_u * self.spec.T_f
        start = self.hankels.M if self.method == "deepc" else 0
        return slice(start, start + fu)

    def step(self, u_p, y_p_meas, x_next=None):
        """Solve the current problem; returns ``(u_apply, diagnostics)``."""
        qp = self.build_qp(u_p, y_p_meas, x_next)
        if not self._solver_matches(qp):
            self._solver = make_solver(qp)
        t0 = time.perf_counter()
        res = solve_qp(qp, self.tol, self.max_iter, x0=self._warm, y0=self._dual,
                       solver=self._solver)
        solve_ms = 1e3 * (time.perf_counter() - t0)
        if res.status == "infeasible":
            raise InfeasibleError(f"{self.method} QP infeasible", list(res.infeasible_rows))
        su = self._u_slice()
        u_f = res.z[su]
        n_u = self.spec.n_u
        # shift the solution one block ahead for the next warm start
        warm = res.z.copy()
        warm[su] = np.concatenate([u_f[n_u:], u_f[-n_u:]])
        self._warm = warm
        self._dual = res.y if res.y.size else None
        if self.method == "deepc":
            iy = su.stop
            y_f = res.z[iy:iy + self.spec.n_y * self.spec.T_f]
        elif self.method == "oracle_mpc":
            y_f = self._gamma @ np.asarray(x_next, float) + self._E_uf @ u_f
        else:
            pm = self.predictor
            y_f = pm.E_up @ np.ravel(u_p) + pm.E_yp @ np.ravel(y_p_meas) + pm.E_uf @ u_f
        diag = {"u_f": u_f.copy(), "y_f": y_f, "iterations": res.iterations,
                "solve_ms": solve_ms, "status": res.status, "cost": res.objective,
                "polished": res.polished}
        return u_f[:n_u].copy(), diag

    def _solver_matches(self, qp):
        # factorizations stay valid while H and the constraint matrix are unchanged
        s = self._solver
        if s is None or not np.array_equal(s.H, qp.H):
            return False
        C = constraint_matrix(qp)
        return C.shape == s.C.shape and np.array_equal(C, s.C)

    def reset(self):
        self._warm = None
        self._dual = None


def receding_horizon_step(controller, u_p, y_p_meas, x_next=None):
    """One receding-horizon update: the first input block of the optimal plan."""
    return controller.step(u_p, y_p_meas, x_next)
