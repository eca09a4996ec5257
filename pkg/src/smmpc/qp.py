"""Dense convex QP solver based on operator splitting (ADMM).

Solves

    minimize    1/2 z' H z + f' z + constant
    subject to  A_eq z = b_eq,  lb <= z <= ub

by writing the constraints as ``l <= C z <= u`` and running the standard
splitting iteration on the reduced KKT system
``(H + sigma I + C' diag(rho) C)``. Equality rows get a penalty 1e3 times
larger than inequality rows. After the iterates settle, the active set is
guessed from the duals and an equality-constrained KKT solve ("polishing")
recovers a high-accuracy solution.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DimensionError

SIGMA = 1e-6
ALPHA = 1.6
RHO0 = 1.0
RHO_EQ_SCALE = 1e3
RHO_UPDATE_EVERY = 25
RHO_FACTOR = 2.0
RHO_BALANCE = 10.0
RHO_MIN, RHO_MAX = 1e-6, 1e6
INFEAS_WINDOW = 100
INFEAS_DUAL_NORM = 1e6


@dataclass(frozen=True, eq=False)
class QpProblem:
    """Quadratic program data; ``None`` constraint blocks mean absent."""

    H: np.ndarray
    f: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    constant: float = 0.0
    var_names: Optional[Sequence[str]] = None
    eq_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = H.shape[0]
        if H.shape != (n, n):
            raise DimensionError(f"H must be square, got {H.shape}")
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if f.shape != (n,):
            raise DimensionError(f"f has {f.size} entries, expected {n}")
        if self.A_eq is None:
            A = np.zeros((0, n))
            b = np.zeros(0)
        else:
            A = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            b = np.asarray(self.b_eq, dtype=float).reshape(-1)
            if A.shape[1] != n or b.shape != (A.shape[0],):
                raise DimensionError("A_eq / b_eq dimensions do not match")
        lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, float).reshape(-1)
        ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, float).reshape(-1)
        if lb.shape != (n,) or ub.shape != (n,):
            raise DimensionError("bound vectors must have one entry per variable")
        if np.any(lb > ub):
            raise DimensionError("lower bound exceeds upper bound")
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise DimensionError("H must be symmetric")
        for name, val in (("H", H), ("f", f), ("A_eq", A), ("b_eq", b),
                          ("lb", lb), ("ub", ub)):
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.H.shape[0]

    def objective(self, z):
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.H @ z + self.f @ z + self.constant)

    def is_psd(self, rtol=1e-10):
        tr = max(np.trace(self.H), 0.0)
        return bool(np.linalg.eigvalsh(self.H)[0] >= -rtol * max(tr, 1.0))


class QpResult(NamedTuple):
    z: np.ndarray
    status: str
    iterations: int
    objective: float
    y: np.ndarray
    primal_residual: float
    dual_residual: float
    polished: bool
    infeasible_rows: tuple = ()


class _Constraints(NamedTuple):
    C: np.ndarray
    l: np.ndarray
    u: np.ndarray
    rows: list  # human-readable constraint names


def _constraint_rows(qp):
    n = qp.n
    names_v = list(qp.var_names) if qp.var_names is not None else [f"z[{i}]" for i in range(n)]
    names_e = (list(qp.eq_names) if qp.eq_names is not None
               else [f"eq[{i}]" for i in range(qp.A_eq.shape[0])])
    box = np.flatnonzero(np.isfinite(qp.lb) | np.isfinite(qp.ub))
    C = np.vstack([qp.A_eq, np.eye(n)[box]])
    l = np.concatenate([qp.b_eq, qp.lb[box]])
    u = np.concatenate([qp.b_eq, qp.ub[box]])
    return _Constraints(C, l, u, names_e + [f"bound {names_v[i]}" for i in box])


class QpSolver:
    """ADMM solver bound to a fixed ``H`` and constraint matrix.

    The problem is equilibrated once (Ruiz scaling of the KKT matrix plus a
    cost scaling) and factorizations of the reduced KKT matrix are cached
    per penalty value, so repeated solves with new ``f``, ``b_eq`` and bounds
    (as in receding horizon control) reuse them.
    """

    def __init__(self, H, C, scaling_iter=15):
        self.H = np.asarray(H, dtype=float)
        self.C = np.asarray(C, dtype=float)
        self._factors = {}
        self._equilibrate(scaling_iter)

    def _equilibrate(self, iters):
        n, m = self.H.shape[0], self.C.shape[0]
        D, E = np.ones(n), np.ones(m)
        Hs, Cs = self.H.copy(), self.C.copy()
        for _ in range(iters):
            col_x = np.maximum(np.abs(Hs).max(axis=0, initial=0.0),
                               np.abs(Cs).max(axis=0, initial=0.0))
            col_z = np.abs(Cs).max(axis=1, initial=0.0)
            dx = np.where(col_x > 1e-8, 1.0 / np.sqrt(np.maximum(col_x, 1e-8)), 1.0)
            dz = np.where(col_z > 1e-8, 1.0 / np.sqrt(np.maximum(col_z, 1e-8)), 1.0)
            dx = np.clip(dx, 1e-4, 1e4)
            dz = np.clip(dz, 1e-4, 1e4)
            Hs = dx[:, None] * Hs * dx[None, :]
            Cs = dz[:, None] * Cs * dx[None, :]
            D *= dx
            E *= dz
        mean_col = np.mean(np.abs(Hs).max(axis=0, initial=0.0)) if n else 0.0
        c = 1.0 / mean_col if mean_col > 1e-8 else 1.0
        c = float(np.clip(c, 1e-4, 1e4))
        self._D, self._E, self._c = D, E, c
        self._Hs, self._Cs = c * Hs, Cs

    def _factor(self, rho, eq_mask):
        key = (rho, eq_mask.tobytes())
        fac = self._factors.get(key)
        if fac is None:
            rv = np.where(eq_mask, RHO_EQ_SCALE * rho, rho)
            K = self._Hs + SIGMA * np.eye(self._Hs.shape[0]) + (self._Cs.T * rv) @ self._Cs
            fac = cho_factor(K, lower=True, check_finite=False)
            if len(self._factors) > 32:
                self._factors.clear()
            self._factors[key] = fac
        return fac

    def solve(self, f, l, u, tol=1e-8, max_iter=20000, x0=None, y0=None,
              row_names=None, polish=True):
        H, C = self.H, self.C
        n, m = H.shape[0], C.shape[0]
        f = np.asarray(f, dtype=float)
        l = np.asarray(l, dtype=float)
        u = np.asarray(u, dtype=float)
        b_scale = 1.0 + _finite_norm(np.concatenate([l, u]))
        f_scale = 1.0 + np.linalg.norm(f, np.inf)
        eps_p, eps_d = tol * b_scale, tol * f_scale

        if m == 0:
            return _unconstrained(H, f, eps_d)

        D, E, c = self._D, self._E, self._c
        Hs, Cs = self._Hs, self._Cs
        fs = c * D * f
        ls, us = E * l, E * u
        eq_mask = _equality_rows(l, u)
        x = np.zeros(n) if x0 is None else np.array(x0, dtype=float) / D
        z = np.clip(Cs @ x, ls, us)
        y = np.zeros(m) if y0 is None else c * np.array(y0, dtype=float) / E
        rho = RHO0
        rv = np.where(eq_mask, RHO_EQ_SCALE * rho, rho)
        fac = self._factor(rho, eq_mask)
        prim_hist = []
        polish_gate = 1e4
        prim = dual = np.inf
        for k in range(1, max_iter + 1):
            rhs = SIGMA * x - fs + Cs.T @ (rv * z - y)
            xt = cho_solve(fac, rhs, check_finite=False)
            zt = Cs @ xt
            x = ALPHA * xt + (1.0 - ALPHA) * x
            zh = ALPHA * zt + (1.0 - ALPHA) * z
            z_new = np.clip(zh + y / rv, ls, us)
            y_prev = y
            y = y + rv * (zh - z_new)
            z = z_new

            prim = np.linalg.norm((Cs @ x - z) / E, np.inf)
            dual = np.linalg.norm((Hs @ x + fs + Cs.T @ y) / D, np.inf) / c
            prim_hist.append(prim)
            if prim <= eps_p and dual <= eps_d:
                return _finish(H, f, C, l, u, D * x, E * y / c, eps_p, eps_d, polish, k)
            gap = max(prim / eps_p, dual / eps_d)
            if polish and k % RHO_UPDATE_EVERY == 0 and gap <= polish_gate:
                res = _polish(H, f, C, l, u, D * x, z / E, E * y / c, eq_mask,
                              eps_p, eps_d, k)
                if res is not None:
                    return res
                polish_gate = max(gap / 10.0, 1.0)

            if _infeasible(C, l, u, E * y / c, E * y_prev / c, prim_hist, k):
                dy = y - y_prev
                big = np.abs(dy).max()
                idx = np.flatnonzero(np.abs(dy) > 1e-3 * big) if big > 0 else np.arange(m)
                names = [row_names[i] for i in idx] if row_names else [f"row {i}" for i in idx]
                return QpResult(D * x, "infeasible", k, float("nan"), E * y / c, prim, dual,
                                False, tuple(names))

            if k % RHO_UPDATE_EVERY == 0:
                ratio = (prim / eps_p) / max(dual / eps_d, 1e-300)
                new_rho = rho
                if ratio > RHO_BALANCE:
                    new_rho = min(rho * RHO_FACTOR, RHO_MAX)
                elif ratio < 1.0 / RHO_BALANCE:
                    new_rho = max(rho / RHO_FACTOR, RHO_MIN)
                if new_rho != rho:
                    rho = new_rho
                    rv = np.where(eq_mask, RHO_EQ_SCALE * rho, rho)
                    fac = self._factor(rho, eq_mask)

        xu, zu, yu = D * x, z / E, E * y / c
        if polish:
            res = _polish(H, f, C, l, u, xu, zu, yu, eq_mask, eps_p, eps_d, max_iter)
            if res is not None:
                return res
        obj = float(0.5 * xu @ H @ xu + f @ xu)
        return QpResult(xu, "max_iter", max_iter, obj, yu, prim, dual, False)


def _equality_rows(l, u):
    fin = np.isfinite(l) & np.isfinite(u)
    return fin & (np.where(fin, u - l, 1.0) <= 1e-12 * (1.0 + np.abs(np.where(fin, l, 0.0))))


def _finite_norm(v):
    v = v[np.isfinite(v)]
    return float(np.abs(v).max()) if v.size else 0.0


def _unconstrained(H, f, eps_d):
    try:
        z = cho_solve(cho_factor(H, lower=True), -f)
    except np.linalg.LinAlgError:
        z = np.linalg.lstsq(H, -f, rcond=None)[0]
    dual = float(np.linalg.norm(H @ z + f, np.inf))
    status = "optimal" if dual <= max(eps_d, 1e-9 * (1.0 + np.abs(H).max() * np.abs(z).max())) \
        else "unbounded"
    return QpResult(z, status, 0, float(0.5 * z @ H @ z + f @ z), np.zeros(0), 0.0, dual, False)


def _finish(H, f, C, l, u, x, y, eps_p, eps_d, polish, k):
    if polish:
        z = np.clip(C @ x, l, u)
        eq_mask = _equality_rows(l, u)
        res = _polish(H, f, C, l, u, x, z, y, eq_mask, eps_p, eps_d, k)
        if res is not None:
            return res
    Cx = C @ x
    prim = float(np.linalg.norm(Cx - np.clip(Cx, l, u), np.inf))
    dual = float(np.linalg.norm(H @ x + f + C.T @ y, np.inf))
    return QpResult(x, "optimal", k, float(0.5 * x @ H @ x + f @ x), y, prim, dual, False)


def _polish(H, f, C, l, u, x, z, y, eq_mask, eps_p, eps_d, k):
    """Solve the KKT system on the guessed active set; None if it fails."""
    n = H.shape[0]
    lower = eq_mask | (z - l < -y)
    upper = ~eq_mask & (u - z < y)
    act = np.flatnonzero(lower | upper)
    target = np.where(lower, l, u)[act]
    Ca = C[act]
    na = act.size
    delta = 1e-9
    K = np.zeros((n + na, n + na))
    K[:n, :n] = H
    K[:n, n:] = Ca.T
    K[n:, :n] = Ca
    Kd = K.copy()
    Kd[:n, :n] += delta * np.eye(n)
    Kd[n:, n:] -= delta * np.eye(na)
    rhs = np.concatenate([-f, target])
    try:
        lu = _lu(Kd)
    except (np.linalg.LinAlgError, ValueError):
        return None
    sol = lu(rhs)
    for _ in range(5):
        sol = sol + lu(rhs - K @ sol)
    xs = sol[:n]
    ys = np.zeros(C.shape[0])
    ys[act] = sol[n:]
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        return None
    Cx = C @ xs
    prim = float(np.linalg.norm(Cx - np.clip(Cx, l, u), np.inf))
    dual = float(np.linalg.norm(H @ xs + f + C.T @ ys, np.inf))
    ineq = ~eq_mask
    sign_ok = np.all(ys[lower & ineq] <= eps_d) and np.all(ys[upper] >= -eps_d)
    if prim <= eps_p and dual <= eps_d and sign_ok:
        return QpResult(xs, "optimal", k, float(0.5 * xs @ H @ xs + f @ xs), ys,
                        prim, dual, True)
    return None


def _lu(K):
    from scipy.linalg import lu_factor, lu_solve
    fac = lu_factor(K, check_finite=False)
    if not np.all(np.isfinite(fac[0])):
        raise np.linalg.LinAlgError("singular KKT matrix")
    return lambda r: lu_solve(fac, r, check_finite=False)


def _infeasible(C, l, u, y, y_prev, prim_hist, k):
    if k <= INFEAS_WINDOW:
        return False
    if np.linalg.norm(y, np.inf) <= INFEAS_DUAL_NORM:
        return False
    if prim_hist[-1] < prim_hist[-1 - INFEAS_WINDOW]:
        return False
    # confirm with a Farkas-type certificate on the dual step
    dy = y - y_prev
    ndy = np.linalg.norm(dy, np.inf)
    if ndy == 0.0:
        return False
    pos, neg = dy > 0, dy < 0
    # u'dy+ + l'dy- must be negative; an infinite bound on a used side voids it
    if np.any(pos & ~np.isfinite(u)) or np.any(neg & ~np.isfinite(l)):
        return False
    lin = float(u[pos] @ dy[pos] + l[neg] @ dy[neg])
    return bool(np.linalg.norm(C.T @ dy, np.inf) <= 1e-4 * ndy and lin < -1e-4 * ndy)


def solve_qp(qp, tol=1e-8, max_iter=20000, x0=None, y0=None, polish=True, solver=None):
    """Solve ``qp`` and return a :class:`QpResult` (``z`` and ``status`` first).

    ``status`` is ``"optimal"``, ``"max_iter"``, ``"infeasible"`` or, for an
    unconstrained problem whose objective is unbounded below, ``"unbounded"``.
    On infeasibility ``infeasible_rows`` names the constraints carrying the
    certificate. Pass a :class:`QpSolver` built by :func:`make_solver` to
    reuse factorizations across problems sharing ``H`` and the constraint
    matrix.
    """
    cons = _constraint_rows(qp)
    solver = QpSolver(qp.H, cons.C) if solver is None else solver
    res = solver.solve(qp.f, cons.l, cons.u, tol, max_iter, x0, y0, cons.rows, polish)
    if res.status != "infeasible":
        res = res._replace(objective=res.objective + qp.constant)
    return res


def constraint_matrix(qp):
    """Stacked constraint matrix ``[A_eq; I_box]`` the solver works with."""
    return _constraint_rows(qp).C


def make_solver(qp):
    """A :class:`QpSolver` for the structure (``H`` and constraints) of ``qp``."""
    return QpSolver(qp.H, _constraint_rows(qp).C)
