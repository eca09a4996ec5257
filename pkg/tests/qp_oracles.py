"""Reference QP solvers used only as test oracles."""

import itertools

import numpy as np


def kkt_solve(H, f, A, b):
    """Equality-constrained QP by one direct KKT solve."""
    n, m = H.shape[0], A.shape[0]
    K = np.block([[H, A.T], [A, np.zeros((m, m))]])
    sol = np.linalg.solve(K, np.concatenate([-f, b]))
    return sol[:n]


def enumerate_qp(H, f, lb, ub, A=None, b=None, tol=1e-9):
    """Strictly convex QP by enumerating every bound-activity pattern (small n)."""
    n = H.shape[0]
    A = np.zeros((0, n)) if A is None else A
    b = np.zeros(0) if b is None else b
    best = None
    for pattern in itertools.product((0, 1, 2), repeat=n):  # free, at lower, at upper
        fixed = [i for i in range(n) if pattern[i]]
        if any(pattern[i] == 1 and not np.isfinite(lb[i]) or
               pattern[i] == 2 and not np.isfinite(ub[i]) for i in fixed):
            continue
        x = np.zeros(n)
        for i in fixed:
            x[i] = lb[i] if pattern[i] == 1 else ub[i]
        free = [i for i in range(n) if not pattern[i]]
        if free or A.shape[0]:
            Hf = H[np.ix_(free, free)]
            Af = A[:, free]
            rhs_f = -(f[free] + H[np.ix_(free, fixed)] @ x[fixed])
            rhs_b = b - A[:, fixed] @ x[fixed]
            K = np.block([[Hf, Af.T], [Af, np.zeros((A.shape[0], A.shape[0]))]])
            try:
                sol = np.linalg.solve(K, np.concatenate([rhs_f, rhs_b]))
            except np.linalg.LinAlgError:
                continue
            if not np.allclose(K @ sol, np.concatenate([rhs_f, rhs_b]), atol=1e-9):
                continue
            x[free] = sol[:len(free)]
            nu = sol[len(free):]
        else:
            nu = np.zeros(0)
        if np.any(x < lb - tol) or np.any(x > ub + tol) or \
                (A.shape[0] and np.abs(A @ x - b).max() > 1e-8):
            continue
        g = H @ x + f + A.T @ nu
        if any(pattern[i] == 1 and g[i] < -tol or pattern[i] == 2 and g[i] > tol
               for i in fixed):
            continue
        obj = 0.5 * x @ H @ x + f @ x
        if best is None or obj < best[1]:
            best = (x, obj)
    return best


def active_set_box_qp(H, f, lb, ub, max_iter=10000):
    """Primal active-set method for ``min 0.5 x'Hx + f'x`` over a box (H positive definite)."""
    n = H.shape[0]
    x = np.clip(np.zeros(n), lb, ub)
    W = {i: (-1 if x[i] == lb[i] else 1) for i in range(n) if x[i] in (lb[i], ub[i])}
    for _ in range(max_iter):
        free = np.array([i for i in range(n) if i not in W], dtype=int)
        g = H @ x + f
        p = np.zeros(n)
        if free.size:
            p[free] = np.linalg.solve(H[np.ix_(free, free)], -g[free])
        if np.abs(p).max() <= 1e-13 * (1 + np.abs(x).max()):
            # multipliers of active bounds: g_i >= 0 at lower, g_i <= 0 at upper
            viol = {i: (g[i] if s < 0 else -g[i]) for i, s in W.items()}
            if not viol or min(viol.values()) >= -1e-12:
                return x
            del W[min(viol, key=viol.get)]
            continue
        alpha, block = 1.0, None
        for i in free:
            if p[i] < 0 and np.isfinite(lb[i]):
                a = (lb[i] - x[i]) / p[i]
            elif p[i] > 0 and np.isfinite(ub[i]):
                a = (ub[i] - x[i]) / p[i]
            else:
                continue
            if a < alpha:
                alpha, block = a, i
        x = x + alpha * p
        if block is not None:
            x[block] = lb[block] if p[block] < 0 else ub[block]
            W[block] = -1 if p[block] < 0 else 1
    raise RuntimeError("active-set oracle did not converge")


def random_box_qp(rng, n, cond=1e2, unbounded_frac=0.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    H = Q @ np.diag(np.logspace(0, np.log10(cond), n)) @ Q.T
    H = 0.5 * (H + H.T)
    f = 3.0 * rng.standard_normal(n)
    lb = -rng.uniform(0.2, 1.5, n)
    ub = rng.uniform(0.2, 1.5, n)
    free = rng.random(n) < unbounded_frac
    lb[free & (rng.random(n) < 0.5)] = -np.inf
    ub[free & (rng.random(n) < 0.5)] = np.inf
    return H, f, lb, ub
