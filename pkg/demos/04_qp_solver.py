"""The embedded ADMM solver on small quadratic programs."""

import numpy as np

from smmpc import QpProblem, solve_qp

# unconstrained: the minimizer of 0.5|z|^2 - 1'z is z = 1
print(solve_qp(QpProblem(np.eye(2), -np.ones(2))).z)

# a boxed problem with an equality row
rng = np.random.default_rng(0)
G = rng.standard_normal((6, 6))
qp = QpProblem(G @ G.T + np.eye(6), rng.standard_normal(6), A_eq=np.ones((1, 6)), b_eq=[1.0],
               lb=-0.5 * np.ones(6), ub=0.5 * np.ones(6), eq_names=["sum"])
res = solve_qp(qp)
print(res.status, res.iterations, "iterations, polished:", res.polished)
print("z =", np.round(res.z, 4), " sum =", round(res.z.sum(), 10))

# the same bounds cannot meet sum = 5
bad = QpProblem(qp.H, qp.f, qp.A_eq, [5.0], qp.lb, qp.ub, eq_names=["sum"])
res = solve_qp(bad)
print(res.status, "certificate rows:", res.infeasible_rows)
