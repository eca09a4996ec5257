"""Constrained step tracking on the 2x2 desk plant with all four controllers.

SMMPC uses the signal matrix predictor, SPC-MPC the least-squares predictor,
DeePC the raw Hankel data (ridge-regularized here) and oracle_mpc the true
model and state.
"""

from pathlib import Path

import numpy as np

from smmpc import Scenario, run_closed_loop

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
sc = Scenario.load(CONFIGS / "mimo_constrained.json")
print(f"plant {sc.plant.n_u}x{sc.plant.n_y}, T_p={sc.T_p}, T_f={sc.T_f}, "
      f"u in [-1.5, 1.5], soft y in [-1.2, 1.2]")
for method in sc.method:
    r = run_closed_loop(sc, method)
    J = r.indices
    print(f"{method:10s} J_y {J.J_y:7.3f}  J_u {J.J_u:6.3f}  solve {J.mean_solve_ms:6.2f} ms  "
          f"max|u| {np.abs(r.u).max():.3f}  final y {np.round(r.y_true[-1], 3)}")
