"""Block-Hankel data matrices and trajectory membership.

One noise-free experiment on the desk plant is enough to describe every
trajectory of length T: a window (u, y) belongs to the system exactly when it
lies in the range of the stacked Hankel matrix of the recorded data.
"""

import json
from pathlib import Path

import numpy as np

from smmpc import StateSpace, build_hankel, build_smm, collect_record, trajectory_membership

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
plant = StateSpace.from_dict(json.loads((CONFIGS / "desk_siso_plant.json").read_text())["plant"])

# a tiny Hankel matrix: column j holds samples j .. j+depth-1
print(build_hankel([1, 2, 3, 4, 5], depth=3))

record = collect_record(plant, K=400, pe_order=30, seed=1)
model = build_smm(record, T_p=10, T_f=10)
H = model.hankels.stacked()
print(f"stacked Hankel {H.shape}, rank {np.linalg.matrix_rank(H)} "
      f"(= n_u*T + n_x = {1 * 20 + plant.n_x})")

# a fresh trajectory from a random initial state
rng = np.random.default_rng(0)
u = rng.standard_normal((20, 1))
x = rng.standard_normal(plant.n_x)
y = np.zeros((20, 1))
for k in range(20):
    y[k] = plant.C @ x
    x = plant.A @ x + plant.B @ u[k]

print("true trajectory accepted:", trajectory_membership(model, u, y))
y[5] += 1.0
print("perturbed trajectory accepted:", trajectory_membership(model, u, y))
