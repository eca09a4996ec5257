"""Minimum-variance multi-step prediction.

With an exact model and noisy past outputs, the predictor is unbiased and its
covariance is known in closed form. Any other unbiased estimator of the output
coordinates does worse. In maximal order mode the predictor coincides with the
least-squares (SPC) fit.
"""

import json
from pathlib import Path

import numpy as np

from smmpc import (NoiseModel, StateSpace, build_blue_predictor, build_smm, build_spc_predictor,
                   collect_record)
from smmpc.predictor import build_unbiased_predictor

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
plant = StateSpace.from_dict(json.loads((CONFIGS / "desk_siso_plant.json").read_text())["plant"])
sigma = 0.25
rng = np.random.default_rng(0)

smm = build_smm(collect_record(plant, 400, 30, seed=1), 10, 10)
blue = build_blue_predictor(smm, sigma ** 2 * np.eye(1))

# one fixed window, 10^4 noise draws on the past outputs
u = rng.standard_normal(20)
x = rng.standard_normal(plant.n_x)
y = np.zeros(20)
for k in range(20):
    y[k] = (plant.C @ x)[0]
    x = plant.A @ x + plant.B[:, 0] * u[k]
V = sigma * rng.standard_normal((10_000, 10))


def predictions(pm):
    return pm.E_up @ u[:10] + pm.E_uf @ u[10:] + (y[:10] + V) @ pm.E_yp.T


Y = predictions(blue)
err = np.linalg.norm(np.cov(Y.T) - blue.cov_yf) / np.linalg.norm(blue.cov_yf)
print(f"empirical vs closed-form covariance: relative error {err:.3f}")
print(f"largest bias {np.abs(Y.mean(0) - y[10:]).max():.2e}")

# perturb the estimator inside the unbiased family
L = smm.L_yp
N = rng.standard_normal(blue.E_xy.shape) @ (np.eye(10) - L @ np.linalg.pinv(L))
alt = build_unbiased_predictor(smm, blue.E_xy + 0.3 * N)
print(f"trace covariance: BLUE {np.trace(np.cov(Y.T)):.4f}, "
      f"alternative {np.trace(np.cov(predictions(alt).T)):.4f}")

noisy = collect_record(plant, 2500, 30, NoiseModel.isotropic(sigma, 1, seed=3), seed=4)
m = build_smm(noisy, 10, 10, order_mode="maximal")
gap = np.abs(build_blue_predictor(m, sigma ** 2 * np.eye(1)).E_yp
             - build_spc_predictor(m.hankels).E_yp).max()
print(f"maximal order: max |E_yp(BLUE) - E_yp(SPC)| = {gap:.1e}")
