"""Shared test helpers."""

import json
from pathlib import Path

import numpy as np

from smmpc import StateSpace

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# pass/fail lines recorded by the acceptance tests, printed at the end of the session
ACCEPTANCE_LINES = {}


def load_plant(name):
    return StateSpace.from_dict(json.loads((CONFIGS / name).read_text())["plant"])


def true_trajectory(ss, T, rng, x0_scale=1.0):
    """Random input and the exact output of ``ss`` from a random initial state."""
    u = rng.standard_normal((T, ss.n_u))
    x = x0_scale * rng.standard_normal(ss.n_x)
    y = np.zeros((T, ss.n_y))
    for k in range(T):
        y[k] = ss.C @ x + ss.D @ u[k]
        x = ss.A @ x + ss.B @ u[k]
    return u, y
