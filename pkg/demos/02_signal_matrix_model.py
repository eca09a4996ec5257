"""Factorizing a record into the signal matrix model.

The past rows [H_up; H_yp] are LQ-factorized; the effective order (the
number of output coordinates kept) comes from one of three rules. On exact
data the residual factor L_yf vanishes, on noisy data it does not.
"""

import json
from pathlib import Path

from smmpc import NoiseModel, StateSpace, build_smm, collect_record

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
plant = StateSpace.from_dict(json.loads((CONFIGS / "desk_siso_plant.json").read_text())["plant"])

clean = collect_record(plant, K=400, pe_order=30, seed=1)
noisy = collect_record(plant, K=400, pe_order=30, noise=NoiseModel.isotropic(0.25, 1, seed=2),
                       seed=1)

for label, rec, mode in [("clean, numrank", clean, "numrank:1e-8"),
                         ("clean, given:4", clean, "given:4"),
                         ("noisy, maximal", noisy, "maximal"),
                         ("noisy, given:4", noisy, "given:4")]:
    smm = build_smm(rec, T_p=10, T_f=10, order_mode=mode)
    print(f"{label:16s} order {smm.n_x:2d}  L_yp {smm.L_yp.shape}  "
          f"||L_yf||/||H_yf|| = {smm.lyf_ratio:.2e}")

# maximal order on exact data asks for more output coordinates than exist
try:
    build_smm(clean, 10, 10, order_mode="maximal")
except Exception as exc:
    print(type(exc).__name__, "-", exc)
