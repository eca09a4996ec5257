"""Protocol-scale Monte Carlo step-response campaign with CSV export.

K=2500 samples, noise std 0.25, T_p=T_f=40, maximal order. Each run rebuilds
the record and every model. Pass a run count to shorten the demo (the shipped
scenario uses 30 runs, about a minute on one core).

    python demos/06_monte_carlo_campaign.py [runs] [out_dir]
"""

import sys
from pathlib import Path

from smmpc import Scenario, export, run_monte_carlo
from smmpc.cli import main as cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
runs = int(sys.argv[1]) if len(sys.argv) > 1 else 5
out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("campaign_out")

sc = Scenario.load(CONFIGS / "protocol_step.json")
sc = Scenario.from_dict({**sc.to_dict(), "mc_runs": runs})
mc = run_monte_carlo(sc)
export(mc.results, out, sc)
for m, a in mc.aggregate.items():
    print(f"{m:8s} mean J_y {a.mean.J_y:.6f} +- {a.std.J_y:.4f}")
print(f"files in {out}:", sorted(p.name for p in out.iterdir())[:4], "...")
cli(["report", "--in", str(out)])
