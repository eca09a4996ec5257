"""Command line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 numerical
failure, 4 infeasible QP.
"""

import argparse
import sys

import numpy as np

from . import harness, io
from .errors import (ConfigError, DimensionError, InfeasibleError, NumericalError,
                     SmmpcError)
from .harness import _parse_plant
from .plant import NoiseModel, collect_record
from .predictor import build_blue_predictor, predict, predictor_covariance
from .signal_matrix import OrderMode, build_smm

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INFEASIBLE = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _cmd_collect(a):
    cfg = io.load_json(a.plant)
    plant = _parse_plant(cfg.get("plant", cfg))
    noise = None if a.noise_std is None else NoiseModel.isotropic(a.noise_std, plant.n_y,
                                                                  a.seed + 1)
    pe = a.pe_order or plant.n_u * 2 * a.horizon + plant.n_y * a.horizon
    rec = collect_record(plant, a.K, pe, noise, a.seed)
    io.write_record_csv(rec, a.out)
    print(f"wrote {rec.K} samples to {a.out}")


def _cmd_smm_build(a):
    rec = io.read_record_csv(a.record, noise_free=a.noise_free)
    smm = build_smm(rec, a.tp, a.tf, a.M, None if a.order is None else OrderMode.parse(a.order))
    pm = build_blue_predictor(smm, a.noise_std ** 2 * np.eye(rec.n_y))
    io.save_snapshot(a.out, smm, pm)
    print(f"order {smm.n_x} ({smm.order_mode}), M={smm.M}, "
          f"||L_yf||/||H_yf||={smm.lyf_ratio:.3e}; snapshot {a.out}")


def _cmd_predict(a):
    _, pm = io.load_snapshot(a.model)
    if pm is None:
        raise ConfigError(f"{a.model} holds no predictor")
    u_p, y_p = io.read_signal_csv(a.past)
    u_f, _ = io.read_signal_csv(a.future_u)
    for name, arr, rows, cols in (("past u", u_p, pm.T_p, pm.n_u), ("past y", y_p, pm.T_p, pm.n_y),
                                  ("future u", u_f, pm.T_f, pm.n_u)):
        if arr.shape != (rows, cols):
            raise DimensionError(f"{name} has shape {arr.shape}, expected {(rows, cols)}")
    y_hat = predict(pm, u_p, y_p, u_f).reshape(pm.T_f, pm.n_y)
    header = ["t"] + [f"y_{j + 1}" for j in range(pm.n_y)]
    cols = [y_hat]
    if a.cov:
        header += [f"std_{j + 1}" for j in range(pm.n_y)]
        std = np.sqrt(np.clip(np.diag(predictor_covariance(pm)), 0.0, None))
        cols.append(std.reshape(pm.T_f, pm.n_y))
    data = np.hstack(cols)
    out = open(a.out, "w") if a.out else sys.stdout
    try:
        out.write(",".join(header) + "\n")
        for k, row in enumerate(data):
            out.write(",".join([str(k)] + [io.fmt(v) for v in row]) + "\n")
    finally:
        if a.out:
            out.close()


def _print_table(rows):
    print(f"{'method':<12}{'runs':>5}{'J_y mean':>14}{'J_y std':>12}"
          f"{'J_u mean':>14}{'J_u std':>12}{'solve ms':>10}")
    for r in harness.summarize(rows):
        print(f"{r['method']:<12}{r['n']:>5}{r['J_y']:>14.6g}{r['J_y_std']:>12.4g}"
              f"{r['J_u']:>14.6g}{r['J_u_std']:>12.4g}{r['solve_ms']:>10.3g}")


def _rows(results):
    return [{"run": r.run_id, "method": r.method, "J_y": r.indices.J_y, "J_u": r.indices.J_u,
             "solve_ms": r.indices.mean_solve_ms} for r in results]


def _cmd_simulate(a):
    sc = harness.Scenario.load(a.scenario)
    methods = [a.method] if a.method else sc.method
    results = [harness.run_closed_loop(sc, m, a.run) for m in methods]
    _print_table(_rows(results))
    if a.out:
        harness.export(results, a.out, sc)


def _cmd_montecarlo(a):
    sc = harness.Scenario.load(a.scenario)
    mc = harness.run_monte_carlo(sc, a.workers)
    harness.export(mc.results, a.out, sc)
    for run, m, err in mc.failures:
        print(f"run {run} {m} failed: {err}", file=sys.stderr)
    _print_table(_rows(mc.results))


def _cmd_report(a):
    try:
        rows = harness.load_indices(a.input)
    except OSError as exc:
        raise ConfigError(f"cannot read results: {exc}") from None
    _print_table(rows)


def build_parser():
    p = _Parser(prog="smmpc", description="Signal matrix model predictive control")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    c = sub.add_parser("collect", help="simulate an open-loop experiment to a record CSV")
    c.add_argument("--plant", required=True, help="JSON plant (matrices or 'random')")
    c.add_argument("--K", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--pe-order", type=int, default=None)
    c.add_argument("--horizon", type=int, default=10,
                   help="T_p = T_f used for the default excitation order")
    c.add_argument("--noise-std", type=float, default=None)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_collect)

    s = sub.add_parser("smm", help="signal matrix model commands")
    ssub = s.add_subparsers(dest="smm_cmd", required=True, parser_class=_Parser)
    b = ssub.add_parser("build", help="factorize a record into a model snapshot")
    b.add_argument("--record", required=True)
    b.add_argument("--tp", type=int, required=True)
    b.add_argument("--tf", type=int, required=True)
    b.add_argument("--order", default=None, help="given:<n> | numrank:<rtol> | maximal")
    b.add_argument("--M", type=int, default=None)
    b.add_argument("--noise-free", action="store_true")
    b.add_argument("--noise-std", type=float, default=1.0,
                   help="output noise std for the predictor covariance")
    b.add_argument("--out", default="model.json")
    b.set_defaults(func=_cmd_smm_build)

    pr = sub.add_parser("predict", help="predict future outputs from a snapshot")
    pr.add_argument("--model", required=True)
    pr.add_argument("--past", required=True, help="CSV t,u_*,y_* with T_p rows")
    pr.add_argument("--future-u", required=True, help="CSV t,u_* with T_f rows")
    pr.add_argument("--cov", action="store_true", help="add per-step standard deviations")
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=_cmd_predict)

    sm = sub.add_parser("simulate", help="one closed-loop run per method")
    sm.add_argument("--scenario", required=True)
    sm.add_argument("--method", default=None)
    sm.add_argument("--run", type=int, default=0)
    sm.add_argument("--out", default=None)
    sm.set_defaults(func=_cmd_simulate)

    mc = sub.add_parser("montecarlo", help="Monte Carlo campaign with CSV export")
    mc.add_argument("--scenario", required=True)
    mc.add_argument("--out", required=True)
    mc.add_argument("--workers", type=int, default=None)
    mc.set_defaults(func=_cmd_montecarlo)

    rp = sub.add_parser("report", help="print the index table of a campaign")
    rp.add_argument("--in", dest="input", required=True)
    rp.set_defaults(func=_cmd_report)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.constraints:
            print("offending constraints: " + ", ".join(exc.constraints), file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SmmpcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
