"""Closed-loop simulation, Monte Carlo campaigns and result export.

A :class:`Scenario` fixes everything a campaign needs: plant, noise,
experiment, model horizons, controller weights, methods and reference. Run
``i`` of a campaign draws all its randomness from the seed
``record.seed + i``, so every result is a pure function of the scenario.

Timing convention: at step ``k`` the input ``u(k)`` is applied and ``y(k)``
measured. A controller solve at step ``k`` uses the windows ending at ``k``
and produces ``u(k+1)``. Inputs are zero during the first ``T_p`` steps.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .control import METHODS, Controller, ControlSpec
from .errors import ConfigError, NumericalError, SmmpcError
from .io import fmt
from .plant import NoiseModel, StateSpace, collect_record, random_stable_plant
from .predictor import build_blue_predictor, build_spc_predictor
from .signal_matrix import OrderMode, build_smm

MIN_SUCCESS = 0.8

_TOP_KEYS = {"plant", "noise", "record", "smm", "control", "method", "sim_length",
             "reference", "mc_runs", "x0", "workers", "solver"}


class CampaignError(NumericalError):
    """Too many Monte Carlo runs failed for the aggregate to be meaningful."""


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _int(d, key, default, where, minimum=None):
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or int(v) != v:
        raise ConfigError(f"{where}.{key} must be an integer")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}")
    return v


def _parse_plant(d):
    if "random" in d:
        _check_keys(d, {"random"}, "plant")
        r = dict(d["random"])
        _check_keys(r, {"n_x", "n_u", "n_y", "seed", "rho_max", "rho_min", "feedthrough"},
                    "plant.random")
        return random_stable_plant(**r)
    return StateSpace.from_dict(d)


def _parse_noise(d, n_y):
    if d is None:
        return None
    _check_keys(d, {"std", "sigma_v"}, "noise")
    if ("std" in d) == ("sigma_v" in d):
        raise ConfigError("noise needs exactly one of 'std' or 'sigma_v'")
    if "std" in d:
        return NoiseModel.isotropic(float(d["std"]), n_y)
    return NoiseModel(d["sigma_v"])


def _box(v):
    if v is None:
        return None
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError("boxes are given as [lower, upper]")
    return tuple(np.asarray(b, dtype=float) for b in v)


def _parse_control(d, n_u, n_y, T_f):
    keys = {"q", "r", "P", "R", "u_box", "y_box", "slack_weight", "deepc_lambda1",
            "deepc_lambda2", "input_penalty"}
    _check_keys(d, keys, "control")
    if "P" in d and "q" in d or "R" in d and "r" in d:
        raise ConfigError("give either a scalar weight (q/r) or a matrix (P/R), not both")
    P = np.asarray(d["P"], float) if "P" in d else float(d.get("q", 1.0)) * np.eye(n_y * T_f)
    R = np.asarray(d["R"], float) if "R" in d else float(d.get("r", 0.1)) * np.eye(n_u * T_f)
    kw = {k: d[k] for k in ("slack_weight", "deepc_lambda1", "deepc_lambda2",
                            "input_penalty") if k in d}
    for k in ("slack_weight", "deepc_lambda1", "deepc_lambda2"):
        if k in kw:
            kw[k] = float(kw[k])
    return ControlSpec(P, R, n_u, n_y, T_f, u_box=_box(d.get("u_box")),
                       y_box=_box(d.get("y_box")), **kw)


@dataclass(frozen=True, eq=False)
class ReferenceProfile:
    """Output reference over the simulation: ``step``, ``constant`` or ``series``.

    A step holds ``initial`` before step ``start`` (defaults to ``T_p``,
    i.e. the ``T_p + 1``-th sample) and ``value`` from then on. A series
    holds its last sample beyond its end.
    """

    kind: str = "constant"
    value: object = 0.0
    start: Optional[int] = None
    initial: object = 0.0

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, {"type", "value", "start", "initial", "values"}, "reference")
        kind = d.get("type", "constant")
        if kind == "series":
            if "values" not in d:
                raise ConfigError("series reference needs 'values'")
            return cls("series", d["values"])
        if kind not in ("step", "constant"):
            raise ConfigError(f"unknown reference type {kind!r}")
        if "values" in d:
            raise ConfigError(f"{kind} reference takes 'value', not 'values'")
        if kind == "constant" and ("start" in d or "initial" in d):
            raise ConfigError("constant reference takes only 'value'")
        return cls(kind, d.get("value", 0.0), d.get("start"), d.get("initial", 0.0))

    def to_dict(self):
        if self.kind == "series":
            return {"type": "series", "values": np.asarray(self.value, float).tolist()}
        out = {"type": self.kind, "value": np.asarray(self.value, float).tolist()}
        if self.kind == "step":
            out["start"] = self.start
            out["initial"] = np.asarray(self.initial, float).tolist()
        return out

    def samples(self, length, n_y, T_p):
        """Reference as a ``(length, n_y)`` array."""
        def chan(v):
            v = np.asarray(v, dtype=float).reshape(-1)
            if v.size not in (1, n_y):
                raise ConfigError(f"reference value needs 1 or {n_y} entries")
            return np.broadcast_to(v, (n_y,))

        if self.kind == "constant":
            return np.tile(chan(self.value), (length, 1))
        if self.kind == "step":
            start = T_p if self.start is None else int(self.start)
            r = np.tile(chan(self.initial), (length, 1))
            r[max(start, 0):] = chan(self.value)
            return r
        v = np.asarray(self.value, dtype=float)
        v = v.reshape(-1, 1) if v.ndim == 1 else v
        if v.ndim != 2 or v.shape[1] != n_y or v.shape[0] < 1:
            raise ConfigError(f"series reference must be (steps, {n_y})")
        idx = np.minimum(np.arange(length), v.shape[0] - 1)
        return v[idx]


@dataclass(frozen=True, eq=False)
class Scenario:
    """A fully specified closed-loop experiment (see module docstring)."""

    plant: StateSpace
    noise: Optional[NoiseModel]
    record_cfg: dict
    smm_cfg: dict
    control: ControlSpec
    method: tuple
    sim_length: int
    reference_profile: ReferenceProfile = field(default_factory=ReferenceProfile)
    mc_runs: int = 1
    x0: Optional[np.ndarray] = None
    workers: int = 1
    solver_cfg: dict = field(default_factory=lambda: {"tol": 1e-8, "max_iter": 20000})
    control_cfg: dict = field(default_factory=dict)

    def __post_init__(self):
        T_p, T_f = self.smm_cfg["T_p"], self.smm_cfg["T_f"]
        if self.sim_length <= T_p:
            raise ConfigError(f"sim_length {self.sim_length} must exceed T_p={T_p}")
        if self.mc_runs < 1:
            raise ConfigError("mc_runs must be >= 1")
        if not self.method:
            raise ConfigError("at least one method is required")
        for m in self.method:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        if len(set(self.method)) != len(self.method):
            raise ConfigError("duplicate methods")
        if self.control.T_f != T_f or self.control.n_u != self.plant.n_u \
                or self.control.n_y != self.plant.n_y:
            raise ConfigError("control spec does not match the plant and horizon")
        if self.noise is not None and self.noise.sigma_v.shape[0] != self.plant.n_y:
            raise ConfigError("noise covariance does not match the plant outputs")
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=float).reshape(-1)
            if x0.shape != (self.plant.n_x,):
                raise ConfigError(f"x0 needs {self.plant.n_x} entries")
            object.__setattr__(self, "x0", x0)
        self.reference_profile.samples(1, self.plant.n_y, T_p)

    @classmethod
    def from_dict(cls, d):
        """Build from a config mapping; unknown keys raise :class:`ConfigError`."""
        _check_keys(d, _TOP_KEYS, "scenario")
        for k in ("plant", "record", "smm", "method", "sim_length"):
            if k not in d:
                raise ConfigError(f"scenario is missing {k!r}")
        plant = _parse_plant(d["plant"])
        noise = _parse_noise(d.get("noise"), plant.n_y)

        rec = d["record"]
        _check_keys(rec, {"K", "pe_order", "seed"}, "record")
        smm = d["smm"]
        _check_keys(smm, {"T_p", "T_f", "M", "order_mode"}, "smm")
        T_p = _int(smm, "T_p", None, "smm", 1)
        T_f = _int(smm, "T_f", None, "smm", 1)
        if T_p is None or T_f is None:
            raise ConfigError("smm needs T_p and T_f")
        mode = smm.get("order_mode")
        smm_cfg = {"T_p": T_p, "T_f": T_f, "M": _int(smm, "M", None, "smm", 1),
                   "order_mode": None if mode is None else str(OrderMode.parse(mode))}
        pe_default = plant.n_u * (T_p + T_f) + plant.n_y * T_p
        record_cfg = {"K": _int(rec, "K", None, "record", 1),
                      "pe_order": _int(rec, "pe_order", pe_default, "record", 1),
                      "seed": _int(rec, "seed", 0, "record", 0)}
        if record_cfg["K"] is None:
            raise ConfigError("record needs K")

        control_cfg = dict(d.get("control", {}))
        control = _parse_control(control_cfg, plant.n_u, plant.n_y, T_f)
        method = d["method"]
        method = (method,) if isinstance(method, str) else tuple(method)
        solver = dict(d.get("solver", {}))
        _check_keys(solver, {"tol", "max_iter"}, "solver")
        solver_cfg = {"tol": float(solver.get("tol", 1e-8)),
                      "max_iter": _int(solver, "max_iter", 20000, "solver", 1)}
        return cls(
            plant=plant, noise=noise, record_cfg=record_cfg, smm_cfg=smm_cfg,
            control=control, method=method,
            sim_length=_int(d, "sim_length", None, "scenario", 1),
            reference_profile=ReferenceProfile.from_dict(d.get("reference", {})),
            mc_runs=_int(d, "mc_runs", 1, "scenario", 1), x0=d.get("x0"),
            workers=_int(d, "workers", 1, "scenario", 1), solver_cfg=solver_cfg,
            control_cfg=control_cfg)

    @classmethod
    def load(cls, path):
        from .io import load_json
        return cls.from_dict(load_json(path))

    def to_dict(self):
        """Fully resolved config; ``Scenario.from_dict`` of it gives the same scenario."""
        def listify(v):
            return np.asarray(v, float).tolist() if isinstance(v, (np.ndarray, tuple)) else v

        noise = None if self.noise is None else {"sigma_v": self.noise.sigma_v.tolist()}
        control = {k: listify(v) if k not in ("u_box", "y_box") or v is None
                   else [listify(b) for b in v] for k, v in self.control_cfg.items()}
        return {
            "plant": self.plant.to_dict(), "noise": noise, "record": dict(self.record_cfg),
            "smm": dict(self.smm_cfg), "control": control, "method": list(self.method),
            "sim_length": self.sim_length, "reference": self.reference_profile.to_dict(),
            "mc_runs": self.mc_runs, "x0": None if self.x0 is None else self.x0.tolist(),
            "workers": self.workers, "solver": dict(self.solver_cfg)}

    @property
    def T_p(self):
        return self.smm_cfg["T_p"]

    @property
    def T_f(self):
        return self.smm_cfg["T_f"]

    def reference(self):
        return self.reference_profile.samples(self.sim_length, self.plant.n_y, self.T_p)


class Indices(NamedTuple):
    J_y: float
    J_u: float
    mean_solve_ms: float


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """One closed-loop run of one method.

    Arrays have ``sim_length`` rows. ``y_hat[k]`` is the one-step prediction
    of ``y(k)`` made at step ``k-1``; it and ``solve_ms`` are NaN for steps
    whose input was not computed by a solve.
    """

    method: str
    run_id: int
    u: np.ndarray
    y_true: np.ndarray
    y_meas: np.ndarray
    y_hat: np.ndarray
    reference: np.ndarray
    solve_ms: np.ndarray
    iterations: np.ndarray
    T_p: int

    @property
    def t(self):
        return np.arange(self.u.shape[0])

    @property
    def indices(self):
        return compute_indices(self)

    def same_trajectories(self, other):
        """Bitwise equality of every field except wall-clock solve times."""
        return (self.method == other.method and self.run_id == other.run_id
                and all(np.array_equal(getattr(self, k), getattr(other, k), equal_nan=True)
                        for k in ("u", "y_true", "y_meas", "y_hat", "reference",
                                  "iterations")))


def compute_indices(result):
    """``(J_y, J_u, mean_solve_ms)``.

    ``J_y`` sums ``||y_true(k) - r(k)||^2`` and ``J_u`` sums
    ``||u(k) - u(k-1)||^2`` (with ``u(-1) = 0``) over the whole run; the
    solve time is averaged over steps that used a solve.
    """
    J_y = float(np.sum((result.y_true - result.reference) ** 2))
    du = np.diff(result.u, axis=0, prepend=np.zeros((1, result.u.shape[1])))
    J_u = float(np.sum(du ** 2))
    ms = result.solve_ms[np.isfinite(result.solve_ms)]
    return Indices(J_y, J_u, float(ms.mean()) if ms.size else float("nan"))


def run_seeds(scenario, run_id):
    """Seeds ``(record input, record noise, loop noise)`` for one run."""
    ss = np.random.SeedSequence(scenario.record_cfg["seed"] + run_id)
    return tuple(int(s) for s in ss.generate_state(3))


class _RunModels:
    """Data record and the per-method artifacts built from it, created on demand."""

    def __init__(self, scenario, run_id):
        self.scenario = scenario
        s_in, s_noise, _ = run_seeds(scenario, run_id)
        noise = None if scenario.noise is None else scenario.noise.with_seed(s_noise)
        rc = scenario.record_cfg
        self.record = collect_record(scenario.plant, rc["K"], rc["pe_order"], noise, s_in)
        self._smm = None

    @property
    def smm(self):
        if self._smm is None:
            c = self.scenario.smm_cfg
            self._smm = build_smm(self.record, c["T_p"], c["T_f"], c["M"], c["order_mode"])
        return self._smm

    def controller(self, method):
        sc = self.scenario
        kw = dict(tol=sc.solver_cfg["tol"], max_iter=sc.solver_cfg["max_iter"])
        if method == "smmpc":
            sigma = (np.eye(sc.plant.n_y) if sc.noise is None else sc.noise.sigma_v)
            return Controller(method, sc.control, predictor=build_blue_predictor(self.smm, sigma),
                              **kw)
        if method == "spc_mpc":
            return Controller(method, sc.control,
                              predictor=build_spc_predictor(self.smm.hankels), **kw)
        if method == "deepc":
            return Controller(method, sc.control, hankels=self.smm.hankels, **kw)
        return Controller(method, sc.control, plant=sc.plant, **kw)


def _annotate(exc, run_id, step=None):
    where = f"run {run_id}" + ("" if step is None else f", step {step}")
    exc.args = (f"{where}: {exc.args[0] if exc.args else ''}",) + exc.args[1:]
    return exc


def _loop(scenario, method, run_id, models):
    sc = scenario
    ss, L, T_p, T_f = sc.plant, sc.sim_length, sc.T_p, sc.T_f
    n_u, n_y = ss.n_u, ss.n_y
    try:
        ctrl = models.controller(method)
    except SmmpcError as exc:
        raise _annotate(exc, run_id)
    r = sc.reference()
    r_ext = np.vstack([r, np.repeat(r[-1:], T_f, axis=0)])
    _, _, s_loop = run_seeds(sc, run_id)
    v = (np.zeros((L, n_y)) if sc.noise is None
         else sc.noise.with_seed(s_loop).sample(L))

    u = np.zeros((L, n_u))
    y_true = np.zeros((L, n_y))
    y_hat = np.full((L, n_y), np.nan)
    solve_ms = np.full(L, np.nan)
    iters = np.zeros(L, dtype=np.int64)
    x = np.zeros(ss.n_x) if sc.x0 is None else sc.x0.copy()
    u_next = np.zeros(n_u)
    for k in range(L):
        u[k] = u_next
        y_true[k] = ss.C @ x + ss.D @ u[k]
        x = ss.A @ x + ss.B @ u[k]
        if k < T_p - 1 or k == L - 1:
            continue
        y_meas_win = y_true[k - T_p + 1:k + 1] + v[k - T_p + 1:k + 1]
        ctrl.spec = sc.control.with_reference(r_ext[k + 1:k + 1 + T_f].ravel())
        try:
            u_next, diag = ctrl.step(u[k - T_p + 1:k + 1].ravel(), y_meas_win.ravel(),
                                     x_next=x)
        except SmmpcError as exc:
            raise _annotate(exc, run_id, k)
        y_hat[k + 1] = diag["y_f"][:n_y]
        solve_ms[k + 1] = diag["solve_ms"]
        iters[k + 1] = diag["iterations"]
    return SimulationResult(method, run_id, u, y_true, y_true + v, y_hat, r, solve_ms,
                            iters, T_p)


def run_closed_loop(scenario, method=None, run_id=0):
    """Simulate one method for run ``run_id`` (fresh record, fresh loop noise).

    ``method`` defaults to the scenario's first method.
    """
    method = scenario.method[0] if method is None else method
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    try:
        models = _RunModels(scenario, run_id)
    except SmmpcError as exc:
        raise _annotate(exc, run_id)
    return _loop(scenario, method, run_id, models)


def _run_all_methods(scenario, run_id):
    """All methods on one shared record; failures come back as messages."""
    out = []
    try:
        models = _RunModels(scenario, run_id)
    except SmmpcError as exc:
        msg = str(_annotate(exc, run_id))
        return [(m, None, f"{type(exc).__name__}: {msg}") for m in scenario.method]
    for m in scenario.method:
        try:
            out.append((m, _loop(scenario, m, run_id, models), None))
        except SmmpcError as exc:
            out.append((m, None, f"{type(exc).__name__}: {exc}"))
    return out


@dataclass(frozen=True, eq=False)
class Aggregate:
    """Per-method summary. Std entries are 0 with ``std_defined`` False for one run."""

    method: str
    n_ok: int
    n_failed: int
    mean: Indices
    std: Indices
    std_defined: bool
    y_mean: np.ndarray
    y_std: np.ndarray
    u_mean: np.ndarray
    u_std: np.ndarray


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    results: list
    failures: list
    aggregate: dict

    def by_method(self, method):
        return [r for r in self.results if r.method == method]


def aggregate(results, method):
    rs = [r for r in results if r.method == method]
    if not rs:
        raise CampaignError(f"no successful runs for {method}")
    idx = np.array([tuple(r.indices) for r in rs])
    Y = np.stack([r.y_true for r in rs])
    U = np.stack([r.u for r in rs])
    ddof_ok = len(rs) > 1

    def std(a):
        return np.std(a, axis=0, ddof=1) if ddof_ok else np.zeros(a.shape[1:])

    return Aggregate(method, len(rs), 0, Indices(*map(float, idx.mean(axis=0))),
                     Indices(*map(float, std(idx))),
                     ddof_ok, Y.mean(axis=0), std(Y), U.mean(axis=0), std(U))


def run_monte_carlo(scenario, workers=None):
    """Run ``mc_runs`` independent closed loops of every scenario method.

    Run ``i`` uses seed ``record.seed + i``; each run rebuilds its data
    record and models, and all methods of a run share that record and the
    loop noise. With ``workers > 1`` runs execute in separate processes;
    results are always ordered by run id, then method.

    Raises:
        CampaignError: fewer than 80% of the runs of some method succeeded.
    """
    workers = scenario.workers if workers is None else workers
    ids = range(scenario.mc_runs)
    if workers > 1 and scenario.mc_runs > 1:
        with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1)) as ex:
            per_run = list(ex.map(_run_all_methods, [scenario] * len(ids), ids))
    else:
        per_run = [_run_all_methods(scenario, i) for i in ids]
    results, failures = [], []
    for i, rows in zip(ids, per_run):
        for m, res, err in rows:
            if res is None:
                failures.append((i, m, err))
            else:
                results.append(res)
    agg = {}
    for m in scenario.method:
        n_fail = sum(1 for f in failures if f[1] == m)
        if scenario.mc_runs - n_fail < MIN_SUCCESS * scenario.mc_runs:
            detail = "; ".join(f[2] for f in failures if f[1] == m)[:2000]
            raise CampaignError(f"{m}: {n_fail} of {scenario.mc_runs} runs failed ({detail})")
        a = aggregate(results, m)
        agg[m] = Aggregate(**{**a.__dict__, "n_failed": n_fail})
    return MonteCarloResult(results, failures, agg)


TRAJ_FMT = "trajectories_run{}.csv"
INDEX_HEADER = ["run", "method", "J_y", "J_u"]
TIMING_HEADER = ["run", "method", "mean_solve_ms"]


def _channels(prefix, n):
    return [f"{prefix}_{j + 1}" for j in range(n)]


def _write(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export(results, out_dir, scenario=None):
    """Write the campaign files to ``out_dir`` and return their paths.

    Files (all numbers with 17 significant digits):

    * ``trajectories_run<i>.csv``: ``t, method, r_j, u_j, y_true_j, y_meas_j,
      y_hat_j, solve_ms, iterations``, one row per step and method;
    * ``aggregate_bands.csv``: ``method, t`` then ``mean``, ``lo = mean - std``
      and ``hi = mean + std`` for every output and input channel;
    * ``indices.csv``: ``run, method, J_y, J_u`` (deterministic);
    * ``timing.csv``: ``run, method, mean_solve_ms`` (wall clock);
    * ``scenario.resolved``: the resolved scenario as JSON.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    results = list(results)
    written = []
    n_u = results[0].u.shape[1] if results else 0
    n_y = results[0].y_true.shape[1] if results else 0
    traj_header = (["t", "method"] + _channels("r", n_y) + _channels("u", n_u)
                   + _channels("y_true", n_y) + _channels("y_meas", n_y)
                   + _channels("y_hat", n_y) + ["solve_ms", "iterations"])
    for run_id in sorted({r.run_id for r in results}):
        rows = []
        for r in (r for r in results if r.run_id == run_id):
            for k in range(r.u.shape[0]):
                vals = np.concatenate([r.reference[k], r.u[k], r.y_true[k], r.y_meas[k],
                                       r.y_hat[k], [r.solve_ms[k]]])
                rows.append([k, r.method] + [fmt(v) for v in vals] + [int(r.iterations[k])])
        path = out / TRAJ_FMT.format(run_id)
        _write(path, traj_header, rows)
        written.append(path)

    band_header = ["method", "t"]
    for name, n in (("y", n_y), ("u", n_u)):
        for j in range(n):
            band_header += [f"{name}_{j + 1}_{s}" for s in ("mean", "lo", "hi")]
    rows = []
    for m in dict.fromkeys(r.method for r in results):
        a = aggregate(results, m)
        for k in range(a.y_mean.shape[0]):
            row = [m, k]
            for mean, std in ((a.y_mean[k], a.y_std[k]), (a.u_mean[k], a.u_std[k])):
                for j in range(mean.size):
                    row += [fmt(mean[j]), fmt(mean[j] - std[j]), fmt(mean[j] + std[j])]
            rows.append(row)
    _write(out / "aggregate_bands.csv", band_header, rows)

    idx = [(r.run_id, r.method, r.indices) for r in results]
    _write(out / "indices.csv", INDEX_HEADER,
           [[i, m, fmt(ix.J_y), fmt(ix.J_u)] for i, m, ix in idx])
    _write(out / "timing.csv", TIMING_HEADER,
           [[i, m, fmt(ix.mean_solve_ms)] for i, m, ix in idx])
    resolved = {} if scenario is None else scenario.to_dict()
    (out / "scenario.resolved").write_text(json.dumps(resolved, indent=1) + "\n")
    return written + [out / n for n in ("aggregate_bands.csv", "indices.csv", "timing.csv",
                                         "scenario.resolved")]


def load_indices(out_dir):
    """Rows of ``indices.csv`` joined with ``timing.csv`` when present."""
    out = Path(out_dir)
    with open(out / "indices.csv", newline="") as fh:
        rows = [{"run": int(r["run"]), "method": r["method"], "J_y": float(r["J_y"]),
                 "J_u": float(r["J_u"])} for r in csv.DictReader(fh)]
    timing = {}
    if (out / "timing.csv").exists():
        with open(out / "timing.csv", newline="") as fh:
            timing = {(int(r["run"]), r["method"]): float(r["mean_solve_ms"])
                      for r in csv.DictReader(fh)}
    for r in rows:
        r["solve_ms"] = timing.get((r["run"], r["method"]), float("nan"))
    return rows


def load_trajectories(path):
    """``{method: {column: array}}`` from one ``trajectories_run<i>.csv``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for r in rows:
        d = out.setdefault(r["method"], {})
        for k, v in r.items():
            if k != "method":
                d.setdefault(k, []).append(float(v))
    return {m: {k: np.array(v) for k, v in d.items()} for m, d in out.items()}


def summarize(rows):
    """Per-method ``(n, mean/std J_y, mean/std J_u, mean solve_ms)`` from index rows."""
    table = []
    for m in dict.fromkeys(r["method"] for r in rows):
        sel = [r for r in rows if r["method"] == m]
        a = np.array([[r["J_y"], r["J_u"], r["solve_ms"]] for r in sel])
        std = a.std(axis=0, ddof=1) if len(sel) > 1 else np.zeros(3)
        table.append({"method": m, "n": len(sel), "J_y": a[:, 0].mean(), "J_y_std": std[0],
                      "J_u": a[:, 1].mean(), "J_u_std": std[1],
                      "solve_ms": np.nanmean(a[:, 2]) if np.isfinite(a[:, 2]).any()
                      else float("nan")})
    return table
