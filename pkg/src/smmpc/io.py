"""File formats: record CSVs, model snapshots and JSON configuration."""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError
from .plant import DataRecord

FLOAT_FMT = "%.17g"


def fmt(x):
    return FLOAT_FMT % x


def write_record_csv(record, path):
    """Write ``t,u_1..u_nu,y_1..y_ny`` rows with 17 significant digits."""
    header = (["t"] + [f"u_{i + 1}" for i in range(record.n_u)]
              + [f"y_{i + 1}" for i in range(record.n_y)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(record.K):
            w.writerow([k] + [fmt(v) for v in record.u_d[k]] + [fmt(v) for v in record.y_d[k]])


def read_signal_csv(path):
    """Read a CSV with a ``t`` column and ``u_*``/``y_*`` columns.

    Returns ``(u, y)`` arrays (either may have zero columns).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = rows[0]
    u_cols = [i for i, h in enumerate(header) if h.startswith("u_")]
    y_cols = [i for i, h in enumerate(header) if h.startswith("y_")]
    if "t" not in header or len(u_cols) + len(y_cols) + 1 != len(header):
        raise ConfigError(f"{path}: expected header t,u_1..,y_1.., got {header}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    data = data.reshape(len(rows) - 1, len(header))
    return data[:, u_cols], data[:, y_cols]


def read_record_csv(path, noise_free=False):
    u, y = read_signal_csv(path)
    if u.shape[1] == 0 or y.shape[1] == 0:
        raise DimensionError(f"{path}: record needs at least one u and one y column")
    return DataRecord(u, y, noise_free=noise_free)


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def dump_json(obj, path):
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(obj, indent=1, allow_nan=True) + "\n")


def save_snapshot(path, smm=None, predictor=None):
    """Write model and/or predictor factors to a JSON snapshot."""
    snap = {"format": "smmpc-snapshot/1"}
    if smm is not None:
        snap["smm"] = smm.to_dict()
    if predictor is not None:
        snap["predictor"] = predictor.to_dict()
    dump_json(snap, path)


def load_snapshot(path):
    """Return ``(smm, predictor)`` from a snapshot; absent parts are ``None``."""
    from .predictor import PredictorMatrices
    from .signal_matrix import SignalMatrixModel

    snap = load_json(path)
    if snap.get("format") != "smmpc-snapshot/1":
        raise ConfigError(f"{path}: not a model snapshot")
    smm = SignalMatrixModel.from_dict(snap["smm"]) if "smm" in snap else None
    pm = PredictorMatrices.from_dict(snap["predictor"]) if "predictor" in snap else None
    return smm, pm
