"""Hankel partitions and the Signal Matrix Model factorization.

The model is built from one recorded trajectory. The past data matrix
``[H_up; H_yp]`` is LQ-factorized; its row space fixes the coordinates
``(x_u, x_y)`` of the initial condition, and its null space ``Q_np`` carries
every future trajectory compatible with zero past data. A second LQ
factorization of ``[H_uf; H_yf] @ Q_np`` yields the future input/output
blocks, giving the block lower-triangular map

    [u_p; y_p; u_f; y_f] = [[L_up,  0,    0    ],
                            [L_yup, L_yp, 0    ],
                            [S_uu,  S_uy, L_uf ],
                            [S_yu,  S_yy, L_yuf]] @ [x_u; x_y; z].
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (ConfigError, DegenerateOrderError, DimensionError, ExcitationError,
                     NumericalError)
from .linalg import DEFAULT_RTOL, as_signal, build_hankel, lq_factorize, numerical_rank
from .plant import DataRecord, check_persistency

__all__ = [
    "HankelSet", "SignalMatrixModel", "OrderMode", "build_hankel", "lq_factorize",
    "build_hankel_set", "build_smm", "trajectory_membership", "min_columns",
]

LYF_TOL = 1e-8


def min_columns(n_u, n_y, T_p, T_f):
    """Smallest admissible Hankel column count, ``2 T (n_u + n_y)``."""
    return 2 * (T_p + T_f) * (n_u + n_y)


@dataclass(frozen=True, eq=False)
class HankelSet:
    H_up: np.ndarray
    H_yp: np.ndarray
    H_uf: np.ndarray
    H_yf: np.ndarray
    n_u: int
    n_y: int
    T_p: int
    T_f: int

    @property
    def M(self):
        return self.H_up.shape[1]

    @property
    def T(self):
        return self.T_p + self.T_f

    @property
    def H_u(self):
        return np.vstack([self.H_up, self.H_uf])

    @property
    def H_y(self):
        return np.vstack([self.H_yp, self.H_yf])

    def stacked(self):
        """``[H_u; H_y]`` in the original (input block, output block) order."""
        return np.vstack([self.H_up, self.H_uf, self.H_yp, self.H_yf])

    def partitioned(self):
        """``[H_up; H_yp; H_uf; H_yf]``, the past/future ordering."""
        return np.vstack([self.H_up, self.H_yp, self.H_uf, self.H_yf])


def build_hankel_set(record, T_p, T_f, M=None):
    """Depth-``T_p + T_f`` Hankel matrices of a record, split past/future."""
    if T_p < 1 or T_f < 1:
        raise ConfigError("T_p and T_f must be positive")
    T = T_p + T_f
    n_u, n_y = record.n_u, record.n_y
    if M is None:
        M = min_columns(n_u, n_y, T_p, T_f)
    if record.K < M + T - 1:
        raise DimensionError(
            f"record length K={record.K} too short for M={M}, T={T}: "
            f"need K >= {M + T - 1}")
    Hu = build_hankel(record.u_d, T, M)
    Hy = build_hankel(record.y_d, T, M)
    pu, py = n_u * T_p, n_y * T_p
    return HankelSet(Hu[:pu], Hy[:py], Hu[pu:], Hy[py:], n_u, n_y, T_p, T_f)


@dataclass(frozen=True)
class OrderMode:
    """How the effective order (column count of ``L_yp``) is chosen.

    ``kind`` is ``"given"`` (use ``value`` as the order), ``"numrank"``
    (numerical rank of the past data minus ``n_u T_p``, with ``value`` as the
    relative tolerance) or ``"maximal"`` (order ``n_y T_p``).
    """

    kind: str = "maximal"
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("given", "numrank", "maximal"):
            raise ConfigError(f"unknown order mode {self.kind!r}")
        if self.kind == "given" and (self.value is None or int(self.value) != self.value
                                     or self.value < 0):
            raise ConfigError("order mode 'given' needs a nonnegative integer order")
        if self.kind == "numrank" and self.value is None:
            object.__setattr__(self, "value", DEFAULT_RTOL)

    @classmethod
    def parse(cls, text):
        """Parse ``given:<n>``, ``numrank:<rtol>``, ``numrank`` or ``maximal``."""
        if isinstance(text, OrderMode):
            return text
        kind, _, arg = str(text).partition(":")
        kind = {"numerical_rank": "numrank"}.get(kind, kind)
        try:
            if kind == "given":
                return cls("given", int(arg))
            if kind == "numrank":
                return cls("numrank", float(arg) if arg else DEFAULT_RTOL)
        except ValueError:
            raise ConfigError(f"bad order mode {text!r}") from None
        if kind == "maximal" and not arg:
            return cls("maximal")
        raise ConfigError(f"bad order mode {text!r}")

    def __str__(self):
        if self.kind == "maximal":
            return "maximal"
        if self.kind == "given":
            return f"given:{int(self.value)}"
        return f"numrank:{self.value!r}"


@dataclass(frozen=True, eq=False)
class SignalMatrixModel:
    """Factors of the parsimonious signal matrix model.

    ``Q_up``, ``Q_yp``, ``Q_np`` and ``hankels`` are ``None`` for models
    restored from a snapshot; the predictor only needs the ``L`` and ``S``
    blocks.
    """

    L_up: np.ndarray
    L_yup: np.ndarray
    L_yp: np.ndarray
    L_uf: np.ndarray
    L_yuf: np.ndarray
    L_yf: np.ndarray
    S_uu: np.ndarray
    S_uy: np.ndarray
    S_yu: np.ndarray
    S_yy: np.ndarray
    n_u: int
    n_y: int
    T_p: int
    T_f: int
    M: int
    order_mode: OrderMode
    noise_free: bool
    Q_up: Optional[np.ndarray] = None
    Q_yp: Optional[np.ndarray] = None
    Q_np: Optional[np.ndarray] = None
    hankels: Optional[HankelSet] = None

    @property
    def n_x(self):
        """Effective order (column count of ``L_yp``)."""
        return self.L_yp.shape[1]

    @property
    def lyf_ratio(self):
        """``||L_yf||_F / ||H_yf||_F``, zero for a perfectly noise-free record."""
        if self.hankels is None:
            raise NumericalError("Hankel data not available on a restored model")
        denom = np.linalg.norm(self.hankels.H_yf)
        return float(np.linalg.norm(self.L_yf) / denom) if denom else 0.0

    def stacked_factor(self):
        """The block lower-triangular matrix mapping ``(x_u, x_y, z)`` to data."""
        pu, py, fu, fy, nx = (self.n_u * self.T_p, self.n_y * self.T_p,
                              self.n_u * self.T_f, self.n_y * self.T_f, self.n_x)
        F = np.zeros((pu + py + fu + fy, pu + nx + fu))
        F[:pu, :pu] = self.L_up
        F[pu:pu + py, :pu] = self.L_yup
        F[pu:pu + py, pu:pu + nx] = self.L_yp
        r = pu + py
        F[r:r + fu, :pu] = self.S_uu
        F[r:r + fu, pu:pu + nx] = self.S_uy
        F[r:r + fu, pu + nx:] = self.L_uf
        r += fu
        F[r:, :pu] = self.S_yu
        F[r:, pu:pu + nx] = self.S_yy
        F[r:, pu + nx:] = self.L_yuf
        return F

    _ARRAYS = ("L_up", "L_yup", "L_yp", "L_uf", "L_yuf", "L_yf",
               "S_uu", "S_uy", "S_yu", "S_yy")

    def to_dict(self):
        d = {k: getattr(self, k).tolist() for k in self._ARRAYS}
        d["shapes"] = {k: list(getattr(self, k).shape) for k in self._ARRAYS}
        d.update(n_u=self.n_u, n_y=self.n_y, T_p=self.T_p, T_f=self.T_f, M=self.M,
                 n_x=self.n_x, order_mode=str(self.order_mode),
                 noise_free=self.noise_free)
        return d

    @classmethod
    def from_dict(cls, d):
        arrays = {k: np.array(d[k], dtype=float).reshape(d["shapes"][k])
                  for k in cls._ARRAYS}
        return cls(**arrays, n_u=d["n_u"], n_y=d["n_y"], T_p=d["T_p"], T_f=d["T_f"],
                   M=d["M"], order_mode=OrderMode.parse(d["order_mode"]),
                   noise_free=bool(d["noise_free"]))


def _effective_order(H_yup, p_u, p_y, mode):
    if mode.kind == "given":
        return int(mode.value)
    if mode.kind == "numrank":
        return numerical_rank(H_yup, mode.value) - p_u
    return p_y


def build_smm(record: DataRecord, T_p: int, T_f: int, M: Optional[int] = None,
              order_mode: Union[OrderMode, str, None] = None,
              rtol: float = DEFAULT_RTOL) -> SignalMatrixModel:
    """Factorize a data record into a :class:`SignalMatrixModel`.

    Args:
        record: the experiment trajectory.
        T_p, T_f: past and future horizon lengths.
        M: Hankel column count; defaults to ``2 (T_p + T_f)(n_u + n_y)``.
        order_mode: effective-order rule; defaults to ``numrank`` for
            noise-free records and ``maximal`` otherwise.
        rtol: relative rank tolerance for the input-excitation checks.

    Raises:
        ConfigError: ``M`` below the minimum column count.
        DimensionError: record too short.
        ExcitationError: input not persistently exciting.
        DegenerateOrderError: effective order out of range.
        NumericalError: a structural property of the factorization fails.
    """
    n_u, n_y = record.n_u, record.n_y
    T = T_p + T_f
    M_min = min_columns(n_u, n_y, T_p, T_f)
    M = M_min if M is None else int(M)
    if M < M_min:
        raise ConfigError(f"M={M} below the minimum 2T(n_u+n_y)={M_min}")
    if order_mode is None:
        order_mode = OrderMode("numrank") if record.noise_free else OrderMode("maximal")
    mode = OrderMode.parse(order_mode)
    hs = build_hankel_set(record, T_p, T_f, M)
    p_u, p_y, f_u = n_u * T_p, n_y * T_p, n_u * T_f

    H_yup = np.vstack([hs.H_up, hs.H_yp])
    L_p, Q_p = lq_factorize(H_yup)
    L_up = L_p[:p_u, :p_u]
    d = np.abs(np.diag(L_up))
    if d.min() <= rtol * max(d.max(), np.finfo(float).tiny):
        raise ExcitationError("past input Hankel H_up is rank deficient; "
                              "the input is not persistently exciting")

    n_x = _effective_order(H_yup, p_u, p_y, mode)
    if n_x < 0 or n_x > p_y:
        raise DegenerateOrderError(
            f"effective order {n_x} outside [0, n_y*T_p={p_y}]")
    ok, rank = check_persistency(record.u_d, n_u * T + n_x, rtol) \
        if record.K >= n_u * T + n_x else (False, 0)
    if not ok:
        raise ExcitationError(
            f"input not persistently exciting of order n_u*T + n_x = {n_u * T + n_x} "
            f"(Hankel rank {rank})")

    L_yup = L_p[p_u:, :p_u]
    L_yy = L_p[p_u:, p_u:p_u + p_y]
    Q_up = Q_p[:, :p_u]
    Q_y = Q_p[:, p_u:p_u + p_y]
    if n_x == p_y:
        L_yp, Q_yp, Q_y_null = L_yy, Q_y, Q_y[:, :0]
    else:
        # Truncate the output block to its dominant n_x directions, then
        # restore a lower-trapezoidal shape with an n_x x n_x rotation.
        U, s, Vt = np.linalg.svd(L_yy)
        L_yp, W = lq_factorize(U[:, :n_x] * s[:n_x])
        Q_yp = Q_y @ Vt[:n_x].T @ W
        Q_y_null = Q_y @ Vt[n_x:].T
    Q_np = np.hstack([Q_y_null, Q_p[:, p_u + p_y:]])
    if Q_np.shape[1] < (n_u + n_y) * T_f:
        raise DegenerateOrderError(
            f"null space of the past data has {Q_np.shape[1]} columns, "
            f"fewer than (n_u+n_y)T_f = {(n_u + n_y) * T_f}; increase M")

    H_yuf = np.vstack([hs.H_uf, hs.H_yf])
    L_f, _ = lq_factorize(H_yuf @ Q_np, complete=False)
    L_uf = L_f[:f_u, :f_u]
    L_yuf = L_f[f_u:, :f_u]
    L_yf = L_f[f_u:, f_u:]
    if numerical_rank(L_uf, rtol) != f_u:
        raise NumericalError("future input factor L_uf is rank deficient; "
                             "the data record is not informative enough")

    S = H_yuf @ np.hstack([Q_up, Q_yp])
    model = SignalMatrixModel(
        L_up=L_up, L_yup=L_yup, L_yp=L_yp, L_uf=L_uf, L_yuf=L_yuf, L_yf=L_yf,
        S_uu=S[:f_u, :p_u], S_uy=S[:f_u, p_u:], S_yu=S[f_u:, :p_u], S_yy=S[f_u:, p_u:],
        n_u=n_u, n_y=n_y, T_p=T_p, T_f=T_f, M=M, order_mode=mode,
        noise_free=record.noise_free, Q_up=Q_up, Q_yp=Q_yp, Q_np=Q_np, hankels=hs)

    if record.noise_free and model.lyf_ratio > LYF_TOL:
        raise NumericalError(
            f"||L_yf||/||H_yf|| = {model.lyf_ratio:.3g} exceeds {LYF_TOL:g} on a "
            f"noise-free record; the effective order {n_x} is too small")
    F = model.stacked_factor()
    if numerical_rank(F, rtol) != F.shape[1]:
        raise DegenerateOrderError(
            "stacked model factor is not full column rank; effective order "
            f"{n_x} exceeds what the data supports")
    return model


def trajectory_membership(source, u, y, tol=1e-8, rtol=DEFAULT_RTOL, layout="stacked"):
    """Whether ``(u, y)`` is a length-``T`` trajectory of the recorded system.

    The stacked vector is projected onto the numerical range of the Hankel
    data and accepted when the relative residual is at most ``tol``.

    Args:
        source: a :class:`SignalMatrixModel` or :class:`HankelSet`.
        u: (T, n_u) input sequence.
        y: (T, n_y) output sequence.
        tol: relative residual threshold.
        rtol: singular values below ``rtol * sigma_max`` are not part of the range.
        layout: ``"stacked"`` uses ``[H_u; H_y]``, ``"partitioned"`` uses
            ``[H_up; H_yp; H_uf; H_yf]`` with the vector reordered to match.
    """
    hs = source.hankels if isinstance(source, SignalMatrixModel) else source
    if hs is None:
        raise NumericalError("Hankel data not available on a restored model")
    u, y = as_signal(u), as_signal(y)
    if u.shape != (hs.T, hs.n_u) or y.shape != (hs.T, hs.n_y):
        raise DimensionError(
            f"expected u {(hs.T, hs.n_u)} and y {(hs.T, hs.n_y)}, "
            f"got {u.shape} and {y.shape}")
    if layout == "stacked":
        H = hs.stacked()
        w = np.concatenate([u.ravel(), y.ravel()])
    elif layout == "partitioned":
        H = hs.partitioned()
        w = np.concatenate([u[:hs.T_p].ravel(), y[:hs.T_p].ravel(),
                            u[hs.T_p:].ravel(), y[hs.T_p:].ravel()])
    else:
        raise ConfigError(f"unknown layout {layout!r}")
    norm = np.linalg.norm(w)
    if norm == 0.0:
        return True
    U, s, _ = np.linalg.svd(H, full_matrices=False)
    U = U[:, s > rtol * s[0]]
    resid = w - U @ (U.T @ w)
    return bool(np.linalg.norm(resid) <= tol * norm)
