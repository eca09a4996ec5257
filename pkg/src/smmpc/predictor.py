"""Multi-step output predictors built from a signal matrix model.

The BLUE predictor estimates the output coordinate ``x_y`` from the noisy
past by generalized least squares and propagates it to the future through
``Psi``. The SPC predictor is the plain least-squares fit of the Hankel data
equation and serves as the baseline.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateOrderError, DimensionError, UnsupportedOperation
from .linalg import DEFAULT_RTOL


@dataclass(frozen=True, eq=False)
class PredictorMatrices:
    """Affine predictor ``y_f_hat = E_up u_p + E_yp y_p_meas + E_uf u_f``.

    ``Psi``, ``E_xy``, ``Sigma_V`` and ``cov_yf`` are only set for
    ``kind == "blue"``.
    """

    E_up: np.ndarray
    E_yp: np.ndarray
    E_uf: np.ndarray
    n_u: int
    n_y: int
    T_p: int
    T_f: int
    kind: str = "blue"
    Psi: Optional[np.ndarray] = None
    E_xy: Optional[np.ndarray] = None
    Sigma_V: Optional[np.ndarray] = None
    cov_yf: Optional[np.ndarray] = None

    _ARRAYS = ("E_up", "E_yp", "E_uf", "Psi", "E_xy", "Sigma_V", "cov_yf")

    def to_dict(self):
        d = {"kind": self.kind, "n_u": self.n_u, "n_y": self.n_y,
             "T_p": self.T_p, "T_f": self.T_f, "shapes": {}}
        for k in self._ARRAYS:
            a = getattr(self, k)
            d[k] = None if a is None else a.tolist()
            d["shapes"][k] = None if a is None else list(a.shape)
        return d

    @classmethod
    def from_dict(cls, d):
        arrays = {}
        for k in cls._ARRAYS:
            shape = d["shapes"][k]
            arrays[k] = None if shape is None else np.array(d[k], dtype=float).reshape(shape)
        return cls(n_u=d["n_u"], n_y=d["n_y"], T_p=d["T_p"], T_f=d["T_f"],
                   kind=d["kind"], **arrays)


def _right_solve_lower(B, L):
    """``B @ inv(L)`` for lower-triangular ``L``."""
    return solve_triangular(L, B.T, trans="T", lower=True).T


def output_noise_covariance(sigma_v, T_p):
    """``I_{T_p} kron sigma_v``, the covariance of the stacked past noise."""
    return np.kron(np.eye(T_p), np.atleast_2d(np.asarray(sigma_v, dtype=float)))


def _free_terms(smm):
    E_uf = _right_solve_lower(smm.L_yuf, smm.L_uf)
    E_yup = _right_solve_lower(smm.L_yup, smm.L_up)
    Psi = smm.S_yy - E_uf @ smm.S_uy
    E_up0 = _right_solve_lower(smm.S_yu - E_uf @ smm.S_uu, smm.L_up)
    return E_uf, E_yup, Psi, E_up0


def build_unbiased_predictor(smm, F, sigma_v=None):
    """Predictor that estimates ``x_y`` as ``F @ (y_p_meas - E_yup u_p)``.

    Any ``F`` with ``F @ L_yp = I`` gives an unbiased predictor; the BLUE
    uses the generalized least-squares choice of ``F``. When ``sigma_v`` is
    given, ``cov_yf`` holds the resulting prediction covariance.
    """
    E_uf, E_yup, Psi, E_up0 = _free_terms(smm)
    F = np.asarray(F, dtype=float)
    if F.shape != (smm.n_x, smm.n_y * smm.T_p):
        raise DimensionError(f"F has shape {F.shape}, expected "
                             f"{(smm.n_x, smm.n_y * smm.T_p)}")
    E_yp = Psi @ F
    Sigma_V = cov = None
    if sigma_v is not None:
        Sigma_V = output_noise_covariance(sigma_v, smm.T_p)
        cov = E_yp @ Sigma_V @ E_yp.T
        cov = 0.5 * (cov + cov.T)
    return PredictorMatrices(
        E_up=E_up0 - E_yp @ E_yup, E_yp=E_yp, E_uf=E_uf, n_u=smm.n_u, n_y=smm.n_y,
        T_p=smm.T_p, T_f=smm.T_f, kind="blue", Psi=Psi, E_xy=F, Sigma_V=Sigma_V,
        cov_yf=cov)


def build_blue_predictor(smm, sigma_v, rtol=1e-12):
    """Minimum-variance unbiased predictor for output noise covariance ``sigma_v``.

    Raises:
        DegenerateOrderError: ``L_yp' Sigma_V^-1 L_yp`` is numerically singular.
    """
    sigma_v = np.atleast_2d(np.asarray(sigma_v, dtype=float))
    if sigma_v.shape != (smm.n_y, smm.n_y):
        raise DimensionError(f"sigma_v has shape {sigma_v.shape}, expected "
                             f"{(smm.n_y, smm.n_y)}")
    Sigma_V = output_noise_covariance(sigma_v, smm.T_p)
    C = np.linalg.cholesky(Sigma_V)
    # whitened regressor W = C^-1 L_yp = Q_w R_w, so L_yp' Sigma_V^-1 L_yp = R_w' R_w
    W = solve_triangular(C, smm.L_yp, lower=True)
    Q_w, R_w = np.linalg.qr(W)
    d = np.abs(np.diag(R_w))
    if smm.n_x and d.min() <= rtol * d.max():
        raise DegenerateOrderError(
            f"L_yp' Sigma_V^-1 L_yp is singular; effective order {smm.n_x} is too "
            "large for the data")
    # E_xy = R_w^-1 Q_w' C^-1
    E_xy = solve_triangular(R_w, solve_triangular(C, Q_w, trans="T", lower=True).T, lower=False)
    E_uf, E_yup, Psi, E_up0 = _free_terms(smm)
    E_yp = Psi @ E_xy
    G = solve_triangular(R_w, Psi.T, trans="T", lower=False).T  # Psi R_w^-1
    cov = G @ G.T
    return PredictorMatrices(
        E_up=E_up0 - E_yp @ E_yup, E_yp=E_yp, E_uf=E_uf, n_u=smm.n_u, n_y=smm.n_y,
        T_p=smm.T_p, T_f=smm.T_f, kind="blue", Psi=Psi, E_xy=E_xy, Sigma_V=Sigma_V,
        cov_yf=0.5 * (cov + cov.T))


def build_spc_predictor(hankels, rtol=DEFAULT_RTOL):
    """Least-squares (SPC) predictor fitted to the Hankel data equation.

    Singular values of the regressor ``[H_up; H_yp; H_uf]`` below
    ``rtol * sigma_max`` are discarded (minimum-norm solution).
    """
    hs = hankels
    X = np.vstack([hs.H_up, hs.H_yp, hs.H_uf])
    E = hs.H_yf @ np.linalg.pinv(X, rcond=rtol)
    pu, py = hs.n_u * hs.T_p, hs.n_y * hs.T_p
    return PredictorMatrices(E_up=E[:, :pu], E_yp=E[:, pu:pu + py], E_uf=E[:, pu + py:],
                             n_u=hs.n_u, n_y=hs.n_y, T_p=hs.T_p, T_f=hs.T_f, kind="spc")


def _vector(x, n, name):
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.shape != (n,):
        raise DimensionError(f"{name} has {v.size} entries, expected {n}")
    return v


def predict(pm, u_p, y_p_meas, u_f):
    """Predicted future outputs, stacked time-major (length ``n_y T_f``).

    Signals may be given as stacked vectors or as (steps, channels) arrays.
    """
    u_p = _vector(u_p, pm.n_u * pm.T_p, "u_p")
    y_p = _vector(y_p_meas, pm.n_y * pm.T_p, "y_p_meas")
    u_f = _vector(u_f, pm.n_u * pm.T_f, "u_f")
    return pm.E_up @ u_p + pm.E_yp @ y_p + pm.E_uf @ u_f


def predictor_covariance(pm):
    """Covariance of the BLUE prediction, ``Psi (L_yp' Sigma_V^-1 L_yp)^-1 Psi'``."""
    if pm.kind != "blue" or pm.cov_yf is None:
        raise UnsupportedOperation(f"no covariance available for a {pm.kind} predictor")
    return pm.cov_yf
