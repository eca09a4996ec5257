"""Discrete-time LTI plants, measurement noise and experiment data records."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, ExcitationError
from .linalg import DEFAULT_RTOL, as_signal, build_hankel, numerical_rank

PE_MAX_RETRIES = 10
# Seed offset between successive PE retries.
_RETRY_STRIDE = 7919


def _matrix(x, name):
    a = np.array(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {a.shape}")
    a.setflags(write=False)
    return a


def controllability_matrix(A, B):
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A, C, depth=None):
    depth = A.shape[0] if depth is None else depth
    blocks = [C]
    for _ in range(depth - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


@dataclass(frozen=True)
class StateSpace:
    """x(k+1) = A x(k) + B u(k),  y(k) = C x(k) + D u(k)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: Optional[np.ndarray] = None
    minimal: bool = False

    def __post_init__(self):
        A = _matrix(self.A, "A")
        B = _matrix(self.B, "B")
        C = _matrix(self.C, "C")
        n_x = A.shape[0]
        if A.shape != (n_x, n_x) or n_x < 1:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n_x or B.shape[1] < 1:
            raise DimensionError(f"B has shape {B.shape}, expected ({n_x}, n_u)")
        if C.shape[1] != n_x or C.shape[0] < 1:
            raise DimensionError(f"C has shape {C.shape}, expected (n_y, {n_x})")
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else self.D
        D = _matrix(D, "D")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(
                f"D has shape {D.shape}, expected {(C.shape[0], B.shape[1])}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        if self.minimal and not self.is_minimal():
            raise ConfigError("state-space realization flagged minimal is not "
                              "controllable and observable")

    @property
    def n_x(self):
        return self.A.shape[0]

    @property
    def n_u(self):
        return self.B.shape[1]

    @property
    def n_y(self):
        return self.C.shape[0]

    def is_minimal(self, rtol=DEFAULT_RTOL):
        n = self.n_x
        return (numerical_rank(controllability_matrix(self.A, self.B), rtol) == n
                and numerical_rank(observability_matrix(self.A, self.C), rtol) == n)

    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def step(self, x, u):
        """One update; returns (y, x_next) for state ``x`` and input ``u``."""
        return self.C @ x + self.D @ u, self.A @ x + self.B @ u

    def to_dict(self):
        return {"A": self.A.tolist(), "B": self.B.tolist(),
                "C": self.C.tolist(), "D": self.D.tolist()}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"A", "B", "C", "D", "minimal"}
        if unknown:
            raise ConfigError(f"unknown plant keys: {sorted(unknown)}")
        try:
            return cls(d["A"], d["B"], d["C"], d.get("D"), bool(d.get("minimal", False)))
        except KeyError as exc:
            raise ConfigError(f"plant config missing key {exc}") from None


@dataclass(frozen=True)
class NoiseModel:
    """i.i.d. zero-mean Gaussian output noise with covariance ``sigma_v``."""

    sigma_v: np.ndarray
    seed: int = 0

    def __post_init__(self):
        S = _matrix(self.sigma_v, "sigma_v")
        if S.shape[0] != S.shape[1]:
            raise DimensionError(f"sigma_v must be square, got {S.shape}")
        if not np.allclose(S, S.T, rtol=0.0, atol=1e-12):
            raise ConfigError("sigma_v must be symmetric")
        if np.min(np.linalg.eigvalsh(S)) <= 0.0:
            raise ConfigError("sigma_v must be positive definite")
        object.__setattr__(self, "sigma_v", S)

    @classmethod
    def isotropic(cls, std, n_y, seed=0):
        return cls(std ** 2 * np.eye(n_y), seed)

    def with_seed(self, seed):
        return NoiseModel(self.sigma_v, seed)

    def sample(self, length, rng=None):
        rng = np.random.default_rng(self.seed) if rng is None else rng
        chol = np.linalg.cholesky(self.sigma_v)
        return rng.standard_normal((length, self.sigma_v.shape[0])) @ chol.T


@dataclass(frozen=True)
class DataRecord:
    """One recorded experiment: inputs ``u_d`` (K x n_u), outputs ``y_d`` (K x n_y)."""

    u_d: np.ndarray
    y_d: np.ndarray
    noise_free: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        u = as_signal(self.u_d).copy()
        y = as_signal(self.y_d).copy()
        if u.shape[0] != y.shape[0]:
            raise DimensionError(
                f"u_d has {u.shape[0]} rows but y_d has {y.shape[0]}")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "u_d", u)
        object.__setattr__(self, "y_d", y)

    @property
    def K(self):
        return self.u_d.shape[0]

    @property
    def n_u(self):
        return self.u_d.shape[1]

    @property
    def n_y(self):
        return self.y_d.shape[1]


def simulate(ss, u, x0=None, noise=None):
    """Simulate ``ss`` from ``x0`` under input ``u``.

    Returns ``(y_meas, y_true, x_final)``. With ``noise`` given, the
    measurement is ``y_true + v`` with ``v`` drawn from ``noise`` (seeded);
    otherwise ``y_meas`` equals ``y_true``.
    """
    u = as_signal(u)
    L = u.shape[0]
    if L < 1:
        raise DimensionError("input must have at least one sample")
    if u.shape[1] != ss.n_u:
        raise DimensionError(f"input has {u.shape[1]} channels, plant has {ss.n_u}")
    x = np.zeros(ss.n_x) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (ss.n_x,):
        raise DimensionError(f"x0 has shape {x.shape}, expected ({ss.n_x},)")
    X = np.empty((L, ss.n_x))
    for k in range(L):
        X[k] = x
        x = ss.A @ x + ss.B @ u[k]
    y_true = X @ ss.C.T + u @ ss.D.T
    if noise is None:
        return y_true.copy(), y_true, x
    if noise.sigma_v.shape[0] != ss.n_y:
        raise DimensionError("noise covariance does not match the plant outputs")
    return y_true + noise.sample(L), y_true, x


def check_persistency(u, order, rtol=DEFAULT_RTOL):
    """Test whether ``u`` is persistently exciting of ``order``.

    Returns ``(ok, rank)`` where ``rank`` is the numerical rank of the
    depth-``order`` block Hankel matrix of ``u``.
    """
    if order < 1:
        raise DimensionError("order must be >= 1")
    u = as_signal(u)
    L, n_u = u.shape
    if L < order:
        raise DimensionError(f"signal length {L} shorter than order {order}")
    rank = numerical_rank(build_hankel(u, order), rtol)
    return rank == n_u * order, rank


def generate_pe_input(n_u, length, pe_order, seed, rtol=DEFAULT_RTOL):
    """Gaussian white input that is persistently exciting of ``pe_order``.

    Raises:
        ExcitationError: if ``length`` is below ``(n_u + 1) * pe_order - 1``
            or no draw passes the rank check within the retry budget.
    """
    min_length = (n_u + 1) * pe_order - 1
    if length < min_length:
        raise ExcitationError(
            f"length {length} too short for persistency of excitation of order "
            f"{pe_order} with {n_u} inputs (need >= {min_length})")
    for attempt in range(PE_MAX_RETRIES + 1):
        rng = np.random.default_rng(seed + attempt * _RETRY_STRIDE)
        u = rng.standard_normal((length, n_u))
        if check_persistency(u, pe_order, rtol)[0]:
            return u
    raise ExcitationError(
        f"could not generate an input persistently exciting of order {pe_order} "
        f"in {PE_MAX_RETRIES} retries; signal length {length} is too short")


def collect_record(ss, K, pe_order, noise=None, seed=0):
    """Run an open-loop experiment of length ``K`` and return its record.

    The plant starts at rest and is driven for ``5 * n_x`` burn-in steps
    which are not recorded.
    """
    burn = 5 * ss.n_x
    u = generate_pe_input(ss.n_u, K, pe_order, seed)
    x = np.zeros(ss.n_x)
    if burn:
        u_burn = np.random.default_rng([seed, 1]).standard_normal((burn, ss.n_u))
        _, _, x = simulate(ss, u_burn, x)
    y_meas, _, _ = simulate(ss, u, x, noise)
    return DataRecord(u, y_meas, noise_free=noise is None,
                      meta={"seed": seed, "pe_order": pe_order})


def random_stable_plant(n_x, n_u=1, n_y=1, seed=0, rho_max=0.95, rho_min=0.3,
                        feedthrough=False, max_tries=100):
    """Random minimal stable plant with pole radii in ``[rho_min, rho_max]``.

    Poles are drawn as complex-conjugate pairs (plus one real pole when
    ``n_x`` is odd) and mixed by a random orthogonal similarity transform.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        blocks = []
        for _ in range(n_x // 2):
            r = rng.uniform(rho_min, rho_max)
            th = rng.uniform(0.1, np.pi - 0.1)
            a, b = r * np.cos(th), r * np.sin(th)
            blocks.append(np.array([[a, b], [-b, a]]))
        if n_x % 2:
            blocks.append(np.array([[rng.choice([-1.0, 1.0]) * rng.uniform(rho_min, rho_max)]]))
        J = np.zeros((n_x, n_x))
        i = 0
        for blk in blocks:
            k = blk.shape[0]
            J[i:i + k, i:i + k] = blk
            i += k
        T, _ = np.linalg.qr(rng.standard_normal((n_x, n_x)))
        A = T @ J @ T.T
        B = rng.standard_normal((n_x, n_u))
        C = rng.standard_normal((n_y, n_x))
        D = rng.standard_normal((n_y, n_u)) if feedthrough else None
        # well-conditioned realizations keep the data rank gap clear
        ctrb = np.linalg.svd(controllability_matrix(A, B), compute_uv=False)
        obsv = np.linalg.svd(observability_matrix(A, C), compute_uv=False)
        if ctrb[-1] > 1e-3 * ctrb[0] and obsv[-1] > 1e-3 * obsv[0]:
            return StateSpace(A, B, C, D, minimal=True)
    raise ExcitationError("failed to draw a well-conditioned minimal plant")
