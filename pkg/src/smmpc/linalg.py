"""Dense linear-algebra building blocks: block-Hankel matrices, LQ, rank."""

import numpy as np

from .errors import DimensionError

DEFAULT_RTOL = 1e-9


def as_signal(signal):
    """Return ``signal`` as a time-major 2-D float array (L x n)."""
    s = np.asarray(signal, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.ndim != 2:
        raise DimensionError(f"signal must be 1-D or 2-D, got shape {s.shape}")
    return s


def build_hankel(signal, depth, M=None):
    """Block-Hankel matrix of a multichannel signal.

    Column ``j`` stacks the samples ``signal[j], ..., signal[j + depth - 1]``,
    each sample contributing a block of ``n`` rows.

    Args:
        signal: array of shape (L, n) or (L,), time-major.
        depth: number of block rows.
        M: number of columns. Defaults to the maximum ``L - depth + 1``.

    Returns:
        Array of shape (n * depth, M).

    Raises:
        DimensionError: if the signal is shorter than ``M + depth - 1``.

    Examples:
        >>> build_hankel([1, 2, 3, 4], depth=2, M=3)
        array([[1., 2., 3.],
               [2., 3., 4.]])
    """
    s = as_signal(signal)
    L, n = s.shape
    if depth < 1:
        raise DimensionError("depth must be >= 1")
    if M is None:
        M = L - depth + 1
    if M < 1 or L < M + depth - 1:
        raise DimensionError(
            f"signal of length {L} too short: depth={depth}, M={M} "
            f"requires length >= {M + depth - 1}")
    # windows[j] is the (depth, n) block starting at sample j
    windows = np.lib.stride_tricks.sliding_window_view(s[:M + depth - 1], depth, axis=0)
    # sliding_window_view puts the window axis last: (M, n, depth)
    return np.ascontiguousarray(windows.transpose(0, 2, 1).reshape(M, depth * n).T)


def numerical_rank(A, rtol=DEFAULT_RTOL):
    """Number of singular values above ``rtol * sigma_max``."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def lq_factorize(A, complete=True):
    """LQ factorization ``A = L @ Q.T`` computed as Householder QR of ``A.T``.

    The sign convention makes the diagonal of ``L`` nonnegative, which fixes
    the factors uniquely when ``A`` has full row rank.

    Args:
        A: (m, n) matrix.
        complete: if True ``Q`` is the full (n, n) orthogonal matrix and ``L``
            is (m, n); otherwise ``Q`` is (n, k) and ``L`` is (m, k) with
            ``k = min(m, n)``.

    Returns:
        (L, Q) with ``L`` lower-trapezoidal and ``Q`` having orthonormal columns.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    Q, R = np.linalg.qr(A.T, mode="complete" if complete else "reduced")
    k = min(m, n)
    signs = np.sign(np.diag(R[:k, :k]))
    signs[signs == 0] = 1.0
    Q[:, :k] *= signs
    R[:k, :] *= signs[:, None]
    return R.T, Q
