"""Kernel functions, Gram matrices, and analytic kernel-matrix derivatives.

All signal sets follow column-major semantics: an (m, N) array holds one
signal per column, and the Gram matrix of two sets X, Y has entry
[i, j] = k(x_i, y_j).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RBF = "rbf"
POLYNOMIAL = "polynomial"
LINEAR = "linear"

_FAMILIES = (RBF, POLYNOMIAL, LINEAR)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    The RBF kernel is exp(-||x - y||^2 / (denom_factor * sigma^2)); both
    common width conventions are reachable through ``denom_factor`` (2 gives
    the 2*sigma^2 form, 1 gives sigma^2). The polynomial kernel is
    (x.y + alpha)^beta, and ``linear`` is the plain inner product.
    """

    family: str = RBF
    sigma: float = 1.0
    denom_factor: float = 2.0
    alpha: float = 0.0
    beta: int = 1

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == RBF:
            if not self.sigma > 0:
                raise ValueError("sigma must be positive for the RBF kernel")
            if not self.denom_factor > 0:
                raise ValueError("denom_factor must be positive")
        if self.family == POLYNOMIAL:
            if int(self.beta) != self.beta or self.beta < 1:
                raise ValueError("beta must be an integer >= 1 for the polynomial kernel")

    @property
    def rbf_scale(self) -> float:
        """Denominator of the RBF exponent, denom_factor * sigma**2."""
        return self.denom_factor * self.sigma**2

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "sigma": self.sigma,
            "denom_factor": self.denom_factor,
            "alpha": self.alpha,
            "beta": self.beta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**{k: d[k] for k in ("family", "sigma", "denom_factor", "alpha", "beta") if k in d})


def kernel_eval(x: np.ndarray, y: np.ndarray, spec: KernelSpec) -> float:
    """Evaluate k(x, y) for two single signals."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"signal lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if spec.family == RBF:
        d = x - y
        return float(np.exp(-(d @ d) / spec.rbf_scale))
    if spec.family == POLYNOMIAL:
        return float((x @ y + spec.alpha) ** spec.beta)
    return float(x @ y)


def _sq_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared distances between columns, clamped at 0.

    Uses the expansion ||x - y||^2 = ||x||^2 + ||y||^2 - 2 x.y; round-off can
    make the result slightly negative, hence the clamp. When both arguments
    are the same data the diagonal is forced to exact zero.
    """
    xx = np.einsum("ij,ij->j", X, X)
    yy = xx if Y is X else np.einsum("ij,ij->j", Y, Y)
    sq = xx[:, None] + yy[None, :] - 2.0 * (X.T @ Y)
    np.maximum(sq, 0.0, out=sq)
    if Y is X or (X.shape == Y.shape and np.array_equal(X, Y)):
        np.fill_diagonal(sq, 0.0)
    return sq


def gram(X: np.ndarray, Y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Gram matrix of kernel evaluations between the columns of X and Y.

    Parameters
    ----------
    X : (m, a) array
    Y : (m, b) array
    spec : KernelSpec

    Returns
    -------
    (a, b) array with entry [i, j] = k(X[:, i], Y[:, j]).
    """
    X = np.asarray(X, dtype=float)
    Y = X if Y is X else np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError("gram expects 2-D column-major signal matrices")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"row counts differ: {X.shape[0]} vs {Y.shape[0]}")
    if spec.family == RBF:
        return np.exp(-_sq_distances(X, Y) / spec.rbf_scale)
    if spec.family == POLYNOMIAL:
        return (X.T @ Y + spec.alpha) ** spec.beta
    return X.T @ Y


def self_kernel_diag(X: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Vector of k(x_i, x_i) for each column, without forming the full Gram."""
    X = np.asarray(X, dtype=float)
    if spec.family == RBF:
        return np.ones(X.shape[1])
    sq = np.einsum("ij,ij->j", X, X)
    if spec.family == POLYNOMIAL:
        return (sq + spec.alpha) ** spec.beta
    return sq


def kernel_grad_first(x: np.ndarray, y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Gradient of k(x, y) with respect to the first argument x."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"signal lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if spec.family == RBF:
        d = x - y
        k = np.exp(-(d @ d) / spec.rbf_scale)
        return -k * 2.0 * d / spec.rbf_scale
    if spec.family == POLYNOMIAL:
        return spec.beta * (x @ y + spec.alpha) ** (spec.beta - 1) * y
    return y.copy()


def _check_shapes(Y, D, A, Z):
    m, N = Y.shape
    md, n_d = D.shape
    ad, n_a = A.shape
    az, Nz = Z.shape
    if md != m:
        raise ValueError(f"signal and vector dimensions differ: {m} vs {md}")
    if ad != n_d:
        raise ValueError(f"coefficient rows ({ad}) do not match vector count ({n_d})")
    if az != n_a or Nz != N:
        raise ValueError(f"code matrix is {Z.shape}, expected ({n_a}, {N})")


def kernel_vector_gradient(
    Y: np.ndarray,
    D: np.ndarray,
    A: np.ndarray,
    Z: np.ndarray,
    j: int,
    spec: KernelSpec,
    k_yd: np.ndarray | None = None,
    k_dd: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient of ||phi(Y) - phi(D) A Z||_F^2 with respect to column j of D.

    The derivative Gram matrices are never materialized: with W = A Z and
    M = W W^T the gradient contracts the analytic per-pair kernel gradients
    against row j of M (vector-vector pairs within D) and row j of W (pairs
    against the signals), which costs O(m (N + n_d)) per column once W is
    available.

    ``k_yd`` / ``k_dd`` optionally supply precomputed Gram matrices for the
    current D (they must be fresh; stale matrices give wrong gradients).
    """
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    A = np.asarray(A, dtype=float)
    Z = np.asarray(Z, dtype=float)
    _check_shapes(Y, D, A, Z)
    n_d = D.shape[1]
    if not 0 <= j < n_d:
        raise IndexError(f"vector index {j} out of range [0, {n_d})")

    W = A @ Z
    w = W[j]            # per-signal weight of vector j in the reconstruction
    m_row = W @ w       # row j of M = W W^T
    d = D[:, j]

    if spec.family == RBF:
        scale = spec.rbf_scale
        kd = k_dd[j] if k_dd is not None else np.exp(-_sq_distances(D, d[:, None]).ravel() / scale)
        ky = k_yd[:, j] if k_yd is not None else np.exp(-_sq_distances(Y, d[:, None]).ravel() / scale)
        c = m_row * kd
        e = w * ky
        term_dd = (-4.0 / scale) * (d * c.sum() - D @ c)
        term_yd = (4.0 / scale) * (d * e.sum() - Y @ e)
    elif spec.family == POLYNOMIAL:
        b = spec.beta
        pd = (D.T @ d + spec.alpha) ** (b - 1)
        py = (Y.T @ d + spec.alpha) ** (b - 1)
        term_dd = 2.0 * b * (D @ (m_row * pd))
        term_yd = -2.0 * b * (Y @ (w * py))
    else:
        term_dd = 2.0 * (D @ m_row)
        term_yd = -2.0 * (Y @ w)
    return term_dd + term_yd


def dictionary_gradient(
    Y: np.ndarray,
    D: np.ndarray,
    A: np.ndarray,
    Z: np.ndarray,
    spec: KernelSpec,
    k_yd: np.ndarray | None = None,
    k_dd: np.ndarray | None = None,
) -> np.ndarray:
    """All kernel-vector gradients at once, as an (m, n_d) matrix.

    Column j equals ``kernel_vector_gradient(Y, D, A, Z, j, spec)``; every
    column is evaluated at the same D, so one call gives a full Jacobi-style
    gradient round.
    """
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    A = np.asarray(A, dtype=float)
    Z = np.asarray(Z, dtype=float)
    _check_shapes(Y, D, A, Z)

    W = A @ Z
    M = W @ W.T
    if spec.family == RBF:
        scale = spec.rbf_scale
        if k_dd is None:
            k_dd = gram(D, D, spec)
        if k_yd is None:
            k_yd = gram(Y, D, spec)
        C = M * k_dd
        E = W * k_yd.T
        term_dd = (-4.0 / scale) * (D * C.sum(axis=1) - D @ C)
        term_yd = (4.0 / scale) * (D * E.sum(axis=1) - Y @ E.T)
        return term_dd + term_yd
    if spec.family == POLYNOMIAL:
        b = spec.beta
        pd = (D.T @ D + spec.alpha) ** (b - 1)
        py = (Y.T @ D + spec.alpha) ** (b - 1)
        return 2.0 * b * (D @ (M * pd)) - 2.0 * b * (Y @ (W.T * py))
    return 2.0 * (D @ M - Y @ W.T)
