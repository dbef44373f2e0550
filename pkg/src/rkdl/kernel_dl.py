"""Kernel dictionary learning: full-kernel baseline and the reduced trainers.

Four trainers share one alternating loop:

* ``kdl_train``        -- every training signal is a kernel vector (D = Y).
* ``rkdl_train``       -- a small pre-trained D is fixed throughout.
* ``orkdl_train``      -- D is additionally refined by gradient descent on
                          the representation objective.
* ``morkdl_train``     -- gradient refinement of D under a mixed objective
                          that adds a linear-representation penalty on D.

All trainers work on Gram matrices only; feature vectors are never formed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .kernels import KernelSpec, dictionary_gradient, gram, self_kernel_diag
from .linear_dl import Dictionary
from .sparse_coding import SparseCode, kernel_omp_batch, omp_batch

KDD_RIDGE = 1e-10


@dataclass
class KernelDictionary:
    """Feature-space dictionary phi(D) A: kernel vectors D plus coefficients A."""

    coefficients: np.ndarray          # (n_d, n_a)
    vectors: Dictionary               # kernel vectors, (m, n_d)
    kernel: KernelSpec

    @property
    def n_atoms(self) -> int:
        return self.coefficients.shape[1]

    def atom_norms_sq(self) -> np.ndarray:
        """a_j^T K_DD a_j for every column; 1 for a normalized dictionary."""
        k_dd = gram(self.vectors.atoms, self.vectors.atoms, self.kernel)
        return np.einsum("ij,ij->j", self.coefficients, k_dd @ self.coefficients)


@dataclass(frozen=True)
class KdlConfig:
    """Settings shared by all kernel trainers.

    ``grad_steps``/``learning_rate`` only matter for the optimized methods,
    ``penalty``/``dl_sparsity``/``normalize_vectors`` only for the mixed one.
    """

    n_atoms: int
    sparsity: int
    iters: int
    grad_steps: int = 3
    learning_rate: float = 5e-4
    penalty: float = 1.0
    seed: int = 0
    normalize_vectors: bool = True
    dl_sparsity: int | None = None

    def __post_init__(self):
        if self.n_atoms < 1 or self.sparsity < 1:
            raise ValueError("n_atoms and sparsity must be positive")
        if self.sparsity > self.n_atoms:
            raise ValueError("sparsity cannot exceed the number of kernel atoms")
        if self.iters < 0 or self.grad_steps < 0:
            raise ValueError("iters and grad_steps must be non-negative")
        if self.learning_rate < 0 or self.penalty < 0:
            raise ValueError("learning_rate and penalty must be non-negative")


@dataclass
class TrainTrace:
    """Per-iteration errors plus phase timings and warning counters.

    ``errors`` has ``iters + 1`` entries; entry 0 is the error right after
    initialization (empty code), entry i the error after iteration i.
    """

    errors: list[float]
    phase_seconds: dict[str, float]
    warnings: dict[str, int]
    total_seconds: float = 0.0


def _chol_with_ridge(K: np.ndarray, stats: dict) -> tuple:
    """Cholesky factor of K, adding an escalating ridge if not numerically PD."""
    try:
        return scipy.linalg.cho_factor(K)
    except scipy.linalg.LinAlgError:
        pass
    ridge = KDD_RIDGE
    eye = np.eye(K.shape[0])
    while ridge <= 1e-2:
        stats["kdd_ridge"] = stats.get("kdd_ridge", 0) + 1
        try:
            return scipy.linalg.cho_factor(K + ridge * eye)
        except scipy.linalg.LinAlgError:
            ridge *= 100.0
    raise np.linalg.LinAlgError("kernel-vector Gram is not positive definite even after ridging")


def _trace_error(kyy_sum: float, k_yd, k_dd, A, Z, m: int, N: int) -> float:
    """Normalized representation error from Gram quantities.

    sqrt(max(0, Tr[K_YY] - 2 Tr[K_YD A Z] + Tr[Z^T A^T K_DD A Z])) / sqrt(mN);
    only the diagonal of K_YY enters through ``kyy_sum``.
    """
    P = k_yd @ A
    t2 = float(np.einsum("la,al->", P, Z))
    G = A.T @ (k_dd @ A)
    t3 = float(np.einsum("al,al->", Z, G @ Z))
    return float(np.sqrt(max(0.0, kyy_sum - 2.0 * t2 + t3)) / np.sqrt(m * N))


def error_metric(Y: np.ndarray, kdict: KernelDictionary, Z) -> float:
    """Representation error per signal element, ||phi(Y) - phi(D) A Z||_F / sqrt(mN)."""
    Y = np.asarray(Y, dtype=float)
    Zm = Z.matrix if isinstance(Z, SparseCode) else np.asarray(Z, dtype=float)
    D = kdict.vectors.atoms
    k_yd = gram(Y, D, kdict.kernel)
    k_dd = gram(D, D, kdict.kernel)
    kyy_sum = float(self_kernel_diag(Y, kdict.kernel).sum())
    m, N = Y.shape
    return _trace_error(kyy_sum, k_yd, k_dd, kdict.coefficients, Zm, m, N)


def rkdl_atom_sweep(k_dd: np.ndarray, k_yd: np.ndarray, A: np.ndarray, Z: np.ndarray,
                    chol=None, stats: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One pass of sequential kernel-atom updates with code refits.

    For each atom j (ascending), restricted to the signals whose code uses it:
    the unconstrained optimum of the representation objective in a_j is
    K_DD^{-1} K_DY z_j - R z_j (R being the reconstruction without atom j);
    the atom is then Gram-normalized and its code row refit as
    (K_YD - R^T K_DD) a_j on the same support. The running sum S = A Z is
    maintained incrementally. Atoms used by no signal are left untouched.

    Returns updated copies of (A, Z).
    """
    k_dd = np.asarray(k_dd, dtype=float)
    k_yd = np.asarray(k_yd, dtype=float)
    A = np.array(A, dtype=float, copy=True)
    Z = np.array(Z, dtype=float, copy=True)
    n_d, n_a = A.shape
    if k_yd.shape[1] != n_d or k_dd.shape != (n_d, n_d) or Z.shape[0] != n_a:
        raise ValueError("Gram/coefficient/code shapes are inconsistent")
    if stats is None:
        stats = {}
    if chol is None:
        chol = _chol_with_ridge(k_dd, stats)

    S = A @ Z
    for j in range(n_a):
        support = np.flatnonzero(Z[j])
        if support.size == 0:
            stats["unused_kernel_atom"] = stats.get("unused_kernel_atom", 0) + 1
            continue
        z = Z[j, support]
        R = S[:, support] - np.outer(A[:, j], z)
        u = scipy.linalg.cho_solve(chol, k_yd[support, :].T @ z) - R @ z
        norm_sq = float(u @ (k_dd @ u))
        if norm_sq <= 1e-24:
            stats["degenerate_kernel_atom"] = stats.get("degenerate_kernel_atom", 0) + 1
            continue
        a = u / np.sqrt(norm_sq)
        z_new = k_yd[support, :] @ a - R.T @ (k_dd @ a)
        A[:, j] = a
        Z[j, support] = z_new
        S[:, support] = R + np.outer(a, z_new)
    return A, Z


def _init_coefficients(n_vectors: int, n_atoms: int, k_dd_diag: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """Seeded 1-sparse coefficient columns, Gram-normalized.

    Each atom starts as a coordinate vector at a distinct kernel-vector index,
    scaled so a_j^T K_DD a_j = 1.
    """
    if n_vectors < n_atoms:
        raise ValueError(f"cannot place {n_atoms} kernel atoms on {n_vectors} vectors")
    usable = np.flatnonzero(k_dd_diag > 1e-12)
    if usable.size < n_atoms:
        raise ValueError("not enough kernel vectors with nonzero self-kernel")
    chosen = rng.choice(usable, size=n_atoms, replace=False)
    A = np.zeros((n_vectors, n_atoms))
    A[chosen, np.arange(n_atoms)] = 1.0 / np.sqrt(k_dd_diag[chosen])
    return A


def _train(Y, vectors: np.ndarray, kernel: KernelSpec, cfg: KdlConfig, *,
           optimize_vectors: bool, mixed: bool, callback=None):
    t_start = time.perf_counter()
    Y = np.asarray(Y, dtype=float)
    m, N = Y.shape
    D = vectors if vectors is Y else np.array(vectors, dtype=float, copy=True)
    phases = {"gram_refresh": 0.0, "coding": 0.0, "atom_sweep": 0.0,
              "gradient": 0.0, "error_eval": 0.0}
    stats: dict = {}
    rng = np.random.default_rng(cfg.seed)

    t0 = time.perf_counter()
    k_dd = gram(D, D, kernel)
    k_yd = k_dd if D is Y else gram(Y, D, kernel)
    kyy = self_kernel_diag(Y, kernel)
    kyy_sum = float(kyy.sum())
    phases["gram_refresh"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    chol = _chol_with_ridge(k_dd, stats)
    phases["atom_sweep"] += time.perf_counter() - t0

    A = _init_coefficients(D.shape[1], cfg.n_atoms, np.diag(k_dd).copy(), rng)
    Z = np.zeros((cfg.n_atoms, N))
    X_code = None

    t0 = time.perf_counter()
    errors = [_trace_error(kyy_sum, k_yd, k_dd, A, Z, m, N)]
    phases["error_eval"] += time.perf_counter() - t0

    do_gradients = optimize_vectors and cfg.grad_steps > 0 and cfg.learning_rate > 0
    for it in range(cfg.iters):
        t0 = time.perf_counter()
        Z = kernel_omp_batch(k_yd, kyy, k_dd, A, cfg.sparsity, stats).matrix
        if mixed:
            X_code = omp_batch(D, Y, cfg.dl_sparsity,
                               require_normalized=cfg.normalize_vectors, stats=stats)
        phases["coding"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        A, Z = rkdl_atom_sweep(k_dd, k_yd, A, Z, chol=chol, stats=stats)
        phases["atom_sweep"] += time.perf_counter() - t0

        if do_gradients:
            X_sparse = scipy.sparse.csc_matrix(X_code.matrix) if mixed and cfg.penalty > 0 else None
            for _ in range(cfg.grad_steps):
                t0 = time.perf_counter()
                G = dictionary_gradient(Y, D, A, Z, kernel, k_yd=k_yd, k_dd=k_dd)
                if X_sparse is not None:
                    linear_residual = Y - (X_sparse.T @ D.T).T
                    G = G - 2.0 * cfg.penalty * (X_sparse @ linear_residual.T).T
                if not np.all(np.isfinite(G)):
                    raise FloatingPointError(
                        f"non-finite kernel-vector gradient at iteration {it}; "
                        f"try a smaller learning rate (currently {cfg.learning_rate})")
                D = D - cfg.learning_rate * G
                phases["gradient"] += time.perf_counter() - t0
                t0 = time.perf_counter()
                k_dd = gram(D, D, kernel)
                k_yd = gram(Y, D, kernel)
                phases["gram_refresh"] += time.perf_counter() - t0
                if not (np.all(np.isfinite(k_dd)) and np.all(np.isfinite(k_yd))):
                    raise FloatingPointError(
                        f"kernel matrices overflowed after the gradient step at iteration "
                        f"{it}; try a smaller learning rate (currently {cfg.learning_rate})")
            if mixed and cfg.normalize_vectors:
                t0 = time.perf_counter()
                norms = np.linalg.norm(D, axis=0)
                if np.any(norms < 1e-14):
                    stats["zero_vector"] = stats.get("zero_vector", 0) + int(np.sum(norms < 1e-14))
                    norms = np.maximum(norms, 1e-14)
                D = D / norms
                phases["gradient"] += time.perf_counter() - t0
                t0 = time.perf_counter()
                k_dd = gram(D, D, kernel)
                k_yd = gram(Y, D, kernel)
                phases["gram_refresh"] += time.perf_counter() - t0
            t0 = time.perf_counter()
            chol = _chol_with_ridge(k_dd, stats)
            # re-normalize atoms under the refreshed Gram; scaling the code
            # rows inversely keeps phi(D) A Z (and the error) unchanged
            norm_sq = np.einsum("ij,ij->j", A, k_dd @ A)
            scale = np.sqrt(np.maximum(norm_sq, 1e-24))
            A = A / scale
            Z = Z * scale[:, None]
            phases["atom_sweep"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        errors.append(_trace_error(kyy_sum, k_yd, k_dd, A, Z, m, N))
        phases["error_eval"] += time.perf_counter() - t0
        if callback is not None:
            callback(it, D, A, Z, k_dd)

    supports = [np.flatnonzero(Z[:, ell]) for ell in range(N)]
    code = SparseCode(matrix=Z, sparsity=cfg.sparsity, supports=supports)
    trace = TrainTrace(errors=errors, phase_seconds=phases, warnings=stats,
                       total_seconds=time.perf_counter() - t_start)
    return D, A, code, X_code, trace


def kdl_train(Y: np.ndarray, kernel: KernelSpec, cfg: KdlConfig,
              max_gram_signals: int = 20000, callback=None):
    """Full kernel dictionary learning with D = Y.

    Refuses signal sets whose N x N Gram would exceed ``max_gram_signals``
    columns. Returns (KernelDictionary, SparseCode, TrainTrace).
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape[1] > max_gram_signals:
        raise ValueError(
            f"{Y.shape[1]} signals would need a {Y.shape[1]}x{Y.shape[1]} Gram; "
            f"cap is {max_gram_signals} (raise max_gram_signals to override)")
    D, A, code, _, trace = _train(Y, Y, kernel, cfg, optimize_vectors=False, mixed=False,
                                  callback=callback)
    kdict = KernelDictionary(coefficients=A, vectors=Dictionary(atoms=D, normalized=False),
                             kernel=kernel)
    return kdict, code, trace


def rkdl_train(Y: np.ndarray, vectors: Dictionary, kernel: KernelSpec, cfg: KdlConfig,
               callback=None):
    """Reduced kernel dictionary learning over a fixed pre-trained D."""
    D, A, code, _, trace = _train(Y, vectors.atoms, kernel, cfg,
                                  optimize_vectors=False, mixed=False, callback=callback)
    kdict = KernelDictionary(coefficients=A,
                             vectors=Dictionary(atoms=D, normalized=vectors.normalized),
                             kernel=kernel)
    return kdict, code, trace


def orkdl_train(Y: np.ndarray, vectors: Dictionary, kernel: KernelSpec, cfg: KdlConfig,
                callback=None):
    """Reduced kernel dictionary learning with gradient-refined kernel vectors.

    After every atom sweep, the kernel vectors take ``cfg.grad_steps``
    descent steps along the analytic kernel gradients. Within one step all
    columns use gradients evaluated at the step-start D (Jacobi style); Gram
    matrices are recomputed between steps.
    """
    D, A, code, _, trace = _train(Y, vectors.atoms, kernel, cfg,
                                  optimize_vectors=True, mixed=False, callback=callback)
    kdict = KernelDictionary(coefficients=A, vectors=Dictionary(atoms=D, normalized=False),
                             kernel=kernel)
    return kdict, code, trace


def morkdl_train(Y: np.ndarray, vectors: Dictionary, kernel: KernelSpec, cfg: KdlConfig,
                 callback=None):
    """Gradient-refined reduced KDL under a mixed objective.

    The kernel-vector gradient gains the linear-representation term
    -2 * penalty * (Y - D X) x_j, with X recoded by OMP every iteration;
    with ``normalize_vectors`` the columns of D are re-normalized after the
    gradient steps. Returns (KernelDictionary, Z, X, TrainTrace); the trace
    records the nonlinear representation error only.
    """
    if cfg.dl_sparsity is None:
        raise ValueError("morkdl_train needs cfg.dl_sparsity (linear code sparsity)")
    D, A, code, X_code, trace = _train(Y, vectors.atoms, kernel, cfg,
                                       optimize_vectors=True, mixed=True, callback=callback)
    kdict = KernelDictionary(coefficients=A,
                             vectors=Dictionary(atoms=D, normalized=cfg.normalize_vectors),
                             kernel=kernel)
    return kdict, code, X_code, trace
