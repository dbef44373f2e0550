"""Linear dictionary learning by alternating OMP and AK-SVD atom updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sparse_coding import SparseCode, omp_batch


@dataclass
class Dictionary:
    """Column dictionary of unit-norm atoms (when ``normalized`` is set)."""

    atoms: np.ndarray
    normalized: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    def validate(self, tol: float = 1e-10) -> None:
        if self.normalized:
            norms = np.linalg.norm(self.atoms, axis=0)
            if np.any(np.abs(norms - 1.0) > tol):
                raise ValueError("dictionary marked normalized but has non-unit columns")


@dataclass(frozen=True)
class DLConfig:
    n_atoms: int
    sparsity: int
    iters: int
    seed: int = 0

    def __post_init__(self):
        if self.n_atoms < 1 or self.sparsity < 1 or self.iters < 0:
            raise ValueError("n_atoms and sparsity must be positive, iters non-negative")
        if self.sparsity > self.n_atoms:
            raise ValueError("sparsity cannot exceed the number of atoms")


def init_dictionary(Y: np.ndarray, n_atoms: int, seed: int) -> Dictionary:
    """Seeded initialization from data columns.

    Samples ``n_atoms`` distinct columns of Y without replacement and
    normalizes them. Duplicate columns in Y may produce coinciding atoms;
    this is allowed and flagged in ``meta['duplicate_atoms']``.
    """
    Y = np.asarray(Y, dtype=float)
    m, N = Y.shape
    if N < n_atoms:
        raise ValueError(f"cannot draw {n_atoms} atoms from {N} signals")
    rng = np.random.default_rng(seed)
    norms = np.linalg.norm(Y, axis=0)
    candidates = np.flatnonzero(norms > 0)
    if candidates.size < n_atoms:
        raise ValueError("not enough nonzero signals to initialize the dictionary")
    chosen = rng.choice(candidates, size=n_atoms, replace=False)
    atoms = Y[:, chosen] / norms[chosen]
    dup = False
    for j in range(n_atoms):
        diff = atoms[:, j + 1:] - atoms[:, j:j + 1]
        if diff.size and np.min(np.einsum("ij,ij->j", diff, diff)) < 1e-24:
            dup = True
            break
    return Dictionary(atoms=atoms, normalized=True, meta={"duplicate_atoms": dup, "source_columns": chosen})


def _replace_unused_atom(Y, D, X, used: set) -> int:
    """Pick the worst-represented signal not already used as a replacement."""
    residual = Y - D @ X
    norms = np.einsum("ij,ij->j", residual, residual)
    if used:
        norms = norms.copy()
        norms[list(used)] = -np.inf
    return int(np.argmax(norms))


def aksvd_train(Y: np.ndarray, cfg: DLConfig, D_init: Dictionary | None = None,
                callback=None) -> tuple[Dictionary, SparseCode]:
    """Train a linear dictionary with alternating OMP / AK-SVD sweeps.

    Each iteration recodes all signals with OMP, then updates atoms in
    ascending index order: with F the residual over the signals using atom j
    (atom j's own contribution added back), the new atom is F x_j normalized
    and the code row is refit as F^T d_j on its support. Unused atoms are
    re-seeded from the currently worst-represented signal.

    Returns the trained dictionary and the sparse code of the last coding
    pass (updated in place by the atom sweeps).
    """
    Y = np.asarray(Y, dtype=float)
    m, N = Y.shape
    if N < cfg.n_atoms:
        raise ValueError(f"need at least {cfg.n_atoms} signals, got {N}")
    if not np.any(Y):
        raise ValueError("training signals are all zero")
    if cfg.sparsity > m:
        raise ValueError("sparsity cannot exceed the signal dimension")

    dictionary = D_init if D_init is not None else init_dictionary(Y, cfg.n_atoms, cfg.seed)
    D = dictionary.atoms.copy()
    X = omp_batch(D, Y, cfg.sparsity).matrix

    for it in range(cfg.iters):
        if it > 0:
            X = omp_batch(D, Y, cfg.sparsity).matrix
        E = Y - D @ X
        replaced: set = set()
        for j in range(cfg.n_atoms):
            used_by = np.flatnonzero(X[j])
            if used_by.size == 0:
                worst = _replace_unused_atom(Y, D, X, replaced)
                replaced.add(worst)
                atom = Y[:, worst]
                D[:, j] = atom / np.linalg.norm(atom)
                continue
            x = X[j, used_by]
            F = E[:, used_by] + np.outer(D[:, j], x)
            u = F @ x
            norm = np.linalg.norm(u)
            if norm < 1e-14:
                worst = _replace_unused_atom(Y, D, X, replaced)
                replaced.add(worst)
                atom = Y[:, worst]
                D[:, j] = atom / np.linalg.norm(atom)
                X[j, used_by] = 0.0
                E[:, used_by] = F
                continue
            d = u / norm
            x_new = F.T @ d
            D[:, j] = d
            X[j, used_by] = x_new
            E[:, used_by] = F - np.outer(d, x_new)
        if callback is not None:
            callback(it, D, X)

    supports = [np.flatnonzero(X[:, ell]) for ell in range(N)]
    code = SparseCode(matrix=X, sparsity=cfg.sparsity, supports=supports)
    return Dictionary(atoms=D, normalized=True, meta=dict(dictionary.meta)), code
