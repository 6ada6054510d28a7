"""Dense symmetric-matrix primitives.

Everything here works on real symmetric (mostly positive semi-definite)
``numpy`` arrays. Eigendecompositions are delegated to LAPACK through
:func:`numpy.linalg.eigh`; this module adds the symmetry guard, descending
ordering, numerical-rank bookkeeping and the pseudoinverse built on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, ParameterError, RankDeficiencyError, SymmetryError

SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvectors (columns) and eigenvalues sorted in non-increasing order.

    After :func:`truncate_to_rank` the pair is the ``(H, L)`` of a rank-q
    matrix: ``vectors`` is p x q semi-orthogonal and ``values`` is positive.
    """

    vectors: NDArray[np.float64]
    values: NDArray[np.float64]

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def rank(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> NDArray[np.float64]:
        """Return ``H diag(L) H^T``."""
        return (self.vectors * self.values) @ self.vectors.T


def default_tol(dim: int) -> float:
    """Relative numerical-rank cutoff ``dim * machine epsilon``."""
    return max(dim, 1) * np.finfo(np.float64).eps


def check_symmetric(A, name="matrix") -> NDArray[np.float64]:
    """Validate a square symmetric matrix and return it as a float array.

    Raises
    ------
    SymmetryError
        If some ``|A_ij - A_ji| > 1e-12 * (1 + |A_ij|)``. The message names
        the worst offending pair (by violation ratio).
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ParameterError(f"{name} contains non-finite entries")
    diff = np.abs(A - A.T)
    ratio = diff / (SYMMETRY_RTOL * (1.0 + np.abs(A)))
    worst = np.unravel_index(np.argmax(ratio), ratio.shape) if A.size else (0, 0)
    if A.size and ratio[worst] > 1.0:
        i, j = (int(k) for k in worst)
        raise SymmetryError(
            f"{name} is not symmetric: entry ({i}, {j}) = {A[i, j]!r} "
            f"vs ({j}, {i}) = {A[j, i]!r}",
            i,
            j,
        )
    return A


def sym_eig(A) -> EigenSystem:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    A : array_like, shape (d, d)
        Symmetric matrix (checked, see :func:`check_symmetric`).

    Returns
    -------
    EigenSystem
        All ``d`` eigenpairs with ``A = V diag(w) V^T``.
    """
    A = check_symmetric(A)
    # eigh reads one triangle; average so both halves contribute.
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return EigenSystem(vectors=V[:, ::-1].copy(), values=w[::-1].copy())


def numerical_rank(values, tol: float | None = None, dim: int | None = None) -> int:
    """Count eigenvalues strictly above ``tol * max(values)``."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0
    if tol is None:
        tol = default_tol(dim if dim is not None else values.size)
    top = values.max()
    if top <= 0:
        return 0
    return int(np.count_nonzero(values > tol * top))


def truncate_to_rank(eig: EigenSystem, q: int, tol: float | None = None) -> EigenSystem:
    """Keep the ``q`` leading eigenpairs, requiring each to be numerically positive.

    Raises
    ------
    RankDeficiencyError
        If fewer than ``q`` eigenvalues exceed ``tol * lambda_max``; the error
        carries the observed numerical rank.
    """
    if q < 1 or q > eig.rank:
        raise DimensionError(f"rank {q} out of range 1..{eig.rank}")
    if tol is None:
        tol = default_tol(eig.dim)
    observed = numerical_rank(eig.values, tol)
    if observed < q:
        raise RankDeficiencyError(
            f"need {q} eigenvalues above {tol:.3g} * lambda_max, found {observed}",
            observed_rank=observed,
            required_rank=q,
        )
    return EigenSystem(vectors=eig.vectors[:, :q].copy(), values=eig.values[:q].copy())


def pinv(A, tol: float | None = None) -> NDArray[np.float64]:
    """Moore-Penrose pseudoinverse of a symmetric positive semi-definite matrix.

    Eigenvalues at or below ``tol * lambda_max`` are treated as zero.
    ``tol`` defaults to ``dim * eps``.

    Raises
    ------
    ParameterError
        If an eigenvalue is below ``-tol * lambda_max`` (not PSD).
    """
    eig = sym_eig(A)
    if tol is None:
        tol = default_tol(eig.dim)
    top = max(float(eig.values[0]), 0.0) if eig.rank else 0.0
    cutoff = tol * top
    if eig.rank and eig.values[-1] < -cutoff:
        raise ParameterError(
            f"matrix is not positive semi-definite: eigenvalue {eig.values[-1]!r} "
            f"below -{cutoff:.3g}"
        )
    keep = eig.values > cutoff
    V = eig.vectors[:, keep]
    out = (V / eig.values[keep]) @ V.T
    return 0.5 * (out + out.T)


def posdet_log(A, q: int, tol: float | None = None) -> float:
    """Sum of the logs of the ``q`` largest eigenvalues of ``A``.

    This is the log pseudo-determinant restricted to a known rank ``q``.
    """
    eig = truncate_to_rank(sym_eig(A), q, tol)
    return float(np.sum(np.log(eig.values)))
