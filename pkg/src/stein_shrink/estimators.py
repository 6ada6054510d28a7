"""Scalar and orthogonally invariant covariance estimators.

All estimators here are kept in factored form ``a * H diag(d) H^T`` with
``H`` a p x q semi-orthogonal basis; the dense matrix is formed on demand.
The Haff-type rule inflates each sample eigenvalue ``l_i`` by
``1 + b * l_i^-alpha / sum_j l_j^-alpha`` before scaling by ``a_o = 1/m``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, ParameterError
from .linalg import EigenSystem, numerical_rank, sym_eig, truncate_to_rank
from .model import Dimensions


@dataclass(frozen=True)
class ShrinkageRule:
    """Haff parameters: eigenvalue power ``alpha`` and total shrinkage mass ``b``.

    Improvement over ``a_o S`` is guaranteed for ``alpha >= 1`` and
    ``0 < b <= dominance_bound(dims)``; other positive values are accepted.
    """

    alpha: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if not (np.isfinite(self.b) and self.b > 0):
            raise ParameterError(f"b must be positive, got {self.b}")


@dataclass(frozen=True)
class EstimatorOutput:
    """An estimate ``scale * vectors diag(values) vectors^T`` of rank ``q``."""

    scale: float
    vectors: NDArray[np.float64]
    values: NDArray[np.float64]

    @property
    def rank(self) -> int:
        return self.values.shape[0]

    @cached_property
    def sigma_hat(self) -> NDArray[np.float64]:
        out = self.scale * ((self.vectors * self.values) @ self.vectors.T)
        return 0.5 * (out + out.T)

    @property
    def eigenvalues(self) -> NDArray[np.float64]:
        """Nonzero eigenvalues ``scale * values`` (not necessarily sorted)."""
        return self.scale * self.values


def optimal_constant(dims: Dimensions) -> float:
    """Best multiple of S under Stein loss: ``1 / max(n, r)``."""
    return 1.0 / dims.m


def dominance_bound(dims: Dimensions) -> float:
    """Largest ``b`` for which the Haff rule provably beats ``a_o S``.

    ``2 (q - 1) / (m - q + 1)``. Zero when ``q == 1``, in which case a
    warning is emitted since no improvement is certified.
    """
    q, m = dims.q, dims.m
    if q == 1:
        warnings.warn("q = 1: dominance bound is 0, no improvement guaranteed", stacklevel=2)
    return 2.0 * (q - 1) / (m - q + 1)


def default_rule(dims: Dimensions, alpha: float) -> ShrinkageRule:
    """Haff rule with ``b`` set to the dominance bound."""
    b = dominance_bound(dims)
    if b <= 0:
        raise ParameterError("dominance bound is 0 (q = 1); supply b explicitly")
    return ShrinkageRule(alpha=alpha, b=b)


def natural_estimate(S, a: float, rank: int | None = None, tol: float | None = None) -> EstimatorOutput:
    """``a * S``, kept in factored form over its ``rank`` leading eigenpairs.

    ``rank`` defaults to the numerical rank of ``S``.
    """
    if not a > 0:
        raise ParameterError(f"scale a must be positive, got {a}")
    eig = sym_eig(S)
    if rank is None:
        rank = numerical_rank(eig.values, tol, eig.dim)
        if rank == 0:
            raise ParameterError("S has numerical rank 0")
    eig = truncate_to_rank(eig, rank, tol)
    return EstimatorOutput(scale=float(a), vectors=eig.vectors, values=eig.values)


def psi_haff(L, rule: ShrinkageRule) -> NDArray[np.float64]:
    """Haff weights ``psi_i = b l_i^-alpha / sum_j l_j^-alpha``.

    The weights sum to ``b`` and depend on ``L`` only through ratios.
    """
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 1 or L.size == 0:
        raise DimensionError(f"L must be a nonempty vector, got shape {L.shape}")
    if np.any(~(L > 0)):
        raise ParameterError("eigenvalues must be strictly positive")
    # Normalize by the smallest value: terms lie in (0, 1], no overflow at large alpha.
    w = (L.min() / L) ** rule.alpha
    return rule.b * (w / w.sum())


def oi_estimate(eig: EigenSystem, psi, a: float) -> EstimatorOutput:
    """Orthogonally invariant estimate ``a (S + H L Psi H^T) = a H diag(L (1 + psi)) H^T``."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape != eig.values.shape:
        raise DimensionError(
            f"psi has shape {psi.shape}, eigenvalues have shape {eig.values.shape}"
        )
    if eig.vectors.shape[1] != eig.values.shape[0]:
        raise DimensionError("eigenvector and eigenvalue counts differ")
    if not a > 0:
        raise ParameterError(f"scale a must be positive, got {a}")
    if np.any(~(eig.values > 0)):
        raise ParameterError("eigenvalues must be strictly positive")
    return EstimatorOutput(scale=float(a), vectors=eig.vectors, values=eig.values * (1.0 + psi))


def haff_from_eigensystem(eig: EigenSystem, dims: Dimensions, rule: ShrinkageRule) -> EstimatorOutput:
    """Haff estimate from an already truncated eigensystem of S."""
    return oi_estimate(eig, psi_haff(eig.values, rule), optimal_constant(dims))


def optimal_from_eigensystem(eig: EigenSystem, dims: Dimensions) -> EstimatorOutput:
    """``a_o S`` from an already truncated eigensystem of S."""
    return oi_estimate(eig, np.zeros_like(eig.values), optimal_constant(dims))


def sample_eigensystem(S, dims: Dimensions, tol: float | None = None) -> EigenSystem:
    """The rank-q eigensystem ``(H, L)`` of S, using the model rank ``q``."""
    S = np.asarray(S, dtype=np.float64)
    if S.shape != (dims.p, dims.p):
        raise DimensionError(f"S has shape {S.shape}, expected ({dims.p}, {dims.p})")
    return truncate_to_rank(sym_eig(S), dims.q, tol)


def haff_estimate(S, dims: Dimensions, rule: ShrinkageRule, tol: float | None = None) -> EstimatorOutput:
    """Haff-type estimate ``a_o (S + H L Psi(L) H^T)`` of a (possibly singular) covariance.

    Parameters
    ----------
    S : array_like, shape (p, p)
        Unnormalized sample covariance ``X X^T``.
    dims : Dimensions
        Model sizes; the rank ``q = min(n, r)`` is taken from here, not
        estimated from ``S``.
    rule : ShrinkageRule
        ``alpha`` and ``b``; see :func:`default_rule` for ``b = b_o``.
    tol : float, optional
        Relative eigenvalue cutoff used to confirm rank ``q``.

    Returns
    -------
    EstimatorOutput
        Rank-q estimate with nonzero eigenvalues ``l_i (1 + psi_i) / m``.

    Raises
    ------
    RankDeficiencyError
        If S has fewer than ``q`` numerically positive eigenvalues.
    """
    return haff_from_eigensystem(sample_eigensystem(S, dims, tol), dims, rule)
