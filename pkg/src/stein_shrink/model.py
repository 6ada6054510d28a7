"""Rank-r Gaussian factor model ``X = B Z`` and its sample covariance.

Population covariances are built from a :class:`CovarianceSpec`, factored as
``Sigma = B B^T`` and sampled with explicit, seed-derived random streams so
that replication ``k`` of an experiment is reproducible on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, ParameterError, RankDeficiencyError
from .linalg import default_tol, numerical_rank, sym_eig

STRUCTURES = ("identity", "ar")
UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class CovarianceSpec:
    """Recipe for a rank-``r`` population covariance of size ``p``.

    ``identity`` gives ``diag(1_r, 0_{p-r})``. ``ar`` starts from the
    autoregressive matrix ``rho^|i-j|`` and zeroes its ``p - r`` smallest
    eigenvalues.
    """

    structure: str
    p: int
    r: int
    rho: float = 0.9

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ParameterError(
                f"unknown structure {self.structure!r}; expected one of {STRUCTURES}"
            )
        if self.p < 1 or self.r < 1:
            raise DimensionError(f"p and r must be positive, got p={self.p}, r={self.r}")
        if self.r > self.p:
            raise DimensionError(f"rank r={self.r} exceeds dimension p={self.p}")
        if self.structure == "ar" and not 0.0 < self.rho < 1.0:
            raise ParameterError(f"ar structure needs 0 < rho < 1, got {self.rho}")


@dataclass(frozen=True)
class Dimensions:
    """Model sizes: ``q = min(n, r)`` is the rank of S, ``m = max(n, r)``."""

    p: int
    n: int
    r: int

    def __post_init__(self):
        if min(self.p, self.n, self.r) < 1:
            raise DimensionError(
                f"p, n, r must be positive, got p={self.p}, n={self.n}, r={self.r}"
            )
        if self.r > self.p:
            raise DimensionError(f"rank r={self.r} exceeds dimension p={self.p}")

    @property
    def q(self) -> int:
        return min(self.n, self.r)

    @property
    def m(self) -> int:
        return max(self.n, self.r)

    @property
    def case(self) -> str:
        """Which of the five invertibility regimes these sizes fall in."""
        p, n, r = self.p, self.n, self.r
        if n < r == p:
            return "i"
        if r == p <= n:
            return "ii"
        if r < p <= n:
            return "iii"
        if r <= n < p:
            return "iv"
        return "v"


def build_sigma(spec: CovarianceSpec) -> NDArray[np.float64]:
    """Population covariance with exactly ``spec.r`` nonzero eigenvalues."""
    p, r = spec.p, spec.r
    if spec.structure == "identity":
        return np.diag(np.r_[np.ones(r), np.zeros(p - r)])
    idx = np.arange(p)
    full = spec.rho ** np.abs(idx[:, None] - idx[None, :])
    if r == p:
        return full
    eig = sym_eig(full)
    U = eig.vectors[:, :r]
    sigma = (U * eig.values[:r]) @ U.T
    return 0.5 * (sigma + sigma.T)


def factorize(sigma, r: int, tol: float | None = None) -> NDArray[np.float64]:
    """Return ``B = U_r diag(lambda_r)^{1/2}`` so that ``B B^T = sigma``.

    Raises
    ------
    RankDeficiencyError
        If the numerical rank of ``sigma`` differs from ``r``.
    """
    eig = sym_eig(sigma)
    if tol is None:
        tol = default_tol(eig.dim)
    observed = numerical_rank(eig.values, tol)
    if observed != r:
        raise RankDeficiencyError(
            f"covariance has numerical rank {observed}, expected {r}",
            observed_rank=observed,
            required_rank=r,
        )
    return eig.vectors[:, :r] * np.sqrt(eig.values[:r])


def make_stream(master_seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for replication ``index`` under ``master_seed``."""
    if not 0 <= master_seed <= UINT64_MAX:
        raise ParameterError(f"seed must be an unsigned 64-bit integer, got {master_seed}")
    if index < 0:
        raise ParameterError(f"stream index must be nonnegative, got {index}")
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))


def sample_data(B, n: int, stream: np.random.Generator) -> NDArray[np.float64]:
    """Draw ``X = B Z`` with ``Z`` an r x n matrix of i.i.d. N(0, 1)."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2:
        raise DimensionError(f"factor must be a p x r matrix, got shape {B.shape}")
    if n < 1:
        raise DimensionError(f"n must be positive, got {n}")
    Z = stream.standard_normal((B.shape[1], n))
    return B @ Z


def sample_cov(X) -> NDArray[np.float64]:
    """Unnormalized sample covariance ``S = X X^T`` (no 1/n factor)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    S = X @ X.T
    return 0.5 * (S + S.T)
