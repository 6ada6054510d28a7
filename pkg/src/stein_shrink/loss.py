"""Stein-type loss for possibly singular covariances.

For an estimate ``Sigma_hat = a H diag(d) H^T`` of rank q the positive
spectrum of ``Sigma^+ Sigma_hat`` coincides with the spectrum of the q x q
symmetric matrix ``a D^{1/2} (H^T Sigma^+ H) D^{1/2}``, so the loss is
evaluated there instead of on the non-symmetric p x p product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateConfigurationError, DimensionError
from .estimators import EstimatorOutput
from .linalg import check_symmetric, default_tol, pinv, sym_eig, truncate_to_rank
from .model import Dimensions


@dataclass(frozen=True)
class LossValue:
    value: float
    trace_term: float
    logdet_term: float
    q: int


def _as_output(sigma_hat, q: int, tol: float | None) -> EstimatorOutput:
    if isinstance(sigma_hat, EstimatorOutput):
        if sigma_hat.rank != q:
            raise DimensionError(f"estimate has rank {sigma_hat.rank}, expected q={q}")
        return sigma_hat
    eig = truncate_to_rank(sym_eig(sigma_hat), q, tol)
    return EstimatorOutput(scale=1.0, vectors=eig.vectors, values=eig.values)


def surrogate_matrix(estimate: EstimatorOutput, sigma_pinv) -> NDArray[np.float64]:
    """q x q symmetric matrix sharing the positive spectrum of ``Sigma^+ Sigma_hat``."""
    H = estimate.vectors
    G = H.T @ sigma_pinv @ H
    root = np.sqrt(estimate.values)
    M = estimate.scale * (root[:, None] * G * root[None, :])
    return 0.5 * (M + M.T)


def positive_spectrum(estimate: EstimatorOutput, sigma_pinv, tol: float | None = None) -> NDArray[np.float64]:
    """The q positive eigenvalues of ``Sigma^+ Sigma_hat``, descending.

    Raises
    ------
    DegenerateConfigurationError
        If fewer than q of them exceed ``tol * lambda_max``.
    """
    q = estimate.rank
    M = surrogate_matrix(estimate, sigma_pinv)
    lam = np.linalg.eigvalsh(M)[::-1]
    if tol is None:
        tol = default_tol(np.shape(sigma_pinv)[0])
    top = lam[0] if q else 0.0
    observed = int(np.count_nonzero(lam > tol * top)) if top > 0 else 0
    if observed < q:
        raise DegenerateConfigurationError(
            f"Sigma^+ Sigma_hat has {observed} positive eigenvalues, expected {q}",
            observed_rank=observed,
            required_rank=q,
        )
    return lam


def stein_loss(sigma_hat, sigma, dims: Dimensions, tol: float | None = None, sigma_pinv=None) -> LossValue:
    """Stein loss ``tr(Sigma^+ Sigma_hat) - ln|Lambda(Sigma^+ Sigma_hat)| - q``.

    Parameters
    ----------
    sigma_hat : EstimatorOutput or array_like
        The estimate. A dense matrix is first reduced to its q leading
        eigenpairs.
    sigma : array_like, shape (p, p)
        Population covariance of rank r. Ignored for the pseudoinverse when
        ``sigma_pinv`` is supplied (useful inside Monte Carlo loops).
    dims : Dimensions
        Supplies ``q = min(n, r)``.
    tol : float, optional
        Relative cutoff for the positive-eigenvalue count.
    sigma_pinv : array_like, optional
        Precomputed ``Sigma^+``.
    """
    q = dims.q
    estimate = _as_output(sigma_hat, q, tol)
    if sigma_pinv is None:
        sigma_pinv = pinv(check_symmetric(sigma, "sigma"), tol)
    sigma_pinv = np.asarray(sigma_pinv, dtype=np.float64)
    if sigma_pinv.shape != (estimate.vectors.shape[0],) * 2:
        raise DimensionError(
            f"covariance has shape {sigma_pinv.shape}, estimate has dimension "
            f"{estimate.vectors.shape[0]}"
        )
    lam = positive_spectrum(estimate, sigma_pinv, tol)
    trace_term = float(np.sum(lam))
    logdet_term = float(np.sum(np.log(lam)))
    return LossValue(
        value=trace_term - logdet_term - q,
        trace_term=trace_term,
        logdet_term=logdet_term,
        q=q,
    )


def logdet_factorization_check(a: float, H, L, phi, sigma, tol: float | None = None) -> float:
    """Residual of ``ln|Lambda| = q ln a + ln|L^1/2 H^T Sigma^+ H L^1/2| + ln|Phi|``.

    The left side comes from the spectrum of ``Sigma^+ Sigma_hat`` for
    ``Sigma_hat = a H diag(L phi) H^T``; the right side from separate
    determinants of the two q x q factors.

    Raises
    ------
    DegenerateConfigurationError
        If ``L^1/2 H^T Sigma^+ H L^1/2`` is numerically singular.
    """
    H = np.asarray(H, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    q = L.shape[0]
    sigma_pinv = pinv(sigma, tol)
    estimate = EstimatorOutput(scale=float(a), vectors=H, values=L * phi)
    lhs = float(np.sum(np.log(positive_spectrum(estimate, sigma_pinv, tol))))

    root = np.sqrt(L)
    inner = root[:, None] * (H.T @ sigma_pinv @ H) * root[None, :]
    sign, logabs = np.linalg.slogdet(inner)
    if sign <= 0:
        raise DegenerateConfigurationError(
            "L^1/2 H^T Sigma^+ H L^1/2 is singular", observed_rank=q - 1, required_rank=q
        )
    rhs = q * np.log(a) + logabs + float(np.sum(np.log(phi)))
    return abs(lhs - rhs)
