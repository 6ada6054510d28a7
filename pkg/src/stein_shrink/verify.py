"""Numerical checks of the inequalities behind the Haff dominance result.

Each check evaluates one computable inequality on a concrete eigenvalue
vector. ``run_trials`` sweeps random spectra and reports which checks are
asserted (inside their proven domain) and which are only observed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .estimators import ShrinkageRule, dominance_bound, optimal_constant, psi_haff
from .model import Dimensions

ABS_TOL = 1e-10


@dataclass(frozen=True)
class ProofDiagnostics:
    majorization_ok: bool
    trace_submult_ok: bool
    log_bound_gap: float
    risk_diff_bound: float


def majorization_sums(L, rule: ShrinkageRule) -> np.ndarray:
    """``sum_{j>i} (l_i phi_i - l_j phi_j) / (l_i - l_j)`` for each i (0-based)."""
    L = np.asarray(L, dtype=np.float64)
    if np.any(np.diff(L) >= 0):
        raise ParameterError("eigenvalues must be strictly decreasing (ties give 0/0)")
    phi = 1.0 + psi_haff(L, rule)
    lp = L * phi
    num = lp[:, None] - lp[None, :]
    den = L[:, None] - L[None, :]
    upper = np.triu(np.ones_like(den, dtype=bool), k=1)
    ratio = np.divide(num, den, out=np.zeros_like(num), where=upper)
    return ratio.sum(axis=1)


def check_majorization(L, rule: ShrinkageRule) -> np.ndarray:
    """Per-index truth of ``majorization_sums[i] <= q - i`` (1-based i)."""
    sums = majorization_sums(L, rule)
    q = sums.size
    limits = q - np.arange(1, q + 1)
    return sums <= limits + ABS_TOL


def check_trace_submult(L, alpha: float) -> bool:
    """``tr(L^-2a) <= tr(L^-a)^2`` up to relative roundoff."""
    L = np.asarray(L, dtype=np.float64)
    w = (L.min() / L) ** alpha
    lhs = np.sum(w * w)
    rhs = np.sum(w) ** 2
    return bool(lhs <= rhs * (1.0 + 1e-12))


def check_log_bound(L, rule: ShrinkageRule) -> float:
    """Gap ``ln|I + Psi(L)| - 2b / (2 + b)``; nonnegative in exact arithmetic."""
    psi = psi_haff(L, rule)
    return float(np.sum(np.log1p(psi)) - 2.0 * rule.b / (2.0 + rule.b))


def risk_diff_upper_bound(dims: Dimensions, b: float) -> float:
    """Upper bound ``b (a_o (m - q + 1) - 2 / (2 + b))`` on the risk difference.

    Nonpositive exactly when ``0 < b <= b_o``.
    """
    if not b > 0:
        raise ParameterError(f"b must be positive, got {b}")
    a_o = optimal_constant(dims)
    return b * (a_o * (dims.m - dims.q + 1) - 2.0 / (2.0 + b))


def diagnose(L, rule: ShrinkageRule, dims: Dimensions) -> ProofDiagnostics:
    return ProofDiagnostics(
        majorization_ok=bool(np.all(check_majorization(L, rule))),
        trace_submult_ok=check_trace_submult(L, rule.alpha),
        log_bound_gap=check_log_bound(L, rule),
        risk_diff_bound=risk_diff_upper_bound(dims, rule.b),
    )


def random_spectrum(q: int, rng: np.random.Generator) -> np.ndarray:
    """Strictly decreasing positive vector with a random log-scale spread."""
    while True:
        spread = rng.uniform(0.1, 3.0)
        L = np.sort(np.exp(spread * rng.standard_normal(q)))[::-1]
        if q == 1 or np.all(np.diff(L) < 0):
            return L


@dataclass(frozen=True)
class TrialResult:
    trial: int
    alpha: float
    b: float
    diagnostics: ProofDiagnostics
    in_domain: bool
    failures: tuple[str, ...]


def in_proof_domain(rule: ShrinkageRule, b_o: float) -> bool:
    """``alpha >= 1`` and ``0 < b <= b_o``, where every check is a theorem."""
    return rule.alpha >= 1 and rule.b <= b_o * (1 + 1e-12)


def asserted_failures(diag: ProofDiagnostics, rule: ShrinkageRule, b_o: float) -> tuple[str, ...]:
    """Names of checks that fail inside the proof domain; empty outside it."""
    if not in_proof_domain(rule, b_o):
        return ()
    failed = []
    if not diag.majorization_ok:
        failed.append("majorization")
    if not diag.trace_submult_ok:
        failed.append("trace_submult")
    if diag.log_bound_gap < -ABS_TOL:
        failed.append("log_bound")
    if diag.risk_diff_bound > ABS_TOL:
        failed.append("risk_diff_bound")
    return tuple(failed)


def run_trials(dims: Dimensions, alphas, bs=None, trials: int = 100, seed: int = 0) -> list[TrialResult]:
    """Evaluate the diagnostics on ``trials`` random spectra per (alpha, b) pair.

    ``bs`` defaults to ``[b_o]`` (or ``[1.0]`` when ``b_o = 0``). A trial is
    "in domain" when ``alpha >= 1`` and ``0 < b <= b_o``.
    """
    q = dims.q
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b_o = dominance_bound(dims)
    if bs is None:
        bs = [b_o] if b_o > 0 else [1.0]
    rng = np.random.default_rng(seed)
    results = []
    for alpha in alphas:
        for b in bs:
            rule = ShrinkageRule(alpha=float(alpha), b=float(b))
            in_domain = in_proof_domain(rule, b_o)
            for t in range(trials):
                L = random_spectrum(q, rng)
                diag = diagnose(L, rule, dims)
                results.append(
                    TrialResult(t, rule.alpha, rule.b, diag, in_domain, asserted_failures(diag, rule, b_o))
                )
    return results

