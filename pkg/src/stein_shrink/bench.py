"""Monte Carlo risk estimation and PRIAL tables.

Replication ``k`` of a setting draws its data from the stream
``make_stream(master_seed, k)``, and every estimator in the setting is
evaluated on that same draw (common random numbers). Losses are gathered in
replication order, so results do not depend on how many worker processes
ran them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ParameterError, ReplicationError, SteinShrinkError
from .estimators import (
    EstimatorOutput,
    ShrinkageRule,
    default_rule,
    haff_from_eigensystem,
    oi_estimate,
    optimal_from_eigensystem,
    sample_eigensystem,
)
from .linalg import EigenSystem, pinv
from .loss import stein_loss
from .model import (
    UINT64_MAX,
    CovarianceSpec,
    Dimensions,
    build_sigma,
    factorize,
    make_stream,
    sample_cov,
    sample_data,
)

THREADS_ENV = "STEIN_SHRINK_THREADS"
MIN_CHUNK = 25
DEFAULT_REPLICATIONS = 1000
TABLE1_ALPHAS = (1.0, 2.0, 3.0, 4.0, 5.0)
TABLE1_SETTINGS = (
    (30, 50, (10, 20, 30)),
    (50, 30, (20, 40, 50)),
    (150, 30, (20, 40, 60, 150)),
)
CSV_COLUMNS = ("structure", "p", "n", "r", "alpha", "prial_percent", "se_percent", "replications", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    """One (structure, p, n, r) setting with the alphas to compare.

    ``b`` fixes the Haff mass for every alpha; ``None`` uses ``b_o``.
    """

    spec: CovarianceSpec
    n: int
    alphas: tuple[float, ...]
    replications: int = DEFAULT_REPLICATIONS
    master_seed: int = 0
    tol: float | None = None
    b: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.alphas:
            raise ParameterError("alphas must be nonempty")
        if any(not a > 0 for a in self.alphas):
            raise ParameterError(f"alphas must be positive, got {self.alphas}")
        if self.replications < 2:
            raise ParameterError(f"need at least 2 replications, got {self.replications}")
        if not 0 <= self.master_seed <= UINT64_MAX:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.b is not None and not self.b > 0:
            raise ParameterError(f"b must be positive, got {self.b}")
        # validates n against the covariance dimensions
        self.dims

    @property
    def dims(self) -> Dimensions:
        return Dimensions(p=self.spec.p, n=self.n, r=self.spec.r)

    def rule(self, alpha: float) -> ShrinkageRule:
        if self.b is None:
            return default_rule(self.dims, alpha)
        return ShrinkageRule(alpha=alpha, b=self.b)


@dataclass(frozen=True)
class EstimatorKind:
    """Picklable description of an estimator evaluated from the eigensystem of S."""

    kind: str
    a: float | None = None
    alpha: float | None = None
    b: float | None = None

    @classmethod
    def optimal(cls) -> EstimatorKind:
        return cls("optimal")

    @classmethod
    def natural(cls, a: float) -> EstimatorKind:
        return cls("natural", a=a)

    @classmethod
    def haff(cls, alpha: float, b: float | None = None) -> EstimatorKind:
        return cls("haff", alpha=alpha, b=b)

    def apply(self, eig: EigenSystem, dims: Dimensions) -> EstimatorOutput:
        if self.kind == "optimal":
            return optimal_from_eigensystem(eig, dims)
        if self.kind == "natural":
            return oi_estimate(eig, np.zeros_like(eig.values), self.a)
        if self.kind == "haff":
            rule = default_rule(dims, self.alpha) if self.b is None else ShrinkageRule(self.alpha, self.b)
            return haff_from_eigensystem(eig, dims, rule)
        raise ParameterError(f"unknown estimator kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "natural":
            return f"natural(a={self.a!r})"
        if self.kind == "haff":
            return f"haff(alpha={self.alpha!r}, b={'b_o' if self.b is None else repr(self.b)})"
        return self.kind


@dataclass(frozen=True)
class RiskEstimate:
    """Sample mean of the loss with its standard error ``sd / sqrt(N)``.

    ``losses`` keeps the per-replication values (in replication order) for
    paired comparisons; ``digests`` optionally fingerprints each data draw.
    """

    mean_loss: float
    std_error: float
    replications: int
    losses: np.ndarray | None = field(default=None, repr=False, compare=False)
    digests: tuple[str, ...] | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_losses(cls, losses, digests=None) -> RiskEstimate:
        losses = np.asarray(losses, dtype=np.float64)
        n = losses.size
        se = float(np.std(losses, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return cls(float(np.mean(losses)), se, n, losses, None if digests is None else tuple(digests))


@dataclass(frozen=True)
class PrialRow:
    structure: str
    p: int
    n: int
    r: int
    alpha: float
    prial_percent: float
    se_percent: float
    replications: int
    seed: int


@dataclass
class PrialReport:
    """PRIAL rows plus the risk estimates they were computed from.

    ``risks`` maps ``(structure, p, n, r)`` to a dict of estimator label to
    :class:`RiskEstimate`; it is not serialized.
    """

    rows: list[PrialRow]
    risks: dict = field(default_factory=dict, compare=False, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(
                [
                    row.structure,
                    row.p,
                    row.n,
                    row.r,
                    repr(float(row.alpha)),
                    repr(float(row.prial_percent)),
                    repr(float(row.se_percent)),
                    row.replications,
                    row.seed,
                ]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> PrialReport:
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != CSV_COLUMNS:
            raise ParameterError(f"unexpected CSV header {header}")
        rows = []
        for rec in reader:
            if not rec:
                continue
            s, p, n, r, alpha, prial_pct, se_pct, reps, seed = rec
            rows.append(
                PrialRow(s, int(p), int(n), int(r), float(alpha), float(prial_pct), float(se_pct), int(reps), int(seed))
            )
        return cls(rows)

    def to_markdown(self) -> str:
        alphas = sorted({row.alpha for row in self.rows})
        groups: dict[tuple, dict[float, PrialRow]] = {}
        for row in self.rows:
            groups.setdefault((row.structure, row.p, row.n, row.r), {})[row.alpha] = row
        head = ["structure", "(p, n)", "r"] + [f"alpha={a:g}" for a in alphas]
        lines = [
            "# PRIAL of Haff-type estimators relative to a_o S",
            "",
            "Entries are PRIAL % ± standard error (delta method on paired per-replication losses).",
            "",
            "| " + " | ".join(head) + " |",
            "|" + "---|" * len(head),
        ]
        for (structure, p, n, r), by_alpha in groups.items():
            cells = [structure, f"({p}, {n})", str(r)]
            for a in alphas:
                row = by_alpha.get(a)
                cells.append("" if row is None else f"{row.prial_percent:.2f} ± {row.se_percent:.2f}")
            lines.append("| " + " | ".join(cells) + " |")
        if self.rows:
            reps = sorted({row.replications for row in self.rows})
            seeds = sorted({row.seed for row in self.rows})
            lines += ["", f"Replications: {', '.join(map(str, reps))}. Seed: {', '.join(map(str, seeds))}."]
        return "\n".join(lines) + "\n"


# -- replication engine -----------------------------------------------------


@dataclass(frozen=True)
class _Setting:
    dims: Dimensions
    factor: np.ndarray
    sigma_pinv: np.ndarray
    master_seed: int
    tol: float | None
    estimators: tuple[EstimatorKind, ...]


def _prepare(config: ExperimentConfig, estimators) -> _Setting:
    sigma = build_sigma(config.spec)
    return _Setting(
        dims=config.dims,
        factor=factorize(sigma, config.spec.r, config.tol),
        sigma_pinv=pinv(sigma, config.tol),
        master_seed=config.master_seed,
        tol=config.tol,
        estimators=tuple(estimators),
    )


def _digest(X: np.ndarray) -> str:
    return hashlib.blake2b(np.ascontiguousarray(X).tobytes(), digest_size=16).hexdigest()


def _run_chunk(setting: _Setting, start: int, stop: int, want_digests: bool):
    losses = np.empty((stop - start, len(setting.estimators)))
    digests = []
    dims = setting.dims
    for k in range(start, stop):
        X = sample_data(setting.factor, dims.n, make_stream(setting.master_seed, k))
        if want_digests:
            digests.append(_digest(X))
        try:
            eig = sample_eigensystem(sample_cov(X), dims, setting.tol)
            for j, est in enumerate(setting.estimators):
                out = est.apply(eig, dims)
                losses[k - start, j] = stein_loss(out, None, dims, setting.tol, sigma_pinv=setting.sigma_pinv).value
        except SteinShrinkError as exc:
            raise ReplicationError(f"replication {k} failed: {exc}", k) from exc
    return losses, digests


def _serial_chunk(args):
    with threadpool_limits(limits=1):
        return _run_chunk(*args)


def _init_worker():
    threadpool_limits(limits=1)


def resolve_workers(workers: int | None = None) -> int:
    """Worker count from ``workers`` and the ``STEIN_SHRINK_THREADS`` variable.

    An explicit ``workers`` is capped by the variable. Otherwise the variable
    is used if set, else the CPU count.
    """
    cap = os.environ.get(THREADS_ENV)
    cap_value = None
    if cap:
        try:
            cap_value = int(cap)
        except ValueError:
            raise ParameterError(f"{THREADS_ENV} must be a positive integer, got {cap!r}") from None
        if cap_value < 1:
            raise ParameterError(f"{THREADS_ENV} must be a positive integer, got {cap!r}")
    if workers is None:
        workers = cap_value if cap_value is not None else (os.cpu_count() or 1)
    elif cap_value is not None:
        workers = min(workers, cap_value)
    return max(1, int(workers))


def _simulate(settings: list[_Setting], replications: list[int], workers: int | None, want_digests: bool):
    """Loss matrices (replications x estimators) and digests for each setting."""
    workers = resolve_workers(workers)
    tasks = []
    for idx, (setting, reps) in enumerate(zip(settings, replications)):
        chunk = max(MIN_CHUNK, math.ceil(reps / (4 * workers))) if workers > 1 else reps
        for start in range(0, reps, chunk):
            tasks.append((idx, (setting, start, min(reps, start + chunk), want_digests)))

    if workers == 1:
        results = [_serial_chunk(args) for _, args in tasks]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_init_worker) as pool:
            futures = [pool.submit(_run_chunk, *args) for _, args in tasks]
            results = [f.result() for f in futures]

    out = []
    for idx in range(len(settings)):
        parts = [res for (i, _), res in zip(tasks, results) if i == idx]
        losses = np.concatenate([p[0] for p in parts], axis=0)
        digests = [d for p in parts for d in p[1]] if want_digests else None
        out.append((losses, digests))
    return out


def estimate_risk(
    config: ExperimentConfig,
    estimator: EstimatorKind,
    workers: int | None = 1,
    digests: bool = False,
) -> RiskEstimate:
    """Monte Carlo Stein risk of one estimator over ``config.replications`` draws.

    Deterministic in ``config.master_seed`` and independent of ``workers``.

    Raises
    ------
    ReplicationError
        If a replication hits a rank or degeneracy error; ``.replication``
        holds its index.
    """
    setting = _prepare(config, [estimator])
    [(losses, dig)] = _simulate([setting], [config.replications], workers, digests)
    return RiskEstimate.from_losses(losses[:, 0], dig)


def prial(risk_ref: RiskEstimate, risk_alt: RiskEstimate) -> tuple[float, float]:
    """PRIAL in percent of ``risk_alt`` relative to ``risk_ref`` and its standard error.

    ``100 (R_ref - R_alt) / R_ref``. With paired per-replication losses the
    error is the delta-method SE ``100 / R_ref * sd(alt_k - (R_alt/R_ref) ref_k) / sqrt(N)``;
    otherwise the two estimates are treated as independent.
    """
    ref, alt = risk_ref.mean_loss, risk_alt.mean_loss
    if not ref > 0:
        raise ParameterError(f"reference risk must be positive, got {ref}")
    value = 100.0 * (ref - alt) / ref
    ratio = alt / ref
    paired = (
        risk_ref.losses is not None
        and risk_alt.losses is not None
        and risk_ref.losses.shape == risk_alt.losses.shape
        and risk_ref.losses.size > 1
    )
    if paired:
        influence = risk_alt.losses - ratio * risk_ref.losses
        se = 100.0 / ref * float(np.std(influence, ddof=1)) / math.sqrt(influence.size)
    else:
        se = 100.0 / ref * math.sqrt(risk_alt.std_error**2 + (ratio * risk_ref.std_error) ** 2)
    return value, se


def run_table(configs, workers: int | None = None) -> PrialReport:
    """PRIAL of the Haff estimator for every config and alpha against ``a_o S``.

    All estimators of one config share the same data draws.
    """
    configs = list(configs)
    settings = [
        _prepare(c, [EstimatorKind.optimal()] + [EstimatorKind.haff(a, c.b) for a in c.alphas])
        for c in configs
    ]
    # validate b before spending time on sampling
    for c in configs:
        for a in c.alphas:
            c.rule(a)
    simulated = _simulate(settings, [c.replications for c in configs], workers, False)

    rows = []
    risks = {}
    for config, setting, (losses, _) in zip(configs, settings, simulated):
        spec = config.spec
        key = (spec.structure, spec.p, config.n, spec.r)
        ref = RiskEstimate.from_losses(losses[:, 0])
        risks[key] = {setting.estimators[0].label: ref}
        for j, alpha in enumerate(config.alphas, start=1):
            alt = RiskEstimate.from_losses(losses[:, j])
            risks[key][setting.estimators[j].label] = alt
            value, se = prial(ref, alt)
            rows.append(
                PrialRow(spec.structure, spec.p, config.n, spec.r, alpha, value, se, config.replications, config.master_seed)
            )
    return PrialReport(rows, risks)


def table1_configs(
    replications: int = DEFAULT_REPLICATIONS,
    master_seed: int = 0,
    rho: float = 0.9,
    alphas=TABLE1_ALPHAS,
    structures=("identity", "ar"),
) -> list[ExperimentConfig]:
    """The 20 benchmark settings: two structures x ten (p, n, r) triples."""
    return [
        ExperimentConfig(
            spec=CovarianceSpec(structure, p, r, rho),
            n=n,
            alphas=tuple(alphas),
            replications=replications,
            master_seed=master_seed,
        )
        for structure in structures
        for p, n, rs in TABLE1_SETTINGS
        for r in rs
    ]

