import math

import numpy as np
import pytest

from stein_shrink.bench import (
    CSV_COLUMNS,
    EstimatorKind,
    ExperimentConfig,
    PrialReport,
    RiskEstimate,
    estimate_risk,
    prial,
    resolve_workers,
    run_table,
    table1_configs,
)
from stein_shrink.errors import DimensionError, ParameterError, ReplicationError
from stein_shrink.model import CovarianceSpec


def small_config(**kw):
    base = dict(spec=CovarianceSpec("ar", 8, 5), n=4, alphas=(1.0, 3.0), replications=40, master_seed=9)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_empty_alphas(self):
        with pytest.raises(ParameterError):
            small_config(alphas=())

    def test_min_replications(self):
        with pytest.raises(ParameterError):
            small_config(replications=1)

    def test_seed_range(self):
        small_config(master_seed=2**64 - 1)
        with pytest.raises(ParameterError):
            small_config(master_seed=2**64)

    def test_bad_n(self):
        with pytest.raises(DimensionError):
            small_config(n=0)

    def test_table1_grid(self):
        configs = table1_configs(replications=10)
        assert len(configs) == 20
        assert {c.spec.structure for c in configs} == {"identity", "ar"}
        triples = [(c.spec.p, c.n, c.spec.r) for c in configs[:10]]
        assert triples == [
            (30, 50, 10), (30, 50, 20), (30, 50, 30),
            (50, 30, 20), (50, 30, 40), (50, 30, 50),
            (150, 30, 20), (150, 30, 40), (150, 30, 60), (150, 30, 150),
        ]
        assert all(c.spec.rho == 0.9 for c in configs)


class TestEstimateRisk:
    def test_positive_risk(self):
        risk = estimate_risk(small_config(), EstimatorKind.optimal())
        assert risk.mean_loss > 0
        assert risk.std_error > 0
        assert risk.replications == 40

    def test_deterministic(self):
        a = estimate_risk(small_config(), EstimatorKind.haff(2.0))
        b = estimate_risk(small_config(), EstimatorKind.haff(2.0))
        assert a == b
        np.testing.assert_array_equal(a.losses, b.losses)

    def test_scalar_chi_square_oracle(self):
        # p = r = n = 1 and a = 1: loss is x - ln x - 1 with x ~ chi^2_1,
        # whose mean is -E[ln chi^2_1] = euler_gamma + ln 2.
        oracle_rng = np.random.default_rng(123456)
        x = oracle_rng.chisquare(1, size=1_000_000)
        vals = x - np.log(x) - 1
        oracle_mean = vals.mean()
        oracle_se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(oracle_mean - (np.euler_gamma + math.log(2))) <= 4 * oracle_se

        config = ExperimentConfig(CovarianceSpec("identity", 1, 1), n=1, alphas=(1.0,), replications=20_000, master_seed=5)
        risk = estimate_risk(config, EstimatorKind.natural(1.0))
        assert abs(risk.mean_loss - oracle_mean) <= 4 * math.hypot(risk.std_error, oracle_se)

    def test_common_random_numbers(self):
        config = small_config()
        a = estimate_risk(config, EstimatorKind.optimal(), digests=True)
        b = estimate_risk(config, EstimatorKind.haff(3.0), digests=True)
        assert a.digests == b.digests
        assert len(set(a.digests)) == config.replications

    def test_replication_error_carries_index(self):
        with pytest.raises(ReplicationError) as info:
            estimate_risk(small_config(), EstimatorKind("bogus"))
        assert info.value.replication == 0

    def test_worker_invariance(self):
        config = small_config(replications=80)
        serial = estimate_risk(config, EstimatorKind.haff(1.0), workers=1)
        parallel = estimate_risk(config, EstimatorKind.haff(1.0), workers=3)
        np.testing.assert_array_equal(serial.losses, parallel.losses)
        assert serial == parallel


class TestPrial:
    def test_equal(self):
        r = RiskEstimate(2.0, 0.1, 100)
        assert prial(r, r)[0] == 0.0

    def test_half(self):
        assert prial(RiskEstimate(2.0, 0.1, 100), RiskEstimate(1.0, 0.1, 100))[0] == pytest.approx(50.0)

    def test_nonpositive_reference(self):
        with pytest.raises(ParameterError):
            prial(RiskEstimate(0.0, 0.1, 10), RiskEstimate(1.0, 0.1, 10))

    def test_self_prial_zero(self):
        ref = estimate_risk(small_config(), EstimatorKind.optimal())
        value, se = prial(ref, ref)
        assert value == 0.0
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_paired_se_matches_delta_method(self, rng):
        ref_l = rng.gamma(3.0, 1.0, size=500)
        alt_l = 0.8 * ref_l + rng.normal(0, 0.1, size=500)
        ref, alt = RiskEstimate.from_losses(ref_l), RiskEstimate.from_losses(alt_l)
        value, se = prial(ref, alt)
        # gradient of 100 (R - A) / R with respect to (A, R), covariance of the means
        A, R = alt_l.mean(), ref_l.mean()
        grad = np.array([-100 / R, 100 * A / R**2])
        cov = np.cov(np.vstack([alt_l, ref_l])) / 500
        assert value == pytest.approx(100 * (R - A) / R)
        assert se == pytest.approx(math.sqrt(grad @ cov @ grad), rel=1e-10)

    def test_unpaired_fallback(self):
        value, se = prial(RiskEstimate(2.0, 0.1, 100), RiskEstimate(1.0, 0.1, 100))
        assert se == pytest.approx(100 / 2 * math.sqrt(0.01 + 0.25 * 0.01))


class TestRunTable:
    def test_minimal(self):
        report = run_table([small_config(replications=2)], workers=1)
        assert [r.alpha for r in report.rows] == [1.0, 3.0]
        assert all(r.replications == 2 and r.seed == 9 for r in report.rows)

    def test_rows_consistent_with_risks(self):
        config = small_config()
        report = run_table([config], workers=1)
        risks = report.risks[("ar", 8, 4, 5)]
        ref = risks["optimal"]
        for row in report.rows:
            alt = risks[EstimatorKind.haff(row.alpha).label]
            assert row.prial_percent == pytest.approx(100 * (ref.mean_loss - alt.mean_loss) / ref.mean_loss, abs=1e-10)

    def test_matches_estimate_risk(self):
        config = small_config()
        report = run_table([config], workers=1)
        alone = estimate_risk(config, EstimatorKind.haff(3.0))
        assert report.risks[("ar", 8, 4, 5)][EstimatorKind.haff(3.0).label] == alone

    def test_csv_round_trip(self):
        report = run_table([small_config(), small_config(spec=CovarianceSpec("identity", 6, 6), n=9)], workers=1)
        text = report.to_csv()
        assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
        assert "\r" not in text
        assert PrialReport.from_csv(text).rows == report.rows

    def test_markdown(self):
        md = run_table([small_config()], workers=1).to_markdown()
        assert "| ar | (8, 4) | 5 |" in md
        assert "alpha=3" in md

    def test_fixed_b(self):
        report = run_table([small_config(b=0.1)], workers=1)
        default = run_table([small_config()], workers=1)
        assert report.rows[0].prial_percent != default.rows[0].prial_percent


class TestWorkers:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("STEIN_SHRINK_THREADS", "2")
        assert resolve_workers(8) == 2
        assert resolve_workers(1) == 1

    def test_env_invalid(self, monkeypatch):
        monkeypatch.setenv("STEIN_SHRINK_THREADS", "zero")
        with pytest.raises(ParameterError):
            resolve_workers(4)

    def test_default(self, monkeypatch):
        monkeypatch.delenv("STEIN_SHRINK_THREADS", raising=False)
        assert resolve_workers() >= 1

    def test_env_sets_default(self, monkeypatch):
        monkeypatch.setenv("STEIN_SHRINK_THREADS", "8")
        assert resolve_workers() == 8
