"""Tests for posterior summaries and chain diagnostics."""

import numpy as np
import pytest

from app.models.dto import BasisSpec, ChainRecord, PriorConfig
from app.models.errors import InvalidArgumentError
from app.services import linalg
from app.services.basis import eval_drift
from app.services.posterior import (
    acceptance_table,
    credible_bands,
    default_grid,
    diagnostics,
    integrated_autocorr_time,
    rao_blackwell_mean,
    summarize,
)
from app.services.sampler import DriftSampler
from app.services.suffstats import compute


@pytest.fixture
def spec():
    return BasisSpec(family="fourier", beta=1.5, j_max=4)


def _record(iteration, theta, j=None, s_sq=1.0, proposed_j=None, accept=1.0, j_from=None):
    theta = np.asarray(theta, dtype=np.float64)
    j = j if j is not None else (theta.size + 1) // 2
    return ChainRecord(
        iteration=iteration,
        j_from=j_from if j_from is not None else j,
        j=j,
        s_sq=s_sq,
        theta=theta,
        posterior_mean=theta,
        proposed_j=proposed_j if proposed_j is not None else j,
        model_accept_prob=accept,
        model_accepted=accept > 0.5,
    )


@pytest.fixture
def records():
    """Twenty records mixing models 1 and 2."""
    rng = np.random.default_rng(5)
    out = []
    for i in range(20):
        size = 1 if i % 3 == 0 else 3
        out.append(_record(i, rng.standard_normal(size), s_sq=float(rng.uniform(0.5, 2.0))))
    return out


class TestRaoBlackwellMean:
    """Tests for the averaged posterior-mean drift."""

    def test_single_record(self, spec):
        """One record gives its own posterior-mean curve."""
        grid = default_grid(11)
        record = _record(0, [0.5, -1.0, 2.0])
        np.testing.assert_allclose(
            rao_blackwell_mean([record], spec, grid), eval_drift(spec, record.posterior_mean, grid)
        )

    def test_mixed_models(self, spec):
        """Curves of different models are averaged as functions."""
        grid = default_grid(21)
        a = _record(0, [1.0])
        b = _record(1, [0.0, 1.0, 0.0])
        expected = 0.5 * (eval_drift(spec, a.theta, grid) + eval_drift(spec, b.theta, grid))
        np.testing.assert_allclose(rao_blackwell_mean([a, b], spec, grid), expected, atol=1e-14)

    def test_order_invariant(self, spec, records):
        """Shuffling the records does not change the result."""
        grid = default_grid(51)
        shuffled = list(records)
        np.random.default_rng(0).shuffle(shuffled)
        np.testing.assert_array_equal(rao_blackwell_mean(records, spec, grid), rao_blackwell_mean(shuffled, spec, grid))

    def test_empty(self, spec):
        """No records is an error."""
        with pytest.raises(InvalidArgumentError):
            rao_blackwell_mean([], spec, default_grid())

    def test_conjugate_fixed_model(self, spec, random_path):
        """With j and s^2 fixed the mean is the exact conditional posterior mean."""
        sampler = DriftSampler(spec, PriorConfig.for_family("fourier"), seed=1, fixed_level=2, fixed_scale=1.0)
        chain = sampler.run_continuous(random_path, 20, 5)
        factor = linalg.factor_for(compute(spec, random_path), 1.0, 2)
        grid = default_grid(31)
        expected = eval_drift(spec, linalg.posterior_mean(factor), grid)
        np.testing.assert_allclose(rao_blackwell_mean(chain.records, spec, grid), expected, rtol=1e-12, atol=1e-12)


class TestCredibleBands:
    """Tests for pointwise credible bands."""

    def test_ordering(self, spec, records):
        """lo <= hi everywhere."""
        lo, hi = credible_bands(records, spec, default_grid(41))
        assert np.all(lo <= hi)

    def test_alpha_one_is_median(self, spec, records):
        """alpha = 1 collapses both bands to the pointwise median."""
        grid = default_grid(41)
        lo, hi = credible_bands(records, spec, grid, alpha=1.0)
        curves = np.vstack([eval_drift(spec, r.theta, grid) for r in records])
        np.testing.assert_allclose(lo, np.median(curves, axis=0))
        np.testing.assert_array_equal(lo, hi)

    def test_narrower_with_alpha(self, spec, records):
        """Larger alpha gives nested, narrower bands."""
        grid = default_grid(41)
        lo_wide, hi_wide = credible_bands(records, spec, grid, alpha=0.05)
        lo_narrow, hi_narrow = credible_bands(records, spec, grid, alpha=0.5)
        assert np.all(lo_wide <= lo_narrow + 1e-12)
        assert np.all(hi_narrow <= hi_wide + 1e-12)

    def test_gaussian_width(self, spec):
        """For Gaussian coefficients the bands are mean -/+ 1.645 sd of the curve."""
        rng = np.random.default_rng(21)
        tau = 0.5
        draws = np.array([1.0, 0.0, 0.0]) + tau * rng.standard_normal((20_000, 3))
        records = [_record(i, theta) for i, theta in enumerate(draws)]
        grid = default_grid(21)
        lo, hi = credible_bands(records, spec, grid, alpha=0.10)
        # psi_1^2 + psi_2^2 + psi_3^2 = 3 at every x
        sd = tau * np.sqrt(3.0)
        np.testing.assert_allclose(lo, 1.0 - 1.6448536 * sd, atol=0.05 * sd)
        np.testing.assert_allclose(hi, 1.0 + 1.6448536 * sd, atol=0.05 * sd)

    def test_too_few_records(self, spec, records):
        """Fewer than ten records cannot give bands."""
        with pytest.raises(InvalidArgumentError):
            credible_bands(records[:9], spec, default_grid())

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
    def test_invalid_alpha(self, spec, records, alpha):
        """alpha must lie in (0, 1]."""
        with pytest.raises(InvalidArgumentError):
            credible_bands(records, spec, default_grid(), alpha=alpha)


class TestDiagnostics:
    """Tests for trace, model and scale diagnostics."""

    def test_histograms(self, spec, records):
        """Model and s^2 histograms count every record."""
        diag = diagnostics(records, spec)
        assert sum(diag.model_histogram.values()) == len(records)
        assert diag.s_sq_hist_counts.sum() == len(records)
        assert set(diag.model_histogram) == {1, 2}

    def test_traces(self, spec, records):
        """Traces hold the drift at the design points, running means their averages."""
        diag = diagnostics(records, spec, design_points=[0.25, 0.75])
        assert diag.traces.shape == (20, 2)
        np.testing.assert_allclose(diag.running_means[-1], diag.traces.mean(axis=0))
        assert diag.traces[0, 0] == pytest.approx(eval_drift(spec, records[0].theta, 0.25))

    def test_scale_summary(self, spec, records):
        """Mean and median of s^2 are reported."""
        diag = diagnostics(records, spec)
        s_sq = np.array([r.s_sq for r in records])
        assert diag.s_sq_mean == pytest.approx(s_sq.mean())
        assert diag.s_sq_median == pytest.approx(np.median(s_sq))
        assert diag.mean_j == pytest.approx(np.mean([r.j for r in records]))

    def test_segment_acceptance(self, spec, records):
        """Per-segment counts become rates over all iterations."""
        diag = diagnostics(records, spec, segment_accept_counts=np.array([10, 5, 0]), n_iterations=20)
        np.testing.assert_allclose(diag.segment_acceptance, [0.5, 0.25, 0.0])

    def test_acceptance_table(self):
        """Acceptance probabilities are averaged per (j, j') pair."""
        records = [
            _record(0, [0.0], proposed_j=2, accept=0.2),
            _record(1, [0.0], proposed_j=2, accept=0.4),
            _record(2, [0.0], proposed_j=1, accept=1.0),
            _record(3, [0.0], proposed_j=0, accept=0.0),
        ]
        table = acceptance_table(records, j_max=4)
        assert table == {"1->1": 1.0, "1->2": pytest.approx(0.3)}


class TestAutocorrelation:
    """Tests for the integrated autocorrelation time."""

    def test_white_noise(self):
        """Independent draws have tau close to one."""
        series = np.random.default_rng(3).standard_normal(10_000)
        assert 0.5 < integrated_autocorr_time(series) < 2.0

    def test_correlated(self):
        """An AR(1) chain with coefficient 0.9 has tau well above one."""
        rng = np.random.default_rng(4)
        x = np.zeros(20_000)
        for i in range(1, x.size):
            x[i] = 0.9 * x[i - 1] + rng.standard_normal()
        assert integrated_autocorr_time(x) > 5.0

    def test_constant(self):
        """A constant series reports one."""
        assert integrated_autocorr_time(np.ones(50)) == 1.0


class TestSummarize:
    """Tests for the chain summary."""

    def test_summary(self, spec, random_path):
        """Summaries hold curves on the grid and a complete model histogram."""
        chain = DriftSampler(spec, PriorConfig.for_family("fourier"), seed=2).run_continuous(random_path, 40, 10)
        summary = summarize(chain, spec, grid=default_grid(26))
        assert summary.mean.shape == (26,)
        assert np.all(summary.band_lo <= summary.band_hi)
        assert sum(summary.model_histogram.values()) == 30
        assert summary.s_sq_samples.size == 30
        assert summary.band_method == "pointwise-empirical-quantile"

    def test_short_chain(self, spec, random_path):
        """Chains with fewer than ten records cannot be summarized."""
        chain = DriftSampler(spec, PriorConfig.for_family("fourier"), seed=2).run_continuous(random_path, 12, 5)
        with pytest.raises(InvalidArgumentError):
            summarize(chain, spec)
