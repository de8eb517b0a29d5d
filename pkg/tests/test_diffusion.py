"""Tests for path simulation, Brownian bridges and Girsanov likelihoods."""

import numpy as np
import pytest

from app.models.dto import BasisSpec, Path
from app.models.errors import InvalidArgumentError, NonFiniteDriftError, SimulationDivergedError
from app.services.basis import drift_function, model_dim
from app.services.diffusion import (
    euler_simulate,
    linear_interpolation,
    log_girsanov,
    log_girsanov_segments,
    path_segments,
    sample_bridge,
    sample_bridges,
    thin,
)
from app.services.suffstats import compute


class TestEulerSimulate:
    """Tests for the Euler scheme."""

    def test_grid(self):
        """T = 1, dt = 0.5 gives three values at t = 0, 0.5, 1."""
        path = euler_simulate(lambda x: 0.0, 0.0, 1.0, 0.5, seed=1)
        assert path.n_points == 3
        np.testing.assert_allclose(path.times, [0.0, 0.5, 1.0])

    def test_starts_at_x0(self):
        """The first value is x0."""
        assert euler_simulate(lambda x: 1.0, 0.7, 1.0, 0.1, seed=1).values[0] == 0.7

    def test_deterministic(self):
        """The same seed reproduces the path bit for bit."""
        a = euler_simulate(lambda x: np.sin(x), 0.0, 2.0, 0.01, seed=42)
        b = euler_simulate(lambda x: np.sin(x), 0.0, 2.0, 0.01, seed=42)
        np.testing.assert_array_equal(a.values, b.values)

    def test_constant_drift_mean(self):
        """With b = c, E[X_T] = x0 + c T."""
        ends = [euler_simulate(lambda x: 2.0, 0.0, 1.0, 0.01, seed=s).values[-1] for s in range(200)]
        assert abs(np.mean(ends) - 2.0) < 4.0 / np.sqrt(200)

    @pytest.mark.slow
    def test_converges_as_step_halves(self):
        """On one Brownian path the endpoint error at least nearly halves with dt."""

        def drift(x):
            return 2.0 * np.sin(2.0 * np.pi * x) + np.cos(2.0 * np.pi * x)

        fine_dt = 2.0**-12
        errors = {k: [] for k in (6, 7, 8)}
        for seed in range(30):
            reference = euler_simulate(drift, 0.1, 1.0, fine_dt, seed=seed)
            x_fine = reference.values
            # additive unit noise: the increments are recovered exactly
            dw = np.diff(x_fine) - drift(x_fine[:-1]) * fine_dt
            for k in errors:
                ratio = 2 ** (12 - k)
                coarse_dw = dw.reshape(-1, ratio).sum(axis=1)
                x = 0.1
                for step in coarse_dw:
                    x = x + drift(x) * 2.0**-k + step
                errors[k].append(abs(x - x_fine[-1]))
        mean_errors = [np.mean(errors[k]) for k in (6, 7, 8)]
        assert mean_errors[1] < 0.75 * mean_errors[0]
        assert mean_errors[2] < 0.75 * mean_errors[1]

    def test_divergence(self):
        """A blowing-up drift raises SimulationDivergedError."""
        with pytest.raises(SimulationDivergedError) as excinfo:
            euler_simulate(lambda x: 1e6 * x * x * x, 1.0, 10.0, 0.1, seed=0)
        assert excinfo.value.exit_code == 3

    def test_invalid_step(self):
        """Non-positive steps and steps beyond the horizon are rejected."""
        with pytest.raises(InvalidArgumentError):
            euler_simulate(lambda x: 0.0, 0.0, 1.0, 0.0, seed=0)
        with pytest.raises(InvalidArgumentError):
            euler_simulate(lambda x: 0.0, 0.0, 1.0, 2.0, seed=0)


class TestThin:
    """Tests for path thinning."""

    def test_keep_every(self):
        """Every k-th value is kept and the step grows by k."""
        path = Path(dt=0.1, values=np.arange(11.0))
        thinned = thin(path, 5)
        np.testing.assert_array_equal(thinned.values, [0.0, 5.0, 10.0])
        assert thinned.dt == pytest.approx(0.5)

    def test_too_coarse(self):
        """Thinning to a single point is rejected."""
        with pytest.raises(InvalidArgumentError):
            thin(Path(dt=0.1, values=np.arange(3.0)), 5)


class TestBrownianBridge:
    """Tests for bridge sampling."""

    def test_endpoints_exact(self):
        """Both endpoints are reproduced exactly."""
        path = sample_bridge(0.123456789, -3.3, 0.7, 9, seed=5)
        assert path.values[0] == 0.123456789
        assert path.values[-1] == -3.3
        assert path.n_points == 11
        assert path.dt == pytest.approx(0.07)

    def test_midpoint_moments(self):
        """The midpoint has mean (xa + xb) / 2 and variance t_len / 4."""
        n = 100_000
        rng = np.random.default_rng(2024)
        bridges = sample_bridges(np.zeros(n), np.full(n, 2.0), 1.0, 1, rng)
        mid = bridges[:, 1]
        assert abs(mid.mean() - 1.0) < 4.0 * np.sqrt(0.25 / n)
        assert abs(mid.var() - 0.25) < 4.0 * 0.25 * np.sqrt(2.0 / n)

    def test_batch_endpoints(self):
        """Each row is pinned to its own endpoints."""
        rng = np.random.default_rng(1)
        xa = np.array([0.0, 1.0, -2.0])
        xb = np.array([0.5, 1.5, 4.0])
        bridges = sample_bridges(xa, xb, 0.2, 4, rng)
        assert bridges.shape == (3, 6)
        np.testing.assert_array_equal(bridges[:, 0], xa)
        np.testing.assert_array_equal(bridges[:, -1], xb)

    def test_no_interior(self):
        """With no interior points the bridge is the straight segment."""
        path = sample_bridge(1.0, 2.0, 0.5, 0, seed=3)
        np.testing.assert_array_equal(path.values, [1.0, 2.0])


class TestLogGirsanov:
    """Tests for the discretized Girsanov density."""

    def test_zero_drift(self, random_path):
        """b = 0 gives log L = 0."""
        assert log_girsanov(lambda x: np.zeros_like(x), random_path) == 0.0

    @pytest.mark.parametrize("family", ["fourier", "schauder"])
    def test_matches_sufficient_statistics(self, family, random_path):
        """log L(theta) = theta^T mu - 1/2 theta^T Sigma theta."""
        spec = BasisSpec(family=family, beta=1.5, j_max=6)
        theta = np.random.default_rng(8).standard_normal(model_dim(spec, 6))
        stats = compute(spec, random_path)
        expected = theta @ stats.mu - 0.5 * theta @ stats.dense_sigma() @ theta
        observed = log_girsanov(drift_function(spec, theta), random_path)
        assert observed == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_additive_over_segments(self, random_path):
        """The log-likelihood of a path is the sum over its segments."""
        drift = lambda x: 2.0 * np.sin(2.0 * np.pi * x)  # noqa: E731
        segments = path_segments(random_path, 99)
        per_segment = log_girsanov_segments(drift, segments, random_path.dt)
        assert segments.shape == (20, 101)
        assert per_segment.sum() == pytest.approx(log_girsanov(drift, random_path), rel=1e-10)

    def test_non_finite_drift(self, random_path):
        """A NaN drift raises NonFiniteDriftError carrying the location."""
        with pytest.raises(NonFiniteDriftError) as excinfo:
            log_girsanov(lambda x: np.where(x > -1e9, np.nan, 0.0), random_path)
        assert excinfo.value.x == random_path.values[0]


class TestLinearInterpolation:
    """Tests for the initial latent path."""

    def test_values(self):
        """Interior points lie on the chords between observations."""
        observations = Path(t0=1.0, dt=0.2, values=np.array([0.0, 1.0, 3.0]))
        latent = linear_interpolation(observations, 1)
        np.testing.assert_allclose(latent.values, [0.0, 0.5, 1.0, 2.0, 3.0])
        assert latent.dt == pytest.approx(0.1)
        assert latent.t0 == 1.0

    def test_observations_exact(self, observations):
        """Observation values sit unchanged at observation indices."""
        latent = linear_interpolation(observations, 7)
        np.testing.assert_array_equal(latent.values[::8], observations.values)

    def test_zero_interior(self, observations):
        """n_interior = 0 returns the observations."""
        latent = linear_interpolation(observations, 0)
        np.testing.assert_array_equal(latent.values, observations.values)
        assert latent.dt == observations.dt
