"""Spectral noise: substreams, the normal transform, HS norms, increments."""

import math

import numpy as np
import pytest
from scipy import stats

from spde_lab import (
    Field,
    Grid1D,
    NoiseSpec,
    ParameterError,
    eigenpair,
    fast_diffusion_triple,
    inner_l2,
    noise_build,
    noise_increment,
    norm_h,
    p_laplace_triple,
    rng_substream,
    standard_normals,
)
from spde_lab.noise import increments


class TestNoiseSpec:
    def test_defaults(self):
        spec = NoiseSpec()
        assert spec.sigma == 0.1
        assert spec.q == 1.0
        assert spec.k_modes == 16
        assert spec.seed == 0

    def test_negative_sigma(self):
        with pytest.raises(ParameterError):
            NoiseSpec(sigma=-0.1)

    def test_q_must_exceed_half(self):
        with pytest.raises(ParameterError, match="exceed 1/2"):
            NoiseSpec(q=0.5)

    def test_k_modes_nonnegative_int(self):
        with pytest.raises(ParameterError):
            NoiseSpec(k_modes=-1)

    def test_seed_u64(self):
        with pytest.raises(ParameterError):
            NoiseSpec(seed=-1)
        with pytest.raises(ParameterError):
            NoiseSpec(seed=1 << 64)

    def test_to_dict_round_trip(self):
        spec = NoiseSpec(sigma=0.2, q=0.8, k_modes=4, seed=9)
        assert NoiseSpec(**spec.to_dict()) == spec


class TestSubstreams:
    def test_determinism(self):
        a = standard_normals(rng_substream(42, 0), 100)
        b = standard_normals(rng_substream(42, 0), 100)
        assert np.array_equal(a, b)

    def test_distinct_path_ids_decorrelated(self):
        a = standard_normals(rng_substream(42, 0), 10_000)
        b = standard_normals(rng_substream(42, 1), 10_000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.05

    def test_distinct_seeds_decorrelated(self):
        a = standard_normals(rng_substream(7, 3), 10_000)
        b = standard_normals(rng_substream(8, 3), 10_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.05

    def test_validation(self):
        with pytest.raises(ParameterError):
            rng_substream(-1, 0)
        with pytest.raises(ParameterError):
            rng_substream(0, -1)

    def test_normal_transform_distribution(self):
        draws = standard_normals(rng_substream(2024, 0), 10_000)
        assert stats.kstest(draws, "norm").pvalue > 0.01

    def test_normal_transform_is_finite_and_centered(self):
        draws = standard_normals(rng_substream(5, 5), 10_000)
        assert np.all(np.isfinite(draws))
        assert abs(draws.mean()) < 0.05


class TestNoiseBuild:
    def test_hs_norm_l2_two_modes(self):
        model = noise_build(NoiseSpec(k_modes=2), Grid1D(15), p_laplace_triple(1.5))
        assert model.hs_norm_sq == pytest.approx(0.0125, rel=1e-12)

    def test_hs_norm_dual_single_mode(self):
        grid = Grid1D(3)
        model = noise_build(NoiseSpec(k_modes=1), grid, fast_diffusion_triple(0.5))
        lam1, _ = eigenpair(grid, 1)
        assert model.hs_norm_sq == pytest.approx(0.01 / lam1, rel=1e-12)
        assert model.hs_norm_sq == pytest.approx(1.06694e-3, rel=1e-5)

    def test_sigma_zero(self):
        model = noise_build(
            NoiseSpec(sigma=0.0, k_modes=3), Grid1D(7), p_laplace_triple(1.5)
        )
        assert model.hs_norm_sq == 0.0
        assert model.is_zero

    def test_too_many_modes(self):
        with pytest.raises(ParameterError):
            noise_build(NoiseSpec(k_modes=8), Grid1D(7), p_laplace_triple(1.5))

    def test_default_truncation_fits_default_grid(self):
        model = noise_build(NoiseSpec(), Grid1D(31), p_laplace_triple(1.5))
        assert model.b.shape == (16,)
        assert np.all(np.diff(model.b) < 0.0)


class TestIncrements:
    def test_sigma_zero_increment(self):
        model = noise_build(
            NoiseSpec(sigma=0.0, k_modes=2), Grid1D(5), p_laplace_triple(1.5)
        )
        dw = noise_increment(model, 0.1, rng_substream(0, 0))
        assert np.all(dw.values == 0.0)

    def test_determinism(self):
        model = noise_build(NoiseSpec(k_modes=3), Grid1D(9), p_laplace_triple(1.5))
        a = noise_increment(model, 0.01, rng_substream(3, 1))
        b = noise_increment(model, 0.01, rng_substream(3, 1))
        assert np.array_equal(a.values, b.values)

    def test_requires_positive_dt(self):
        model = noise_build(NoiseSpec(k_modes=1), Grid1D(3), p_laplace_triple(1.5))
        with pytest.raises(ParameterError):
            noise_increment(model, 0.0, rng_substream(0, 0))

    @pytest.mark.parametrize(
        "triple", [p_laplace_triple(1.5), fast_diffusion_triple(0.5)]
    )
    def test_mean_square_matches_hs_norm(self, triple):
        grid = Grid1D(3)
        model = noise_build(NoiseSpec(k_modes=2), grid, triple)
        dt = 0.02
        rows = increments(model, dt, 100_000, rng_substream(17, 0))
        sq = np.array([norm_h(Field(grid, row), triple) ** 2 for row in rows])
        se = sq.std(ddof=1) / math.sqrt(sq.size)
        assert abs(sq.mean() - dt * model.hs_norm_sq) <= 3.0 * se

    def test_lag_one_correlation_small(self):
        grid = Grid1D(7)
        model = noise_build(NoiseSpec(k_modes=4), grid, p_laplace_triple(1.5))
        rows = increments(model, 1e-3, 10_000, rng_substream(23, 0))
        _, e1 = eigenpair(grid, 1)
        coeffs = np.array([inner_l2(Field(grid, row), e1) for row in rows])
        assert abs(np.corrcoef(coeffs[:-1], coeffs[1:])[0, 1]) < 0.05

    def test_zero_modes_consume_nothing(self):
        grid = Grid1D(5)
        model = noise_build(
            NoiseSpec(sigma=1.0, k_modes=0), grid, p_laplace_triple(1.5)
        )
        stream = rng_substream(4, 4)
        rows = increments(model, 0.1, 10, stream)
        assert rows.shape == (10, 5)
        assert np.all(rows == 0.0)
        # The stream was never advanced: it still yields the fresh-draw values.
        assert np.array_equal(
            standard_normals(stream, 8), standard_normals(rng_substream(4, 4), 8)
        )
