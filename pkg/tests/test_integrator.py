"""Implicit stepping: contraction, energy balance, and decay diagnostics."""

import math

import numpy as np
import pytest

from spde_lab import (
    CoupledStats,
    DriftSpec,
    Field,
    Grid1D,
    IntegratorConfig,
    NoiseSpec,
    ParameterError,
    SolverError,
    decay1_margin,
    decay1_margins,
    decay1_tolerance,
    eigenpair,
    implicit_step,
    noise_build,
    norm_h,
    pairing,
    rng_substream,
    sample_fields,
    simulate_coupled,
    simulate_path,
)


def _zero(grid):
    return Field(grid, np.zeros(grid.n))


def _models(grid, sigma=0.1):
    spec = NoiseSpec(sigma=sigma, k_modes=min(16, grid.n))
    return {
        "p_laplace": noise_build(spec, grid, DriftSpec("p_laplace", 1.5).space_pair()),
        "fast_diffusion": noise_build(
            spec, grid, DriftSpec("fast_diffusion", 0.5).space_pair()
        ),
        "linear_heat": noise_build(spec, grid, DriftSpec("linear_heat").space_pair()),
    }


class TestIntegratorConfig:
    def test_defaults(self):
        cfg = IntegratorConfig(dt=1e-3)
        assert cfg.newton_tol == 1e-10
        assert cfg.newton_max_iter == 50
        assert cfg.epsilon == 1e-8

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dt": -0.1},
            {"dt": 1e-3, "newton_tol": 0.0},
            {"dt": 1e-3, "newton_max_iter": 0},
            {"dt": 1e-3, "max_damping_halvings": -1},
            {"dt": 1e-3, "epsilon": -1e-12},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ParameterError):
            IntegratorConfig(**kwargs)


class TestImplicitStep:
    def test_zero_dt_is_identity_plus_increment(self, grid15):
        cfg = IntegratorConfig(dt=0.0, epsilon=0.0)
        x, dw = sample_fields(grid15, 2, rng_substream(0, 0))
        for spec in (
            DriftSpec("p_laplace", 1.5),
            DriftSpec("fast_diffusion", 0.5),
            DriftSpec("linear_heat"),
        ):
            z = implicit_step(spec, grid15, cfg, x, dw)
            np.testing.assert_array_equal(z.values, x.values + dw.values)

    def test_linear_heat_single_node(self):
        grid = Grid1D(1)
        cfg = IntegratorConfig(dt=0.125)
        z = implicit_step(
            DriftSpec("linear_heat"), grid, cfg, Field(grid, [1.0]), _zero(grid)
        )
        # (1 + dt * 2/h^2) z = 1 with h = 1/2  =>  z = 1/2
        assert z.values[0] == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize(
        "spec",
        [
            DriftSpec("p_laplace", 1.5),
            DriftSpec("fast_diffusion", 0.5),
            DriftSpec("linear_heat"),
        ],
        ids=lambda s: s.kind,
    )
    def test_nonexpansive_in_h(self, spec, grid15):
        cfg = IntegratorConfig(dt=1e-2)
        sp = spec.with_epsilon(cfg.epsilon).space_pair()
        rng = rng_substream(9, 0)
        for _ in range(25):
            x, y, dw = sample_fields(grid15, 3, rng)
            zx = implicit_step(spec, grid15, cfg, x, dw)
            zy = implicit_step(spec, grid15, cfg, y, dw)
            before = norm_h(Field(grid15, x.values - y.values), sp)
            after = norm_h(Field(grid15, zx.values - zy.values), sp)
            assert after <= before * (1.0 + 1e-8) + 10.0 * cfg.newton_tol

    def test_singular_drift_requires_epsilon(self, grid15):
        cfg = IntegratorConfig(dt=1e-3, epsilon=0.0)
        x = sample_fields(grid15, 1, rng_substream(0, 0))[0]
        with pytest.raises(ParameterError, match="epsilon > 0"):
            implicit_step(DriftSpec("p_laplace", 1.5), grid15, cfg, x, _zero(grid15))

    def test_solver_failure_reports_residual(self, grid15):
        cfg = IntegratorConfig(dt=1e-3, newton_max_iter=1)
        x = sample_fields(grid15, 1, rng_substream(0, 0))[0]
        with pytest.raises(SolverError) as err:
            implicit_step(DriftSpec("p_laplace", 1.5), grid15, cfg, x, _zero(grid15))
        assert err.value.residual > 0.0

    def test_grid_mismatch(self, grid15):
        from spde_lab import GridMismatchError

        cfg = IntegratorConfig(dt=1e-3)
        with pytest.raises(GridMismatchError):
            implicit_step(
                DriftSpec("linear_heat"),
                grid15,
                cfg,
                Field(Grid1D(7), np.zeros(7)),
                _zero(grid15),
            )


class TestSimulatePath:
    def test_zero_horizon(self, grid15, cfg):
        model = _models(grid15)["p_laplace"]
        x0 = sample_fields(grid15, 1, rng_substream(1, 0))[0]
        stats = simulate_path(
            DriftSpec("p_laplace", 1.5), grid15, cfg, model, x0, 0.0, rng_substream(1, 1)
        )
        assert stats.times.shape == (1,)
        assert stats.v_alpha_integral[0] == 0.0
        assert stats.h_norm_sq[0] == pytest.approx(
            norm_h(x0, stats.spec.space_pair()) ** 2, rel=1e-12
        )

    def test_active_spec_carries_integrated_epsilon(self, grid15, cfg, pl_spec):
        model = _models(grid15)["p_laplace"]
        stats = simulate_path(
            pl_spec, grid15, cfg, model, _zero(grid15), 0.01, rng_substream(2, 0)
        )
        assert stats.spec.epsilon == cfg.epsilon

    def test_deterministic_replay(self, grid15, cfg, pl_spec):
        model = _models(grid15)["p_laplace"]
        x0 = sample_fields(grid15, 1, rng_substream(3, 0))[0]
        a = simulate_path(pl_spec, grid15, cfg, model, x0, 0.05, rng_substream(5, 7))
        b = simulate_path(pl_spec, grid15, cfg, model, x0, 0.05, rng_substream(5, 7))
        np.testing.assert_array_equal(a.h_norm_sq, b.h_norm_sq)
        np.testing.assert_array_equal(a.v_alpha_integral, b.v_alpha_integral)

    def test_fast_diffusion_deterministic_norm_decay(self, grid15, cfg, fd_spec):
        model = _models(grid15, sigma=0.0)["fast_diffusion"]
        _, e1 = eigenpair(grid15, 1)
        stats = simulate_path(
            fd_spec, grid15, cfg, model, e1, 1.0, rng_substream(0, 0)
        )
        hns = stats.h_norm_sq
        alive = hns[:-1] > 1e-10
        assert np.all(hns[1:][alive] < hns[:-1][alive])

    def test_horizon_must_sit_on_grid(self, grid15, cfg, pl_spec):
        model = _models(grid15)["p_laplace"]
        with pytest.raises(ParameterError, match="multiple"):
            simulate_path(
                pl_spec, grid15, cfg, model, _zero(grid15), 0.0015, rng_substream(0, 0)
            )

    def test_record_times_validated(self, grid15, cfg, pl_spec):
        model = _models(grid15)["p_laplace"]
        with pytest.raises(ParameterError, match="step grid"):
            simulate_path(
                pl_spec,
                grid15,
                cfg,
                model,
                _zero(grid15),
                0.01,
                rng_substream(0, 0),
                record_times=[0.02],
            )

    def test_no_record_times_no_snapshots(self, grid15, cfg, pl_spec):
        model = _models(grid15)["p_laplace"]
        stats = simulate_path(
            pl_spec, grid15, cfg, model, _zero(grid15), 0.01, rng_substream(0, 0)
        )
        assert stats.snapshots.shape == (0, grid15.n)
        assert stats.snapshot_times.size == 0

    def test_newton_budget_failure_carries_step(self, grid15, pl_spec):
        cfg = IntegratorConfig(dt=1e-3, newton_max_iter=1)
        model = _models(grid15)["p_laplace"]
        x0 = sample_fields(grid15, 1, rng_substream(0, 0))[0]
        with pytest.raises(SolverError) as err:
            simulate_path(pl_spec, grid15, cfg, model, x0, 0.01, rng_substream(0, 0))
        assert err.value.step == 0
        assert err.value.residual > 0.0

    @pytest.mark.parametrize("kind", ["p_laplace", "fast_diffusion"])
    def test_deterministic_energy_balance(self, grid15, cfg, kind):
        """With sigma = 0 the backward-Euler energy identity is one-sided:

        |z|^2 - |x|^2 = 2 dt <A(z), z> - |z - x|^2 <= 2 dt <A(z), z>.
        """
        spec = DriftSpec(kind, 1.5 if kind == "p_laplace" else 0.5)
        active = spec.with_epsilon(cfg.epsilon)
        model = _models(grid15, sigma=0.0)[kind]
        x0 = sample_fields(grid15, 1, rng_substream(12, 0))[0]
        T = 0.05
        times = cfg.dt * np.arange(int(round(T / cfg.dt)) + 1)
        stats = simulate_path(
            spec, grid15, cfg, model, x0, T, rng_substream(0, 0), record_times=times
        )
        for k in range(times.size - 1):
            z = Field(grid15, stats.snapshots[k + 1])
            excess = (
                stats.h_norm_sq[k + 1]
                - stats.h_norm_sq[k]
                - 2.0 * cfg.dt * pairing(active, z, z)
            )
            assert excess <= 1e-9

    def test_csv_round_trip(self, grid15, cfg, pl_spec):
        model = _models(grid15)["p_laplace"]
        stats = simulate_path(
            pl_spec, grid15, cfg, model, _zero(grid15), 0.01, rng_substream(0, 0)
        )
        lines = stats.to_csv().splitlines()
        assert lines[0] == "t,h_norm_sq_x,v_alpha_int_x"
        assert len(lines) == stats.times.size + 1
        got = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
        np.testing.assert_array_equal(got[:, 1], stats.h_norm_sq)


class TestSimulateCoupled:
    def test_identical_starts_stay_identical(self, grid15, cfg, pl_spec):
        model = _models(grid15)["p_laplace"]
        x0 = sample_fields(grid15, 1, rng_substream(4, 0))[0]
        coupled = simulate_coupled(
            pl_spec, grid15, cfg, model, x0, x0, 0.05, rng_substream(4, 1)
        )
        assert np.all(coupled.dist_h == 0.0)

    def test_deterministic_coupling_matches_two_singles(self, grid15, cfg, fd_spec):
        model = _models(grid15, sigma=0.0)["fast_diffusion"]
        x0, y0 = sample_fields(grid15, 2, rng_substream(6, 0))
        coupled = simulate_coupled(
            fd_spec, grid15, cfg, model, x0, y0, 0.05, rng_substream(6, 1)
        )
        sx = simulate_path(fd_spec, grid15, cfg, model, x0, 0.05, rng_substream(6, 2))
        sy = simulate_path(fd_spec, grid15, cfg, model, y0, 0.05, rng_substream(6, 3))
        np.testing.assert_array_equal(coupled.x.h_norm_sq, sx.h_norm_sq)
        np.testing.assert_array_equal(coupled.y.h_norm_sq, sy.h_norm_sq)

    @pytest.mark.parametrize("kind", ["p_laplace", "fast_diffusion", "linear_heat"])
    def test_per_step_contraction(self, grid15, cfg, kind):
        spec = DriftSpec(kind, {"p_laplace": 1.5, "fast_diffusion": 0.5}.get(kind, 2.0))
        model = _models(grid15)[kind]
        x0, y0 = sample_fields(grid15, 2, rng_substream(13, 0))
        coupled = simulate_coupled(
            spec, grid15, cfg, model, x0, y0, 0.1, rng_substream(13, 1)
        )
        d = coupled.dist_h
        assert np.all(d[1:] <= d[:-1] * (1.0 + 1e-8) + 10.0 * cfg.newton_tol)

    def test_linear_heat_modewise_decay_is_exact(self, grid15, cfg, heat_spec):
        model = _models(grid15)["linear_heat"]
        lam1, e1 = eigenpair(grid15, 1)
        coupled = simulate_coupled(
            heat_spec, grid15, cfg, model, e1, _zero(grid15), 0.05, rng_substream(7, 0)
        )
        k = np.arange(coupled.times.size)
        expected = coupled.dist_h[0] * (1.0 + cfg.dt * lam1) ** (-k.astype(float))
        np.testing.assert_allclose(coupled.dist_h, expected, rtol=1e-9)

    def test_csv_round_trip(self, grid15, cfg, pl_spec):
        model = _models(grid15)["p_laplace"]
        x0, y0 = sample_fields(grid15, 2, rng_substream(8, 0))
        coupled = simulate_coupled(
            pl_spec, grid15, cfg, model, x0, y0, 0.01, rng_substream(8, 1)
        )
        lines = coupled.to_csv().splitlines()
        assert lines[0] == "t,h_norm_sq_x,v_alpha_int_x,h_norm_sq_y,v_alpha_int_y,dist_h"
        got = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
        np.testing.assert_array_equal(got[:, 5], coupled.dist_h)


@pytest.fixture(scope="module")
def coupled(grid15, cfg, pl_spec):
    model = _models(grid15)["p_laplace"]
    _, e1 = eigenpair(grid15, 1)
    two_e1 = Field(grid15, 2.0 * e1.values)
    return simulate_coupled(
        pl_spec, grid15, cfg, model, _zero(grid15), two_e1, 2.0, rng_substream(0, 0)
    )


class TestDecayDiagnostics:
    def test_margin_matches_vector(self, coupled):
        delta = 2.0
        margins = decay1_margins(coupled, delta)
        assert decay1_margin(coupled, delta, 1) == margins[0]
        assert decay1_margin(coupled, delta, 500) == margins[499]

    def test_margin_validation(self, coupled):
        with pytest.raises(ParameterError):
            decay1_margin(coupled, 2.0, 0)
        with pytest.raises(ParameterError):
            decay1_margin(coupled, 2.0, coupled.times.size)
        with pytest.raises(ParameterError):
            decay1_margin(coupled, 0.0, 1)
        with pytest.raises(ParameterError):
            decay1_margins(coupled, -1.0)
        with pytest.raises(ParameterError):
            decay1_tolerance(coupled, 0.0)

    def test_smaller_delta_loosens_the_bound(self, coupled):
        tight = decay1_margins(coupled, 4.0)
        loose = decay1_margins(coupled, 2.0)
        assert np.all(loose >= tight)

    def test_default_run_has_no_violations(self, coupled):
        delta = 2.0
        tol = decay1_tolerance(coupled, delta)
        assert tol > 0.0
        assert np.all(decay1_margins(coupled, delta) >= -tol)
