"""Shared fixtures: grids, drift specs, measured constants, acceptance lines."""

import numpy as np
import pytest

from spde_lab import (
    DriftSpec,
    Grid1D,
    IntegratorConfig,
    NoiseSpec,
    estimate_assumptions,
    rng_substream,
)

#: Substream id reserved for checker sampling in fixtures (clear of path ids).
CHECKER_ID = 1 << 33


@pytest.fixture(scope="session")
def grid31():
    return Grid1D(31)


@pytest.fixture(scope="session")
def grid15():
    return Grid1D(15)


@pytest.fixture(scope="session")
def cfg():
    return IntegratorConfig(dt=1e-3)


@pytest.fixture(scope="session")
def pl_spec():
    return DriftSpec("p_laplace", 1.5, 0.0)


@pytest.fixture(scope="session")
def fd_spec():
    return DriftSpec("fast_diffusion", 0.5, 0.0)


@pytest.fixture(scope="session")
def heat_spec():
    return DriftSpec("linear_heat", 2.0, 0.0)


@pytest.fixture(scope="session")
def noise_spec():
    return NoiseSpec()


@pytest.fixture(scope="session")
def pl_constants(pl_spec, grid31, cfg):
    rng = rng_substream(101, CHECKER_ID)
    return estimate_assumptions(pl_spec.with_epsilon(cfg.epsilon), grid31, 4000, rng)


@pytest.fixture(scope="session")
def fd_constants(fd_spec, grid31, cfg):
    rng = rng_substream(101, CHECKER_ID)
    return estimate_assumptions(fd_spec.with_epsilon(cfg.epsilon), grid31, 4000, rng)


@pytest.fixture
def announce(capsys):
    """Print one visible PASS/FAIL line per acceptance criterion, then assert."""

    def _announce(name: str, ok: bool, detail: str = "", hard: bool = True):
        verdict = "PASS" if ok else ("FAIL" if hard else "WARN")
        line = f"[ACCEPTANCE] {name}: {verdict}"
        if detail:
            line += f" ({detail})"
        with capsys.disabled():
            print(f"\n{line}")
        if hard:
            assert ok, line

    return _announce


def rand_field(grid, rng, scale=1.0):
    """Plain Gaussian nodal field, for tests that want raw roughness."""
    from spde_lab import Field
    from spde_lab.noise import standard_normals

    return Field(grid, scale * standard_normals(rng, grid.n))
