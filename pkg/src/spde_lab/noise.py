"""Spectral additive noise: diagonal Hilbert-Schmidt operator and RNG streams.

The driving noise is B dW with B diagonal in the Dirichlet-Laplacian
eigenbasis: B e_k = b_k e_k, b_k = sigma * k^{-q}, truncated to `k_modes`
modes.  Because the retained modes are exactly orthonormal in the discrete
L^2 product, the Hilbert-Schmidt norm of B in the active state space is an
exact finite sum: sum b_k^2 when H = L^2 and sum b_k^2 / lambda_k when
H = W^{-1,2}.

Reproducibility contract
------------------------
All Gaussian variates in this package are produced by one documented
transform: draw a 64-bit word from a PCG64 stream, map it to the open unit
interval as ``((word >> 11) + 0.5) * 2^-53``, and apply the exact inverse
normal CDF (:func:`scipy.special.ndtri`).  Per-path streams are derived
with :func:`rng_substream`, which mixes ``seed XOR (path_id * golden)``
through the splitmix64 finalizer; distinct path ids therefore give
statistically independent streams while identical inputs replay bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ParameterError
from .function_space import Field, Grid1D, SpacePair, eigen_basis

__all__ = [
    "NoiseSpec",
    "NoiseModel",
    "noise_build",
    "noise_increment",
    "increments",
    "rng_substream",
    "standard_normals",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64_fin(z: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def rng_substream(seed: int, path_id: int) -> np.random.Generator:
    """Deterministic, statistically independent per-path generator."""
    if not 0 <= int(seed) <= _MASK64:
        raise ParameterError("seed must be an unsigned 64-bit integer")
    if path_id < 0:
        raise ParameterError("path_id must be nonnegative")
    mixed = _splitmix64_fin(int(seed) ^ ((int(path_id) * _GOLDEN) & _MASK64))
    return np.random.Generator(np.random.PCG64(mixed))


def standard_normals(stream: np.random.Generator, size) -> np.ndarray:
    """Standard normals via the package-wide inverse-CDF transform."""
    words = stream.integers(0, 1 << 64, size=size, dtype=np.uint64)
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


@dataclass(frozen=True)
class NoiseSpec:
    """Spectral noise parameters: amplitude, decay, truncation, seed."""

    sigma: float = 0.1
    q: float = 1.0
    k_modes: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ParameterError("sigma must be >= 0")
        if not self.q > 0.5:
            raise ParameterError("q must exceed 1/2")
        if self.k_modes != int(self.k_modes) or self.k_modes < 0:
            raise ParameterError("k_modes must be a nonnegative integer")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ParameterError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "q": self.q,
            "k_modes": int(self.k_modes),
            "seed": int(self.seed),
        }


@dataclass(frozen=True)
class NoiseModel:
    """Realized noise operator on a grid: coefficients, modes, HS norm."""

    spec: NoiseSpec
    grid: Grid1D
    b: np.ndarray = field(repr=False)
    modes: np.ndarray = field(repr=False)
    lams: np.ndarray = field(repr=False)
    hs_norm_sq: float = 0.0

    @property
    def is_zero(self) -> bool:
        return self.spec.sigma == 0.0 or self.spec.k_modes == 0


def noise_build(spec: NoiseSpec, grid: Grid1D, sp: SpacePair) -> NoiseModel:
    """Assemble the diagonal noise operator for the given state space."""
    if spec.k_modes > grid.n:
        raise ParameterError(
            f"k_modes = {spec.k_modes} exceeds the number of grid modes n = {grid.n}"
        )
    if spec.k_modes:
        lams, modes = eigen_basis(grid, spec.k_modes)
        k = np.arange(1, spec.k_modes + 1, dtype=float)
        b = spec.sigma * k ** (-spec.q)
    else:
        lams = np.empty(0)
        modes = np.empty((0, grid.n))
        b = np.empty(0)
    # mode e_k has unit L^2 norm; in W^{-1,2} its squared norm is 1/lambda_k
    weights = 1.0 / lams if sp.kind == "fast_diffusion" else np.ones_like(lams)
    hs = float(np.sum(b * b * weights))
    return NoiseModel(spec=spec, grid=grid, b=b, modes=modes, lams=lams, hs_norm_sq=hs)


def noise_increment(model: NoiseModel, dt: float, stream: np.random.Generator) -> Field:
    """One Wiener increment B (W_{t+dt} - W_t) as a nodal field."""
    if dt <= 0.0:
        raise ParameterError("dt must be positive")
    z = standard_normals(stream, model.spec.k_modes)
    values = np.sqrt(dt) * ((model.b * z) @ model.modes)
    if model.spec.k_modes == 0:
        values = np.zeros(model.grid.n)
    return Field(model.grid, values)


def increments(
    model: NoiseModel, dt: float, n_steps: int, stream: np.random.Generator
) -> np.ndarray:
    """`n_steps` consecutive Wiener increments as rows of an (n_steps, n) array."""
    if dt <= 0.0:
        raise ParameterError("dt must be positive")
    if n_steps < 0:
        raise ParameterError("n_steps must be nonnegative")
    if model.spec.k_modes == 0:
        return np.zeros((n_steps, model.grid.n))
    z = standard_normals(stream, (n_steps, model.spec.k_modes))
    return np.sqrt(dt) * ((z * model.b) @ model.modes)
