"""Discrete function spaces on a 1-D Dirichlet grid.

The domain is the unit interval with homogeneous Dirichlet boundary values,
discretized by ``n`` interior nodes at spacing ``h = 1/(n+1)``.  A field is a
vector of nodal values; the boundary values are implicitly zero and never
stored.  Three Gelfand triples ``V ⊂ H ⊂ V*`` are supported:

* ``p_laplace``:      V = W^{1,p}_0,  H = L^2          (p in (1,2)),
* ``fast_diffusion``: V = L^{r+1},    H = W^{-1,2}     (r in (0,1)),
* ``linear_heat``:    V = W^{1,2}_0,  H = L^2          (sanity oracle).

All quadrature is the h-weighted nodal sum; gradients are the n+1 forward
differences against the zero boundary.  With these conventions the Dirichlet
eigenpairs are known in closed form and the eigenvectors are exactly
orthonormal in the discrete L^2 inner product, which several modules use as a
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import (
    KIND_FAST_DIFFUSION,
    KIND_LINEAR_HEAT,
    KIND_P_LAPLACE,
    kernels as _k,
)
from .errors import GridMismatchError, ParameterError

__all__ = [
    "Grid1D",
    "Field",
    "SpacePair",
    "p_laplace_triple",
    "fast_diffusion_triple",
    "linear_heat_triple",
    "inner_l2",
    "norm_w1p",
    "norm_lr",
    "laplacian_apply",
    "poisson_solve",
    "norm_h",
    "inner_h",
    "norm_v",
    "eigenpair",
    "eigen_basis",
]

KIND_CODES = {
    "p_laplace": KIND_P_LAPLACE,
    "fast_diffusion": KIND_FAST_DIFFUSION,
    "linear_heat": KIND_LINEAR_HEAT,
}


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with `n` interior nodes on (0, 1)."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ParameterError("grid size n must be an integer >= 1")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    def nodes(self) -> np.ndarray:
        """Interior node coordinates i*h for i = 1..n."""
        return self.h * np.arange(1, self.n + 1)


class Field:
    """Nodal values of a grid function (boundary values are implicitly 0)."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid1D, values):
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if arr.shape != (grid.n,):
            raise GridMismatchError(
                f"expected {grid.n} nodal values, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("field values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    @staticmethod
    def zeros(grid: Grid1D) -> "Field":
        return Field(grid, np.zeros(grid.n))

    @staticmethod
    def from_modes(grid: Grid1D, coefficients) -> "Field":
        """Linear combination sum_k c_k e_k of the leading eigenvectors."""
        coeffs = np.asarray(coefficients, dtype=np.float64).ravel()
        if coeffs.size > grid.n:
            raise ParameterError(
                f"{coeffs.size} mode coefficients exceed the {grid.n} grid modes"
            )
        vals = np.zeros(grid.n)
        if coeffs.size:
            _, modes = eigen_basis(grid, coeffs.size)
            vals = coeffs @ modes
        return Field(grid, vals)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "Field":
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"Field(n={self.grid.n}, values={self.values!r})"


@dataclass(frozen=True)
class SpacePair:
    """A Gelfand triple selector: fixes which V- and H-norms apply.

    `exponent` is p for the p-Laplace triple, r for fast diffusion, and unused
    (2.0) for linear heat.
    """

    kind: str
    exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ParameterError(f"unknown space kind {self.kind!r}")
        if self.kind == "p_laplace" and not 1.0 < self.exponent < 2.0:
            raise ParameterError("p must lie in (1,2)")
        if self.kind == "fast_diffusion" and not 0.0 < self.exponent < 1.0:
            raise ParameterError("r must lie in (0,1)")

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def alpha(self) -> float:
        """Coercivity exponent: p, r+1, or 2."""
        if self.kind == "p_laplace":
            return self.exponent
        if self.kind == "fast_diffusion":
            return self.exponent + 1.0
        return 2.0

    @property
    def beta(self) -> float:
        """Dissipativity exponent: 2-p, 1-r, or 0."""
        if self.kind == "p_laplace":
            return 2.0 - self.exponent
        if self.kind == "fast_diffusion":
            return 1.0 - self.exponent
        return 0.0


def p_laplace_triple(p: float) -> SpacePair:
    return SpacePair("p_laplace", p)


def fast_diffusion_triple(r: float) -> SpacePair:
    return SpacePair("fast_diffusion", r)


def linear_heat_triple() -> SpacePair:
    return SpacePair("linear_heat")


def _same_grid(u: Field, v: Field):
    if u.grid != v.grid:
        raise GridMismatchError(f"grids differ: {u.grid} vs {v.grid}")


def inner_l2(u: Field, v: Field) -> float:
    """Discrete L^2 inner product h * sum_i u_i v_i."""
    _same_grid(u, v)
    return _k.inner_l2(u.values, v.values, u.grid.h)


def norm_w1p(u: Field, p: float) -> float:
    """W^{1,p}_0 seminorm (h * sum_j |D_j u|^p)^(1/p) over n+1 differences."""
    if p < 1.0:
        raise ParameterError("norm_w1p requires p >= 1")
    return _k.w1p_pow(u.values, u.grid.h, p) ** (1.0 / p)


def norm_lr(u: Field, s: float) -> float:
    """L^s norm (h * sum_i |u_i|^s)^(1/s)."""
    if s < 1.0:
        raise ParameterError("norm_lr requires s >= 1")
    return _k.lr_pow(u.values, u.grid.h, s) ** (1.0 / s)


def laplacian_apply(u: Field) -> Field:
    """Second-difference Dirichlet Laplacian (u_{i-1} - 2u_i + u_{i+1})/h^2."""
    return Field(u.grid, _k.laplacian(u.values, u.grid.h))


def poisson_solve(f: Field) -> Field:
    """Solve -lap_h u = f by tridiagonal elimination.

    The system matrix is the symmetric positive definite second-difference
    matrix, so the Thomas algorithm is stable; the residual is at the level of
    rounding (checked in the test suite).
    """
    return Field(f.grid, _k.poisson_solve(f.values, f.grid.h))


def norm_h(u: Field, sp: SpacePair) -> float:
    """Norm of the pivot space H for the given triple.

    L^2 for `p_laplace` and `linear_heat`; for `fast_diffusion` the W^{-1,2}
    norm sqrt(<u, (-lap_h)^{-1} u>_{L^2}).
    """
    return float(np.sqrt(_k.h_norm_sq(u.values, u.grid.h, sp.code)))


def inner_h(u: Field, v: Field, sp: SpacePair) -> float:
    """Inner product of H; for fast diffusion <u, (-lap_h)^{-1} v>_{L^2}."""
    _same_grid(u, v)
    if sp.kind == "fast_diffusion":
        return _k.inner_l2(u.values, _k.poisson_solve(v.values, v.grid.h), u.grid.h)
    return _k.inner_l2(u.values, v.values, u.grid.h)


def norm_v(u: Field, sp: SpacePair) -> float:
    """Norm of V: W^{1,p} seminorm, L^{r+1} norm, or W^{1,2} seminorm."""
    if sp.kind == "p_laplace":
        return norm_w1p(u, sp.exponent)
    if sp.kind == "fast_diffusion":
        return norm_lr(u, sp.exponent + 1.0)
    return norm_w1p(u, 2.0)


def eigenpair(grid: Grid1D, k: int) -> tuple[float, Field]:
    """k-th Dirichlet eigenpair of -lap_h (1-based, k <= n).

    lambda_k = (4/h^2) sin^2(k pi h / 2) and e_k(i h) = sqrt(2) sin(k pi i h);
    the eigenvectors are exactly orthonormal in the discrete L^2 product.
    """
    if not 1 <= k <= grid.n:
        raise ParameterError(f"mode index k={k} outside 1..{grid.n}")
    h = grid.h
    lam = (4.0 / (h * h)) * np.sin(0.5 * k * np.pi * h) ** 2
    vec = np.sqrt(2.0) * np.sin(k * np.pi * grid.nodes())
    return float(lam), Field(grid, vec)


def eigen_basis(grid: Grid1D, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading eigenvalues (k_max,) and eigenvectors (k_max, n) of -lap_h."""
    if not 1 <= k_max <= grid.n:
        raise ParameterError(f"k_max={k_max} outside 1..{grid.n}")
    h = grid.h
    ks = np.arange(1, k_max + 1)
    lams = (4.0 / (h * h)) * np.sin(0.5 * ks * np.pi * h) ** 2
    modes = np.sqrt(2.0) * np.sin(np.outer(ks, np.pi * grid.nodes()))
    return lams, modes
