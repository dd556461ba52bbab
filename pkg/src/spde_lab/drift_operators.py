"""Discrete monotone drift operators and randomized structure checkers.

Three drifts are implemented on the Dirichlet grid:

* the singular p-Laplace operator  A(u) = div(|u'|^{p-2} u')  with 1 < p < 2,
* the fast-diffusion operator      A(u) = lap(|u|^{r-1} u)    with 0 < r < 1,
* the linear heat operator         A(u) = lap(u)              (sanity oracle).

Both singular drifts admit an exact discrete duality pairing
``<A(u), w>`` (a plain weighted sum) and a closed-form dual norm at
``epsilon = 0``.  The ``epsilon``-regularized variants replace the singular
scalar maps by ``(s^2+eps^2)^{(..)/2} s``, keeping them odd and strictly
increasing so that implicit time stepping has smooth, monotone residuals.

The ``check_a*`` functions estimate the structure constants by randomized
sampling: ``check_a2`` the weak-dissipativity constant delta, ``check_a3``
the coercivity pair (delta, K), ``check_a4`` the boundedness constant, and
``check_a1`` a hemicontinuity modulus along line segments.  The estimates
feed the explicit bounds in :mod:`spde_lab.estimators`, so they are always
taken for the regularization actually integrated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._kernels import kernels as _k
from .errors import (
    ConsistencyError,
    DegenerateSampleError,
    GridMismatchError,
    ParameterError,
)
from .function_space import Field, Grid1D, SpacePair, eigen_basis
from .noise import standard_normals

__all__ = [
    "DriftSpec",
    "AssumptionReport",
    "drift_apply",
    "pairing",
    "dual_norm_vstar",
    "check_a1",
    "check_a2",
    "check_a3",
    "check_a4",
    "estimate_assumptions",
    "sample_fields",
    "sample_pairs",
]

_SAMPLE_SCALES = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class DriftSpec:
    """Drift selector: kind, exponent (p or r), and regularization epsilon."""

    kind: str
    exponent: float = 2.0
    epsilon: float = 0.0

    def __post_init__(self):
        SpacePair(self.kind, self.exponent)  # reuse the range validation
        if self.epsilon < 0.0:
            raise ParameterError("epsilon must be >= 0")

    def space_pair(self) -> SpacePair:
        return SpacePair(self.kind, self.exponent)

    @property
    def alpha(self) -> float:
        return self.space_pair().alpha

    @property
    def beta(self) -> float:
        return self.space_pair().beta

    @property
    def code(self) -> int:
        return self.space_pair().code

    def with_epsilon(self, epsilon: float) -> "DriftSpec":
        return DriftSpec(self.kind, self.exponent, epsilon)


@dataclass(frozen=True)
class AssumptionReport:
    """Estimated structure constants of a drift on a given grid."""

    delta_a2: float
    delta_a3: float
    k_a3: float
    k_a4: float
    samples: int
    worst_pair_norms: dict

    def to_dict(self) -> dict:
        return {
            "delta_a2": self.delta_a2,
            "delta_a3": self.delta_a3,
            "k_a3": self.k_a3,
            "k_a4": self.k_a4,
            "samples": self.samples,
            "worst_pair_norms": dict(self.worst_pair_norms),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# operator evaluation


def drift_apply(spec: DriftSpec, u: Field) -> Field:
    """Evaluate the (regularized) drift at u."""
    return Field(
        u.grid, _k.drift_apply(u.values, u.grid.h, spec.code, spec.exponent, spec.epsilon)
    )


def pairing(spec: DriftSpec, u: Field, w: Field) -> float:
    """Duality pairing <A(u), w> between V* and V, in exact discrete form.

    For the p-Laplace drift this is -h * sum_j flux(D_j u) D_j w over the
    n+1 boundary-padded differences; for fast diffusion
    -h * sum_i phi(u_i) w_i; for linear heat the L^2 product of lap(u)
    with w.
    """
    if u.grid != w.grid:
        raise GridMismatchError("pairing requires fields on the same grid")
    return float(
        _pairing_rows(spec, u.values[None, :], w.values[None, :], u.grid)[0]
    )


def dual_norm_vstar(spec: DriftSpec, u: Field, n_probes: int = 1000) -> float:
    """Norm of A(u) in V*.

    At ``epsilon = 0`` the Hölder-duality equality gives closed forms:
    ``|u|_V^{p-1}`` (p-Laplace) and ``|u|_{L^{r+1}}^r`` (fast diffusion);
    u itself is the extremal direction in both cases.  The linear heat
    operator has dual norm ``|u|_{W^{1,2}}``.  For ``epsilon > 0`` the
    closed forms are no longer exact and the supremum of
    ``|<A(u), w>| / |w|_V`` is sampled over `n_probes` Gaussian fields (plus
    the extremal direction u), drawn from a fixed internal substream so the
    result is deterministic.
    """
    grid = u.grid
    vn = _v_norm_rows(spec, u.values[None, :], grid)[0]
    if spec.epsilon == 0.0 or spec.kind == "linear_heat":
        return float(vn ** (spec.alpha - 1.0))
    if vn == 0.0 and not np.any(u.values):
        probes = _sample_fields_raw(grid, n_probes, np.random.default_rng(0x5D0))
    else:
        probes = np.vstack(
            [u.values[None, :], _sample_fields_raw(grid, n_probes, np.random.default_rng(0x5D0))]
        )
    pv = _v_norm_rows(spec, probes, grid)
    ok = pv > 0.0
    if not np.any(ok):
        return 0.0
    vals = np.abs(_pairing_rows(spec, np.broadcast_to(u.values, probes.shape), probes, grid))
    return float(np.max(vals[ok] / pv[ok]))


# ---------------------------------------------------------------------------
# vectorized building blocks (rows = samples)


def _diff_rows(V: np.ndarray, h: float) -> np.ndarray:
    """Forward differences against the zero boundary: (m, n) -> (m, n+1)."""
    m = V.shape[0]
    z = np.zeros((m, 1))
    return np.diff(np.hstack([z, V, z]), axis=1) / h


def _flux_rows(G: np.ndarray, p: float, eps: float) -> np.ndarray:
    S = G * G + eps * eps
    out = np.zeros_like(G)
    mask = S > 0.0
    out[mask] = S[mask] ** (0.5 * (p - 2.0)) * G[mask]
    return out


def _power_rows(U: np.ndarray, r: float, eps: float) -> np.ndarray:
    S = U * U + eps * eps
    out = np.zeros_like(U)
    mask = S > 0.0
    out[mask] = S[mask] ** (0.5 * (r - 1.0)) * U[mask]
    return out


def _laplacian_rows(V: np.ndarray, h: float) -> np.ndarray:
    m, n = V.shape
    z = np.zeros((m, 1))
    padded = np.hstack([z, V, z])
    return (padded[:, :-2] - 2.0 * padded[:, 1:-1] + padded[:, 2:]) / (h * h)


def _pairing_rows(spec: DriftSpec, U: np.ndarray, W: np.ndarray, grid: Grid1D) -> np.ndarray:
    h = grid.h
    if spec.kind == "p_laplace":
        du = _diff_rows(U, h)
        dw = _diff_rows(W, h)
        return -h * np.einsum("ij,ij->i", _flux_rows(du, spec.exponent, spec.epsilon), dw)
    if spec.kind == "fast_diffusion":
        return -h * np.einsum(
            "ij,ij->i", _power_rows(U, spec.exponent, spec.epsilon), W
        )
    return h * np.einsum("ij,ij->i", _laplacian_rows(U, h), W)


def _v_norm_rows(spec_or_sp, V: np.ndarray, grid: Grid1D) -> np.ndarray:
    h = grid.h
    kind = spec_or_sp.kind
    ex = spec_or_sp.exponent
    if kind == "p_laplace":
        dv = np.abs(_diff_rows(V, h))
        return (h * (dv**ex).sum(axis=1)) ** (1.0 / ex)
    if kind == "fast_diffusion":
        s = ex + 1.0
        return (h * (np.abs(V) ** s).sum(axis=1)) ** (1.0 / s)
    dv = _diff_rows(V, h)
    return np.sqrt(h * (dv * dv).sum(axis=1))


def _basis(grid: Grid1D):
    lams, modes = eigen_basis(grid, grid.n)
    return lams, modes


def _h_norm_sq_rows(spec_or_sp, V: np.ndarray, grid: Grid1D) -> np.ndarray:
    if spec_or_sp.kind == "fast_diffusion":
        # spectral form of the W^{-1,2} norm; exact because the eigenvectors
        # are exactly orthonormal in the discrete L^2 product
        lams, modes = _basis(grid)
        coeff = grid.h * (V @ modes.T)
        return (coeff * coeff / lams).sum(axis=1)
    return grid.h * (V * V).sum(axis=1)


# ---------------------------------------------------------------------------
# samplers


def _sample_fields_raw(grid: Grid1D, m: int, rng, scales=_SAMPLE_SCALES) -> np.ndarray:
    """Gaussian fields in the eigenbasis with cycling amplitude scales.

    Coefficients decay like 1/k so the fields are grid-resolved; amplitudes
    cycle through `scales` row by row.
    """
    n = grid.n
    _, modes = _basis(grid)
    coeff = standard_normals(rng, (m, n)) / np.arange(1, n + 1)
    amp = np.asarray(scales, dtype=float)[np.arange(m) % len(scales)]
    return (coeff * amp[:, None]) @ modes


def sample_fields(grid: Grid1D, m: int, rng) -> list[Field]:
    """Draw `m` random test fields (the checker sampling distribution)."""
    return [Field(grid, row) for row in _sample_fields_raw(grid, m, rng)]


def sample_pairs(grid: Grid1D, m: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Sample pairs for the dissipativity checker, as (m, n) row matrices.

    Every fourth pair is made near-collinear (v2 = v1 + 1e-3 * fresh field):
    the dissipativity ratio approaches its infimum as the pair collapses, so
    these pairs probe the binding region.
    """
    v1 = _sample_fields_raw(grid, m, rng)
    v2 = _sample_fields_raw(grid, m, rng)
    near = np.arange(m) % 4 == 3
    if np.any(near):
        bump = _sample_fields_raw(grid, int(near.sum()), rng, scales=(1.0,))
        v2[near] = v1[near] + 1e-3 * bump
    return v1, v2


# ---------------------------------------------------------------------------
# randomized checkers


def check_a2(spec: DriftSpec, grid: Grid1D, n_samples: int, rng, sampler=None):
    """Estimate the weak-dissipativity constant delta over sampled pairs.

    For each pair the ratio
    ``-2 [<A(v1), w> - <A(v2), w>] * (|v1|_V^beta + |v2|_V^beta) / |w|_H^2``
    with ``w = v1 - v2`` is a valid delta; the estimate is the minimum over
    pairs.  Pairs with ``|w|_H < 1e-9 (1 + |v1|_H + |v2|_H)`` are skipped
    (the inequality is vacuous there).  For the linear-heat oracle the
    V-norm factor is dropped (beta = 0 convention) and the ratio is the
    Rayleigh quotient ``2 <-lap w, w> / |w|^2``, bounded below by twice the
    smallest eigenvalue.

    Returns ``(delta_hat, worst)`` where `worst` describes the minimizing
    pair by its norms.
    """
    if n_samples < 1:
        raise ParameterError("check_a2 requires n_samples >= 1")
    v1, v2 = sampler(grid, n_samples, rng) if sampler else sample_pairs(grid, n_samples, rng)
    w = v1 - v2
    dist_sq = _h_norm_sq_rows(spec, w, grid)
    h1 = np.sqrt(_h_norm_sq_rows(spec, v1, grid))
    h2 = np.sqrt(_h_norm_sq_rows(spec, v2, grid))
    keep = np.sqrt(np.maximum(dist_sq, 0.0)) >= 1e-9 * (1.0 + h1 + h2)
    if not np.any(keep):
        raise DegenerateSampleError("all sampled pairs were too close to use")
    gap = _pairing_rows(spec, v1, w, grid) - _pairing_rows(spec, v2, w, grid)
    safe_dist = np.where(keep, dist_sq, 1.0)
    if spec.kind == "linear_heat":
        ratio = -2.0 * gap / safe_dist
    else:
        vn1 = _v_norm_rows(spec, v1, grid)
        vn2 = _v_norm_rows(spec, v2, grid)
        ratio = -2.0 * gap * (vn1**spec.beta + vn2**spec.beta) / safe_dist
    ratio = np.where(keep, ratio, np.inf)
    i = int(np.argmin(ratio))
    worst = {
        "ratio": float(ratio[i]),
        "v1_h_norm": float(h1[i]),
        "v2_h_norm": float(h2[i]),
        "dist_h": float(np.sqrt(max(dist_sq[i], 0.0))),
        "v1_v_norm": float(_v_norm_rows(spec, v1[i : i + 1], grid)[0]),
        "v2_v_norm": float(_v_norm_rows(spec, v2[i : i + 1], grid)[0]),
    }
    return float(ratio[i]), worst


def check_a3(spec: DriftSpec, grid: Grid1D, n_samples: int, rng):
    """Estimate the coercivity pair (delta, K): 2<A(u),u> <= -delta |u|_V^alpha + K.

    At ``epsilon = 0`` (and always for linear heat) the quadratic form is an
    exact identity ``2<A(u),u> = -2 |u|_V^alpha``; the identity is verified on
    every sample to 1e-10 relative and (2, 0) is returned.  For
    ``epsilon > 0`` delta is the minimum ratio over samples with
    ``|u|_V >= 1`` and K the smallest admissible nonnegative constant for the
    returned delta.
    """
    if n_samples < 1:
        raise ParameterError("check_a3 requires n_samples >= 1")
    u = _sample_fields_raw(grid, n_samples, rng)
    va = _v_norm_rows(spec, u, grid) ** spec.alpha
    quad = 2.0 * _pairing_rows(spec, u, u, grid)
    if spec.epsilon == 0.0 or spec.kind == "linear_heat":
        err = np.abs(quad + 2.0 * va)
        bad = err > 1e-10 * np.maximum(1.0, 2.0 * va)
        if np.any(bad):
            i = int(np.argmax(err))
            raise ConsistencyError(
                f"coercivity identity violated: |2<A(u),u> + 2|u|_V^a| = {err[i]:.3e}"
            )
        return 2.0, 0.0
    big = va >= 1.0
    if not np.any(big):
        raise DegenerateSampleError("no sample with |u|_V >= 1 for the coercivity ratio")
    delta3 = float(np.min(-quad[big] / va[big]))
    k3 = max(0.0, float(np.max(delta3 * va + quad)))
    return delta3, k3


def check_a4(spec: DriftSpec, grid: Grid1D, n_samples: int, rng, n_probes: int = 256):
    """Estimate the boundedness constant: max of |A(u)|_{V*} / (1 + |u|_V^{alpha-1}).

    Uses the closed-form dual norm at ``epsilon = 0``; for ``epsilon > 0``
    the dual norm of each sample is a sampled supremum over `n_probes`
    shared probe directions (plus the sample itself as the near-extremal
    direction).
    """
    if n_samples < 1:
        raise ParameterError("check_a4 requires n_samples >= 1")
    u = _sample_fields_raw(grid, n_samples, rng)
    vn = _v_norm_rows(spec, u, grid)
    if spec.epsilon == 0.0 or spec.kind == "linear_heat":
        dual = vn ** (spec.alpha - 1.0)
    else:
        probes = _sample_fields_raw(grid, n_probes, rng)
        pv = _v_norm_rows(spec, probes, grid)
        ok = pv > 0.0
        dual = np.empty(n_samples)
        for i in range(n_samples):
            row = u[i : i + 1]
            vals = np.abs(
                _pairing_rows(spec, np.broadcast_to(row, probes.shape), probes, grid)
            )
            best = np.max(vals[ok] / pv[ok]) if np.any(ok) else 0.0
            if vn[i] > 0.0:
                own = abs(_pairing_rows(spec, row, row, grid)[0]) / vn[i]
                best = max(best, own)
            dual[i] = best
    return float(np.max(dual / (1.0 + vn ** (spec.alpha - 1.0))))


def check_a1(spec: DriftSpec, u: Field, v: Field, w: Field, lambda_grid) -> float:
    """Hemicontinuity modulus: max jump of lam -> <A(u + lam v), w> on the grid.

    Refining the grid tenfold should shrink the modulus by at least 5x for a
    continuous map; the linear heat drift gives |dlam| * |<A(v), w>| exactly.
    """
    lams = np.asarray(lambda_grid, dtype=float)
    if lams.ndim != 1 or lams.size < 2:
        raise ParameterError("lambda_grid must contain at least two points")
    U = u.values[None, :] + lams[:, None] * v.values[None, :]
    W = np.broadcast_to(w.values, U.shape)
    vals = _pairing_rows(spec, U, W, u.grid)
    return float(np.max(np.abs(np.diff(vals))))


def estimate_assumptions(
    spec: DriftSpec, grid: Grid1D, n_samples: int, rng
) -> AssumptionReport:
    """Run all constant checkers and bundle the estimates."""
    delta2, worst = check_a2(spec, grid, n_samples, rng)
    delta3, k3 = check_a3(spec, grid, n_samples, rng)
    k4 = check_a4(spec, grid, min(n_samples, 2000), rng)
    return AssumptionReport(
        delta_a2=delta2,
        delta_a3=delta3,
        k_a3=k3,
        k_a4=k4,
        samples=int(n_samples),
        worst_pair_norms=worst,
    )
