"""Monotonicity of the power map, with a quantitative gap.

For the map ``phi(a) = |a|^{r-1} a`` (Euclidean norm, any dimension) and
``0 < r <= 1`` the inequality

    <phi(a) - phi(b), a - b>  >=  r * |a - b|^2 * max(|a|, |b|)^{r-1}

holds for all a, b.  It is the quantitative heart of the weak-dissipativity
estimates for both singular drifts: applied per difference node with
r = p - 1 for the p-Laplace operator, and per value node for fast diffusion.
:func:`monotonicity_gap` returns the slack of the inequality, which must
never be negative beyond rounding; :func:`run_gap_suite` hammers exactly
this with randomized trials and backs the ``lemma31`` CLI subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "phi_power",
    "monotonicity_gap",
    "monotonicity_gap_batch",
    "GapSuiteResult",
    "run_gap_suite",
]

# Below this magnitude the scale factor max(|a|,|b|)^{r-1} overflows; both
# sides of the inequality are then 0 in double precision and the gap is 0.
_TINY = 1e-300


def phi_power(a, r: float):
    """Apply phi(a) = |a|^{r-1} a with phi(0) = 0, for 0 < r <= 1.

    `a` may be a scalar or a 1-D vector (Euclidean norm); the result satisfies
    |phi(a)| = |a|^r.
    """
    if not 0.0 < r <= 1.0:
        raise ParameterError("phi_power requires r in (0,1]")
    arr = np.asarray(a, dtype=np.float64)
    nrm = float(np.linalg.norm(arr))
    if nrm == 0.0:
        return arr * 0.0 if arr.ndim else 0.0
    out = nrm ** (r - 1.0) * arr
    return out if arr.ndim else float(out)


def monotonicity_gap(a, b, r: float) -> float:
    """Slack of the power-map monotonicity inequality at the pair (a, b).

    Returns <phi(a)-phi(b), a-b> - r |a-b|^2 max(|a|,|b|)^{r-1}, which is
    >= 0 up to rounding.  When both arguments are numerically null (max norm
    below 1e-300) the gap is 0 by convention.
    """
    if not 0.0 < r <= 1.0:
        raise ParameterError("monotonicity_gap requires r in (0,1]")
    av = np.atleast_1d(np.asarray(a, dtype=np.float64))
    bv = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if av.shape != bv.shape:
        raise ParameterError("monotonicity_gap arguments must have equal shapes")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    top = max(na, nb)
    if top < _TINY:
        return 0.0
    diff = av - bv
    lhs = float(np.dot(phi_power(av, r) if na else av, diff))
    lhs -= float(np.dot(phi_power(bv, r) if nb else bv, diff))
    rhs = r * float(np.dot(diff, diff)) * top ** (r - 1.0)
    return lhs - rhs


def monotonicity_gap_batch(A: np.ndarray, B: np.ndarray, r: float) -> np.ndarray:
    """Row-wise monotonicity_gap for sample matrices A, B of shape (m, d)."""
    if not 0.0 < r <= 1.0:
        raise ParameterError("monotonicity_gap_batch requires r in (0,1]")
    if A.shape != B.shape:
        raise ParameterError("sample matrices must have equal shapes")
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    top = np.maximum(na, nb)
    live = top >= _TINY
    diff = A - B
    d2 = np.einsum("ij,ij->i", diff, diff)
    phi_a = np.where(na[:, None] > 0.0, na[:, None] ** (r - 1.0), 0.0) * A
    phi_b = np.where(nb[:, None] > 0.0, nb[:, None] ** (r - 1.0), 0.0) * B
    lhs = np.einsum("ij,ij->i", phi_a - phi_b, diff)
    gaps = np.zeros(A.shape[0])
    scale = np.where(live, top, 1.0) ** (r - 1.0)
    gaps[live] = (lhs - r * d2 * scale)[live]
    return gaps


@dataclass(frozen=True)
class GapSuiteResult:
    """Outcome of the randomized inequality suite."""

    trials: int
    min_gap: float
    min_normalized_gap: float
    worst_r: float
    worst_dim: int

    @property
    def passed(self) -> bool:
        # Rounding can push a tight pair a hair below zero; the tolerance is
        # relative to the natural scale max(1, |a| v |b|)^{r+1} of the pair.
        return self.min_normalized_gap >= -1e-12

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "min_gap": self.min_gap,
            "min_normalized_gap": self.min_normalized_gap,
            "worst_r": self.worst_r,
            "worst_dim": self.worst_dim,
            "passed": self.passed,
        }


def run_gap_suite(
    n_trials: int,
    seed: int,
    dims=(1, 2, 8, 64),
    rs=(0.1, 0.25, 0.5, 0.75, 0.9, 1.0),
) -> GapSuiteResult:
    """Randomized verification of the monotonicity gap.

    Trials are spread over the requested dimensions and exponents and drawn
    from Gaussian, heavy-tailed (normal-ratio), and near-collinear families.
    Reports the minimum raw gap and the minimum gap normalized by
    max(1, |a| v |b|)^{r+1}, the scale at which rounding noise enters.
    """
    if n_trials < 1:
        raise ParameterError("run_gap_suite requires n_trials >= 1")
    rng = np.random.default_rng(seed)
    cells = [(d, r) for d in dims for r in rs]
    per = max(1, n_trials // len(cells))
    min_gap = np.inf
    min_norm = np.inf
    worst_r = float(rs[0])
    worst_dim = int(dims[0])
    total = 0
    for d, r in cells:
        third = max(1, per // 3)
        rest = max(1, per - 2 * third)
        a_parts = [
            rng.standard_normal((third, d)),
            rng.standard_normal((rest, d)) / np.abs(rng.standard_normal((rest, 1))),
        ]
        b_parts = [
            rng.standard_normal((third, d)),
            rng.standard_normal((rest, d)) / np.abs(rng.standard_normal((rest, 1))),
        ]
        near = rng.standard_normal((third, d))
        a_parts.append(near)
        b_parts.append(near + 1e-8 * rng.standard_normal((third, d)))
        A = np.vstack(a_parts)
        B = np.vstack(b_parts)
        gaps = monotonicity_gap_batch(A, B, r)
        na = np.linalg.norm(A, axis=1)
        nb = np.linalg.norm(B, axis=1)
        scale = np.maximum(1.0, np.maximum(na, nb)) ** (r + 1.0)
        normed = gaps / scale
        total += A.shape[0]
        i = int(np.argmin(normed))
        if normed[i] < min_norm:
            min_norm = float(normed[i])
            worst_r = float(r)
            worst_dim = int(d)
        min_gap = min(min_gap, float(np.min(gaps)))
    return GapSuiteResult(
        trials=total,
        min_gap=min_gap,
        min_normalized_gap=min_norm,
        worst_r=worst_r,
        worst_dim=worst_dim,
    )
