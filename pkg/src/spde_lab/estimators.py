"""Monte-Carlo verification of the expectation-level estimates.

Five report builders compare simulated statistics against the explicit
bounds that the dissipativity constants imply:

- :func:`decay_report` — coupled-distance decay with a fully assembled
  right-hand side (no fitted constant),
- :func:`moment_report` — the Ito energy balance in expectation,
- :func:`semigroup_report` — Lipschitz/Hoelder semigroup differences with
  a fitted constant against the predicted time shape,
- :func:`invariant_report` — Krylov–Bogoliubov occupation averages, the
  V-norm tightness bound, and a multi-start discrepancy table,
- :func:`ergodic_rate_report` — convergence of P_t F toward the long-run
  average with shape fits per regularity case.

All builders are pure given their inputs: every path draws from
``rng_substream(seed, path_id)`` and results are aggregated in ascending
path order, so the output is independent of the worker-thread count
(``SPDE_LAB_THREADS`` caps parallelism, absent means all cores).
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .drift_operators import AssumptionReport, DriftSpec
from .errors import ConfigError, DegenerateSampleError, ParameterError
from .function_space import Field, Grid1D, SpacePair, eigenpair, inner_h, norm_h
from .integrator import (
    IntegratorConfig,
    decay1_margins,
    decay1_tolerance,
    simulate_coupled,
    simulate_path,
)
from .noise import NoiseModel, NoiseSpec, noise_build, rng_substream

__all__ = [
    "TestFunctional",
    "clipped_h_norm",
    "mode_sine",
    "clipped_h_norm_power",
    "default_bank",
    "holder_bank",
    "DecayReport",
    "MomentReport",
    "SemigroupReport",
    "InvariantReport",
    "ErgodicRateReport",
    "decay_report",
    "moment_report",
    "semigroup_report",
    "invariant_report",
    "ergodic_rate_report",
    "thread_count",
    "DECAY_TIME_GRID",
    "MOMENT_TIME_GRID",
    "DISCREPANCY_HORIZONS",
]

#: Geometric default grid for decay studies: spans a decade+ for slope fits.
DECAY_TIME_GRID = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)

#: Default horizons for the moment balance.
MOMENT_TIME_GRID = (0.5, 1.0, 2.0, 4.0)

#: Horizons at which the multi-start discrepancy table is evaluated.
DISCREPANCY_HORIZONS = (25.0, 50.0, 100.0, 200.0, 400.0)

#: Offset separating ergodic-rate MC substreams from occupation-run streams.
_ERGODIC_PATH_BASE = 1 << 32


# ---------------------------------------------------------------------------
# parallel path fan-out
# ---------------------------------------------------------------------------


def thread_count() -> int:
    """Worker cap from ``SPDE_LAB_THREADS``; absent means all cores."""
    raw = os.environ.get("SPDE_LAB_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError("SPDE_LAB_THREADS must be an integer") from None
    if value < 1:
        raise ConfigError("SPDE_LAB_THREADS must be at least 1")
    return value


def _path_map(fn: Callable[[int], object], n_paths: int) -> list:
    """Evaluate ``fn(path_id)`` for ids 0..n-1, results in ascending id order."""
    workers = min(thread_count(), max(1, n_paths))
    if workers == 1:
        return [fn(pid) for pid in range(n_paths)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_paths)))


# ---------------------------------------------------------------------------
# functional bank
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunctional:
    """Scalar observable on H with a declared regularity constant.

    ``kind`` is ``"lipschitz"`` (constant = L(F), gamma fixed at 1) or
    ``"holder"`` (constant bounds the gamma-Hoelder seminorm).
    """

    __test__ = False  # not a pytest class, despite the name

    name: str
    kind: str
    constant: float
    gamma: float
    fn: Callable[[Field], float] = field(repr=False)

    def __post_init__(self):
        if self.kind not in ("lipschitz", "holder"):
            raise ParameterError("functional kind must be 'lipschitz' or 'holder'")
        if not 0.0 < self.gamma <= 1.0:
            raise ParameterError("gamma must lie in (0, 1]")
        if self.constant < 0.0:
            raise ParameterError("regularity constant must be nonnegative")

    def __call__(self, u: Field) -> float:
        return self.fn(u)


def clipped_h_norm(sp: SpacePair) -> TestFunctional:
    """F(u) = min(|u|_H, 1); Lipschitz with L(F) = 1."""

    def fn(u: Field) -> float:
        return min(norm_h(u, sp), 1.0)

    return TestFunctional("clipped_h_norm", "lipschitz", 1.0, 1.0, fn)


def mode_sine(k: int, grid: Grid1D, sp: SpacePair) -> TestFunctional:
    """F(u) = sin(<u, e_k>_H); Lipschitz with L(F) = |e_k|_H."""
    _, e_k = eigenpair(grid, k)
    constant = norm_h(e_k, sp)

    def fn(u: Field) -> float:
        return math.sin(inner_h(u, e_k, sp))

    return TestFunctional(f"mode_sine_{k}", "lipschitz", constant, 1.0, fn)


def clipped_h_norm_power(gamma: float, sp: SpacePair) -> TestFunctional:
    """F(u) = min(|u|_H, 1)^gamma; gamma-Hoelder with seminorm at most 1."""
    if not 0.0 < gamma <= 1.0:
        raise ParameterError("gamma must lie in (0, 1]")

    def fn(u: Field) -> float:
        return min(norm_h(u, sp), 1.0) ** gamma

    return TestFunctional(f"clipped_h_norm_pow_{gamma:g}", "holder", 1.0, gamma, fn)


def default_bank(grid: Grid1D, sp: SpacePair) -> tuple[TestFunctional, ...]:
    """Lipschitz bank: the clipped H-norm plus the first three mode sines."""
    modes = [k for k in (1, 2, 3) if k <= grid.n]
    return (clipped_h_norm(sp), *(mode_sine(k, grid, sp) for k in modes))


def holder_bank(gamma: float, sp: SpacePair) -> tuple[TestFunctional, ...]:
    """Hoelder bank for the low-exponent regime: clipped-norm powers."""
    bank = [clipped_h_norm_power(gamma, sp)]
    if gamma > 0.5:
        bank.append(clipped_h_norm_power(0.5 * gamma, sp))
    return tuple(bank)


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def _as_time_grid(time_grid, dt: float, positive: bool = True) -> np.ndarray:
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError("time grid must be a nonempty 1-d sequence")
    if np.any(np.diff(times) <= 0.0):
        raise ParameterError("time grid must be strictly increasing")
    low = 0.0 if positive else -1e-12
    if times[0] <= low - 1e-12 or (positive and times[0] <= 0.0):
        kindmsg = "positive" if positive else "nonnegative"
        raise ParameterError(f"time grid entries must be {kindmsg}")
    for t in times:
        k = round(t / dt)
        if abs(t - k * dt) > 1e-9 * max(1.0, abs(t)):
            raise ParameterError(f"time {t!r} is not a multiple of dt = {dt!r}")
    return times


def _grid_steps(times: np.ndarray, dt: float) -> np.ndarray:
    return np.array([round(t / dt) for t in times], dtype=np.int64)


def _require_constants(constants) -> AssumptionReport:
    if constants is None:
        raise ConfigError(
            "checker constants are required; run estimate_assumptions first"
        )
    return constants


def _mc_mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise mean and standard error of a (n_paths, n_times) array."""
    mean = samples.mean(axis=0)
    n = samples.shape[0]
    if n < 2:
        return mean, np.zeros_like(mean)
    se = samples.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, se


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _zero_field(grid: Grid1D) -> Field:
    return Field(grid, np.zeros(grid.n))


# ---------------------------------------------------------------------------
# decay report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    """MC decay estimates versus the explicit right-hand side."""

    spec: DriftSpec
    dt: float
    times: np.ndarray = field(repr=False)
    mc_mean: np.ndarray = field(repr=False)
    mc_se: np.ndarray = field(repr=False)
    rhs_bound: np.ndarray = field(repr=False)
    pathwise_violations: np.ndarray = field(repr=False)
    passes: np.ndarray = field(repr=False)
    n_paths: int = 0
    delta_hat: float = 0.0
    violations_total: int = 0

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passes))

    def to_csv(self) -> str:
        rows = [
            (t, m, s, r, int(v), bool(p))
            for t, m, s, r, v, p in zip(
                self.times,
                self.mc_mean,
                self.mc_se,
                self.rhs_bound,
                self.pathwise_violations,
                self.passes,
            )
        ]
        return _csv_table(
            ["t", "mc_mean", "mc_se", "rhs_bound", "pathwise_violations", "pass"],
            rows,
        )

    def to_json_summary(self) -> dict:
        return {
            "report": "decay",
            "equation": self.spec.kind,
            "n_paths": self.n_paths,
            "delta_hat": self.delta_hat,
            "times": [float(t) for t in self.times],
            "mc_mean": [float(v) for v in self.mc_mean],
            "mc_se": [float(v) for v in self.mc_se],
            "rhs_bound": [float(v) for v in self.rhs_bound],
            "pathwise_violations": [int(v) for v in self.pathwise_violations],
            "pathwise_violations_total": int(self.violations_total),
            "pass_per_time": [bool(v) for v in self.passes],
            "pass": self.all_pass,
        }


def decay_report(
    spec: DriftSpec,
    grid: Grid1D,
    cfg: IntegratorConfig,
    noise: NoiseSpec,
    x0: Field,
    y0: Field,
    time_grid=DECAY_TIME_GRID,
    n_paths: int = 200,
    seed: int = 0,
    constants: AssumptionReport | None = None,
) -> DecayReport:
    """Coupled MC of the distance power d(t)^(2a/b) against its explicit bound.

    The right-hand side is assembled from the measured constants — no fit:
    ``RHS(t) = (2 d0^2/(dh t))^(a/b) (|x0|^2 + |y0|^2 + 2t(K3 + HS)) / (dh t)``
    with ``dh = min(delta_a2, delta_a3)``, the smaller of the two slots the
    proof chain feeds with a dissipativity constant.  Pass per time point is
    ``mean + 2 SE <= RHS``; pathwise violations count decay margins beyond
    the O(dt) quadrature tolerance.
    """
    rep = _require_constants(constants)
    if spec.beta <= 0.0:
        raise ParameterError("the decay exponent needs beta > 0 (singular drifts)")
    if n_paths < 1:
        raise ParameterError("n_paths must be at least 1")
    if np.array_equal(x0.values, y0.values):
        raise DegenerateSampleError("x0 and y0 must differ for a decay study")
    delta_hat = min(rep.delta_a2, rep.delta_a3)
    if delta_hat <= 0.0:
        raise ConfigError("checker constants must provide a positive delta")
    times = _as_time_grid(time_grid, cfg.dt)
    steps = _grid_steps(times, cfg.dt)
    sp = spec.space_pair()
    model = noise_build(noise, grid, sp)
    horizon = float(times[-1])
    ab = spec.alpha / spec.beta

    def one_path(pid: int):
        stream = rng_substream(seed, pid)
        coupled = simulate_coupled(spec, grid, cfg, model, x0, y0, horizon, stream)
        lhs = coupled.dist_h[steps] ** (2.0 * ab)
        margins = decay1_margins(coupled, delta_hat)
        tol = decay1_tolerance(coupled, delta_hat)
        bad = margins < -tol
        return lhs, bad[steps - 1], int(np.count_nonzero(bad))

    results = _path_map(one_path, n_paths)
    samples = np.stack([r[0] for r in results])
    grid_bad = np.stack([r[1] for r in results])
    total = sum(r[2] for r in results)
    mean, se = _mc_mean_se(samples)

    d0_sq = norm_h(x0 - y0, sp) ** 2
    x_sq = norm_h(x0, sp) ** 2
    y_sq = norm_h(y0, sp) ** 2
    supply = x_sq + y_sq + 2.0 * times * (rep.k_a3 + model.hs_norm_sq)
    rhs = (2.0 * d0_sq / (delta_hat * times)) ** ab * supply / (delta_hat * times)
    passes = mean + 2.0 * se <= rhs
    return DecayReport(
        spec=spec,
        dt=cfg.dt,
        times=times,
        mc_mean=mean,
        mc_se=se,
        rhs_bound=rhs,
        pathwise_violations=grid_bad.sum(axis=0).astype(np.int64),
        passes=passes,
        n_paths=n_paths,
        delta_hat=delta_hat,
        violations_total=total,
    )


# ---------------------------------------------------------------------------
# moment report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentReport:
    """MC energy balance |X_t|_H^2 + d3 I(t) against the supply bound."""

    spec: DriftSpec
    dt: float
    times: np.ndarray = field(repr=False)
    mc_mean: np.ndarray = field(repr=False)
    mc_se: np.ndarray = field(repr=False)
    bound: np.ndarray = field(repr=False)
    passes: np.ndarray = field(repr=False)
    n_paths: int = 0
    delta_a3: float = 0.0

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.passes))

    def to_csv(self) -> str:
        rows = [
            (t, m, s, b, bool(p))
            for t, m, s, b, p in zip(
                self.times, self.mc_mean, self.mc_se, self.bound, self.passes
            )
        ]
        return _csv_table(["t", "mc_mean", "mc_se", "bound", "pass"], rows)

    def to_json_summary(self) -> dict:
        return {
            "report": "moments",
            "equation": self.spec.kind,
            "n_paths": self.n_paths,
            "delta_a3": self.delta_a3,
            "times": [float(t) for t in self.times],
            "mc_mean": [float(v) for v in self.mc_mean],
            "mc_se": [float(v) for v in self.mc_se],
            "bound": [float(v) for v in self.bound],
            "pass_per_time": [bool(v) for v in self.passes],
            "pass": self.all_pass,
        }


def moment_report(
    spec: DriftSpec,
    grid: Grid1D,
    cfg: IntegratorConfig,
    noise: NoiseSpec,
    x0: Field,
    time_grid=MOMENT_TIME_GRID,
    n_paths: int = 200,
    seed: int = 0,
    constants: AssumptionReport | None = None,
) -> MomentReport:
    """Ito balance in expectation with left-endpoint quadrature slack.

    Pass per time point is ``mean - 2 SE <= |x0|_H^2 + t (K3 + HS) + 0.05 dt t``.
    """
    rep = _require_constants(constants)
    if n_paths < 1:
        raise ParameterError("n_paths must be at least 1")
    times = _as_time_grid(time_grid, cfg.dt, positive=False)
    steps = _grid_steps(times, cfg.dt)
    sp = spec.space_pair()
    model = noise_build(noise, grid, sp)
    horizon = float(times[-1])

    def one_path(pid: int):
        stream = rng_substream(seed, pid)
        stats = simulate_path(spec, grid, cfg, model, x0, horizon, stream)
        return stats.h_norm_sq[steps] + rep.delta_a3 * stats.v_alpha_integral[steps]

    samples = np.stack(_path_map(one_path, n_paths))
    mean, se = _mc_mean_se(samples)
    x_sq = norm_h(x0, sp) ** 2
    bound = x_sq + times * (rep.k_a3 + model.hs_norm_sq) + 0.05 * cfg.dt * times
    passes = mean - 2.0 * se <= bound
    return MomentReport(
        spec=spec,
        dt=cfg.dt,
        times=times,
        mc_mean=mean,
        mc_se=se,
        bound=bound,
        passes=passes,
        n_paths=n_paths,
        delta_a3=rep.delta_a3,
    )


# ---------------------------------------------------------------------------
# semigroup report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SemigroupReport:
    """Coupled MC of |P_t F(x0) - P_t F(y0)| against the theorem's shape."""

    spec: DriftSpec
    dt: float
    functional_names: tuple[str, ...]
    times: np.ndarray = field(repr=False)
    estimates: np.ndarray = field(repr=False)
    mc_se: np.ndarray = field(repr=False)
    shapes: np.ndarray = field(repr=False)
    c_hat: np.ndarray = field(repr=False)
    n_paths: int = 0

    @property
    def c_hat_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.c_hat)))

    def to_csv(self) -> str:
        rows = []
        for i, name in enumerate(self.functional_names):
            for j, t in enumerate(self.times):
                shape = self.shapes[i, j]
                est = self.estimates[i, j]
                ratio = est / shape if shape > 0.0 else (0.0 if est == 0.0 else math.inf)
                rows.append((name, t, est, self.mc_se[i, j], shape, ratio))
        return _csv_table(
            ["functional", "t", "estimate", "mc_se", "shape_bound", "ratio"], rows
        )

    def to_json_summary(self) -> dict:
        return {
            "report": "semigroup",
            "equation": self.spec.kind,
            "n_paths": self.n_paths,
            "functionals": list(self.functional_names),
            "times": [float(t) for t in self.times],
            "c_hat": {
                name: float(c) for name, c in zip(self.functional_names, self.c_hat)
            },
            "pass": self.c_hat_finite,
        }


def _semigroup_shape(
    func: TestFunctional, spec: DriftSpec, t: np.ndarray, d0: float, hx: float, hy: float
) -> np.ndarray:
    base = 1.0 + hx / np.sqrt(t) + hy / np.sqrt(t)
    if func.kind == "lipschitz":
        return func.constant * d0 / np.sqrt(t) * base ** (spec.beta / spec.alpha)
    g = func.gamma
    power = spec.beta * g / spec.alpha
    return func.constant * d0**g / t ** (0.5 * g) * base**power


def _check_holder_range(functionals: Sequence[TestFunctional], spec: DriftSpec):
    limit = spec.alpha**2 / (spec.alpha + spec.beta)
    for func in functionals:
        if func.kind == "holder" and func.gamma > limit + 1e-12:
            raise ParameterError(
                f"gamma = {func.gamma!r} exceeds alpha^2/(alpha+beta) = {limit!r}"
            )


def semigroup_report(
    spec: DriftSpec,
    grid: Grid1D,
    cfg: IntegratorConfig,
    noise: NoiseSpec,
    x0: Field,
    y0: Field,
    functionals: Sequence[TestFunctional] | None = None,
    time_grid=DECAY_TIME_GRID,
    n_paths: int = 200,
    seed: int = 0,
) -> SemigroupReport:
    """Semigroup regularity differences estimated with shared-noise coupling.

    The fitted constant per functional is ``C = max_t estimate / S(t)``; the
    coupling shares increments between the two starts, so the difference has
    far lower variance than independent runs would give.
    """
    if n_paths < 1:
        raise ParameterError("n_paths must be at least 1")
    sp = spec.space_pair()
    if functionals is None:
        functionals = default_bank(grid, sp)
    if not functionals:
        raise ParameterError("the functional bank must not be empty")
    _check_holder_range(functionals, spec)
    times = _as_time_grid(time_grid, cfg.dt)
    model = noise_build(noise, grid, sp)
    horizon = float(times[-1])

    def one_path(pid: int):
        stream = rng_substream(seed, pid)
        coupled = simulate_coupled(
            spec, grid, cfg, model, x0, y0, horizon, stream, record_times=times
        )
        out = np.empty((len(functionals), times.size))
        for j in range(times.size):
            u = Field(grid, coupled.x.snapshots[j])
            v = Field(grid, coupled.y.snapshots[j])
            for i, func in enumerate(functionals):
                out[i, j] = func(u) - func(v)
        return out

    diffs = np.stack(_path_map(one_path, n_paths))
    mean = diffs.mean(axis=0)
    if n_paths > 1:
        se = diffs.std(axis=0, ddof=1) / math.sqrt(n_paths)
    else:
        se = np.zeros_like(mean)
    estimates = np.abs(mean)

    d0 = norm_h(x0 - y0, sp)
    hx = norm_h(x0, sp)
    hy = norm_h(y0, sp)
    shapes = np.stack(
        [_semigroup_shape(func, spec, times, d0, hx, hy) for func in functionals]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(
            shapes > 0.0, estimates / shapes, np.where(estimates == 0.0, 0.0, np.inf)
        )
    c_hat = ratios.max(axis=1)
    return SemigroupReport(
        spec=spec,
        dt=cfg.dt,
        functional_names=tuple(f.name for f in functionals),
        times=times,
        estimates=estimates,
        mc_se=se,
        shapes=shapes,
        c_hat=c_hat,
        n_paths=n_paths,
    )


# ---------------------------------------------------------------------------
# invariant report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvariantReport:
    """Occupation averages, the V-norm tightness bound, start discrepancies."""

    spec: DriftSpec
    dt: float
    horizon: float
    stride: float
    functional_names: tuple[str, ...]
    mu_hat: np.ndarray = field(repr=False)
    mu_v_alpha: np.ndarray = field(repr=False)
    bound: float = 0.0
    delta_horizons: tuple[float, ...] = ()
    delta_table: np.ndarray = field(default=None, repr=False)
    n_starts: int = 1

    @property
    def kb_ok(self) -> bool:
        """Tightness check for the first start (the occupation-measure one).

        The bound is an estimate on occupation averages started from zero;
        a far start carries a |x0|^2/(d3 T) transient that only vanishes as
        T grows, so additional starts are reported but not checked.
        """
        return bool(self.mu_v_alpha[0] <= 1.1 * self.bound)

    @property
    def all_pass(self) -> bool:
        return self.kb_ok

    def to_csv(self) -> str:
        rows = []
        for s in range(self.n_starts):
            for i, name in enumerate(self.functional_names):
                rows.append((s, name, self.mu_hat[s, i]))
            rows.append((s, "v_alpha_mean", self.mu_v_alpha[s]))
        return _csv_table(["start", "functional", "mu_hat"], rows)

    def to_json_summary(self) -> dict:
        return {
            "report": "invariant",
            "equation": self.spec.kind,
            "horizon": self.horizon,
            "stride": self.stride,
            "functionals": list(self.functional_names),
            "mu_hat": [[float(v) for v in row] for row in self.mu_hat],
            "mu_v_alpha": [float(v) for v in self.mu_v_alpha],
            "kb_bound": self.bound,
            "kb_ok": self.kb_ok,
            "delta_horizons": [float(t) for t in self.delta_horizons],
            "delta_table": [float(v) for v in np.atleast_1d(self.delta_table)]
            if self.delta_table is not None
            else [],
            "pass": self.all_pass,
        }


def invariant_report(
    spec: DriftSpec,
    grid: Grid1D,
    cfg: IntegratorConfig,
    noise: NoiseSpec,
    T: float,
    snapshot_stride: float = 0.1,
    seed: int = 0,
    starts: Sequence[Field] | None = None,
    functionals: Sequence[TestFunctional] | None = None,
    constants: AssumptionReport | None = None,
) -> InvariantReport:
    """Long-run occupation averages per start plus the tightness check.

    One long trajectory per distinct start (identical starts share the
    trajectory, so equal starts give a discrepancy of exactly zero, while
    distinct starts get independent substreams).  The time average of the
    V-norm power uses the integrator's own quadrature, ``I(T)/T``, and the
    first start — the occupation-measure one, defaulting to zero — is
    checked against ``1.1 (K3 + HS)/d3``.
    """
    rep = _require_constants(constants)
    if T <= 0.0:
        raise ParameterError("T must be positive")
    if snapshot_stride <= 0.0:
        raise ParameterError("snapshot_stride must be positive")
    k_stride = round(snapshot_stride / cfg.dt)
    if k_stride < 1 or abs(snapshot_stride - k_stride * cfg.dt) > 1e-9:
        raise ParameterError("snapshot_stride must be a positive multiple of dt")
    if rep.delta_a3 <= 0.0:
        raise ConfigError("checker constants must provide a positive delta_a3")
    sp = spec.space_pair()
    if starts is None:
        starts = [_zero_field(grid)]
    starts = list(starts)
    if not starts:
        raise ParameterError("at least one start is required")
    if functionals is None:
        functionals = default_bank(grid, sp)
    functionals = list(functionals)
    if not functionals:
        raise ParameterError("the functional bank must not be empty")
    model = noise_build(noise, grid, sp)

    n_snaps = int(T / snapshot_stride + 1e-9)
    if n_snaps < 1:
        raise ParameterError("T must cover at least one snapshot stride")
    snap_times = snapshot_stride * np.arange(1, n_snaps + 1)

    # Identical starts share their trajectory (and hence their averages);
    # distinct starts get independent substreams in first-appearance order.
    unique: dict[bytes, int] = {}
    owner = []
    for start in starts:
        if start.grid != grid:
            raise ParameterError("every start must live on the report grid")
        key = np.ascontiguousarray(start.values).tobytes()
        if key not in unique:
            unique[key] = len(unique)
        owner.append(unique[key])
    distinct = [starts[owner.index(i)] for i in range(len(unique))]

    horizons = tuple(t for t in DISCREPANCY_HORIZONS if t <= T + 1e-9)

    def one_start(uid: int):
        stream = rng_substream(seed, uid)
        stats = simulate_path(
            spec, grid, cfg, model, distinct[uid], float(T), stream,
            record_times=snap_times,
        )
        values = np.empty((len(functionals), n_snaps))
        for j in range(n_snaps):
            u = Field(grid, stats.snapshots[j])
            for i, func in enumerate(functionals):
                values[i, j] = func(u)
        mu = values.mean(axis=1)
        mu_va = stats.v_alpha_integral[-1] / float(T)
        running = np.cumsum(values, axis=1)
        partial = []
        for h in horizons:
            m = int(h / snapshot_stride + 1e-9)
            partial.append(running[:, m - 1] / m)
        return mu, mu_va, np.array(partial) if horizons else np.empty((0, len(functionals)))

    per_unique = _path_map(one_start, len(distinct))
    mu_hat = np.stack([per_unique[o][0] for o in owner])
    mu_va = np.array([per_unique[o][1] for o in owner])

    if len(starts) >= 2 and horizons:
        partials = np.stack([per_unique[o][2] for o in owner])  # (start, h, F)
        spread = partials.max(axis=0) - partials.min(axis=0)
        delta = spread.max(axis=1)
    else:
        delta = np.zeros(len(horizons))

    bound = (rep.k_a3 + model.hs_norm_sq) / rep.delta_a3
    return InvariantReport(
        spec=spec,
        dt=cfg.dt,
        horizon=float(T),
        stride=float(snapshot_stride),
        functional_names=tuple(f.name for f in functionals),
        mu_hat=mu_hat,
        mu_v_alpha=mu_va,
        bound=bound,
        delta_horizons=horizons,
        delta_table=delta,
        n_starts=len(starts),
    )


# ---------------------------------------------------------------------------
# ergodic rate report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErgodicRateReport:
    """Distance of P_t F from the long-run average versus the decay shape."""

    spec: DriftSpec
    dt: float
    case: str
    functional_names: tuple[str, ...]
    times: np.ndarray = field(repr=False)
    p_hat: np.ndarray = field(repr=False)
    mc_se: np.ndarray = field(repr=False)
    mu_hat: np.ndarray = field(repr=False)
    estimates: np.ndarray = field(repr=False)
    shapes: np.ndarray = field(repr=False)
    c_hat: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)
    mu_horizon: float = 0.0
    n_paths: int = 0

    @property
    def c_hat_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.c_hat)))

    def to_csv(self) -> str:
        rows = []
        for i, name in enumerate(self.functional_names):
            for j, t in enumerate(self.times):
                shape = self.shapes[i, j]
                est = self.estimates[i, j]
                ratio = est / shape if shape > 0.0 else (0.0 if est == 0.0 else math.inf)
                rows.append(
                    (name, t, self.p_hat[i, j], self.mc_se[i, j], est, shape, ratio)
                )
        return _csv_table(
            ["functional", "t", "p_hat", "mc_se", "estimate", "shape_bound", "ratio"],
            rows,
        )

    def to_json_summary(self) -> dict:
        return {
            "report": "ergodic_rate",
            "equation": self.spec.kind,
            "case": self.case,
            "n_paths": self.n_paths,
            "mu_horizon": self.mu_horizon,
            "functionals": list(self.functional_names),
            "times": [float(t) for t in self.times],
            "mu_hat": {
                name: float(v) for name, v in zip(self.functional_names, self.mu_hat)
            },
            "c_hat": {
                name: float(v) for name, v in zip(self.functional_names, self.c_hat)
            },
            "loglog_slope": {
                name: float(v) for name, v in zip(self.functional_names, self.slopes)
            },
            "pass": self.c_hat_finite,
        }


def _ergodic_shape(
    func: TestFunctional, spec: DriftSpec, t: np.ndarray, hx: float, case: str
) -> np.ndarray:
    if case == "lipschitz":
        lead = func.constant * (1.0 + hx) / np.sqrt(t)
        return lead * (1.0 + ((1.0 + hx) / np.sqrt(t)) ** (spec.beta / spec.alpha))
    g = func.gamma
    lead = func.constant * (1.0 + hx**g) / t ** (0.5 * g)
    tail = 1.0 + (1.0 + hx ** (spec.beta * g / spec.alpha)) / t ** (
        0.5 * spec.beta * g / spec.alpha
    )
    return lead * tail


def ergodic_rate_report(
    spec: DriftSpec,
    grid: Grid1D,
    cfg: IntegratorConfig,
    noise: NoiseSpec,
    x0: Field,
    functionals: Sequence[TestFunctional] | None = None,
    time_grid=DECAY_TIME_GRID,
    n_paths: int = 200,
    seed: int = 0,
    invariant: InvariantReport | None = None,
    constants: AssumptionReport | None = None,
) -> ErgodicRateReport:
    """Convergence rate of P_t F toward the occupation average.

    Case routing follows the regularity split: Lipschitz functionals for
    ``alpha >= sqrt(2)``, gamma-Hoelder with ``gamma <= alpha^2/(alpha+beta)``
    below it (a Lipschitz-only bank triggers a warning and is replaced by
    the Hoelder bank).  The reference ``mu_hat(F)`` comes from an occupation
    run whose horizon must be at least ten times the largest report time;
    when ``invariant`` is omitted it is computed here, which requires the
    checker ``constants``.
    """
    if n_paths < 1:
        raise ParameterError("n_paths must be at least 1")
    sp = spec.space_pair()
    times = _as_time_grid(time_grid, cfg.dt)
    case = "lipschitz" if spec.alpha >= math.sqrt(2.0) else "holder"
    gamma_max = spec.alpha**2 / (spec.alpha + spec.beta) if spec.beta > 0.0 else 1.0
    if functionals is None:
        functionals = (
            default_bank(grid, sp)
            if case == "lipschitz"
            else holder_bank(min(1.0, gamma_max), sp)
        )
    functionals = list(functionals)
    if not functionals:
        raise ParameterError("the functional bank must not be empty")
    if case == "holder":
        if all(f.kind == "lipschitz" for f in functionals):
            warnings.warn(
                "alpha <= sqrt(2): Lipschitz-only bank replaced by the "
                "Hoelder bank (regularity case (ii))",
                stacklevel=2,
            )
            functionals = list(holder_bank(min(1.0, gamma_max), sp))
            invariant = None
        _check_holder_range(
            [f for f in functionals if f.kind == "holder"], spec
        )
    names = tuple(f.name for f in functionals)

    need = 10.0 * float(times[-1])
    if invariant is None:
        stride = 0.1 if 0.1 >= cfg.dt else cfg.dt
        k_stride = max(1, round(stride / cfg.dt))
        stride = k_stride * cfg.dt
        horizon = math.ceil(need / stride) * stride
        invariant = invariant_report(
            spec, grid, cfg, noise, horizon, stride, seed,
            starts=[_zero_field(grid)], functionals=functionals,
            constants=_require_constants(constants),
        )
    if invariant.horizon < need - 1e-9:
        raise ParameterError(
            "the occupation horizon must be at least 10x the largest report time"
        )
    try:
        cols = [invariant.functional_names.index(name) for name in names]
    except ValueError as exc:
        raise ConfigError(
            "the occupation run must cover every report functional"
        ) from exc
    mu = invariant.mu_hat[0, cols]

    model = noise_build(noise, grid, sp)
    horizon_t = float(times[-1])

    def one_path(pid: int):
        stream = rng_substream(seed, _ERGODIC_PATH_BASE + pid)
        stats = simulate_path(
            spec, grid, cfg, model, x0, horizon_t, stream, record_times=times
        )
        out = np.empty((len(functionals), times.size))
        for j in range(times.size):
            u = Field(grid, stats.snapshots[j])
            for i, func in enumerate(functionals):
                out[i, j] = func(u)
        return out

    values = np.stack(_path_map(one_path, n_paths))
    p_hat = values.mean(axis=0)
    if n_paths > 1:
        se = values.std(axis=0, ddof=1) / math.sqrt(n_paths)
    else:
        se = np.zeros_like(p_hat)
    estimates = np.abs(p_hat - mu[:, None])

    hx = norm_h(x0, sp)
    shapes = np.stack(
        [_ergodic_shape(func, spec, times, hx, case) for func in functionals]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(
            shapes > 0.0, estimates / shapes, np.where(estimates == 0.0, 0.0, np.inf)
        )
    c_hat = ratios.max(axis=1)

    # Log-log slope over the largest decade of the report grid.
    decade = times >= times[-1] / 10.0 - 1e-12
    slopes = np.full(len(functionals), np.nan)
    if np.count_nonzero(decade) >= 2:
        logt = np.log(times[decade])
        for i in range(len(functionals)):
            cleaned = np.maximum(estimates[i, decade], 1e-12)
            slopes[i] = np.polyfit(logt, np.log(cleaned), 1)[0]

    return ErgodicRateReport(
        spec=spec,
        dt=cfg.dt,
        case=case,
        functional_names=names,
        times=times,
        p_hat=p_hat,
        mc_se=se,
        mu_hat=mu,
        estimates=estimates,
        shapes=shapes,
        c_hat=c_hat,
        slopes=slopes,
        mu_horizon=invariant.horizon,
        n_paths=n_paths,
    )
