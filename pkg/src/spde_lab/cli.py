"""Command-line orchestration: configs in, reports and PASS/FAIL lines out.

``spde-lab <subcommand> --config <path> [--out <dir>] [--seed <u64>]
[--paths <int>] [--trials <int>]`` runs one experiment per invocation and
writes its tables as CSV ('.' decimal, ',' separator, header row, LF) and
its summary as JSON.  Identical (config, seed) pairs produce byte-identical
files; ``SPDE_LAB_THREADS`` only caps parallelism and never changes output.

Exit codes: 0 all criteria pass, 1 at least one hard criterion fails,
2 configuration or I/O error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .drift_operators import AssumptionReport, DriftSpec, estimate_assumptions
from .errors import (
    ConfigError,
    ConsistencyError,
    DegenerateSampleError,
    GridMismatchError,
    ParameterError,
    SolverError,
)
from .estimators import (
    DECAY_TIME_GRID,
    MOMENT_TIME_GRID,
    decay_report,
    ergodic_rate_report,
    invariant_report,
    moment_report,
    semigroup_report,
)
from .function_space import Field, Grid1D, eigen_basis
from .integrator import IntegratorConfig, simulate_coupled, simulate_path
from .noise import NoiseSpec, noise_build, rng_substream
from .vector_inequalities import run_gap_suite

__all__ = ["Config", "ExperimentConfig", "load_config", "parse_config", "run_cli", "main"]

#: Substream id reserved for the assumption checkers (clear of path ids).
_CHECKER_STREAM_ID = 1 << 33

_SCHEMA = {
    "equation": {"kind", "p", "r", "epsilon"},
    "grid": {"n"},
    "integrator": {"dt", "newton_tol", "newton_max_iter", "max_damping_halvings"},
    "noise": {"sigma", "q", "k_modes", "seed"},
    "experiment": {
        "report",
        "time_grid",
        "n_paths",
        "T",
        "starts",
        "snapshot_stride",
        "n_samples",
        "trials",
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment block: which report to build and with what resources."""

    report: str | None = None
    time_grid: tuple[float, ...] | None = None
    n_paths: int = 200
    T: float | None = None
    starts: tuple[tuple[float, ...], ...] | None = None
    snapshot_stride: float = 0.1
    n_samples: int = 4000
    trials: int = 100_000


@dataclass(frozen=True)
class Config:
    """Validated run configuration assembled from the JSON blocks."""

    spec: DriftSpec
    grid: Grid1D
    integrator: IntegratorConfig
    noise: NoiseSpec
    experiment: ExperimentConfig


def _type_name(value) -> str:
    return type(value).__name__


def _get_number(block: dict, section: str, key: str, default):
    value = block.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {_type_name(value)}")
    return float(value)


def _get_int(block: dict, section: str, key: str, default):
    value = block.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {_type_name(value)}")
    return int(value)


def _parse_equation(block: dict) -> tuple[DriftSpec, float]:
    kind = block.get("kind")
    if kind is None:
        raise ConfigError("equation.kind is required")
    if kind not in ("p_laplace", "fast_diffusion", "linear_heat"):
        raise ConfigError(
            "equation.kind must be one of 'p_laplace', 'fast_diffusion', 'linear_heat'"
        )
    epsilon = _get_number(block, "equation", "epsilon", 1e-8)
    if epsilon < 0.0:
        raise ConfigError("epsilon must be nonnegative")
    if kind == "p_laplace":
        if "r" in block:
            raise ConfigError("equation.r does not apply to kind 'p_laplace'")
        if "p" not in block:
            raise ConfigError("equation.p is required for kind 'p_laplace'")
        p = _get_number(block, "equation", "p", None)
        if not 1.0 < p < 2.0:
            raise ConfigError("p must lie in (1,2)")
        return DriftSpec("p_laplace", p, 0.0), epsilon
    if kind == "fast_diffusion":
        if "p" in block:
            raise ConfigError("equation.p does not apply to kind 'fast_diffusion'")
        if "r" not in block:
            raise ConfigError("equation.r is required for kind 'fast_diffusion'")
        r = _get_number(block, "equation", "r", None)
        if not 0.0 < r < 1.0:
            raise ConfigError("r must lie in (0,1)")
        return DriftSpec("fast_diffusion", r, 0.0), epsilon
    if "p" in block or "r" in block:
        raise ConfigError("equation.p and equation.r do not apply to kind 'linear_heat'")
    return DriftSpec("linear_heat", 2.0, 0.0), epsilon


def _parse_time_grid(value) -> tuple[float, ...] | None:
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("experiment.time_grid must be a nonempty array of numbers")
    out = []
    for t in value:
        if isinstance(t, bool) or not isinstance(t, (int, float)):
            raise ConfigError("experiment.time_grid must contain numbers only")
        out.append(float(t))
    return tuple(out)


def _parse_starts(value) -> tuple[tuple[float, ...], ...] | None:
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("experiment.starts must be a nonempty array of arrays")
    starts = []
    for i, coeffs in enumerate(value):
        if not isinstance(coeffs, (list, tuple)):
            raise ConfigError(f"experiment.starts[{i}] must be an array of numbers")
        row = []
        for c in coeffs:
            if isinstance(c, bool) or not isinstance(c, (int, float)):
                raise ConfigError(f"experiment.starts[{i}] must contain numbers only")
            row.append(float(c))
        starts.append(tuple(row))
    return tuple(starts)


def parse_config(raw: dict) -> Config:
    """Validate a decoded JSON document; unknown keys are rejected by name."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config key: {section}")
        if not isinstance(raw[section], dict):
            raise ConfigError(f"config section '{section}' must be an object")
        for key in raw[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key: {section}.{key}")

    spec, epsilon = _parse_equation(raw.get("equation", {}))

    grid_block = raw.get("grid", {})
    n = _get_int(grid_block, "grid", "n", 31)
    try:
        grid = Grid1D(n)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None

    ib = raw.get("integrator", {})
    dt = _get_number(ib, "integrator", "dt", 1e-3)
    if dt <= 0.0:
        raise ConfigError("dt must be positive")
    try:
        integrator = IntegratorConfig(
            dt=dt,
            newton_tol=_get_number(ib, "integrator", "newton_tol", 1e-10),
            newton_max_iter=_get_int(ib, "integrator", "newton_max_iter", 50),
            max_damping_halvings=_get_int(ib, "integrator", "max_damping_halvings", 30),
            epsilon=epsilon,
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None

    nb = raw.get("noise", {})
    try:
        noise = NoiseSpec(
            sigma=_get_number(nb, "noise", "sigma", 0.1),
            q=_get_number(nb, "noise", "q", 1.0),
            k_modes=_get_int(nb, "noise", "k_modes", 16),
            seed=_get_int(nb, "noise", "seed", 0),
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None

    eb = raw.get("experiment", {})
    report = eb.get("report")
    if report is not None and not isinstance(report, str):
        raise ConfigError("experiment.report must be a string")
    n_paths = _get_int(eb, "experiment", "n_paths", 200)
    if n_paths < 1:
        raise ConfigError("experiment.n_paths must be at least 1")
    T = eb.get("T")
    if T is not None:
        T = _get_number(eb, "experiment", "T", None)
        if T <= 0.0:
            raise ConfigError("experiment.T must be positive")
    stride = _get_number(eb, "experiment", "snapshot_stride", 0.1)
    if stride <= 0.0:
        raise ConfigError("experiment.snapshot_stride must be positive")
    n_samples = _get_int(eb, "experiment", "n_samples", 4000)
    if n_samples < 2:
        raise ConfigError("experiment.n_samples must be at least 2")
    trials = _get_int(eb, "experiment", "trials", 100_000)
    if trials < 1:
        raise ConfigError("experiment.trials must be at least 1")
    experiment = ExperimentConfig(
        report=report,
        time_grid=_parse_time_grid(eb.get("time_grid")),
        n_paths=n_paths,
        T=T,
        starts=_parse_starts(eb.get("starts")),
        snapshot_stride=stride,
        n_samples=n_samples,
        trials=trials,
    )
    return Config(spec=spec, grid=grid, integrator=integrator, noise=noise, experiment=experiment)


def load_config(path: str) -> Config:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(raw)


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    return path


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _echo(spec: DriftSpec) -> str:
    return f"{spec.kind} (alpha={spec.alpha:g}, beta={spec.beta:g})"


def _expand_starts(grid: Grid1D, starts: tuple[tuple[float, ...], ...]) -> list[Field]:
    fields = []
    for i, coeffs in enumerate(starts):
        arr = np.asarray(coeffs, dtype=float)
        if arr.size > grid.n:
            raise ConfigError(
                f"experiment.starts[{i}] uses {arr.size} modes but the grid has n = {grid.n}"
            )
        if arr.size == 0:
            values = np.zeros(grid.n)
        else:
            _, modes = eigen_basis(grid, arr.size)
            values = arr @ modes
        fields.append(Field(grid, values))
    return fields


@dataclass(frozen=True)
class _Invocation:
    """One resolved CLI run: config plus flag overrides."""

    config: Config
    out_dir: str
    seed: int
    n_paths: int

    @property
    def spec(self) -> DriftSpec:
        return self.config.spec

    @property
    def grid(self) -> Grid1D:
        return self.config.grid

    @property
    def icfg(self) -> IntegratorConfig:
        return self.config.integrator

    @property
    def noise(self) -> NoiseSpec:
        return self.config.noise

    @property
    def exp(self) -> ExperimentConfig:
        return self.config.experiment

    def starts(self, default: tuple[tuple[float, ...], ...]) -> list[Field]:
        return _expand_starts(self.grid, self.exp.starts or default)

    def constants(self) -> AssumptionReport:
        rng = rng_substream(self.seed, _CHECKER_STREAM_ID)
        spec = self.spec.with_epsilon(self.icfg.epsilon)
        return estimate_assumptions(spec, self.grid, self.exp.n_samples, rng)


def _resolve(args) -> _Invocation:
    if not args.config:
        raise ConfigError(f"--config is required for '{args.command}'")
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.noise.seed
    if not 0 <= seed <= (1 << 64) - 1:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    n_paths = args.paths if args.paths is not None else config.experiment.n_paths
    if n_paths < 1:
        raise ConfigError("--paths must be at least 1")
    if seed != config.noise.seed:
        config = Config(
            spec=config.spec,
            grid=config.grid,
            integrator=config.integrator,
            noise=NoiseSpec(config.noise.sigma, config.noise.q, config.noise.k_modes, seed),
            experiment=config.experiment,
        )
    return _Invocation(config=config, out_dir=args.out, seed=seed, n_paths=n_paths)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_lemma31(args) -> int:
    seed = args.seed if args.seed is not None else 0
    trials = args.trials if args.trials is not None else 100_000
    if args.config:
        config = load_config(args.config)
        if args.seed is None:
            seed = config.noise.seed
        if args.trials is None:
            trials = config.experiment.trials
    result = run_gap_suite(trials, seed)
    summary = {
        "report": "lemma31",
        "trials": result.trials,
        "min_gap": result.min_gap,
        "min_normalized_gap": result.min_normalized_gap,
        "worst_r": result.worst_r,
        "worst_dim": result.worst_dim,
        "pass": result.passed,
    }
    _write(args.out, "gap_suite.json", _json_text(summary))
    print(
        f"[{_status(result.passed)}] lemma31: min normalized gap "
        f"{result.min_normalized_gap:.3e} over {result.trials} trials"
    )
    return 0 if result.passed else 1


def _cmd_check_assumptions(args) -> int:
    inv = _resolve(args)
    report = inv.constants()
    ok = report.delta_a2 > 0.0 and report.delta_a3 > 0.0
    summary = dict(report.to_dict())
    summary.update(
        report="check-assumptions",
        equation=inv.spec.kind,
        alpha=inv.spec.alpha,
        beta=inv.spec.beta,
        epsilon=inv.icfg.epsilon,
        n=inv.grid.n,
        **{"pass": ok},
    )
    _write(inv.out_dir, "assumptions.json", _json_text(summary))
    print(
        f"[{_status(ok)}] check-assumptions: {_echo(inv.spec)} "
        f"delta_a2={report.delta_a2:.4g} delta_a3={report.delta_a3:.4g} "
        f"k_a3={report.k_a3:.4g} k_a4={report.k_a4:.4g}"
    )
    return 0 if ok else 1


def _cmd_simulate(args) -> int:
    inv = _resolve(args)
    starts = inv.starts(default=((0.0,),))
    horizon = inv.exp.T if inv.exp.T is not None else 1.0
    model = noise_build(inv.noise, inv.grid, inv.spec.space_pair())
    stream = rng_substream(inv.seed, 0)
    if len(starts) >= 2:
        stats = simulate_coupled(
            inv.spec, inv.grid, inv.icfg, model, starts[0], starts[1], horizon, stream
        )
        _write(inv.out_dir, "coupled.csv", stats.to_csv())
        summary = {
            "report": "simulate",
            "equation": inv.spec.kind,
            "alpha": inv.spec.alpha,
            "beta": inv.spec.beta,
            "coupled": True,
            "T": horizon,
            "dt": inv.icfg.dt,
            "final_dist_h": float(stats.dist_h[-1]),
            "final_h_norm_sq_x": float(stats.x.h_norm_sq[-1]),
            "final_h_norm_sq_y": float(stats.y.h_norm_sq[-1]),
            "pass": True,
        }
        line = f"final dist_h {stats.dist_h[-1]:.6e}"
    else:
        stats = simulate_path(
            inv.spec, inv.grid, inv.icfg, model, starts[0], horizon, stream
        )
        _write(inv.out_dir, "path.csv", stats.to_csv())
        summary = {
            "report": "simulate",
            "equation": inv.spec.kind,
            "alpha": inv.spec.alpha,
            "beta": inv.spec.beta,
            "coupled": False,
            "T": horizon,
            "dt": inv.icfg.dt,
            "final_h_norm_sq": float(stats.h_norm_sq[-1]),
            "v_alpha_integral": float(stats.v_alpha_integral[-1]),
            "pass": True,
        }
        line = f"final |X|_H^2 {stats.h_norm_sq[-1]:.6e}"
    _write(inv.out_dir, "simulate.json", _json_text(summary))
    print(f"[PASS] simulate: {_echo(inv.spec)} T={horizon:g} {line}")
    return 0


def _cmd_decay(args) -> int:
    inv = _resolve(args)
    starts = inv.starts(default=((0.0,), (2.0,)))
    if len(starts) < 2:
        raise ConfigError("decay needs two starts (experiment.starts)")
    constants = inv.constants()
    report = decay_report(
        inv.spec,
        inv.grid,
        inv.icfg,
        inv.noise,
        starts[0],
        starts[1],
        inv.exp.time_grid or DECAY_TIME_GRID,
        inv.n_paths,
        inv.seed,
        constants,
    )
    _write(inv.out_dir, "decay.csv", report.to_csv())
    _write(inv.out_dir, "decay.json", _json_text(report.to_json_summary()))
    ok = report.all_pass and report.violations_total == 0
    print(
        f"[{_status(ok)}] decay: {_echo(inv.spec)} "
        f"{int(np.sum(report.passes))}/{report.passes.size} time points within bound, "
        f"{report.violations_total} pathwise violations"
    )
    return 0 if ok else 1


def _cmd_moments(args) -> int:
    inv = _resolve(args)
    starts = inv.starts(default=((0.0,),))
    constants = inv.constants()
    report = moment_report(
        inv.spec,
        inv.grid,
        inv.icfg,
        inv.noise,
        starts[0],
        inv.exp.time_grid or MOMENT_TIME_GRID,
        inv.n_paths,
        inv.seed,
        constants,
    )
    _write(inv.out_dir, "moments.csv", report.to_csv())
    _write(inv.out_dir, "moments.json", _json_text(report.to_json_summary()))
    print(
        f"[{_status(report.all_pass)}] moments: {_echo(inv.spec)} "
        f"{int(np.sum(report.passes))}/{report.passes.size} time points within bound"
    )
    return 0 if report.all_pass else 1


def _cmd_semigroup(args) -> int:
    inv = _resolve(args)
    starts = inv.starts(default=((0.0,), (2.0,)))
    if len(starts) < 2:
        raise ConfigError("semigroup needs two starts (experiment.starts)")
    report = semigroup_report(
        inv.spec,
        inv.grid,
        inv.icfg,
        inv.noise,
        starts[0],
        starts[1],
        None,
        inv.exp.time_grid or DECAY_TIME_GRID,
        inv.n_paths,
        inv.seed,
    )
    _write(inv.out_dir, "semigroup.csv", report.to_csv())
    _write(inv.out_dir, "semigroup.json", _json_text(report.to_json_summary()))
    worst = float(np.max(report.c_hat)) if report.c_hat.size else 0.0
    print(
        f"[{_status(report.c_hat_finite)}] semigroup: {_echo(inv.spec)} "
        f"fitted constant <= {worst:.4g} across {len(report.functional_names)} functionals"
    )
    return 0 if report.c_hat_finite else 1


def _cmd_invariant(args) -> int:
    inv = _resolve(args)
    starts = inv.starts(default=((0.0,), (2.0,)))
    horizon = inv.exp.T if inv.exp.T is not None else 400.0
    constants = inv.constants()
    report = invariant_report(
        inv.spec,
        inv.grid,
        inv.icfg,
        inv.noise,
        horizon,
        inv.exp.snapshot_stride,
        inv.seed,
        starts,
        constants=constants,
    )
    _write(inv.out_dir, "invariant.csv", report.to_csv())
    _write(inv.out_dir, "invariant.json", _json_text(report.to_json_summary()))
    print(
        f"[{_status(report.kb_ok)}] invariant: {_echo(inv.spec)} "
        f"mu_T(V^alpha)={report.mu_v_alpha[0]:.4g} vs 1.1*bound={1.1 * report.bound:.4g}"
    )
    deltas = np.atleast_1d(report.delta_table)
    if report.n_starts >= 2 and len(report.delta_horizons) >= 2 and deltas.size >= 2:
        first, last = float(deltas[0]), float(deltas[-1])
        h0, h1 = report.delta_horizons[0], report.delta_horizons[-1]
        if last <= 0.25 * first:
            print(
                f"[PASS] invariant (soft): discrepancy {last:.3e} at T={h1:g} "
                f"<= 0.25 x {first:.3e} at T={h0:g}"
            )
        else:
            print(
                f"[WARN] invariant (soft): discrepancy {last:.3e} at T={h1:g} "
                f"> 0.25 x {first:.3e} at T={h0:g}"
            )
    return 0 if report.kb_ok else 1


def _cmd_ergodic_rate(args) -> int:
    inv = _resolve(args)
    starts = inv.starts(default=((2.0,),))
    constants = inv.constants()
    report = ergodic_rate_report(
        inv.spec,
        inv.grid,
        inv.icfg,
        inv.noise,
        starts[0],
        None,
        inv.exp.time_grid or DECAY_TIME_GRID,
        inv.n_paths,
        inv.seed,
        invariant=None,
        constants=constants,
    )
    _write(inv.out_dir, "ergodic_rate.csv", report.to_csv())
    _write(inv.out_dir, "ergodic_rate.json", _json_text(report.to_json_summary()))
    worst = float(np.max(report.c_hat)) if report.c_hat.size else 0.0
    print(
        f"[{_status(report.c_hat_finite)}] ergodic-rate: {_echo(inv.spec)} "
        f"case={report.case} fitted constant <= {worst:.4g}"
    )
    return 0 if report.c_hat_finite else 1


_COMMANDS = {
    "lemma31": _cmd_lemma31,
    "check-assumptions": _cmd_check_assumptions,
    "simulate": _cmd_simulate,
    "decay": _cmd_decay,
    "moments": _cmd_moments,
    "semigroup": _cmd_semigroup,
    "invariant": _cmd_invariant,
    "ergodic-rate": _cmd_ergodic_rate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spde-lab",
        description="Dissipativity testbed: checkers, simulations, MC reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="JSON config file")
        cmd.add_argument("--out", default=".", help="output directory (default: .)")
        cmd.add_argument("--seed", type=int, default=None, help="override the noise seed")
        cmd.add_argument("--paths", type=int, default=None, help="override n_paths")
        cmd.add_argument("--trials", type=int, default=None, help="override trial count")
    return parser


def run_cli(argv) -> int:
    """Parse arguments, dispatch one subcommand, map failures to exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ConsistencyError as exc:
        print(f"consistency check failed: {exc}", file=sys.stderr)
        return 1
    except (
        ConfigError,
        ParameterError,
        GridMismatchError,
        DegenerateSampleError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
