"""Dissipativity testbed for singular stochastic evolution equations.

One-dimensional Dirichlet discretizations of two monotone drifts — the
singular p-Laplacian (1 < p < 2) on W^{1,p}_0 in L^2, and the fast
diffusion map (0 < r < 1) on L^{r+1} in W^{-1,2} — together with:

- randomized checkers that measure the dissipativity/coercivity constants
  of the drift on the grid (:mod:`spde_lab.drift_operators`),
- a nonexpansive implicit Euler integrator with exactly reproducible
  spectral noise (:mod:`spde_lab.integrator`, :mod:`spde_lab.noise`),
- Monte-Carlo reports that compare simulated statistics against the
  explicit decay, moment, semigroup, and occupation-measure bounds those
  constants imply (:mod:`spde_lab.estimators`),
- a CLI front end, ``spde-lab`` (:mod:`spde_lab.cli`).

Hot kernels are compiled with numba when available; set
``SPDE_LAB_NUMBA=0`` to force the pure-numpy fallback (both backends are
bit-identical), and ``SPDE_LAB_THREADS`` to cap path-parallelism.
"""

from .drift_operators import (
    AssumptionReport,
    DriftSpec,
    check_a1,
    check_a2,
    check_a3,
    check_a4,
    drift_apply,
    dual_norm_vstar,
    estimate_assumptions,
    pairing,
    sample_fields,
    sample_pairs,
)
from .errors import (
    ConfigError,
    ConsistencyError,
    DegenerateSampleError,
    GridMismatchError,
    ParameterError,
    SolverError,
    SpdeLabError,
)
from .estimators import (
    DecayReport,
    ErgodicRateReport,
    InvariantReport,
    MomentReport,
    SemigroupReport,
    TestFunctional,
    decay_report,
    default_bank,
    ergodic_rate_report,
    invariant_report,
    moment_report,
    semigroup_report,
)
from .function_space import (
    Field,
    Grid1D,
    SpacePair,
    eigen_basis,
    eigenpair,
    fast_diffusion_triple,
    inner_h,
    inner_l2,
    laplacian_apply,
    linear_heat_triple,
    norm_h,
    norm_lr,
    norm_v,
    norm_w1p,
    p_laplace_triple,
    poisson_solve,
)
from .integrator import (
    CoupledStats,
    IntegratorConfig,
    PathStats,
    decay1_margin,
    decay1_margins,
    decay1_tolerance,
    implicit_step,
    simulate_coupled,
    simulate_path,
)
from .noise import (
    NoiseModel,
    NoiseSpec,
    noise_build,
    noise_increment,
    rng_substream,
    standard_normals,
)
from .vector_inequalities import (
    GapSuiteResult,
    monotonicity_gap,
    monotonicity_gap_batch,
    phi_power,
    run_gap_suite,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "SpdeLabError",
    "ParameterError",
    "ConfigError",
    "GridMismatchError",
    "SolverError",
    "DegenerateSampleError",
    "ConsistencyError",
    # function space
    "Grid1D",
    "Field",
    "SpacePair",
    "p_laplace_triple",
    "fast_diffusion_triple",
    "linear_heat_triple",
    "inner_l2",
    "inner_h",
    "norm_h",
    "norm_v",
    "norm_w1p",
    "norm_lr",
    "laplacian_apply",
    "poisson_solve",
    "eigenpair",
    "eigen_basis",
    # vector inequalities
    "phi_power",
    "monotonicity_gap",
    "monotonicity_gap_batch",
    "GapSuiteResult",
    "run_gap_suite",
    # drift operators
    "DriftSpec",
    "AssumptionReport",
    "drift_apply",
    "pairing",
    "sample_fields",
    "sample_pairs",
    "dual_norm_vstar",
    "check_a1",
    "check_a2",
    "check_a3",
    "check_a4",
    "estimate_assumptions",
    # noise
    "NoiseSpec",
    "NoiseModel",
    "noise_build",
    "noise_increment",
    "rng_substream",
    "standard_normals",
    # integrator
    "IntegratorConfig",
    "PathStats",
    "CoupledStats",
    "implicit_step",
    "simulate_path",
    "simulate_coupled",
    "decay1_margin",
    "decay1_margins",
    "decay1_tolerance",
    # estimators
    "TestFunctional",
    "default_bank",
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
]
