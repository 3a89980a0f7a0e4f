"""mixlab: reweighted functional inequalities and metastability on finite spaces.

A numerical laboratory for mixture distributions pi = sum_i w_i pi_i on
finite state spaces: responsibility decompositions and the exact entropy
chain rule, Dirichlet forms and form-domination checks, exact optimal
transport to the reweighted hull with certified duality, inequality
verification suites, master-equation evolution with metastability
diagnostics, trajectory concentration experiments, and 1D Langevin
discretizations of Gaussian mixtures.

Submodules load lazily (PEP 562) so the command line tool can pin BLAS
thread counts through the environment before numpy is imported.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    # errors
    "ConfigurationError": "errors",
    "DimensionMismatchError": "errors",
    "InvariantViolationError": "errors",
    "IrreducibilityError": "errors",
    "MixlabError": "errors",
    "NumericError": "errors",
    "PreconditionError": "errors",
    "SolverError": "errors",
    "SupportError": "errors",
    # measures
    "EntropyDecomposition": "measures",
    "FiniteMeasure": "measures",
    "HullProjection": "measures",
    "JointLabeledMeasure": "measures",
    "MixtureModel": "measures",
    "ResponsibilityDecomposition": "measures",
    "StateSpace": "measures",
    "decompose": "measures",
    "entropy_decomposition": "measures",
    "kl_divergence": "measures",
    "kl_to_hull": "measures",
    "lift_joint": "measures",
    "responsibilities": "measures",
    "tv_distance": "measures",
    # dirichlet
    "AssumptionReport": "dirichlet",
    "ConstantEstimate": "dirichlet",
    "EdgeConductances": "dirichlet",
    "GeneratorMixture": "dirichlet",
    "ReversibleGenerator": "dirichlet",
    "check_assumption": "dirichlet",
    "dirichlet_form": "dirichlet",
    "entropy_production": "dirichlet",
    "estimate_lsi_constant": "dirichlet",
    "fisher_information": "dirichlet",
    "reweighted_poincare_residual": "dirichlet",
    "spectral_gap": "dirichlet",
    "spectral_gap_witness": "dirichlet",
    "variance": "dirichlet",
    # transport
    "AlphaFunction": "transport",
    "CostMatrix": "transport",
    "Coupling": "transport",
    "DualHullSolution": "transport",
    "HullTransportSolution": "transport",
    "OtSolution": "transport",
    "c_conjugate": "transport",
    "dual_to_hull": "transport",
    "ot_cost": "transport",
    "ot_to_hull": "transport",
    "w2_1d": "transport",
    # reports
    "Constant": "reports",
    "InequalityReport": "reports",
    "failure_severity": "reports",
    "make_report": "reports",
    "reports_to_csv": "reports",
    "reports_to_jsonl": "reports",
    # inequalities
    "ComponentTiProbe": "inequalities",
    "calibrate_alpha": "inequalities",
    "exact_component_poincare": "inequalities",
    "probe_component_ti": "inequalities",
    "tv_alpha": "inequalities",
    "verify_corollaries": "inequalities",
    "verify_reweighted_lsi": "inequalities",
    "verify_reweighted_ti": "inequalities",
    # dynamics
    "ConcentrationResult": "dynamics",
    "EvolutionTrace": "dynamics",
    "TrajectoryBatch": "dynamics",
    "concentration_experiment": "dynamics",
    "dissipation_check": "dynamics",
    "dissipation_residuals": "dynamics",
    "evolve": "dynamics",
    "metastability_report": "dynamics",
    "probe_w1_ti_constant": "dynamics",
    "simulate_time_average": "dynamics",
    # continuum
    "DivergenceEstimate": "continuum",
    "GaussianMixture1D": "continuum",
    "Grid1D": "continuum",
    "TwoModeStudy": "continuum",
    "continuum_divergences": "continuum",
    "discretize_langevin": "continuum",
    "grid_mixture": "continuum",
    "two_mode_report": "continuum",
    "two_mode_sweep": "continuum",
    # models
    "ModelSpec": "models",
    "build_block_mixture": "models",
    "build_double_well": "models",
    "build_gaussian_mixture_grid": "models",
    "build_ising_glauber": "models",
    "build_random_dominated": "models",
    "build_two_point": "models",
    "conditioned_mixture": "models",
    "two_point_generator": "models",
    # serialize
    "canonical_json": "serialize",
    "digest": "serialize",
    "read_json": "serialize",
    "write_json": "serialize",
}

_SUBMODULES = {
    "cli",
    "continuum",
    "dirichlet",
    "dynamics",
    "errors",
    "inequalities",
    "measures",
    "models",
    "reports",
    "rng",
    "serialize",
    "simplex",
    "transport",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    if name in _EXPORTS:
        value = getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
        globals()[name] = value
        return value
    if name in _SUBMODULES:
        module = import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(__all__) | _SUBMODULES)
