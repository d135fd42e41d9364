"""foamlab: symmetric lattice tilings with low-noise rounding, and the
Monte Carlo / energy / game diagnostics that probe them."""

from .bodies import (
    CellStabilityReport,
    CubeTiling,
    FoamTiling,
    TilingBody,
    body_from_descriptor,
    check_cell_stability,
    no_integer_gap,
)
from .energy import (
    EnergyParams,
    LBExperimentReport,
    coordinate_load,
    coordinate_loads,
    energy,
    is_good,
    linearized_energy,
    linearized_energy_batch,
    run_lb_experiment,
)
from .errors import (
    CalibrationError,
    DomainError,
    FoamlabError,
    SamplingBudgetError,
    StateSpaceError,
)
from .game import (
    BodyLatticeRounding,
    ConstantStrategy,
    DecencyReport,
    GameEvalReport,
    GameInstance,
    LatticeRounding,
    ParityStrategy,
    TableStrategy,
    TilingStrategy,
    amplification_step_count,
    box_majority,
    brute_force_value,
    decency_probe,
    enumerate_symmetric_strategies,
    equivalence_counterexamples,
    estimate_decency,
    estimate_indecisive_rate,
    estimate_step_escape,
    evaluate_strategy,
    exact_strategy_value,
    judge,
    sample_challenge,
    strategy_to_rounding,
)
from .needles import (
    BernoulliSteps,
    DisjointBernoulliSteps,
    GaussianSteps,
    MCEstimate,
    SurfaceAreaReport,
    count_crossings,
    estimate_condition_failure,
    estimate_escape,
    estimate_noise_sensitivity,
    estimate_surface_area,
    sample_step,
)
from .scoring import (
    CenterChoice,
    ScoreVector,
    TilingParams,
    center_score,
    choice_distribution,
    interval_products,
    sample_index,
    select_center,
    smooth_step,
)
from .torus import (
    TorusConfig,
    canonical_config,
    frac,
    gap_distance,
    gap_sign,
    segment_contains_level,
)

__all__ = [
    "BernoulliSteps",
    "BodyLatticeRounding",
    "CalibrationError",
    "CellStabilityReport",
    "CenterChoice",
    "ConstantStrategy",
    "CubeTiling",
    "DecencyReport",
    "DisjointBernoulliSteps",
    "DomainError",
    "EnergyParams",
    "FoamTiling",
    "FoamlabError",
    "GameEvalReport",
    "GameInstance",
    "GaussianSteps",
    "LBExperimentReport",
    "LatticeRounding",
    "MCEstimate",
    "ParityStrategy",
    "SamplingBudgetError",
    "ScoreVector",
    "StateSpaceError",
    "SurfaceAreaReport",
    "TableStrategy",
    "TilingBody",
    "TilingParams",
    "TilingStrategy",
    "TorusConfig",
    "amplification_step_count",
    "body_from_descriptor",
    "box_majority",
    "brute_force_value",
    "canonical_config",
    "center_score",
    "check_cell_stability",
    "choice_distribution",
    "coordinate_load",
    "coordinate_loads",
    "count_crossings",
    "decency_probe",
    "energy",
    "enumerate_symmetric_strategies",
    "equivalence_counterexamples",
    "estimate_condition_failure",
    "estimate_decency",
    "estimate_escape",
    "estimate_indecisive_rate",
    "estimate_noise_sensitivity",
    "estimate_step_escape",
    "estimate_surface_area",
    "evaluate_strategy",
    "exact_strategy_value",
    "frac",
    "gap_distance",
    "gap_sign",
    "interval_products",
    "is_good",
    "judge",
    "linearized_energy",
    "linearized_energy_batch",
    "no_integer_gap",
    "run_lb_experiment",
    "sample_challenge",
    "sample_index",
    "sample_step",
    "select_center",
    "segment_contains_level",
    "smooth_step",
]

__version__ = "0.1.0"
