"""Numerical laboratory for the additive bosonic noise channel.

Truncated Fock-space operator algebra, the photon add/subtract semigroup and
its short-time maps, stationarity residuals of the constrained entropy
minimization, and a seeded random-restart search for states that beat the
thermal output-entropy benchmark.
"""

__version__ = "0.1.0"

from .channel import (
    NoiseParams,
    QuadratureGrid,
    additive_noise_channel,
    gaussian_displacement_grid,
    lindblad_adjoint,
    lindblad_apply,
    thermalize_adjoint,
    thermalize_exact,
    thermalize_exact_adjoint,
    thermalize_first_order,
)
from .config import ExperimentConfig
from .errors import (
    BoundaryState,
    GramSingular,
    MoelabError,
    NonPhysicalState,
    NotAProjector,
    PositivityLoss,
    TruncationBreach,
    TruncationWarning,
    UnreachableTarget,
)
from .fock import (
    RANK_FLOOR,
    DensityMatrix,
    FockSpace,
    ThermalSpec,
    annihilation,
    creation,
    displacement,
    embed,
    energy,
    entropy_rate,
    identity,
    maximally_mixed,
    number_operator,
    number_state,
    random_density_matrix,
    set_entropy,
    thermal_state,
    trace_distance,
    vacuum_state,
    von_neumann_entropy,
)
from .optimizer import (
    BenchmarkResult,
    OptimizeResult,
    OptimizerOptions,
    SearchReport,
    counterexample_search,
    minimize_output_entropy,
    output_entropy_objective,
    project_gradient,
    thermal_benchmark,
)
from .variational import (
    ClosureReport,
    MinimalityReport,
    MultiplierFit,
    ScalingReport,
    boundary_entropy_scaling,
    boundary_rate,
    energy_stationarity_residual,
    entropy_stationarity_residual,
    minimality_perturbation_check,
    perturbation_entropy_change,
    projector_closure_check,
    stationarity_scaling,
    sweep_diagonal_projectors,
)
