"""Randomized quadrature for functions of very many variables: changing
dimension algorithms built from interlaced scrambled polynomial lattice rules.
"""

from .cdalg import (
    CostLedger,
    CostModel,
    Plan,
    PlannerConstants,
    PlanningError,
    RuleTemplate,
    cd_estimate,
    cd_estimate_many,
    cost_model,
    diagnostics_B,
    epsilon_dimension,
    plan_build,
    plan_cost,
)
from .decomp import (
    Anchor,
    BlackBoxIntegrand,
    alt_sum_S,
    anchored_component,
    bias_squared,
    downward_closure,
    psi_Q_project,
    psi_operator_norm,
    psi_project,
    r_squared,
)
from .harness import (
    BankFunction,
    ExperimentConfig,
    StudyResult,
    bank_from_weights,
    bank_preset,
    dump_points,
    eps_grid_for_costs,
    run_convergence_study,
    run_variance_study,
    weight_preset,
)
from .kernels import SobolevKernel, bernoulli, k_chi, k_u, kernel_diag, kernel_mean_M
from .lattice import (
    DualWeightedMerit,
    GeneratingVector,
    PointSet,
    irreducible_modulus,
    plr_points,
    search_generating_vector,
)
from .quadrature import (
    INTERLACED_PLR,
    MONTE_CARLO,
    RuleSpec,
    VarianceEstimate,
    empirical_variance,
    rule_points,
    run_rule,
)
from .scramble import ScrambledRule, interlace_integers, scramble_numerators
from .weights import (
    ExplicitWeights,
    FiniteIntersectionWeights,
    FiniteProductWeights,
    PODWeights,
    ProductWeights,
    Truncation,
    disjoint_pair_weights,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
