"""Causal algorithmic recourse: counterfactual explanations versus minimal interventions."""
from .counterfactual import (
    HARD,
    SOFT,
    CounterfactualResult,
    Intervention,
    InterventionSet,
    compute_counterfactual,
)
from .errors import NoSolutionInGrid, RecourseError
from .feasibility import (
    Condition,
    FeasibilitySpec,
    PlausibilitySpec,
    VariablePolicy,
    ancestral_closure,
    check_action,
)
from .predictors import FAVORABLE, UNFAVORABLE, Logistic, SignLinear, Tree, predict, train
from .recourse import (
    CostConfig,
    RecourseSolution,
    SearchConfig,
    brute_force_oracle,
    build_cfe_action,
    cost_of,
    solve_cfe,
    solve_mint,
    verify_recourse,
)
from .scm import (
    CausalGraph,
    NoiseSpec,
    StructuralCausalModel,
    StructuralEquation,
    VariableSchema,
    abduct,
    fit_linear_sem,
    make_instance,
    sample,
    validate,
)

__version__ = "0.1.0"
