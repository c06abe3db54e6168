"""Shapley-value feature attribution: BShap, RBShap, CES, IG, micro-feature
Shapley and Possible-Marginals Shapley, with axiom checks and a scenario
registry."""

from .core import (
    AffineReparam,
    Dataset,
    Expression,
    Layered,
    Linear,
    LookupTable,
    Model,
    Sum,
    TreeEnsemble,
    eval_model,
    model_from_json,
    partial_derivative,
    read_dataset_csv,
    restrict_agreement,
    write_dataset_csv,
)
from .distributions import (
    DiscreteDistribution,
    conditional_expectation,
    empirical,
    explicit,
    independent,
    product_of_marginals,
    two_point_epsilon,
)
from .methods import (
    AttributionRequest,
    bshap,
    ces,
    ces_empirical,
    compositional_bshap,
    ig,
    micro_shapley,
    rbshap,
    reduce_to_cost_sharing,
)
from .pms import completed_set_function, estimate_marginal, pms
from .shapley_engine import Attribution, SetFunction, fixed_permutation_marginals, shapley_exact, shapley_sampled

__version__ = "0.1.0"
