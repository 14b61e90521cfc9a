"""Brascamp-Lieb type inequalities for finite Markov chains with commuting factor maps."""

from .markov import (
    FiniteMarkovModel,
    InvariantMeasureError,
    ModelError,
    NotStochasticError,
    build_model,
    carre_du_champ,
    dirichlet_form,
    generator_apply,
    semigroup_apply,
)
from .quotient import FactorMap, check_commutation, conditional_density, factor_map, quotient_model
from .bl import (
    check_edge_criterion,
    edge_active_sets,
    exponent_formulas,
    falsify_bl,
    optimize_exponents,
    pair_condition_check,
)

__version__ = "0.1.0"
