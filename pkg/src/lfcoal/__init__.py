"""Genealogies of supercritical linear-fractional branching processes.

Simulation of height-T coalescent genealogies and forward populations,
Bernoulli and uniform tip sampling, exact tree likelihoods under all three
observation regimes, maximum-likelihood fitting of (p, r), and an exact
enumeration oracle that adjudicates the closed-form sampling formulas.
"""

from .errors import LfcoalError
from .inference import FitResult, ObservationSet, fit, loglik_surface, total_loglik
from .likelihood import (
    DistinctDepthSummary,
    FormulaVariant,
    bernoulli_loglik,
    full_tree_loglik,
    ksample_cdf_closed,
    ksample_cdf_direct,
    ksample_lik_direct,
    ksample_marginal_loglik,
)
from .model import (
    BDRates,
    LFParams,
    MuKMeasure,
    ThinnedParams,
    bd_embedding_rates,
    coalescent_cdf,
    coalescent_pmf,
    coalescent_tail,
    mixing_measure,
    offspring_pgf,
    offspring_pmf,
    survival_probability,
    thinned_cdf,
    thinned_conditional_cdf,
    thinned_params,
    thinned_pmf,
    thinned_tail,
    validate_params,
)
from .oracle import (
    AdjudicationReport,
    ExactLaw,
    adjudicate,
    chi_square_gof,
    enumerate_cpp,
    exact_sampled_law,
    verify_mixture_identity,
)
from .quadrature import quadrature
from .simulate import (
    ForwardGenealogy,
    SampleMask,
    bernoulli_mask,
    coalescent_depths_of,
    simulate_cpp,
    simulate_forward_bgw,
    simulate_ksample_mixture,
    subsample_depths,
    uniform_mask,
)
from .trees import (
    DepthSeq,
    Tree,
    TreeNode,
    depths_to_tree,
    parse_newick,
    tree_to_depths,
    write_newick,
)

__version__ = "0.1.0"

__all__ = [
    "LfcoalError",
    "LFParams",
    "ThinnedParams",
    "MuKMeasure",
    "BDRates",
    "validate_params",
    "offspring_pmf",
    "offspring_pgf",
    "survival_probability",
    "coalescent_tail",
    "coalescent_cdf",
    "coalescent_pmf",
    "thinned_tail",
    "thinned_cdf",
    "thinned_pmf",
    "thinned_params",
    "thinned_conditional_cdf",
    "mixing_measure",
    "bd_embedding_rates",
    "DepthSeq",
    "Tree",
    "TreeNode",
    "depths_to_tree",
    "tree_to_depths",
    "parse_newick",
    "write_newick",
    "SampleMask",
    "ForwardGenealogy",
    "simulate_cpp",
    "simulate_forward_bgw",
    "coalescent_depths_of",
    "bernoulli_mask",
    "uniform_mask",
    "subsample_depths",
    "simulate_ksample_mixture",
    "FormulaVariant",
    "DistinctDepthSummary",
    "full_tree_loglik",
    "bernoulli_loglik",
    "ksample_lik_direct",
    "ksample_cdf_direct",
    "ksample_cdf_closed",
    "ksample_marginal_loglik",
    "ObservationSet",
    "FitResult",
    "total_loglik",
    "fit",
    "loglik_surface",
    "ExactLaw",
    "AdjudicationReport",
    "enumerate_cpp",
    "exact_sampled_law",
    "adjudicate",
    "verify_mixture_identity",
    "chi_square_gof",
    "quadrature",
    "__version__",
]
