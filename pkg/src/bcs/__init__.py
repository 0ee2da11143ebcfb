"""Bayesian shrinkage regression for p >> n.

Conjugate Gibbs samplers for heavy-tailed and mixture shrinkage priors on
high-dimensional linear models, prior-dependent sparsification for
variable selection, posterior-mean-BIC hyperparameter tuning, credible
intervals, normal-shape diagnostics against the restricted least-squares
oracle, and a replicated simulation harness.
"""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    CovStructure,
    Dataset,
    TrueModel,
    dataset_meta,
    generate_dataset,
    load_csv,
    write_csv,
)
from .priors import (  # noqa: E402
    ConditionReport,
    Laplace,
    MixtureGaussian,
    Prior,
    SigmaPrior,
    StudentT,
    check_conditions,
    log_density,
    prior_from_dict,
    prior_marginal_sd,
    prior_to_dict,
    scale_from_gamma,
    solve_threshold,
    student_t_family,
    student_t_from_gamma,
    tail_mass,
)
from .sampler import (  # noqa: E402
    ChainState,
    PosteriorDraws,
    SamplerConfig,
    SamplerError,
    benchmark_beta_sweep,
    beta_block_update,
    beta_full_conditional,
    block_conditional,
    init_state,
    latent_update_laplace,
    latent_update_mixture,
    latent_update_student_t,
    load_chain,
    log_posterior,
    mixture_slab_probability,
    run_chain,
    sample_beta_full,
    save_chain,
    sigma2_full_conditional,
)
from .inference import (  # noqa: E402
    BvmCoordinate,
    BvmReport,
    IntervalReport,
    Metrics,
    OracleFit,
    SelectionReport,
    TuningReport,
    bic_score,
    bvm_diagnostics,
    credible_intervals,
    evaluate_metrics,
    inclusion_probabilities,
    mean_bic,
    oracle_ols,
    select,
    tune_gamma,
)
from .experiments import (  # noqa: E402
    ReplicateResult,
    ScenarioResult,
    ScenarioSpec,
    ToyResult,
    aggregate_metrics,
    bayesian_lasso_rate,
    evaluate_external_estimates,
    gamma_grid,
    load_result,
    persist,
    run_replicate,
    run_scenario,
    run_toy,
    toy_truth,
    write_tuning_csv,
)

__all__ = [
    "__version__",
    "CovStructure",
    "Dataset",
    "TrueModel",
    "dataset_meta",
    "generate_dataset",
    "load_csv",
    "write_csv",
    "ConditionReport",
    "Laplace",
    "MixtureGaussian",
    "Prior",
    "SigmaPrior",
    "StudentT",
    "check_conditions",
    "log_density",
    "prior_from_dict",
    "prior_marginal_sd",
    "prior_to_dict",
    "scale_from_gamma",
    "solve_threshold",
    "student_t_family",
    "student_t_from_gamma",
    "tail_mass",
    "ChainState",
    "PosteriorDraws",
    "SamplerConfig",
    "SamplerError",
    "benchmark_beta_sweep",
    "beta_block_update",
    "beta_full_conditional",
    "block_conditional",
    "init_state",
    "latent_update_laplace",
    "latent_update_mixture",
    "latent_update_student_t",
    "load_chain",
    "log_posterior",
    "mixture_slab_probability",
    "run_chain",
    "sample_beta_full",
    "save_chain",
    "sigma2_full_conditional",
    "BvmCoordinate",
    "BvmReport",
    "IntervalReport",
    "Metrics",
    "OracleFit",
    "SelectionReport",
    "TuningReport",
    "bic_score",
    "bvm_diagnostics",
    "credible_intervals",
    "evaluate_metrics",
    "inclusion_probabilities",
    "mean_bic",
    "oracle_ols",
    "select",
    "tune_gamma",
    "ReplicateResult",
    "ScenarioResult",
    "ScenarioSpec",
    "ToyResult",
    "aggregate_metrics",
    "bayesian_lasso_rate",
    "evaluate_external_estimates",
    "gamma_grid",
    "load_result",
    "persist",
    "run_replicate",
    "run_scenario",
    "run_toy",
    "toy_truth",
    "write_tuning_csv",
]
