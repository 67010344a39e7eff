//! Angle-based exponential models for ranking data.
//!
//! A ranking of `t` items is embedded as a unit vector `y` and modelled with
//! density `p(y | κ, θ) ∝ exp(κ θᵀy)`. The crate provides the density with an
//! approximate normalizing constant, maximum likelihood, sampling-importance-
//! resampling and variational Bayes posteriors, a variational mixture model
//! with DIC selection, and Gibbs imputation for incomplete rankings.

pub mod error;
pub mod incomplete;
mod linalg;
pub mod mixture;
pub mod mle;
pub mod model;
pub mod rankings;
pub mod sir;
pub mod specialfn;
pub mod vi;

pub use error::{Error, Result};
pub use incomplete::{
    fit_incomplete, mh_impute_step, Backend, GibbsOptions, GibbsState, IncompleteFit, IncompleteSummary, PlugIn, SweepTrace,
};
pub use mixture::{
    adjusted_rand_index, classify, dic, fit_mixture_vi, fit_mixture_vi_from, mixture_deviance, ClusterPosterior,
    ClusterPrior, DicEstimate, EXACT_DEVIANCE_T, MixtureInit, MixtureOptions, MixturePosterior, MixturePrior, DIC_DRAWS,
};
pub use mle::{fit_mle, log_likelihood, solve_kappa, MleFit, MleOptions};
pub use model::{
    kld, log_norm_const_approx, log_norm_const_exact, nc_error_table, AngleModel, KldEstimate, KldMethod, NcErrorCell,
    SamplerOptions,
};
pub use rankings::{
    compatible_set, enumerate_standardized, for_each_ranking, is_compatible, sample_compatible, standardize,
    IncompleteKind, IncompleteRanking, Ranking, StandardizedRanking, MAX_ENUMERATION_T,
};
pub use sir::{fit_sir, gamma_kl, gamma_moments, sample_vmf, symmetric_kld_kappa, PosteriorSample, ResampleMode, SirOptions, SirPrior};
pub use specialfn::BesselOrder;
pub use vi::{
    exact_g, fit_vi, lower_bound_g, modal_ranking, predictive_log_density, GContext, ViOptions, VmfGammaPosterior,
    VmfGammaPrior,
};
