use std::fs;
use std::path::Path;

use anglerank::{
    predictive_log_density, AngleModel, ClusterPosterior, IncompleteKind, MixturePosterior, PosteriorSample,
    ResampleMode, StandardizedRanking, VmfGammaPosterior,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// A fitted model as written by the `fit*` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_names: Option<Vec<String>>,
    pub model: FittedModel,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Mle {
        theta: Vec<f64>,
        kappa: f64,
        /// Mean resultant length.
        r: f64,
    },
    Vi(ViReport),
    Sir(SirReport),
    Mixture {
        clusters: Vec<ClusterReport>,
    },
    Incomplete {
        data_kind: IncompleteKind,
        /// Point estimate from the post-burn-in summary.
        theta: Vec<f64>,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vi: Option<ViReport>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sir: Option<SirReport>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViReport {
    pub m: Vec<f64>,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub kappa_bar: f64,
    /// `a / b`.
    pub kappa_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirReport {
    pub theta_mean: Vec<f64>,
    pub kappa_mean: f64,
    pub kappa_sd: f64,
    pub ess: f64,
    pub resample: ResampleMode,
    pub kappa_draws: Vec<f64>,
    pub theta_draws: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Posterior mean of the mixing weight.
    pub weight: f64,
    pub d: f64,
    pub m: Vec<f64>,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub kappa_bar: f64,
    pub kappa_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compatibility_checks: Option<usize>,
    /// Only recorded with `--timings`, so that reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

impl ViReport {
    pub fn new(p: &VmfGammaPosterior) -> Self {
        Self { m: p.m.clone(), beta: p.beta, a: p.a, b: p.b, kappa_bar: p.kappa_bar, kappa_mean: p.kappa_mean() }
    }

    pub fn posterior(&self) -> VmfGammaPosterior {
        VmfGammaPosterior {
            m: self.m.clone(),
            beta: self.beta,
            a: self.a,
            b: self.b,
            kappa_bar: self.kappa_bar,
            iters: 0,
        }
    }
}

impl SirReport {
    pub fn new(s: &PosteriorSample) -> Self {
        let mean = s.kappa_mean();
        let var = s.kappa_draws.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (s.len().max(2) - 1) as f64;
        Self {
            theta_mean: s.theta_mean(),
            kappa_mean: mean,
            kappa_sd: var.sqrt(),
            ess: s.ess,
            resample: s.mode,
            kappa_draws: s.kappa_draws.clone(),
            theta_draws: s.theta_draws.clone(),
        }
    }

    fn draw_models(&self) -> CliResult<Vec<AngleModel>> {
        self.kappa_draws
            .iter()
            .zip(&self.theta_draws)
            .map(|(&k, th)| Ok(AngleModel::new(k, th.clone())?))
            .collect()
    }
}

impl ClusterReport {
    pub fn new(c: &ClusterPosterior, weight: f64) -> Self {
        Self {
            weight,
            d: c.d,
            m: c.m.clone(),
            beta: c.beta,
            a: c.a,
            b: c.b,
            kappa_bar: c.kappa_bar,
            kappa_mean: c.a / c.b,
        }
    }
}

impl FittedModel {
    pub fn mixture(post: &MixturePosterior) -> Self {
        let w = post.weights();
        Self::Mixture { clusters: post.clusters.iter().zip(w).map(|(c, w)| ClusterReport::new(c, w)).collect() }
    }

    /// Rebuilds the mixture posterior needed by `classify`.
    pub fn mixture_posterior(&self) -> CliResult<MixturePosterior> {
        let clusters = match self {
            Self::Mixture { clusters } => clusters,
            _ => return Err(CliError::usage("classify needs a mixture model")),
        };
        if clusters.is_empty() {
            return Err(CliError::usage("mixture model has no clusters"));
        }
        let clusters = clusters
            .iter()
            .map(|c| ClusterPosterior { d: c.d, m: c.m.clone(), beta: c.beta, a: c.a, b: c.b, kappa_bar: c.kappa_bar })
            .collect();
        Ok(MixturePosterior { clusters, responsibilities: Vec::new(), iters: 0 })
    }

    /// Single `(κ, θ)` summary of a one-population model.
    pub fn point_model(&self) -> CliResult<AngleModel> {
        let m = match self {
            Self::Mle { theta, kappa, .. } | Self::Incomplete { theta, kappa, .. } => AngleModel::new(*kappa, theta.clone())?,
            Self::Vi(v) => AngleModel::new(v.kappa_mean, v.m.clone())?,
            Self::Sir(s) => AngleModel::new(s.kappa_mean, s.theta_mean.clone())?,
            Self::Mixture { .. } => return Err(CliError::usage("a mixture model has no single (kappa, theta)")),
        };
        Ok(m)
    }

    /// Per-row log predictive density. VI posteriors use their closed form,
    /// SIR posteriors average over draws, mixtures plug in cluster means and
    /// the MLE uses the fitted density.
    pub fn log_predictive(&self, ys: &[StandardizedRanking]) -> CliResult<Vec<f64>> {
        match self {
            Self::Mle { .. } => {
                let model = self.point_model()?;
                ys.iter().map(|y| Ok(model.log_density(y)?)).collect()
            }
            Self::Vi(v) | Self::Incomplete { vi: Some(v), .. } => {
                let post = v.posterior();
                ys.iter().map(|y| Ok(predictive_log_density(&post, y)?)).collect()
            }
            Self::Sir(s) | Self::Incomplete { sir: Some(s), .. } => {
                let models = s.draw_models()?;
                if models.is_empty() {
                    return Err(CliError::usage("SIR model has no draws"));
                }
                ys.iter().map(|y| log_mean_density(&models, &vec![1.0; models.len()], y)).collect()
            }
            Self::Mixture { clusters } => {
                let models = clusters
                    .iter()
                    .map(|c| Ok(AngleModel::new(c.kappa_mean, c.m.clone())?))
                    .collect::<CliResult<Vec<_>>>()?;
                let w: Vec<f64> = clusters.iter().map(|c| c.weight * clusters.len() as f64).collect();
                ys.iter().map(|y| log_mean_density(&models, &w, y)).collect()
            }
            Self::Incomplete { .. } => Err(CliError::usage("incomplete-data report carries no posterior")),
        }
    }

    pub fn t(&self) -> usize {
        match self {
            Self::Mle { theta, .. } | Self::Incomplete { theta, .. } => theta.len(),
            Self::Vi(v) => v.m.len(),
            Self::Sir(s) => s.theta_mean.len(),
            Self::Mixture { clusters } => clusters.first().map_or(0, |c| c.m.len()),
        }
    }
}

/// `ln (1/S) Σ w_s p_s(y)` with log-sum-exp.
fn log_mean_density(models: &[AngleModel], w: &[f64], y: &StandardizedRanking) -> CliResult<f64> {
    let logs: Vec<f64> = models
        .iter()
        .zip(w)
        .map(|(m, &w)| Ok(m.log_density(y)? + w.ln()))
        .collect::<CliResult<_>>()?;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok(max + (sum / logs.len() as f64).ln())
}

impl ModelReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| CliError::usage(format!("invalid model report: {e}")))?;
        if r.model.t() != r.t {
            return Err(CliError::usage(format!("model report says t = {} but parameters have {}", r.t, r.model.t())));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}
