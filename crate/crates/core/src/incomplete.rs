//! Posterior inference from incomplete rankings by alternating Metropolis
//! imputation over compatibility classes with complete-data refits.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, normalized};
use crate::model::{check_dim, AngleModel};
use crate::rankings::{is_compatible, sample_compatible, standardization, IncompleteRanking, Ranking, StandardizedRanking};
use crate::sir::{fit_sir, sample_vmf, PosteriorSample, SirOptions, SirPrior};
use crate::vi::{fit_vi, ViOptions, VmfGammaPosterior, VmfGammaPrior};

fn score(model: &AngleModel, ranks: &[usize]) -> f64 {
    let (center, scale) = standardization(ranks.len());
    ranks.iter().zip(model.theta()).map(|(&r, th)| (r as f64 - center) * th).sum::<f64>() / scale
}

/// `n_inner` independence-Metropolis steps targeting the model restricted to
/// the compatibility class of `partial`, with uniform proposals from it.
pub fn mh_impute_step<R: Rng + ?Sized>(
    partial: &IncompleteRanking,
    current: &Ranking,
    model: &AngleModel,
    n_inner: usize,
    rng: &mut R,
) -> Result<Ranking> {
    check_dim(partial.t(), model.t())?;
    if !is_compatible(current, partial)? {
        return Err(Error::InvalidRanking("current ranking is not compatible with the observation".into()));
    }
    if partial.compatible_count() <= 1.0 {
        return Ok(current.clone());
    }
    let mut cur = current.clone();
    let mut cur_score = score(model, cur.ranks());
    for _ in 0..n_inner {
        let prop = sample_compatible(partial, rng);
        let prop_score = score(model, prop.ranks());
        let delta = model.kappa() * (prop_score - cur_score);
        if delta >= 0.0 || rng.random::<f64>().ln() < delta {
            cur = prop;
            cur_score = prop_score;
        }
    }
    Ok(cur)
}

/// How the next imputation's `(κ, θ)` is taken from the refitted posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlugIn {
    /// Posterior mean.
    Mean,
    /// One posterior draw.
    Draw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Backend {
    Vi { prior: VmfGammaPrior, opts: ViOptions },
    Sir { prior: SirPrior, opts: SirOptions },
}

impl Backend {
    fn default_plug_in(&self) -> PlugIn {
        match self {
            Backend::Vi { .. } => PlugIn::Mean,
            Backend::Sir { .. } => PlugIn::Draw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsOptions {
    pub sweeps: usize,
    pub burn_in: usize,
    /// Metropolis proposals per observation per sweep.
    pub inner_steps: usize,
    /// `None` uses the posterior mean for VI and a draw for SIR.
    pub plug_in: Option<PlugIn>,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self { sweeps: 400, burn_in: 200, inner_steps: 10, plug_in: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsState {
    pub imputed: Vec<Ranking>,
    /// `(κ, θ)` used for the next imputation.
    pub model: AngleModel,
    pub sweep: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrace {
    pub kappa: f64,
    pub theta: Vec<f64>,
    /// Complete-data variational posterior of this sweep (VI backend only).
    pub posterior: Option<VmfGammaPosterior>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IncompleteSummary {
    /// Post-burn-in average of `(m, β, a, b)`.
    Vi(VmfGammaPosterior),
    /// Post-burn-in pooled draws.
    Sir(PosteriorSample),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompleteFit {
    pub summary: IncompleteSummary,
    pub trace: Vec<SweepTrace>,
    pub state: GibbsState,
    /// Number of imputed rankings verified compatible over all sweeps.
    pub compatibility_checks: usize,
}

impl IncompleteFit {
    /// Point estimate `(κ, θ)` from the summary.
    pub fn point_estimate(&self) -> AngleModel {
        match &self.summary {
            IncompleteSummary::Vi(post) => post.mean_model(),
            IncompleteSummary::Sir(s) => {
                AngleModel::new(s.kappa_mean(), s.theta_mean()).expect("pooled draws give a valid model")
            }
        }
    }
}

enum Refit {
    Vi(VmfGammaPosterior),
    Sir(PosteriorSample),
}

fn refit<R: Rng + ?Sized>(ys: &[StandardizedRanking], backend: &Backend, rng: &mut R) -> Result<Refit> {
    match backend {
        Backend::Vi { prior, opts } => fit_vi(ys, prior, opts).map(Refit::Vi),
        Backend::Sir { prior, opts } => fit_sir(ys, prior, opts, rng).map(Refit::Sir),
    }
}

fn plug_in<R: Rng + ?Sized>(fit: &Refit, how: PlugIn, rng: &mut R) -> Result<AngleModel> {
    match (fit, how) {
        (Refit::Vi(p), PlugIn::Mean) => Ok(p.mean_model()),
        (Refit::Vi(p), PlugIn::Draw) => {
            let k = Gamma::new(p.a, 1.0 / p.b).map_err(|e| Error::Numeric(e.to_string()))?.sample(rng);
            AngleModel::new(k, sample_vmf(&p.m, p.beta * k, rng)?)
        }
        (Refit::Sir(s), PlugIn::Mean) => AngleModel::new(s.kappa_mean(), s.theta_mean()),
        (Refit::Sir(s), PlugIn::Draw) => {
            let i = rng.random_range(0..s.len());
            AngleModel::new(s.kappa_draws[i], s.theta_draws[i].clone())
        }
    }
}

/// Gibbs data augmentation for incomplete rankings.
pub fn fit_incomplete<R: Rng + ?Sized>(
    partials: &[IncompleteRanking],
    backend: &Backend,
    opts: &GibbsOptions,
    rng: &mut R,
) -> Result<IncompleteFit> {
    let first = partials.first().ok_or_else(|| Error::Degenerate("no observations".into()))?;
    let t = first.t();
    for p in partials {
        check_dim(t, p.t())?;
    }
    if opts.sweeps <= opts.burn_in {
        return Err(Error::InvalidParameter(format!(
            "sweeps ({}) must exceed burn_in ({})",
            opts.sweeps, opts.burn_in
        )));
    }
    let how = opts.plug_in.unwrap_or_else(|| backend.default_plug_in());

    let mut imputed: Vec<Ranking> = partials.iter().map(|p| sample_compatible(p, rng)).collect();
    let ys: Vec<StandardizedRanking> = imputed.iter().map(Ranking::standardize).collect();
    let mut model = plug_in(&refit(&ys, backend, rng)?, how, rng)?;

    let kept = opts.sweeps - opts.burn_in;
    let mut trace = Vec::with_capacity(opts.sweeps);
    let mut checks = 0usize;
    let (mut m_acc, mut beta_acc, mut a_acc, mut b_acc) = (vec![0.0; t], 0.0, 0.0, 0.0);
    let mut pooled = PosteriorSample {
        kappa_draws: Vec::new(),
        theta_draws: Vec::new(),
        ess: 0.0,
        mode: crate::sir::ResampleMode::WithoutReplacement,
    };

    for sweep in 0..opts.sweeps {
        let seeds: Vec<u64> = (0..partials.len()).map(|_| rng.random()).collect();
        imputed = partials
            .par_iter()
            .zip(imputed.par_iter())
            .zip(seeds.into_par_iter())
            .map(|((p, cur), seed)| {
                let mut local = StdRng::seed_from_u64(seed);
                mh_impute_step(p, cur, &model, opts.inner_steps, &mut local)
            })
            .collect::<Result<_>>()?;
        for (r, p) in imputed.iter().zip(partials) {
            if !is_compatible(r, p)? {
                return Err(Error::InvalidRanking(format!("sweep {sweep}: imputed ranking left its compatibility class")));
            }
            checks += 1;
        }

        let ys: Vec<StandardizedRanking> = imputed.iter().map(Ranking::standardize).collect();
        let fit = refit(&ys, backend, rng)?;
        model = plug_in(&fit, how, rng)?;
        if sweep >= opts.burn_in {
            match &fit {
                Refit::Vi(p) => {
                    axpy(&mut m_acc, p.beta, &p.m);
                    beta_acc += p.beta;
                    a_acc += p.a;
                    b_acc += p.b;
                }
                Refit::Sir(s) => {
                    pooled.kappa_draws.extend_from_slice(&s.kappa_draws);
                    pooled.theta_draws.extend(s.theta_draws.iter().cloned());
                    pooled.ess += s.ess / kept as f64;
                    if s.mode == crate::sir::ResampleMode::Multinomial {
                        pooled.mode = s.mode;
                    }
                }
            }
        }
        trace.push(SweepTrace {
            kappa: model.kappa(),
            theta: model.theta().to_vec(),
            posterior: match fit {
                Refit::Vi(p) => Some(p),
                Refit::Sir(_) => None,
            },
        });
    }

    let summary = match backend {
        Backend::Vi { .. } => {
            let kf = kept as f64;
            let m = normalized(&m_acc).ok_or_else(|| Error::Degenerate("averaged direction is zero".into()))?;
            let (a, b) = (a_acc / kf, b_acc / kf);
            IncompleteSummary::Vi(VmfGammaPosterior {
                beta: beta_acc / kf,
                kappa_bar: crate::vi::gamma_mode(a, b),
                m,
                a,
                b,
                iters: kept,
            })
        }
        Backend::Sir { .. } => IncompleteSummary::Sir(pooled),
    };
    Ok(IncompleteFit {
        summary,
        trace,
        state: GibbsState { imputed, model, sweep: opts.sweeps },
        compatibility_checks: checks,
    })
}
