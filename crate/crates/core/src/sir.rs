//! Conjugate-prior posterior by sampling-importance-resampling, von
//! Mises-Fisher sampling, and a moment-matched Gamma divergence between
//! samples of `κ`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::mle::{fit_mle, resultant, MleOptions};
use crate::model::{check_dim, check_items, check_unit, log_c};
use crate::rankings::StandardizedRanking;
use crate::specialfn::{digamma_unchecked, ln_gamma_unchecked, log_bessel_i_unchecked};

/// Conjugate prior `p(θ, κ) ∝ C_t(κ)^ν₀ exp(β₀ κ m₀ᵀθ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirPrior {
    pub nu0: f64,
    pub beta0: f64,
    pub m0: Vec<f64>,
}

impl SirPrior {
    /// `ν₀ = β₀ = 0`: flat in `κ` and uniform in `θ`.
    pub fn flat(t: usize) -> Result<Self> {
        check_items(t)?;
        let mut m0 = vec![0.0; t];
        m0[0] = 1.0;
        Ok(Self { nu0: 0.0, beta0: 0.0, m0 })
    }

    fn validate(&self) -> Result<()> {
        check_items(self.m0.len())?;
        check_unit(&self.m0, "m0")?;
        if !(self.nu0 >= 0.0 && self.beta0 >= 0.0) {
            return Err(Error::InvalidParameter("nu0 and beta0 must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirOptions {
    pub n_candidates: usize,
    pub n_resample: usize,
    /// Gamma proposal mean; `None` uses the maximum-likelihood `κ̂`.
    pub proposal_mean: Option<f64>,
    pub proposal_var: f64,
    /// Resampling scheme; `None` picks multinomial exactly when
    /// `n_resample` exceeds the effective sample size.
    pub resample: Option<ResampleMode>,
}

impl Default for SirOptions {
    fn default() -> Self {
        Self { n_candidates: 10_000, n_resample: 1_000, proposal_mean: None, proposal_var: 1.0, resample: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    WithoutReplacement,
    /// Used when more draws are requested than the effective sample size.
    Multinomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub kappa_draws: Vec<f64>,
    pub theta_draws: Vec<Vec<f64>>,
    /// Effective sample size of the importance weights.
    pub ess: f64,
    pub mode: ResampleMode,
}

impl PosteriorSample {
    pub fn len(&self) -> usize {
        self.kappa_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa_draws.is_empty()
    }

    pub fn kappa_mean(&self) -> f64 {
        self.kappa_draws.iter().sum::<f64>() / self.len() as f64
    }

    /// Normalized mean of the `θ` draws.
    pub fn theta_mean(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.theta_draws.first().map_or(0, Vec::len)];
        for th in &self.theta_draws {
            axpy(&mut s, 1.0, th);
        }
        let n = norm(&s);
        s.iter().map(|x| x / n).collect()
    }
}

/// Unnormalized `ln p(κ | Y)` with `θ` integrated out.
fn log_kappa_posterior(t: usize, count: f64, beta: f64, kappa: f64) -> f64 {
    let nu2 = (t as f64 - 2.0) / 2.0;
    let x = beta * kappa;
    // ln I_ν(x) - ν ln x tends to a constant as x → 0; drop it there
    let vmf = if x > 0.0 { log_bessel_i_unchecked(nu2, x) - nu2 * x.ln() } else { -nu2 * std::f64::consts::LN_2 - ln_gamma_unchecked(nu2 + 1.0) };
    count * log_c(t, kappa) + vmf
}

pub fn fit_sir<R: Rng + ?Sized>(
    ys: &[StandardizedRanking],
    prior: &SirPrior,
    opts: &SirOptions,
    rng: &mut R,
) -> Result<PosteriorSample> {
    prior.validate()?;
    let t = prior.m0.len();
    if opts.n_resample == 0 || opts.n_resample > opts.n_candidates {
        return Err(Error::InvalidParameter(format!(
            "need 0 < n_resample <= n_candidates, got {} and {}",
            opts.n_resample, opts.n_candidates
        )));
    }
    if !(opts.proposal_var > 0.0) {
        return Err(Error::InvalidParameter(format!("proposal_var must be > 0, got {}", opts.proposal_var)));
    }
    let mut s: Vec<f64> = prior.m0.iter().map(|x| prior.beta0 * x).collect();
    if !ys.is_empty() {
        let sum = resultant(ys)?;
        check_dim(t, sum.len())?;
        axpy(&mut s, 1.0, &sum);
    }
    let beta = norm(&s);
    let m: Vec<f64> = if beta > 0.0 { s.iter().map(|x| x / beta).collect() } else { prior.m0.clone() };

    let mean = match opts.proposal_mean {
        Some(mu) => mu,
        None => fit_mle(ys, &MleOptions::default())?.kappa_hat,
    };
    if !(mean > 0.0) {
        return Err(Error::InvalidParameter(format!("proposal mean must be > 0, got {mean}")));
    }
    let shape = mean * mean / opts.proposal_var;
    let rate = mean / opts.proposal_var;
    let proposal = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let candidates: Vec<f64> = (0..opts.n_candidates)
        .map(|_| proposal.sample(rng).max(f64::MIN_POSITIVE))
        .collect();

    let count = ys.len() as f64 + prior.nu0;
    let log_w: Vec<f64> = candidates
        .par_iter()
        .map(|&k| log_kappa_posterior(t, count, beta, k) - ((shape - 1.0) * k.ln() - rate * k))
        .collect();
    let max = log_w.iter().copied().filter(|w| w.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric("all importance weights are zero or non-finite".into()));
    }
    let w: Vec<f64> = log_w.iter().map(|&l| if l.is_finite() { (l - max).exp() } else { 0.0 }).collect();
    let sum_w: f64 = w.iter().sum();
    let ess = sum_w * sum_w / w.iter().map(|x| x * x).sum::<f64>();
    if ess < 0.01 * opts.n_candidates as f64 {
        log::warn!("importance weights are degenerate: effective sample size {ess:.1} of {}", opts.n_candidates);
    }

    let positive = w.iter().filter(|&&x| x > 0.0).count();
    let mode = match opts.resample {
        Some(ResampleMode::WithoutReplacement) if opts.n_resample > positive => {
            return Err(Error::InvalidParameter(format!(
                "only {positive} candidates have positive weight, cannot draw {} without replacement",
                opts.n_resample
            )));
        }
        Some(mode) => mode,
        None if opts.n_resample as f64 > ess => ResampleMode::Multinomial,
        None => ResampleMode::WithoutReplacement,
    };
    let (picked, mode) = if mode == ResampleMode::Multinomial {
        let dist = WeightedIndex::new(&w).map_err(|e| Error::Numeric(e.to_string()))?;
        ((0..opts.n_resample).map(|_| dist.sample(rng)).collect(), ResampleMode::Multinomial)
    } else {
        (weighted_without_replacement(&w, opts.n_resample, rng), ResampleMode::WithoutReplacement)
    };

    let kappa_draws: Vec<f64> = picked.iter().map(|&i| candidates[i]).collect();
    let theta_draws = kappa_draws.iter().map(|&k| sample_vmf(&m, beta * k, rng)).collect::<Result<_>>()?;
    Ok(PosteriorSample { kappa_draws, theta_draws, ess, mode })
}

/// Weighted sampling of `n` distinct indices: keep the `n` smallest keys
/// `ln E_i - ln w_i` with `E_i ~ Exp(1)`.
fn weighted_without_replacement<R: Rng + ?Sized>(w: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut keys: Vec<(f64, usize)> = w
        .iter()
        .enumerate()
        .map(|(i, &wi)| {
            let e: f64 = Exp1.sample(rng);
            let key = if wi > 0.0 { e.ln() - wi.ln() } else { f64::INFINITY };
            (key, i)
        })
        .collect();
    keys.select_nth_unstable_by(n - 1, |a, b| a.0.total_cmp(&b.0));
    keys.truncate(n);
    keys.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    keys.into_iter().map(|(_, i)| i).collect()
}

/// One draw from the von Mises-Fisher distribution on the unit sphere of
/// `R^p`, `p = mean_dir.len()`, by Wood's rejection scheme for the cosine
/// `w = μᵀx` and a uniform tangent direction.
pub fn sample_vmf<R: Rng + ?Sized>(mean_dir: &[f64], concentration: f64, rng: &mut R) -> Result<Vec<f64>> {
    let p = mean_dir.len();
    if p < 2 {
        return Err(Error::Domain(format!("vMF needs dimension >= 2, got {p}")));
    }
    if !(concentration >= 0.0 && concentration.is_finite()) {
        return Err(Error::Domain(format!("concentration must be finite and >= 0, got {concentration}")));
    }
    check_unit(mean_dir, "mean direction")?;
    let gauss = |rng: &mut R| -> Vec<f64> { (0..p).map(|_| StandardNormal.sample(rng)).collect() };
    if concentration == 0.0 {
        loop {
            let g = gauss(rng);
            let n = norm(&g);
            if n > 0.0 {
                return Ok(g.into_iter().map(|x| x / n).collect());
            }
        }
    }
    let k = concentration;
    let d = (p - 1) as f64;
    // b = (√(4κ² + d²) - 2κ)/d, written without cancellation
    let b = d / (2.0 * k + (4.0 * k * k + d * d).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = k * x0 + d * (1.0 - x0 * x0).ln();
    let beta = Beta::new(0.5 * d, 0.5 * d).map_err(|e| Error::Numeric(e.to_string()))?;
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if k * w + d * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    let v = loop {
        let mut g = gauss(rng);
        let proj = dot(&g, mean_dir);
        axpy(&mut g, -proj, mean_dir);
        let n = norm(&g);
        if n > 1e-12 {
            break g.into_iter().map(|x| x / n).collect::<Vec<f64>>();
        }
    };
    let s = (1.0 - w * w).max(0.0).sqrt();
    let mut x: Vec<f64> = mean_dir.iter().zip(&v).map(|(m, v)| w * m + s * v).collect();
    let n = norm(&x);
    x.iter_mut().for_each(|xi| *xi /= n);
    Ok(x)
}

/// `KL(Gamma(a1, b1) ‖ Gamma(a2, b2))` with shapes `a` and rates `b`.
pub fn gamma_kl(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    (a1 - a2) * digamma_unchecked(a1) - ln_gamma_unchecked(a1) + ln_gamma_unchecked(a2) + a2 * (b1.ln() - b2.ln())
        + a1 * (b2 - b1) / b1
}

/// Method-of-moments Gamma `(shape, rate)` for positive draws.
pub fn gamma_moments(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 2 {
        return Err(Error::Degenerate("need at least two draws".into()));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0 && mean > 0.0) {
        return Err(Error::Degenerate(format!("cannot fit a Gamma to mean {mean}, variance {var}")));
    }
    Ok((mean * mean / var, mean / var))
}

/// Symmetric KL divergence between Gamma distributions moment-matched to
/// each sample.
pub fn symmetric_kld_kappa(draws_a: &[f64], draws_b: &[f64]) -> Result<f64> {
    let (a1, b1) = gamma_moments(draws_a)?;
    let (a2, b2) = gamma_moments(draws_b)?;
    Ok((gamma_kl(a1, b1, a2, b2) + gamma_kl(a2, b2, a1, b1)).max(0.0))
}
