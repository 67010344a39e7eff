//! The angle-based density `p(y | κ, θ) = C_t(κ) exp(κ θᵀy)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rankings::{check_enumerable, for_each_ranking, standardization, Ranking, StandardizedRanking};
use crate::specialfn::{ln_factorial, ln_gamma_unchecked, log_bessel_i_unchecked};

const UNIT_TOL: f64 = 1e-10;

pub(crate) fn check_items(t: usize) -> Result<()> {
    if t < 3 {
        Err(Error::Domain(format!("the model needs t >= 3 items, got {t}")))
    } else {
        Ok(())
    }
}

pub(crate) fn check_unit(v: &[f64], what: &str) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > UNIT_TOL {
        Err(Error::InvalidParameter(format!("{what} must be a unit vector, norm is {n}")))
    } else {
        Ok(())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Approximate `ln C_t(κ)` for `t >= 3` and `κ >= 0`.
pub fn log_norm_const_approx(t: usize, kappa: f64) -> Result<f64> {
    check_items(t)?;
    if !(kappa >= 0.0) || kappa.is_infinite() {
        return Err(Error::Domain(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    Ok(log_c(t, kappa))
}

pub(crate) fn log_c(t: usize, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return -ln_factorial(t);
    }
    let nu = (t as f64 - 3.0) / 2.0;
    nu * (0.5 * kappa).ln() - ln_factorial(t) - log_bessel_i_unchecked(nu, kappa) - ln_gamma_unchecked(nu + 1.0)
}

/// Exact `ln C(κ, θ)` by summing over all `t!` rankings (`t <= 10`).
pub fn log_norm_const_exact(t: usize, kappa: f64, theta: &[f64]) -> Result<f64> {
    check_dim(t, theta.len())?;
    check_enumerable(t)?;
    let (center, scale) = standardization(t);
    // θᵀy <= 1, so shifting the exponent by κ keeps every term <= 1.
    let mut sum = 0.0;
    for_each_ranking(t, |ranks| {
        let s: f64 = ranks.iter().zip(theta).map(|(&r, th)| (r as f64 - center) * th).sum::<f64>() / scale;
        sum += (kappa * (s - 1.0)).exp();
    })?;
    Ok(-(sum.ln() + kappa))
}

/// A fitted or hypothesised angle-based model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleModel {
    kappa: f64,
    theta: Vec<f64>,
}

impl AngleModel {
    pub fn new(kappa: f64, theta: Vec<f64>) -> Result<Self> {
        check_items(theta.len())?;
        if !(kappa >= 0.0) || kappa.is_infinite() {
            return Err(Error::InvalidParameter(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        check_unit(&theta, "theta")?;
        Ok(Self { kappa, theta })
    }

    /// The uniform distribution over rankings of `t` items.
    pub fn uniform(t: usize) -> Result<Self> {
        check_items(t)?;
        let mut theta = vec![0.0; t];
        theta[0] = 1.0;
        Self::new(0.0, theta)
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.theta.len()
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Approximate `ln C_t(κ)`.
    pub fn log_norm_const(&self) -> f64 {
        log_c(self.t(), self.kappa)
    }

    pub fn log_density(&self, y: &StandardizedRanking) -> Result<f64> {
        check_dim(self.t(), y.t())?;
        Ok(self.log_density_unchecked(y.as_slice()))
    }

    pub(crate) fn log_density_unchecked(&self, y: &[f64]) -> f64 {
        self.log_norm_const() + self.kappa * dot(&self.theta, y)
    }

    /// Random-walk Metropolis over rankings. Each proposal swaps the ranks of
    /// two independently chosen items; picking the same item twice leaves the
    /// ranking unchanged, which keeps the chain aperiodic when every swap
    /// would be accepted.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, opts: &SamplerOptions, rng: &mut R) -> Vec<Ranking> {
        let t = self.t();
        let burn_in = opts.burn_in.unwrap_or(1000 * t);
        let thin = opts.thin.unwrap_or(t).max(1);
        let (center, scale) = standardization(t);
        let mut ranks: Vec<usize> = (1..=t).collect();
        rand::seq::SliceRandom::shuffle(ranks.as_mut_slice(), rng);
        let mut step = |ranks: &mut Vec<usize>| {
            let i = rng.random_range(0..t);
            let j = rng.random_range(0..t);
            if i == j {
                return;
            }
            let yi = (ranks[i] as f64 - center) / scale;
            let yj = (ranks[j] as f64 - center) / scale;
            let delta = self.kappa * (self.theta[i] - self.theta[j]) * (yj - yi);
            if delta >= 0.0 || rng.random::<f64>().ln() < delta {
                ranks.swap(i, j);
            }
        };
        for _ in 0..burn_in {
            step(&mut ranks);
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..thin {
                step(&mut ranks);
            }
            out.push(Ranking::new(ranks.clone()).expect("transpositions preserve permutations"));
        }
        out
    }
}

/// Burn-in and thinning for [`AngleModel::sample`]; `None` selects
/// `1000·t` and `t` respectively.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerOptions {
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KldMethod {
    /// Enumerate all `t!` rankings with exact normalization.
    Exact,
    /// Average `ln p - ln q` over `n` Metropolis draws from `p`.
    MonteCarlo { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KldEstimate {
    pub value: f64,
    /// Batch-means standard error of a Monte Carlo estimate.
    pub std_error: Option<f64>,
    /// Set when a negative Monte Carlo estimate was clamped to zero.
    pub clamped: bool,
}

/// `KL(p ‖ q)`. The random source is only used by the Monte Carlo method.
pub fn kld<R: Rng + ?Sized>(p: &AngleModel, q: &AngleModel, method: KldMethod, rng: &mut R) -> Result<KldEstimate> {
    check_dim(p.t(), q.t())?;
    if p == q {
        return Ok(KldEstimate { value: 0.0, std_error: None, clamped: false });
    }
    match method {
        KldMethod::Exact => Ok(KldEstimate { value: kld_exact(p, q)?, std_error: None, clamped: false }),
        KldMethod::MonteCarlo { n } => kld_monte_carlo(p, q, n, rng),
    }
}

fn kld_exact(p: &AngleModel, q: &AngleModel) -> Result<f64> {
    let t = p.t();
    check_enumerable(t)?;
    let (center, scale) = standardization(t);
    let (kp, kq) = (p.kappa, q.kappa);
    // Single pass with exponents shifted by their upper bounds κ_p and κ_q.
    let (mut sp, mut sq, mut m) = (0.0, 0.0, 0.0);
    for_each_ranking(t, |ranks| {
        let (mut a, mut b) = (0.0, 0.0);
        for ((&r, tp), tq) in ranks.iter().zip(&p.theta).zip(&q.theta) {
            let y = (r as f64 - center) / scale;
            a += tp * y;
            b += tq * y;
        }
        let (a, b) = (kp * a, kq * b);
        let w = (a - kp).exp();
        sp += w;
        sq += (b - kq).exp();
        m += w * (a - b);
    })?;
    Ok((m / sp - sp.ln() - kp + sq.ln() + kq).max(0.0))
}

fn kld_monte_carlo<R: Rng + ?Sized>(p: &AngleModel, q: &AngleModel, n: usize, rng: &mut R) -> Result<KldEstimate> {
    if n < 2 {
        return Err(Error::InvalidParameter("Monte Carlo KLD needs n >= 2".into()));
    }
    let draws = p.sample(n, &SamplerOptions::default(), rng);
    let mut y = vec![0.0; p.t()];
    let diffs: Vec<f64> = draws
        .iter()
        .map(|r| {
            crate::rankings::standardize_into(r.ranks(), &mut y);
            p.log_density_unchecked(&y) - q.log_density_unchecked(&y)
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let std_error = batch_means_se(&diffs);
    let clamped = mean < 0.0;
    if clamped {
        log::warn!("Monte Carlo KLD estimate {mean} is negative; clamped to 0");
    }
    Ok(KldEstimate { value: mean.max(0.0), std_error: Some(std_error), clamped })
}

/// Standard error of a correlated chain's mean from non-overlapping batches.
pub(crate) fn batch_means_se(x: &[f64]) -> f64 {
    let n = x.len();
    let batches = ((n as f64).sqrt() as usize).clamp(2, 50).min(n);
    let size = n / batches;
    let means: Vec<f64> = x.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let b = means.len() as f64;
    let grand = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// One cell of the normalizing-constant error grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NcErrorCell {
    pub t: usize,
    pub kappa: f64,
    pub approx: f64,
    pub exact: f64,
    /// `|ln Ĉ - ln C| / |ln C|`, as a fraction (not percent).
    pub rel_error: f64,
}

/// Relative log-scale error of the approximate constant against enumeration
/// at `θ = standardize(identity)`, for every `(t, κ)` pair.
pub fn nc_error_table(ts: &[usize], kappas: &[f64]) -> Result<Vec<NcErrorCell>> {
    for &t in ts {
        check_items(t)?;
        check_enumerable(t)?;
    }
    let cells: Vec<(usize, f64)> = ts.iter().flat_map(|&t| kappas.iter().map(move |&k| (t, k))).collect();
    cells
        .into_par_iter()
        .map(|(t, kappa)| {
            let theta = Ranking::identity(t)?.standardize();
            let approx = log_norm_const_approx(t, kappa)?;
            let exact = log_norm_const_exact(t, kappa, theta.as_slice())?;
            Ok(NcErrorCell { t, kappa, approx, exact, rel_error: (approx - exact).abs() / exact.abs() })
        })
        .collect()
}
