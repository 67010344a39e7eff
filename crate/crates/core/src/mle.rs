//! Maximum-likelihood estimation of `(θ, κ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::model::{check_dim, check_items, log_c, AngleModel};
use crate::rankings::StandardizedRanking;
use crate::specialfn::bessel_ratio_unchecked;

/// Mean resultant lengths at or above `1 - SATURATION` have no finite MLE.
const SATURATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Tolerance on `|A_t(κ) - r|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub theta_hat: Vec<f64>,
    pub kappa_hat: f64,
    /// Mean resultant length `‖Σ y_i‖ / N`.
    pub r: f64,
    pub newton_iters: usize,
}

impl MleFit {
    pub fn model(&self) -> AngleModel {
        AngleModel::new(self.kappa_hat, self.theta_hat.clone()).expect("fit produces a valid model")
    }
}

/// `Σ y_i`, checking that all vectors share the same length `t >= 3`.
pub(crate) fn resultant(ys: &[StandardizedRanking]) -> Result<Vec<f64>> {
    let first = ys.first().ok_or_else(|| Error::Degenerate("no observations".into()))?;
    let t = first.t();
    check_items(t)?;
    let mut sum = vec![0.0; t];
    for y in ys {
        check_dim(t, y.t())?;
        axpy(&mut sum, 1.0, y.as_slice());
    }
    Ok(sum)
}

/// `A_t(κ) = I_{(t-1)/2}(κ) / I_{(t-3)/2}(κ)`.
#[inline]
pub(crate) fn a_t(t: usize, kappa: f64) -> f64 {
    bessel_ratio_unchecked((t as f64 - 3.0) / 2.0, kappa)
}

/// Solves `A_t(κ) = r` for `0 < r < 1`, returning `κ` and the number of
/// iterations. Newton steps start from the Banerjee approximation and fall
/// back to bisection whenever a step leaves the current bracket.
pub fn solve_kappa(t: usize, r: f64, opts: &MleOptions) -> Result<(f64, usize)> {
    check_items(t)?;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("need 0 < r < 1, got {r}")));
    }
    let tf = t as f64;
    let mut kappa = r * (tf - 1.0 - r * r) / (1.0 - r * r);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for iter in 0..=opts.max_iter {
        let a = a_t(t, kappa);
        let f = a - r;
        if f.abs() <= opts.tol {
            return Ok((kappa, iter));
        }
        if f < 0.0 {
            lo = kappa;
        } else {
            hi = kappa;
        }
        let deriv = 1.0 - a * a - (tf - 2.0) / kappa * a;
        let next = kappa - f / deriv;
        kappa = if next.is_finite() && next > lo && next < hi {
            next
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            2.0 * kappa
        };
        if hi - lo <= f64::EPSILON * hi {
            // bracket exhausted at machine precision
            return Ok((kappa, iter + 1));
        }
    }
    Err(Error::NonConvergence { iters: opts.max_iter })
}

pub fn fit_mle(ys: &[StandardizedRanking], opts: &MleOptions) -> Result<MleFit> {
    let sum = resultant(ys)?;
    let t = sum.len();
    let len = norm(&sum);
    let r = len / ys.len() as f64;
    if r < SATURATION {
        return Err(Error::Degenerate("the resultant Σy is zero, so θ is undefined".into()));
    }
    if r >= 1.0 - SATURATION {
        return Err(Error::Saturated { r });
    }
    let theta_hat: Vec<f64> = sum.iter().map(|x| x / len).collect();
    let (kappa_hat, newton_iters) = solve_kappa(t, r, opts)?;
    Ok(MleFit { theta_hat, kappa_hat, r, newton_iters })
}

/// `N ln C_t(κ) + κ θᵀ Σ y_i`.
pub fn log_likelihood(ys: &[StandardizedRanking], kappa: f64, theta: &[f64]) -> Result<f64> {
    let sum = resultant(ys)?;
    check_dim(sum.len(), theta.len())?;
    if !(kappa >= 0.0) {
        return Err(Error::Domain(format!("kappa must be >= 0, got {kappa}")));
    }
    Ok(ys.len() as f64 * log_c(sum.len(), kappa) + kappa * dot(theta, &sum))
}
