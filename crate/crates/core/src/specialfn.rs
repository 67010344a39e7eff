//! Log-scale modified Bessel functions of the first kind and the gamma-family
//! helpers used throughout the crate.
//!
//! Only logarithms, ratios and log-derivatives are exposed. Arguments such as
//! `β·κ` routinely exceed 10³ in real fits, where `I_ν(x)` itself overflows.
//!
//! Evaluation strategy for `ln I_ν(x)`:
//!
//! * `x = 0`: explicit limit (`0` for `ν = 0`, `-∞` otherwise).
//! * `x <= max(30, 2ν)`: power series with running rescaling.
//! * `x` large relative to `ν²`: Hankel expansion in `1/x`.
//! * otherwise: Debye uniform expansion in `1/ν`.
//!
//! The ratio `I_{ν+1}/I_ν` is evaluated by a backward recurrence of its Gauss
//! continued fraction, or by the quotient of two Hankel sums for very large
//! arguments, so that `1 - ratio` keeps its relative precision.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Order of a modified Bessel function of the first kind (`ν >= 0`).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if nu.is_finite() && nu >= 0.0 {
            Ok(Self(nu))
        } else {
            Err(Error::Domain(format!("Bessel order must be finite and >= 0, got {nu}")))
        }
    }

    /// Order `(t - 3) / 2` used by the normalizing constant of a `t`-item model.
    pub fn for_items(t: usize) -> Result<Self> {
        if t < 3 {
            return Err(Error::Domain(format!("need t >= 3 items, got {t}")));
        }
        Ok(Self((t as f64 - 3.0) / 2.0))
    }

    /// Order `(t - 2) / 2` of the `t`-dimensional von Mises-Fisher constant.
    pub fn for_vmf(t: usize) -> Result<Self> {
        if t < 2 {
            return Err(Error::Domain(format!("need t >= 2 dimensions, got {t}")));
        }
        Ok(Self((t as f64 - 2.0) / 2.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for BesselOrder {
    type Error = Error;

    fn try_from(nu: f64) -> Result<Self> {
        Self::new(nu)
    }
}

const SERIES_MIN_CUTOFF: f64 = 30.0;
/// Above this argument the ratio switches from the continued fraction
/// (cost linear in `x`) to the Hankel quotient when that is accurate.
const RATIO_HANKEL_CUTOFF: f64 = 1.0e4;
const DEBYE_TERMS: usize = 14;

fn check_arg(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::Domain(format!("Bessel argument must be >= 0, got {x}")))
    } else {
        Ok(())
    }
}

/// `ln I_ν(x)` for `ν >= 0`, `x >= 0`.
pub fn log_bessel_i(nu: BesselOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(log_bessel_i_unchecked(nu.0, x))
}

pub(crate) fn log_bessel_i_unchecked(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x <= SERIES_MIN_CUTOFF.max(2.0 * nu) {
        log_bessel_series(nu, x)
    } else if 4.0 * nu * nu <= x {
        x - 0.5 * (2.0 * PI * x).ln() + hankel_sum(nu, x).ln()
    } else {
        log_bessel_debye(nu, x)
    }
}

/// Power series `(x/2)^ν Σ (x²/4)^k / (k! Γ(ν+k+1))`, accumulated with
/// rescaling so that the partial sum never overflows.
fn log_bessel_series(nu: f64, x: f64) -> f64 {
    const RESCALE: f64 = 1.0e280;
    let q = 0.25 * x * x;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut log_scale = 0.0_f64;
    let mut k = 0.0_f64;
    loop {
        k += 1.0;
        term *= q / (k * (nu + k));
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += RESCALE.ln();
        }
        // Terms decrease monotonically once k(ν+k) > x²/4.
        if k * (nu + k) > q && term <= sum * 1.0e-17 {
            break;
        }
    }
    nu * (0.5 * x).ln() - ln_gamma_unchecked(nu + 1.0) + sum.ln() + log_scale
}

/// `Σ_k (-1)^k a_k(ν) / x^k` from the large-argument expansion
/// `I_ν(x) ~ e^x / √(2πx) · Σ`. Stops at the smallest term.
fn hankel_sum(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * kf * x);
        if next.abs() >= term.abs() && k > 1 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1.0e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Debye polynomials `u_k(p)` as coefficient vectors in ascending powers,
/// generated from `u_{k+1} = p²(1-p²)/2 · u_k' + 1/8 ∫₀ᵖ (1-5s²) u_k(s) ds`.
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS - 1 {
            let u = &polys[k];
            let deg = u.len() - 1;
            let mut next = vec![0.0; deg + 4];
            // p²(1-p²)/2 · u'(p)
            for (j, &c) in u.iter().enumerate().skip(1) {
                let d = c * j as f64;
                next[j + 1] += 0.5 * d;
                next[j + 3] -= 0.5 * d;
            }
            // 1/8 ∫₀ᵖ (1-5s²) u(s) ds
            for (j, &c) in u.iter().enumerate() {
                next[j + 1] += c / (8.0 * (j as f64 + 1.0));
                next[j + 3] -= 5.0 * c / (8.0 * (j as f64 + 3.0));
            }
            polys.push(next);
        }
        polys
    })
}

fn log_bessel_debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let root = z.hypot(1.0);
    let p = 1.0 / root;
    let eta = root + (z / (1.0 + root)).ln();
    let mut sum = 0.0;
    let mut nu_pow = 1.0;
    for poly in debye_polynomials() {
        let val = poly.iter().rev().fold(0.0, |acc, &c| acc * p + c);
        sum += val / nu_pow;
        nu_pow *= nu;
    }
    nu * eta - 0.5 * (2.0 * PI * nu).ln() - 0.5 * root.ln() + sum.ln()
}

/// `I_{ν+1}(x) / I_ν(x)`, in `[0, 1)`.
pub fn bessel_ratio(nu: BesselOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(bessel_ratio_unchecked(nu.0, x))
}

pub(crate) fn bessel_ratio_unchecked(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x > RATIO_HANKEL_CUTOFF && 4.0 * (nu + 1.0) * (nu + 1.0) <= x {
        return hankel_sum(nu + 1.0, x) / hankel_sum(nu, x);
    }
    // Gauss continued fraction I_{ν+1}/I_ν = 1/(2(ν+1)/x + 1/(2(ν+2)/x + ...)),
    // evaluated from the tail back to the head.
    let depth = (x + 50.0 + 10.0 * (x + 1.0).sqrt()).ceil() as usize;
    let mut r = 0.0_f64;
    for k in (1..=depth).rev() {
        r = 1.0 / (2.0 * (nu + k as f64) / x + r);
    }
    r
}

/// `d/dx ln I_ν(x) = I_{ν+1}(x)/I_ν(x) + ν/x`.
pub fn dlog_bessel_i(nu: BesselOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    if x == 0.0 {
        return if nu.0 == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::Domain(format!("d/dx ln I_{}(x) diverges at x = 0", nu.0)))
        };
    }
    Ok(dlog_bessel_i_unchecked(nu.0, x))
}

pub(crate) fn dlog_bessel_i_unchecked(nu: f64, x: f64) -> f64 {
    bessel_ratio_unchecked(nu, x) + nu / x
}

/// `x · d/dx ln I_ν(x)`, finite at `x = 0` (where it equals `ν`).
pub(crate) fn scaled_dlog_bessel_i(nu: f64, x: f64) -> f64 {
    x * bessel_ratio_unchecked(nu, x) + nu
}

/// Second derivative of `ln I_ν` at `x`, from the closed form
/// `-ν/x² + 1 - (2ν+1)/x · R - R²` with `R = I_{ν+1}/I_ν`.
pub fn d_ratio_log_bessel(nu: BesselOrder, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("argument must be > 0, got {x}")));
    }
    Ok(d_ratio_log_bessel_unchecked(nu.0, x))
}

pub(crate) fn d_ratio_log_bessel_unchecked(nu: f64, x: f64) -> f64 {
    let r = bessel_ratio_unchecked(nu, x);
    // 1 - R² is formed as (1-R)(1+R) to keep precision when R is close to 1.
    -nu / (x * x) + (1.0 - r) * (1.0 + r) - (2.0 * nu + 1.0) / x * r
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma needs x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

/// `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("digamma needs x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::digamma(x))
}

#[inline]
pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[inline]
pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// `ln n!`.
pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma_unchecked(n as f64 + 1.0)
}
