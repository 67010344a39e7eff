//! Variational Bayes with a joint vMF-Gamma prior on `(θ, κ)`, and the
//! approximate posterior predictive density.
//!
//! The variational family is `q(θ | κ) = vMF(m, βκ)` and `q(κ) = Gamma(a, b)`
//! (shape `a`, rate `b`). Bessel terms in the evidence lower bound are
//! linearized at the current mode `κ̄`, which makes the `(a, b)` update closed
//! form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::mle::resultant;
use crate::model::{check_dim, check_items, check_unit, AngleModel};
use crate::rankings::{Ranking, StandardizedRanking};
use crate::specialfn::{
    d_ratio_log_bessel_unchecked, dlog_bessel_i_unchecked, ln_factorial, ln_gamma_unchecked, log_bessel_i_unchecked,
    scaled_dlog_bessel_i,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmfGammaPrior {
    pub m0: Vec<f64>,
    pub beta0: f64,
    /// Gamma shape.
    pub a0: f64,
    /// Gamma rate.
    pub b0: f64,
}

impl VmfGammaPrior {
    pub fn new(m0: Vec<f64>, beta0: f64, a0: f64, b0: f64) -> Result<Self> {
        let prior = Self { m0, beta0, a0, b0 };
        prior.validate()?;
        Ok(prior)
    }

    /// Vague prior with `β₀ = a₀ = b₀ = 10⁻³`. The direction `m₀` points at
    /// item 0 within the subspace of centered vectors.
    pub fn non_informative(t: usize) -> Result<Self> {
        check_items(t)?;
        let tf = t as f64;
        let scale = (tf * (tf - 1.0)).sqrt();
        let mut m0 = vec![-1.0 / scale; t];
        m0[0] = (tf - 1.0) / scale;
        Self::new(m0, 1e-3, 1e-3, 1e-3)
    }

    pub fn t(&self) -> usize {
        self.m0.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_items(self.t())?;
        check_unit(&self.m0, "m0")?;
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta0 must be >= 0, got {}", self.beta0)));
        }
        if !(self.a0 > 0.0 && self.b0 > 0.0 && self.a0.is_finite() && self.b0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "a0 and b0 must be > 0, got {} and {}",
                self.a0, self.b0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmfGammaPosterior {
    pub m: Vec<f64>,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub kappa_bar: f64,
    pub iters: usize,
}

impl VmfGammaPosterior {
    pub fn t(&self) -> usize {
        self.m.len()
    }

    /// Posterior mean `a / b` of `κ`.
    pub fn kappa_mean(&self) -> f64 {
        self.a / self.b
    }

    pub fn kappa_var(&self) -> f64 {
        self.a / (self.b * self.b)
    }

    /// Plug-in model `(a/b, m)`.
    pub fn mean_model(&self) -> AngleModel {
        AngleModel::new(self.kappa_mean(), self.m.clone()).expect("posterior parameters are valid")
    }

    /// Log predictive density of a new ranking; see [`predictive_log_density`].
    pub fn predictive_log_density(&self, y: &StandardizedRanking) -> Result<f64> {
        predictive_log_density(self, y)
    }
}

#[inline]
pub(crate) fn gamma_mode(a: f64, b: f64) -> f64 {
    (a - 1.0).max(0.0) / b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViOptions {
    /// Stop when `|Δa|/a + |Δb|/b` falls to this level.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound applied to `κ̄` at every iteration so that Bessel
    /// derivatives at `κ̄` stay finite.
    pub kappa_floor: f64,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000, kappa_floor: 1e-3 }
    }
}

/// Sufficient statistics of the Gamma factor that do not change across
/// iterations.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KappaUpdate {
    pub nu1: f64,
    pub nu2: f64,
    /// Effective count, `Σ p_i` for mixtures.
    pub n: f64,
    pub beta0: f64,
    pub beta: f64,
    pub a0: f64,
    pub b0: f64,
}

impl KappaUpdate {
    pub(crate) fn new(t: usize, n: f64, beta0: f64, beta: f64, a0: f64, b0: f64) -> Self {
        Self { nu1: (t as f64 - 3.0) / 2.0, nu2: (t as f64 - 2.0) / 2.0, n, beta0, beta, a0, b0 }
    }

    /// `(a, b)` given the linearization point `κ̄ > 0`.
    pub(crate) fn shape_rate(&self, kappa_bar: f64) -> (f64, f64) {
        let a = self.a0 + self.n * self.nu1 + scaled_dlog_bessel_i(self.nu2, self.beta * kappa_bar);
        // β₀ · d/dx ln I(β₀κ̄), written so that β₀ = 0 contributes nothing
        let prior = if self.beta0 > 0.0 { scaled_dlog_bessel_i(self.nu2, self.beta0 * kappa_bar) / kappa_bar } else { 0.0 };
        let b = self.b0 + self.n * dlog_bessel_i_unchecked(self.nu1, kappa_bar) + prior;
        (a, b)
    }

    /// Iterates `(a, b)` from `κ̄₀` to a fixed point. Every two updates are
    /// followed by an Aitken extrapolation of `κ̄`, which leaves the fixed
    /// point unchanged but avoids the slow linear convergence seen at small
    /// `κ`. `iters` counts `(a, b)` updates.
    pub(crate) fn solve(&self, kappa0: f64, opts: &ViOptions) -> Result<(f64, f64, f64, usize)> {
        let (a, b, kappa_bar, iters, converged) = self.iterate(kappa0, opts)?;
        if !converged {
            return Err(Error::NonConvergence { iters });
        }
        Ok((a, b, kappa_bar, iters))
    }

    /// One update: `(a, b)` at `κ̄` and the next `κ̄`.
    fn step(&self, kappa_bar: f64, floor: f64) -> Result<(f64, f64, f64)> {
        let (a, b) = self.shape_rate(kappa_bar);
        if !(a.is_finite() && b.is_finite() && b > 0.0) {
            return Err(Error::Numeric(format!("variational update produced a = {a}, b = {b}")));
        }
        Ok((a, b, gamma_mode(a, b).max(floor)))
    }

    /// Like [`Self::solve`], but returns the last state instead of failing
    /// when `opts.max_iter` runs out.
    ///
    /// The update map is increasing in `κ̄`, so plain iteration moves
    /// monotonically to the nearest fixed point in its direction of travel.
    /// Near a tangency that takes arbitrarily many steps; if the plain phase
    /// has not converged after `SEARCH_AFTER` updates, that fixed point is
    /// bracketed and bisected instead.
    pub(crate) fn iterate(&self, kappa0: f64, opts: &ViOptions) -> Result<(f64, f64, f64, usize, bool)> {
        const SEARCH_AFTER: usize = 50;
        let floor = opts.kappa_floor;
        let mut kappa_bar = kappa0.max(floor);
        let (mut a, mut b) = (self.a0, self.b0);
        // consecutive plain iterates since the last extrapolation
        let mut history = vec![kappa_bar];
        let mut iter = 0;
        while iter < opts.max_iter {
            iter += 1;
            let (na, nb, next) = self.step(kappa_bar, floor)?;
            let change = (na - a).abs() / na + (nb - b).abs() / nb;
            a = na;
            b = nb;
            if change <= opts.tol {
                return Ok((a, b, next, iter, true));
            }
            if iter == SEARCH_AFTER {
                let (root, evals) = self.nearest_fixed_point(kappa_bar, next, floor)?;
                iter += evals;
                kappa_bar = root;
                history = vec![root];
                continue;
            }
            kappa_bar = next;
            history.push(kappa_bar);
            if let [k0, k1, k2] = history[..] {
                // only a contracting sequence has a limit worth jumping to
                let q = (k2 - k1) / (k1 - k0);
                if q.abs() < 1.0 {
                    let jump = k2 + (k2 - k1) * q / (1.0 - q);
                    // a limit below the floor means the floor is the fixed point
                    if jump.is_finite() {
                        kappa_bar = jump.max(floor);
                    }
                }
                history = vec![kappa_bar];
            }
        }
        Ok((a, b, kappa_bar, opts.max_iter, false))
    }

    /// Fixed point reached from `from`, whose update is `next`, found by
    /// geometric steps in the direction of travel and then bisection.
    /// Returns the point and the number of updates evaluated.
    fn nearest_fixed_point(&self, from: f64, next: f64, floor: f64) -> Result<(f64, usize)> {
        const STEP: f64 = 1.1;
        let down = next < from;
        let sign = if down { -1.0 } else { 1.0 };
        let mut evals = 0;
        let mut residual = |k: f64| -> Result<f64> {
            evals += 1;
            Ok(self.step(k, floor)?.2 - k)
        };
        // residual has the travel sign at `inner` and not at `outer`
        let mut inner = from;
        let mut outer = loop {
            let cand = if down { (inner / STEP).max(floor) } else { inner * STEP };
            // the update never goes below the floor, so the residual there is >= 0
            if residual(cand)? * sign <= 0.0 {
                break cand;
            }
            if cand > 1e12 {
                return Err(Error::Numeric("κ̄ grows without bound".into()));
            }
            inner = cand;
        };
        while (outer - inner).abs() > 1e-14 * outer.max(inner) {
            let mid = 0.5 * (inner + outer);
            if residual(mid)? * sign > 0.0 {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok((outer, evals))
    }
}

/// Variational posterior for a single population of complete rankings.
pub fn fit_vi(ys: &[StandardizedRanking], prior: &VmfGammaPrior, opts: &ViOptions) -> Result<VmfGammaPosterior> {
    prior.validate()?;
    let t = prior.t();
    let mut s: Vec<f64> = prior.m0.iter().map(|x| prior.beta0 * x).collect();
    if !ys.is_empty() {
        let sum = resultant(ys)?;
        check_dim(t, sum.len())?;
        axpy(&mut s, 1.0, &sum);
    } else if prior.beta0 == 0.0 {
        return Err(Error::Degenerate("no data and beta0 = 0".into()));
    }
    fit_from_resultant(t, ys.len() as f64, &s, prior, opts)
}

/// Shared by the single-population and incomplete-data paths: `s` is
/// `β₀m₀ + Σ y_i` and `n` the (possibly weighted) observation count.
pub(crate) fn fit_from_resultant(
    t: usize,
    n: f64,
    s: &[f64],
    prior: &VmfGammaPrior,
    opts: &ViOptions,
) -> Result<VmfGammaPosterior> {
    let beta = norm(s);
    if !(beta > 0.0) {
        return Err(Error::Degenerate("β₀m₀ + Σy is zero, so m is undefined".into()));
    }
    let m: Vec<f64> = s.iter().map(|x| x / beta).collect();
    let update = KappaUpdate::new(t, n, prior.beta0, beta, prior.a0, prior.b0);
    let (a, b, kappa_bar, iters) = update.solve(prior.a0 / prior.b0, opts)?;
    Ok(VmfGammaPosterior { m, beta, a, b, kappa_bar, iters })
}

/// Data summary needed to evaluate the `κ`-marginal objective `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GContext {
    pub t: usize,
    pub n: usize,
    pub beta0: f64,
    /// `‖β₀m₀ + Σ y_i‖`.
    pub beta: f64,
    pub a0: f64,
    pub b0: f64,
}

impl GContext {
    pub fn new(ys: &[StandardizedRanking], prior: &VmfGammaPrior) -> Result<Self> {
        prior.validate()?;
        let mut s: Vec<f64> = prior.m0.iter().map(|x| prior.beta0 * x).collect();
        if !ys.is_empty() {
            let sum = resultant(ys)?;
            check_dim(prior.t(), sum.len())?;
            axpy(&mut s, 1.0, &sum);
        }
        Ok(Self { t: prior.t(), n: ys.len(), beta0: prior.beta0, beta: norm(&s), a0: prior.a0, b0: prior.b0 })
    }

    fn check(&self) -> Result<()> {
        check_items(self.t)?;
        if !(self.beta0 > 0.0 && self.beta > 0.0) {
            return Err(Error::Domain("g needs beta0 > 0 and beta > 0".into()));
        }
        Ok(())
    }
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be > 0, got {x}")))
    }
}

/// Unnormalized log marginal of `κ` implied by the exact Bessel terms:
/// `(Nν₁ + a₀ - 1) ln κ - b₀κ - N ln I_ν₁(κ) - ln I_ν₂(β₀κ) + ln I_ν₂(βκ)`.
pub fn exact_g(kappa: f64, ctx: &GContext) -> Result<f64> {
    ctx.check()?;
    check_positive(kappa, "kappa")?;
    let nu1 = (ctx.t as f64 - 3.0) / 2.0;
    let nu2 = (ctx.t as f64 - 2.0) / 2.0;
    let n = ctx.n as f64;
    Ok((n * nu1 + ctx.a0 - 1.0) * kappa.ln() - ctx.b0 * kappa - n * log_bessel_i_unchecked(nu1, kappa)
        - log_bessel_i_unchecked(nu2, ctx.beta0 * kappa)
        + log_bessel_i_unchecked(nu2, ctx.beta * kappa))
}

/// Minorizer of [`exact_g`] that touches it at `κ = κ̄`: the two negative
/// Bessel terms are replaced by tangents in `κ`, the positive one by its
/// tangent in `ln κ`.
pub fn lower_bound_g(kappa: f64, kappa_bar: f64, ctx: &GContext) -> Result<f64> {
    ctx.check()?;
    check_positive(kappa, "kappa")?;
    check_positive(kappa_bar, "kappa_bar")?;
    let nu1 = (ctx.t as f64 - 3.0) / 2.0;
    let nu2 = (ctx.t as f64 - 2.0) / 2.0;
    let n = ctx.n as f64;
    let dk = kappa - kappa_bar;
    let l1 = log_bessel_i_unchecked(nu1, kappa_bar) + dlog_bessel_i_unchecked(nu1, kappa_bar) * dk;
    let x0 = ctx.beta0 * kappa_bar;
    let l0 = log_bessel_i_unchecked(nu2, x0) + ctx.beta0 * dlog_bessel_i_unchecked(nu2, x0) * dk;
    let xb = ctx.beta * kappa_bar;
    let lb = log_bessel_i_unchecked(nu2, xb) + scaled_dlog_bessel_i(nu2, xb) * (kappa / kappa_bar).ln();
    Ok((n * nu1 + ctx.a0 - 1.0) * kappa.ln() - ctx.b0 * kappa - n * l1 - l0 + lb)
}

/// Log of the approximate posterior predictive density of `y`.
///
/// The `κ`-dependent Bessel factor is matched in value, slope and curvature at
/// `κ̄` by `κ^s e^{-rκ}`, after which the Gamma integral is closed form. Fails
/// when the resulting Gamma is improper.
pub fn predictive_log_density(post: &VmfGammaPosterior, y: &StandardizedRanking) -> Result<f64> {
    let t = post.t();
    check_dim(t, y.t())?;
    check_items(t)?;
    check_positive(post.beta, "beta")?;
    check_positive(post.kappa_bar, "kappa_bar")?;
    let nu1 = (t as f64 - 3.0) / 2.0;
    let nu2 = (t as f64 - 2.0) / 2.0;
    let (beta, k) = (post.beta, post.kappa_bar);
    let yb: Vec<f64> = y.as_slice().iter().zip(&post.m).map(|(a, m)| a + beta * m).collect();
    let eta = norm(&yb);
    debug_assert!((eta * eta - (1.0 + beta * beta + 2.0 * beta * dot(y.as_slice(), &post.m))).abs() < 1e-8 * eta * eta + 1e-12);

    let ln_h = -ln_gamma_unchecked(nu1 + 1.0) - ln_factorial(t) - nu1 * std::f64::consts::LN_2 + nu2 * (beta.ln() - eta.ln());
    let ln_l = log_bessel_i_unchecked(nu2, eta * k) - log_bessel_i_unchecked(nu1, k) - log_bessel_i_unchecked(nu2, beta * k);
    let k2 = k * k;
    let s = -eta * eta * k2 * d_ratio_log_bessel_unchecked(nu2, eta * k)
        + beta * beta * k2 * d_ratio_log_bessel_unchecked(nu2, beta * k)
        + k2 * d_ratio_log_bessel_unchecked(nu1, k);
    let r = s / k - eta * dlog_bessel_i_unchecked(nu2, eta * k) + beta * dlog_bessel_i_unchecked(nu2, beta * k)
        + dlog_bessel_i_unchecked(nu1, k);
    let shape = post.a + nu1 + s;
    let rate = post.b + r;
    if !(rate > 0.0 && shape > 0.0) {
        return Err(Error::Numeric(format!(
            "predictive expansion invalid for this ranking: shape {shape}, rate {rate}"
        )));
    }
    Ok(ln_h + ln_l + r * k - s * k.ln() + post.a * post.b.ln() - ln_gamma_unchecked(post.a) + ln_gamma_unchecked(shape)
        - shape * rate.ln())
}

/// Ranking whose standardized form is most aligned with `m`.
pub fn modal_ranking(m: &[f64]) -> Result<Ranking> {
    Ranking::from_scores(m)
}
