//! Variational inference for a finite mixture of angle-based models, with
//! Dirichlet mixing weights, soft classification and DIC.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, log_sum_exp, norm};
use crate::model::{check_dim, check_items, check_unit, log_c, log_norm_const_exact};
use crate::rankings::StandardizedRanking;
use crate::sir::sample_vmf;
use crate::specialfn::{digamma_unchecked, dlog_bessel_i_unchecked, ln_factorial, ln_gamma_unchecked, log_bessel_i_unchecked};
use crate::vi::{KappaUpdate, ViOptions, VmfGammaPrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPrior {
    /// Dirichlet weight.
    pub d0: f64,
    pub m0: Vec<f64>,
    pub beta0: f64,
    pub a0: f64,
    pub b0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePrior {
    pub clusters: Vec<ClusterPrior>,
}

impl MixturePrior {
    /// `G` vague clusters with `d₀ = 1`, `β₀ = a₀ = b₀ = 10⁻³` and random
    /// unit directions `m₀`.
    pub fn non_informative<R: Rng + ?Sized>(t: usize, g: usize, rng: &mut R) -> Result<Self> {
        check_items(t)?;
        if g == 0 {
            return Err(Error::InvalidParameter("need at least one cluster".into()));
        }
        let mean = vec![1.0 / (t as f64).sqrt(); t];
        let clusters = (0..g)
            .map(|_| {
                Ok(ClusterPrior { d0: 1.0, m0: sample_vmf(&mean, 0.0, rng)?, beta0: 1e-3, a0: 1e-3, b0: 1e-3 })
            })
            .collect::<Result<_>>()?;
        Ok(Self { clusters })
    }

    /// Every cluster shares the same single-population prior.
    pub fn from_single(prior: &VmfGammaPrior, g: usize, d0: f64) -> Self {
        let c = ClusterPrior { d0, m0: prior.m0.clone(), beta0: prior.beta0, a0: prior.a0, b0: prior.b0 };
        Self { clusters: vec![c; g] }
    }

    pub fn g(&self) -> usize {
        self.clusters.len()
    }

    pub fn t(&self) -> usize {
        self.clusters.first().map_or(0, |c| c.m0.len())
    }

    fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::InvalidParameter("need at least one cluster".into()));
        }
        let t = self.t();
        check_items(t)?;
        for c in &self.clusters {
            check_dim(t, c.m0.len())?;
            check_unit(&c.m0, "m0")?;
            if !(c.d0 > 0.0 && c.a0 > 0.0 && c.b0 > 0.0 && c.beta0 >= 0.0) {
                return Err(Error::InvalidParameter("need d0, a0, b0 > 0 and beta0 >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPosterior {
    pub d: f64,
    pub m: Vec<f64>,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub kappa_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePosterior {
    pub clusters: Vec<ClusterPosterior>,
    /// `N × G` responsibilities.
    pub responsibilities: Vec<Vec<f64>>,
    pub iters: usize,
}

impl MixturePosterior {
    pub fn g(&self) -> usize {
        self.clusters.len()
    }

    pub fn t(&self) -> usize {
        self.clusters[0].m.len()
    }

    /// Posterior-mean mixing weights `d_g / Σ d`.
    pub fn weights(&self) -> Vec<f64> {
        let total: f64 = self.clusters.iter().map(|c| c.d).sum();
        self.clusters.iter().map(|c| c.d / total).collect()
    }

    /// Hard assignment of each observation to its most responsible cluster.
    pub fn assignments(&self) -> Vec<usize> {
        self.responsibilities.iter().map(|p| argmax(p)).collect()
    }

    /// Deviance at `(d/Σd, a/b, m)`.
    pub fn plug_in_deviance(&self, ys: &[StandardizedRanking]) -> Result<f64> {
        let kappas: Vec<f64> = self.clusters.iter().map(|c| c.a / c.b).collect();
        let thetas: Vec<Vec<f64>> = self.clusters.iter().map(|c| c.m.clone()).collect();
        mixture_deviance(ys, &self.weights(), &kappas, &thetas)
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

const INNER_ITERS: usize = 200;

/// Up to this many items the deviance uses the enumerated normalizer.
pub const EXACT_DEVIANCE_T: usize = 7;

/// How responsibilities are seeded before the first update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureInit {
    /// Every responsibility equal to `1/G`. Clusters then differ only
    /// through their priors.
    Uniform,
    /// Each row drawn from a flat Dirichlet.
    Random,
    /// `G` observations picked k-means++ style, spreading out in angle;
    /// each observation starts fully assigned to its closest pick.
    Seeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub kappa_floor: f64,
    /// Independent runs; the one with the lowest plug-in deviance is kept.
    pub restarts: usize,
    pub init: MixtureInit,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000, kappa_floor: 1e-3, restarts: 5, init: MixtureInit::Seeded }
    }
}

fn initial_responsibilities<R: Rng + ?Sized>(
    ys: &[StandardizedRanking],
    g: usize,
    init: MixtureInit,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let n = ys.len();
    match init {
        MixtureInit::Uniform => vec![vec![1.0 / g as f64; g]; n],
        MixtureInit::Random => (0..n)
            .map(|_| {
                let e: Vec<f64> = (0..g).map(|_| -rng.random::<f64>().ln().min(-f64::MIN_POSITIVE)).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            })
            .collect(),
        MixtureInit::Seeded => {
            let mut seeds = vec![rng.random_range(0..n)];
            // 1 - cos to the closest seed so far
            let mut dist: Vec<f64> = ys.iter().map(|y| 1.0 - dot(y.as_slice(), ys[seeds[0]].as_slice())).collect();
            while seeds.len() < g {
                let total: f64 = dist.iter().sum();
                let next = if total > 0.0 {
                    let mut u = rng.random::<f64>() * total;
                    dist.iter().position(|&d| {
                        u -= d;
                        u < 0.0
                    })
                    .unwrap_or(n - 1)
                } else {
                    rng.random_range(0..n)
                };
                seeds.push(next);
                for (d, y) in dist.iter_mut().zip(ys) {
                    *d = d.min(1.0 - dot(y.as_slice(), ys[next].as_slice()));
                }
            }
            ys.iter()
                .map(|y| {
                    let cos: Vec<f64> = seeds.iter().map(|&i| dot(y.as_slice(), ys[i].as_slice())).collect();
                    let mut row = vec![0.0; g];
                    row[argmax(&cos)] = 1.0;
                    row
                })
                .collect()
        }
    }
}

/// Fits the mixture, keeping the best of `opts.restarts` runs.
pub fn fit_mixture_vi<R: Rng + ?Sized>(
    ys: &[StandardizedRanking],
    prior: &MixturePrior,
    opts: &MixtureOptions,
    rng: &mut R,
) -> Result<MixturePosterior> {
    prior.validate()?;
    let restarts = opts.restarts.max(1);
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.random()).collect();
    let fits: Vec<Result<(f64, MixturePosterior)>> = seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = StdRng::seed_from_u64(seed);
            let p0 = initial_responsibilities(ys, prior.g(), opts.init, &mut rng);
            let post = fit_mixture_vi_from(ys, prior, p0, opts)?;
            Ok((post.plug_in_deviance(ys)?, post))
        })
        .collect();
    let mut best: Option<(f64, MixturePosterior)> = None;
    let mut last_err = None;
    for fit in fits {
        match fit {
            Ok((dev, post)) => {
                if best.as_ref().is_none_or(|(b, _)| dev < *b) {
                    best = Some((dev, post));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| last_err.expect("at least one run"))
}

/// A single run from the given initial responsibilities.
pub fn fit_mixture_vi_from(
    ys: &[StandardizedRanking],
    prior: &MixturePrior,
    mut resp: Vec<Vec<f64>>,
    opts: &MixtureOptions,
) -> Result<MixturePosterior> {
    prior.validate()?;
    let t = prior.t();
    let g = prior.g();
    let n = ys.len();
    if n < g {
        return Err(Error::InvalidParameter(format!("need N >= G, got N = {n}, G = {g}")));
    }
    for y in ys {
        check_dim(t, y.t())?;
    }
    if resp.len() != n || resp.iter().any(|row| row.len() != g) {
        return Err(Error::InvalidParameter("initial responsibilities must be N × G".into()));
    }
    let nu1 = (t as f64 - 3.0) / 2.0;
    let log_norm = nu1 * std::f64::consts::LN_2 + ln_factorial(t) + ln_gamma_unchecked(nu1 + 1.0);

    let mut clusters: Vec<ClusterPosterior> = prior
        .clusters
        .iter()
        .map(|c| ClusterPosterior {
            d: c.d0,
            m: c.m0.clone(),
            beta: c.beta0,
            a: c.a0,
            b: c.b0,
            kappa_bar: (c.a0 / c.b0).max(opts.kappa_floor),
        })
        .collect();

    // solved well past the outer tolerance so solver noise cannot stall it;
    // an unfinished inner solve just carries over to the next sweep
    let inner = ViOptions { tol: 1e-2 * opts.tol, max_iter: INNER_ITERS, kappa_floor: opts.kappa_floor };
    // sufficient statistics behind each cluster's current (a, b)
    let mut stats: Vec<Option<(f64, Vec<f64>)>> = vec![None; g];

    for iter in 1..=opts.max_iter {
        let mut change = 0.0_f64;
        for (k, (c, pc)) in clusters.iter_mut().zip(&prior.clusters).enumerate() {
            let mut acc = vec![0.0; t];
            let mut count = 0.0;
            for (y, row) in ys.iter().zip(&resp) {
                axpy(&mut acc, row[k], y.as_slice());
                count += row[k];
            }
            let mut s: Vec<f64> = pc.m0.iter().map(|x| pc.beta0 * x).collect();
            axpy(&mut s, 1.0, &acc);
            let beta = norm(&s);
            if !(beta > 0.0) {
                return Err(Error::Degenerate(format!("cluster {k} has a zero resultant")));
            }
            if count < 1e-3 {
                log::warn!("cluster {k} is empty (total responsibility {count:.2e})");
            }
            let d = pc.d0 + count;
            let unchanged = stats[k].as_ref().is_some_and(|(n0, s0)| *n0 == count && *s0 == s);
            let (a, b, kappa_bar) = if unchanged {
                (c.a, c.b, c.kappa_bar)
            } else {
                let update = KappaUpdate::new(t, count, pc.beta0, beta, pc.a0, pc.b0);
                let (a, b, kappa_bar, _, _) = update.iterate(c.kappa_bar, &inner)?;
                (a, b, kappa_bar)
            };
            change = change.max((a - c.a).abs() / a + (b - c.b).abs() / b).max((d - c.d).abs() / d);
            c.d = d;
            c.beta = beta;
            c.m = s.iter().map(|x| x / beta).collect();
            c.a = a;
            c.b = b;
            c.kappa_bar = kappa_bar;
            stats[k] = Some((count, s));
        }

        let terms = ClusterTerms::new(&clusters, nu1, log_norm);
        let new_resp: Vec<Vec<f64>> = ys.par_iter().map(|y| terms.responsibilities(y.as_slice())).collect();
        let dp = resp
            .iter()
            .zip(&new_resp)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0_f64, f64::max);
        change = change.max(dp);
        resp = new_resp;
        if change <= opts.tol {
            return Ok(MixturePosterior { clusters, responsibilities: resp, iters: iter });
        }
    }
    Err(Error::NonConvergence { iters: opts.max_iter })
}

/// Per-cluster constants of the responsibility logits.
struct ClusterTerms {
    base: Vec<f64>,
    scale: Vec<f64>,
    dirs: Vec<Vec<f64>>,
}

impl ClusterTerms {
    fn new(clusters: &[ClusterPosterior], nu1: f64, log_norm: f64) -> Self {
        let psi_total = digamma_unchecked(clusters.iter().map(|c| c.d).sum());
        let base = clusters
            .iter()
            .map(|c| {
                let mean = c.a / c.b;
                let e_log_kappa = digamma_unchecked(c.a) - c.b.ln();
                nu1 * e_log_kappa + digamma_unchecked(c.d) - psi_total - log_norm
                    - log_bessel_i_unchecked(nu1, c.kappa_bar)
                    - dlog_bessel_i_unchecked(nu1, c.kappa_bar) * (mean - c.kappa_bar)
            })
            .collect();
        Self {
            base,
            scale: clusters.iter().map(|c| c.a / c.b).collect(),
            dirs: clusters.iter().map(|c| c.m.clone()).collect(),
        }
    }

    fn responsibilities(&self, y: &[f64]) -> Vec<f64> {
        let rho: Vec<f64> = self
            .base
            .iter()
            .zip(&self.scale)
            .zip(&self.dirs)
            .map(|((b, s), m)| b + s * dot(m, y))
            .collect();
        let lse = log_sum_exp(&rho);
        rho.iter().map(|r| (r - lse).exp()).collect()
    }
}

/// Most responsible cluster for `y`, with the full responsibility vector.
pub fn classify(y: &StandardizedRanking, post: &MixturePosterior) -> Result<(usize, Vec<f64>)> {
    let t = post.t();
    check_dim(t, y.t())?;
    let nu1 = (t as f64 - 3.0) / 2.0;
    let log_norm = nu1 * std::f64::consts::LN_2 + ln_factorial(t) + ln_gamma_unchecked(nu1 + 1.0);
    let p = ClusterTerms::new(&post.clusters, nu1, log_norm).responsibilities(y.as_slice());
    Ok((argmax(&p), p))
}

/// `-2 Σ_i ln Σ_g τ_g C_t(κ_g) exp(κ_g θ_gᵀ y_i)`, with `C_t` enumerated up to
/// [`EXACT_DEVIANCE_T`] items and approximated beyond.
pub fn mixture_deviance(ys: &[StandardizedRanking], weights: &[f64], kappas: &[f64], thetas: &[Vec<f64>]) -> Result<f64> {
    let g = weights.len();
    check_dim(g, kappas.len())?;
    check_dim(g, thetas.len())?;
    let t = thetas.first().map_or(0, Vec::len);
    check_items(t)?;
    for y in ys {
        check_dim(t, y.t())?;
    }
    let log_norm: Vec<f64> = kappas
        .iter()
        .zip(thetas)
        .map(|(&k, th)| if t <= EXACT_DEVIANCE_T { log_norm_const_exact(t, k, th) } else { Ok(log_c(t, k)) })
        .collect::<Result<_>>()?;
    let rows: Vec<f64> = ys
        .par_iter()
        .map(|y| {
            // a probability mass never exceeds one; the approximate constant
            // can break that for very concentrated components
            let terms: Vec<f64> = (0..g)
                .map(|j| weights[j].ln() + (log_norm[j] + kappas[j] * dot(&thetas[j], y.as_slice())).min(0.0))
                .collect();
            log_sum_exp(&terms)
        })
        .collect();
    // summed in order so the result does not depend on the thread count
    let ll: f64 = rows.iter().sum();
    Ok(-2.0 * ll)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DicEstimate {
    pub dic: f64,
    /// Mean deviance over posterior draws.
    pub d_bar: f64,
    /// Deviance at the posterior means.
    pub d_hat: f64,
    pub p_d: f64,
    /// Standard deviation of the deviance across draws.
    pub d_sd: f64,
}

/// Default number of variational-posterior draws behind `D̄`.
pub const DIC_DRAWS: usize = 200;

/// `DIC = D̄ + p_D` with `p_D = D̄ - D(posterior means)`; `D̄` averages the
/// deviance over `draws` samples of `(τ, κ, θ)` from the variational posterior.
pub fn dic<R: Rng + ?Sized>(ys: &[StandardizedRanking], post: &MixturePosterior, draws: usize, rng: &mut R) -> Result<DicEstimate> {
    if draws < 2 {
        return Err(Error::InvalidParameter("DIC needs at least 2 draws".into()));
    }
    let d_hat = post.plug_in_deviance(ys)?;
    let mut params = Vec::with_capacity(draws);
    for _ in 0..draws {
        let raw: Vec<f64> = post
            .clusters
            .iter()
            .map(|c| Gamma::new(c.d, 1.0).map(|g| g.sample(rng)).map_err(|e| Error::Numeric(e.to_string())))
            .collect::<Result<_>>()?;
        let total: f64 = raw.iter().sum();
        let tau: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mut kappas = Vec::with_capacity(post.g());
        let mut thetas = Vec::with_capacity(post.g());
        for c in &post.clusters {
            let k: f64 = Gamma::new(c.a, 1.0 / c.b).map_err(|e| Error::Numeric(e.to_string()))?.sample(rng);
            thetas.push(sample_vmf(&c.m, c.beta * k, rng)?);
            kappas.push(k);
        }
        params.push((tau, kappas, thetas));
    }
    let devs: Vec<f64> = params
        .par_iter()
        .map(|(tau, k, th)| mixture_deviance(ys, tau, k, th))
        .collect::<Result<_>>()?;
    let s = devs.len() as f64;
    let d_bar = devs.iter().sum::<f64>() / s;
    let d_sd = (devs.iter().map(|d| (d - d_bar).powi(2)).sum::<f64>() / (s - 1.0)).sqrt();
    let p_d = d_bar - d_hat;
    Ok(DicEstimate { dic: d_bar + p_d, d_bar, d_hat, p_d, d_sd })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let sum_rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / (max - expected))
}
