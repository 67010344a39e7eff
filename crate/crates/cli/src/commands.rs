use std::time::Instant;

use anglerank::{
    classify, dic, fit_incomplete, fit_mixture_vi, fit_mle, fit_sir, fit_vi, kld, nc_error_table, AngleModel, Backend,
    GibbsOptions, IncompleteKind, IncompleteSummary, KldMethod, MixtureOptions, MixturePrior, MleOptions, Ranking,
    SamplerOptions, SirOptions, SirPrior, StandardizedRanking, ViOptions, VmfGammaPrior,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{
    BackendKind, Evaluate, FitArgs, IncompleteArgs, KldArgs, KldMethodArg, Method, MixtureArgs, MixtureFitArgs,
    ModelDataArgs, NcErrorArgs, PriorArgs, RunArgs, SampleArgs, SelectArgs, SirArgs,
};
use crate::error::{CliError, CliResult};
use crate::io::{parse_csv, read_unit_vector, to_csv, DataKind, RankingDataset};
use crate::report::{Diagnostics, FittedModel, ModelReport, SirReport, ViReport};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn elapsed_ms(start: Instant, run: &RunArgs) -> Option<f64> {
    run.timings.then(|| start.elapsed().as_secs_f64() * 1e3)
}

fn load_prior_m0(prior: &PriorArgs, t: usize) -> CliResult<Option<Vec<f64>>> {
    let Some(path) = &prior.prior_m0_file else { return Ok(None) };
    let m0 = read_unit_vector(path)?;
    if m0.len() != t {
        return Err(CliError::usage(format!("{}: expected {t} values, found {}", path.display(), m0.len())));
    }
    Ok(Some(m0))
}

fn vi_prior(prior: &PriorArgs, t: usize) -> CliResult<VmfGammaPrior> {
    if prior.prior_nu0.is_some() {
        return Err(CliError::usage("--prior-nu0 applies to SIR only"));
    }
    let base = VmfGammaPrior::non_informative(t)?;
    VmfGammaPrior::new(
        load_prior_m0(prior, t)?.unwrap_or(base.m0),
        prior.prior_beta0.unwrap_or(base.beta0),
        prior.prior_a0.unwrap_or(base.a0),
        prior.prior_b0.unwrap_or(base.b0),
    )
    .map_err(|e| CliError::usage(format!("invalid prior: {e}")))
}

fn sir_prior(prior: &PriorArgs, t: usize) -> CliResult<SirPrior> {
    if prior.prior_a0.is_some() || prior.prior_b0.is_some() {
        return Err(CliError::usage("--prior-a0 and --prior-b0 apply to VI only"));
    }
    let mut p = SirPrior::flat(t)?;
    if let Some(m0) = load_prior_m0(prior, t)? {
        p.m0 = m0;
    }
    p.beta0 = prior.prior_beta0.unwrap_or(p.beta0);
    p.nu0 = prior.prior_nu0.unwrap_or(p.nu0);
    if !(p.beta0 >= 0.0 && p.nu0 >= 0.0) {
        return Err(CliError::usage("--prior-beta0 and --prior-nu0 must be >= 0"));
    }
    Ok(p)
}

fn vi_options(tol: Option<f64>, max_iter: Option<usize>) -> ViOptions {
    let d = ViOptions::default();
    ViOptions { tol: tol.unwrap_or(d.tol), max_iter: max_iter.unwrap_or(d.max_iter), ..d }
}

fn sir_options(sir: &SirArgs) -> SirOptions {
    SirOptions {
        n_candidates: sir.n_candidates,
        n_resample: sir.n_resample,
        proposal_mean: sir.proposal_mean,
        proposal_var: sir.proposal_var,
        ..SirOptions::default()
    }
}

fn complete_data(args: &crate::args::DataArgs) -> CliResult<(RankingDataset, Vec<StandardizedRanking>)> {
    let ds = parse_csv(&args.data_file, DataKind::Complete)?;
    let ys = ds.standardized()?;
    Ok((ds, ys))
}

pub fn fit(args: &FitArgs) -> CliResult<String> {
    let (ds, ys) = complete_data(&args.data)?;
    let start = Instant::now();
    let mut diagnostics = Diagnostics { n: ys.len(), ..Default::default() };
    let model = match args.method {
        Method::Mle => {
            let p = &args.prior;
            if p.prior_m0_file.is_some() || p.prior_beta0.is_some() || p.prior_a0.is_some() || p.prior_b0.is_some() || p.prior_nu0.is_some() {
                return Err(CliError::usage("prior flags do not apply to --method mle"));
            }
            let d = MleOptions::default();
            let opts = MleOptions { tol: args.tol.unwrap_or(d.tol), max_iter: args.max_iter.unwrap_or(d.max_iter) };
            let f = fit_mle(&ys, &opts)?;
            diagnostics.iterations = Some(f.newton_iters);
            FittedModel::Mle { theta: f.theta_hat, kappa: f.kappa_hat, r: f.r }
        }
        Method::Vi => {
            let post = fit_vi(&ys, &vi_prior(&args.prior, ds.t)?, &vi_options(args.tol, args.max_iter))?;
            diagnostics.iterations = Some(post.iters);
            FittedModel::Vi(ViReport::new(&post))
        }
        Method::Sir => {
            if args.tol.is_some() || args.max_iter.is_some() {
                return Err(CliError::usage("--tol and --max-iter do not apply to --method sir"));
            }
            let s = fit_sir(&ys, &sir_prior(&args.prior, ds.t)?, &sir_options(&args.sir), &mut rng(args.run.seed))?;
            diagnostics.seed = Some(args.run.seed);
            FittedModel::Sir(SirReport::new(&s))
        }
    };
    diagnostics.runtime_ms = elapsed_ms(start, &args.run);
    Ok(ModelReport { t: ds.t, item_names: ds.item_names, model, diagnostics }.to_json() + "\n")
}

fn mixture_options(fit: &MixtureFitArgs) -> MixtureOptions {
    MixtureOptions { tol: fit.tol, max_iter: fit.max_iter, restarts: fit.restarts, init: fit.init.into(), ..MixtureOptions::default() }
}

fn check_clusters(g: usize, n: usize) -> CliResult<()> {
    if g == 0 || g > n {
        return Err(CliError::usage(format!("cluster count must be between 1 and the number of rankings ({n}), got {g}")));
    }
    Ok(())
}

pub fn fit_mixture(args: &MixtureArgs) -> CliResult<String> {
    let (ds, ys) = complete_data(&args.data)?;
    check_clusters(args.clusters, ys.len())?;
    let start = Instant::now();
    let mut rng = rng(args.run.seed);
    let prior = MixturePrior::non_informative(ds.t, args.clusters, &mut rng)?;
    let post = fit_mixture_vi(&ys, &prior, &mixture_options(&args.fit), &mut rng)?;
    let diagnostics = Diagnostics {
        n: ys.len(),
        iterations: Some(post.iters),
        seed: Some(args.run.seed),
        restarts: Some(args.fit.restarts),
        compatibility_checks: None,
        runtime_ms: elapsed_ms(start, &args.run),
    };
    let report = ModelReport { t: ds.t, item_names: ds.item_names, model: FittedModel::mixture(&post), diagnostics };
    Ok(report.to_json() + "\n")
}

/// Each `G` is fitted exactly as `fit-mixture --clusters G --seed <seed>`
/// would fit it.
pub fn select_clusters(args: &SelectArgs) -> CliResult<String> {
    let (ds, ys) = complete_data(&args.data)?;
    if args.min_g > args.max_g {
        return Err(CliError::usage("--min-g exceeds --max-g"));
    }
    check_clusters(args.min_g, ys.len())?;
    check_clusters(args.max_g, ys.len())?;
    let opts = mixture_options(&args.fit);
    let mut rows = Vec::new();
    for g in args.min_g..=args.max_g {
        let mut rng = rng(args.seed);
        let prior = MixturePrior::non_informative(ds.t, g, &mut rng)?;
        let post = fit_mixture_vi(&ys, &prior, &opts, &mut rng)?;
        let d = dic(&ys, &post, args.draws, &mut rng)?;
        log::info!("G = {g}: DIC {}", d.dic);
        rows.push(vec![g.to_string(), d.dic.to_string(), d.d_bar.to_string(), d.d_hat.to_string(), d.p_d.to_string(), d.d_sd.to_string()]);
    }
    let header: Vec<String> = ["g", "dic", "d_bar", "d_hat", "p_d", "d_sd"].map(String::from).to_vec();
    to_csv(&header, rows)
}

pub fn fit_incomplete_cmd(args: &IncompleteArgs) -> CliResult<String> {
    let data_kind = match args.kind {
        DataKind::Subset => IncompleteKind::Subset,
        DataKind::Topk => IncompleteKind::TopK,
        DataKind::Complete => return Err(CliError::usage("--kind must be subset or topk")),
    };
    let ds = parse_csv(&args.data.data_file, args.kind)?;
    let backend = match args.backend {
        BackendKind::Vi => Backend::Vi { prior: vi_prior(&args.prior, ds.t)?, opts: vi_options(args.tol, args.max_iter) },
        BackendKind::Sir => {
            if args.tol.is_some() || args.max_iter.is_some() {
                return Err(CliError::usage("--tol and --max-iter do not apply to --backend sir"));
            }
            Backend::Sir { prior: sir_prior(&args.prior, ds.t)?, opts: sir_options(&args.sir) }
        }
    };
    if args.burn_in >= args.sweeps {
        return Err(CliError::usage("--burn-in must be smaller than --sweeps"));
    }
    let opts = GibbsOptions {
        sweeps: args.sweeps,
        burn_in: args.burn_in,
        inner_steps: args.inner_steps,
        plug_in: args.plug_in.map(Into::into),
    };
    let start = Instant::now();
    let fit = fit_incomplete(&ds.partials(), &backend, &opts, &mut rng(args.run.seed))?;
    let point = fit.point_estimate();
    let (vi, sir) = match &fit.summary {
        IncompleteSummary::Vi(p) => (Some(ViReport::new(p)), None),
        IncompleteSummary::Sir(s) => (None, Some(SirReport::new(s))),
    };
    let model = FittedModel::Incomplete { data_kind, theta: point.theta().to_vec(), kappa: point.kappa(), vi, sir };
    let diagnostics = Diagnostics {
        n: ds.len(),
        iterations: Some(args.sweeps),
        seed: Some(args.run.seed),
        restarts: None,
        compatibility_checks: Some(fit.compatibility_checks),
        runtime_ms: elapsed_ms(start, &args.run),
    };
    Ok(ModelReport { t: ds.t, item_names: ds.item_names, model, diagnostics }.to_json() + "\n")
}

pub fn sample(args: &SampleArgs) -> CliResult<String> {
    if args.t < 2 {
        return Err(CliError::usage("--t must be at least 2"));
    }
    let theta = match &args.theta_file {
        Some(path) => {
            let v = read_unit_vector(path)?;
            if v.len() != args.t {
                return Err(CliError::usage(format!("{}: expected {} values, found {}", path.display(), args.t, v.len())));
            }
            v
        }
        None => Ranking::identity(args.t)?.standardize().as_slice().to_vec(),
    };
    if args.thin == Some(0) {
        return Err(CliError::usage("--thin must be at least 1"));
    }
    let model = AngleModel::new(args.kappa, theta)?;
    let opts = SamplerOptions { burn_in: args.burn_in, thin: args.thin };
    let draws = model.sample(args.n, &opts, &mut rng(args.seed));
    let header: Vec<String> = (1..=args.t).map(|i| format!("item{i}")).collect();
    to_csv(&header, draws.iter().map(|r| r.ranks().iter().map(usize::to_string).collect::<Vec<_>>()))
}

fn model_and_data(args: &ModelDataArgs) -> CliResult<(ModelReport, Vec<StandardizedRanking>)> {
    let report = ModelReport::load(&args.model_file)?;
    let (ds, ys) = complete_data(&args.data)?;
    if ds.t != report.t {
        return Err(CliError::usage(format!("model has t = {} but data has {} items", report.t, ds.t)));
    }
    Ok((report, ys))
}

pub fn predict(args: &ModelDataArgs) -> CliResult<String> {
    let (report, ys) = model_and_data(args)?;
    let dens = report.model.log_predictive(&ys)?;
    let header: Vec<String> = ["row", "log_density"].map(String::from).to_vec();
    to_csv(&header, dens.iter().enumerate().map(|(i, d)| vec![(i + 1).to_string(), d.to_string()]))
}

pub fn classify_cmd(args: &ModelDataArgs) -> CliResult<String> {
    let (report, ys) = model_and_data(args)?;
    let post = report.model.mixture_posterior()?;
    let mut header: Vec<String> = ["row", "cluster"].map(String::from).to_vec();
    header.extend((1..=post.g()).map(|g| format!("p{g}")));
    let rows = ys
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let (g, resp) = classify(y, &post)?;
            let mut row = vec![(i + 1).to_string(), (g + 1).to_string()];
            row.extend(resp.iter().map(f64::to_string));
            Ok(row)
        })
        .collect::<CliResult<Vec<_>>>()?;
    to_csv(&header, rows)
}

pub fn evaluate(cmd: &Evaluate) -> CliResult<String> {
    match cmd {
        Evaluate::Kld(args) => evaluate_kld(args),
    }
}

fn evaluate_kld(args: &KldArgs) -> CliResult<String> {
    let a = ModelReport::load(&args.model_a)?.model.point_model()?;
    let b = ModelReport::load(&args.model_b)?.model.point_model()?;
    if a.t() != b.t() {
        return Err(CliError::usage(format!("models have t = {} and t = {}", a.t(), b.t())));
    }
    let method = match args.method {
        KldMethodArg::Exact => KldMethod::Exact,
        KldMethodArg::Mc if args.mc_n == 0 => return Err(CliError::usage("--mc-n must be positive")),
        KldMethodArg::Mc => KldMethod::MonteCarlo { n: args.mc_n },
    };
    let est = kld(&a, &b, method, &mut rng(args.seed))?;
    if let Some(se) = est.std_error {
        log::info!("Monte Carlo standard error {se}");
    }
    if est.clamped {
        log::warn!("negative Monte Carlo estimate clamped to 0");
    }
    Ok(format!("{}\n", est.value))
}

pub fn nc_error(args: &NcErrorArgs) -> CliResult<String> {
    if args.max_t < 3 {
        return Err(CliError::usage("--max-t must be at least 3"));
    }
    if args.kappas.is_empty() || args.kappas.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(CliError::usage("--kappas must be nonnegative numbers"));
    }
    let ts: Vec<usize> = (3..=args.max_t).collect();
    let cells = nc_error_table(&ts, &args.kappas)?;
    let header: Vec<String> = ["t", "kappa", "log_c_approx", "log_c_exact", "rel_error_percent"].map(String::from).to_vec();
    to_csv(
        &header,
        cells.iter().map(|c| {
            vec![c.t.to_string(), c.kappa.to_string(), c.approx.to_string(), c.exact.to_string(), (100.0 * c.rel_error).to_string()]
        }),
    )
}
