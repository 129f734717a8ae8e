use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use quinn_core::ale::{
    column_bins, effects_for, posterior_ale, AleBins, AleKind, EffectTarget, DEFAULT_MAIN_BINS,
    DEFAULT_PAIR_BINS,
};
use quinn_core::data::{fmt_float, write_table, write_text, Table};
use quinn_core::diagnostics::{fit_loglik_trace, scalar_diagnostics, DiagnosticsReport};
use quinn_core::model::{grid_search, FitResult, GridSearch, ModelConfig, Predictor};
use quinn_core::persist::{load_fit, save_fit};
use quinn_core::sampler::NutsConfig;
use quinn_core::sim::{
    generate, replicate_study, study_taus, true_quantile_matrix, Design, DesignSpec, StudyConfig,
};
use serde::Serialize;

use crate::args::{AleArgs, Cli, DiagnoseArgs, EffectArgs, FitArgs, ModelArgs, PredictArgs, SamplerArgs, SimulateArgs, ViArgs};
use crate::error::CliError;

/// Exit status of `diagnose` when the log-likelihood trace fails.
pub const DIAGNOSE_FAILED: i32 = 3;

#[derive(Serialize)]
struct RunRecord<'a> {
    quinn_version: &'static str,
    args: &'a Cli,
}

fn write_run_config(cli: &Cli, dir: &Path) -> Result<(), CliError> {
    let record = RunRecord {
        quinn_version: env!("CARGO_PKG_VERSION"),
        args: cli,
    };
    let text = serde_json::to_string_pretty(&record).map_err(|e| CliError::Internal(e.to_string()))?;
    write_text(&dir.join("config.json"), &(text + "\n"))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn nuts_config(s: &SamplerArgs) -> NutsConfig {
    NutsConfig {
        n_iter: s.iters,
        n_warmup: s.warmup,
        thin: s.thin,
        target_accept: s.target_accept,
        max_tree_depth: s.max_depth,
        seed: s.seed,
    }
}

fn model_config(m: &ModelArgs, s: &SamplerArgs) -> ModelConfig {
    ModelConfig {
        degree: m.degree,
        interior: m.p[0],
        hidden: m.v[0],
        prior_scale: m.prior_scale,
        response_margin: m.margin,
        chains: s.chains,
    }
}

fn check_grid(m: &ModelArgs) -> Result<(), CliError> {
    if m.p.is_empty() || m.v.is_empty() {
        return Err(CliError::Usage("--p and --V need at least one value".into()));
    }
    Ok(())
}

fn tau_label(tau: f64) -> String {
    format!("{tau}")
}

fn waic_table(search: &GridSearch) -> String {
    let ranks = search.waic_ranks();
    let mut s = String::from("p,V,waic,p_waic,lppd,rank,selected,error\n");
    for (i, c) in search.cells.iter().enumerate() {
        let (w, pw, l) = c
            .waic()
            .map(|w| (fmt_float(w.waic), fmt_float(w.p_waic), fmt_float(w.lppd)))
            .unwrap_or_default();
        let err = c.outcome.as_ref().err().map(|e| e.replace([',', '\n'], ";")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{w},{pw},{l},{},{},{err}",
            c.interior,
            c.hidden,
            ranks[i].map(|r| (r + 1).to_string()).unwrap_or_default(),
            u8::from(i == search.best)
        );
    }
    s
}

pub fn run_fit(cli: &Cli, a: &FitArgs) -> Result<i32, CliError> {
    check_grid(&a.model)?;
    let table = Table::read(&a.data)?;
    let (x, y, names) = table.split_response(&a.response)?;
    let base = model_config(&a.model, &a.sampler);
    let nuts = nuts_config(&a.sampler);
    create_dir(&a.out)?;
    let search = grid_search(x.view(), y.view(), &a.model.p, &a.model.v, &base, &nuts)?;
    let best = search.best_fit().clone().with_names(names, a.response.clone())?;
    save_fit(&best, &a.out)?;
    write_text(&a.out.join("waic_table.csv"), &waic_table(&search))?;
    write_run_config(cli, &a.out)?;
    let w = best.waic()?;
    println!(
        "selected p={} V={} (WAIC {:.3}) from {} cell(s); run written to {}",
        best.model.interior,
        best.model.hidden,
        w.waic,
        search.cells.len(),
        a.out.display()
    );
    Ok(0)
}

fn covariates_for(fit: &FitResult, path: &Path) -> Result<Array2<f64>, CliError> {
    Ok(Table::read(path)?.select(&fit.covariate_names)?)
}

pub fn run_predict(a: &PredictArgs) -> Result<i32, CliError> {
    let fit = load_fit(&a.fit)?;
    let x = covariates_for(&fit, &a.query)?;
    let pred = fit.predictor(a.grid)?;
    let q = pred.predict(x.view(), &a.taus)?;
    let mut names: Vec<String> = a.taus.iter().map(|t| format!("q_{}", tau_label(*t))).collect();
    let out = match a.bands {
        None => q,
        Some(level) => {
            let (lo, hi) = pred.predict_bands(x.view(), &a.taus, level)?;
            names.extend(a.taus.iter().map(|t| format!("lower_{}", tau_label(*t))));
            names.extend(a.taus.iter().map(|t| format!("upper_{}", tau_label(*t))));
            ndarray::concatenate(ndarray::Axis(1), &[q.view(), lo.view(), hi.view()])
                .map_err(|e| CliError::Internal(e.to_string()))?
        }
    };
    write_table(&a.out, &names, out.view())?;
    Ok(0)
}

/// Evenly spaced draw indices, or all draws when `wanted` is 0 or too large.
fn draw_subset(total: usize, wanted: usize) -> Vec<usize> {
    if wanted == 0 || wanted >= total {
        return (0..total).collect();
    }
    (0..wanted).map(|i| i * total / wanted).collect()
}

struct EffectContext {
    fit: FitResult,
    predictor: Predictor,
    x: Array2<f64>,
    draws: Vec<usize>,
}

impl EffectContext {
    fn load(a: &EffectArgs) -> Result<Self, CliError> {
        let fit = load_fit(&a.fit)?;
        for name in &a.categorical {
            covariate_index(&fit, name)?;
        }
        let x = covariates_for(&fit, &a.data)?;
        let predictor = fit.predictor(a.grid)?;
        let draws = draw_subset(fit.n_draws(), a.draws);
        Ok(EffectContext {
            fit,
            predictor,
            x,
            draws,
        })
    }

    fn bins(&self, a: &EffectArgs, j: usize, default_k: usize) -> Result<AleBins, CliError> {
        let categorical = a.categorical.contains(&self.fit.covariate_names[j]);
        Ok(column_bins(self.x.view(), j, a.bins.unwrap_or(default_k), categorical)?)
    }
}

fn covariate_index(fit: &FitResult, name: &str) -> Result<usize, CliError> {
    fit.covariate_names.iter().position(|n| n == name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown covariate `{name}` (fitted covariates: {})",
            fit.covariate_names.join(", ")
        ))
    })
}

pub fn run_ale(a: &AleArgs) -> Result<i32, CliError> {
    let e = &a.effect;
    let ctx = EffectContext::load(e)?;
    let j = covariate_index(&ctx.fit, &a.covariate)?;
    let names = &ctx.fit.covariate_names;
    let mut s = String::new();
    match &a.pair {
        None => {
            let bins = vec![ctx.bins(e, j, DEFAULT_MAIN_BINS)?];
            let target = EffectTarget::Main(j);
            let point = effects_for(&ctx.predictor, ctx.x.view(), target, &bins, &e.taus)?;
            let post = posterior_ale(&ctx.predictor, ctx.x.view(), target, &bins, &e.taus, &ctx.draws)?;
            s.push_str("tau,covariate,edge,effect,lower,upper\n");
            for (p, b) in point.iter().zip(&post.summaries) {
                for k in 0..p.effect.len() {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{}",
                        tau_label(p.tau),
                        names[j],
                        fmt_float(p.edges[0][k]),
                        fmt_float(p.effect[k]),
                        fmt_float(b.lower[k]),
                        fmt_float(b.upper[k])
                    );
                }
            }
        }
        Some(other) => {
            let l = covariate_index(&ctx.fit, other)?;
            if l == j {
                return Err(CliError::Usage("--pair must name a different covariate".into()));
            }
            let bins = vec![ctx.bins(e, j, DEFAULT_PAIR_BINS)?, ctx.bins(e, l, DEFAULT_PAIR_BINS)?];
            let target = EffectTarget::Pair(j, l);
            let point = effects_for(&ctx.predictor, ctx.x.view(), target, &bins, &e.taus)?;
            let post = posterior_ale(&ctx.predictor, ctx.x.view(), target, &bins, &e.taus, &ctx.draws)?;
            s.push_str("tau,kind,covariate_1,covariate_2,edge_1,edge_2,effect,lower,upper\n");
            for (p, b) in point.iter().zip(&post.summaries) {
                let c1 = p.edges[1].len();
                for k in 0..p.effect.len() {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{}",
                        tau_label(p.tau),
                        p.kind.as_str(),
                        names[j],
                        names[l],
                        fmt_float(p.edges[0][k / c1]),
                        fmt_float(p.edges[1][k % c1]),
                        fmt_float(p.effect[k]),
                        fmt_float(b.lower[k]),
                        fmt_float(b.upper[k])
                    );
                }
            }
        }
    }
    write_text(&e.out, &s)?;
    Ok(0)
}

struct ViRow {
    tau: f64,
    name: String,
    mean: f64,
    lower: f64,
    upper: f64,
}

pub fn run_vi(a: &ViArgs) -> Result<i32, CliError> {
    let e = &a.effect;
    let ctx = EffectContext::load(e)?;
    let names = &ctx.fit.covariate_names;
    let d = names.len();
    let mut rows = Vec::new();
    let mut main_bins = Vec::with_capacity(d);
    for j in 0..d {
        let bins = vec![ctx.bins(e, j, DEFAULT_MAIN_BINS)?];
        let post = posterior_ale(&ctx.predictor, ctx.x.view(), EffectTarget::Main(j), &bins, &e.taus, &ctx.draws)?;
        for s in post.summaries {
            rows.push(ViRow {
                tau: s.tau,
                name: names[j].clone(),
                mean: s.vi_mean,
                lower: s.vi_lower,
                upper: s.vi_upper,
            });
        }
        main_bins.push(bins.into_iter().next().expect("one set of bins"));
    }
    if a.pairs {
        let continuous: Vec<usize> = (0..d).filter(|&j| !main_bins[j].categorical).collect();
        for (ai, &j) in continuous.iter().enumerate() {
            for &l in &continuous[ai + 1..] {
                let bins = vec![ctx.bins(e, j, DEFAULT_PAIR_BINS)?, ctx.bins(e, l, DEFAULT_PAIR_BINS)?];
                let post = posterior_ale(
                    &ctx.predictor,
                    ctx.x.view(),
                    EffectTarget::Pair(j, l),
                    &bins,
                    &e.taus,
                    &ctx.draws,
                )?;
                for s in post.summaries.into_iter().filter(|s| s.kind == AleKind::Interaction) {
                    rows.push(ViRow {
                        tau: s.tau,
                        name: format!("{}:{}", names[j], names[l]),
                        mean: s.vi_mean,
                        lower: s.vi_lower,
                        upper: s.vi_upper,
                    });
                }
            }
        }
    }
    // levels in the order given, effects by decreasing importance
    let order = |t: f64| e.taus.iter().position(|&u| u == t).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| order(a.tau).cmp(&order(b.tau)).then(b.mean.total_cmp(&a.mean)));
    let mut s = String::from("tau,effect,vi_mean,vi_lower,vi_upper\n");
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            tau_label(r.tau),
            r.name,
            fmt_float(r.mean),
            fmt_float(r.lower),
            fmt_float(r.upper)
        );
    }
    write_text(&e.out, &s)?;
    Ok(0)
}

fn report_line(name: &str, r: &DiagnosticsReport) -> String {
    if r.degenerate {
        return format!("{name:<16} {:>8} {:>10} {:>10} {:>5}  (constant chain)", "nan", "nan", "nan", "no");
    }
    format!(
        "{name:<16} {:>8.4} {:>10.1} {:>10.1} {:>5}",
        r.rhat,
        r.ess_bulk,
        r.ess_tail,
        if r.pass { "yes" } else { "no" }
    )
}

pub fn run_diagnose(a: &DiagnoseArgs) -> Result<i32, CliError> {
    let fit = load_fit(&a.fit)?;
    let ll = fit_loglik_trace(&fit)?;
    let (m, n) = ll.dim();
    let lp = Array2::from_shape_fn((m, n), |(c, t)| fit.chains[c].log_posterior_trace[t]);
    let ll_report = scalar_diagnostics(ll.view())?;
    let lp_report = scalar_diagnostics(lp.view())?;
    println!("{:<16} {:>8} {:>10} {:>10} {:>5}", "scalar", "rhat", "ess_bulk", "ess_tail", "pass");
    println!("{}", report_line("log_likelihood", &ll_report));
    println!("{}", report_line("log_posterior", &lp_report));
    for (k, c) in fit.chains.iter().enumerate() {
        println!(
            "chain {k}: step size {:.4}, mean accept {:.3}, divergences {} (warmup {})",
            c.step_size, c.accept_stat, c.divergences, c.warmup_divergences
        );
    }
    Ok(if ll_report.pass { 0 } else { DIAGNOSE_FAILED })
}

fn covariate_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn write_with_columns(path: &Path, x: ArrayView2<f64>, extra: &[(String, Vec<f64>)]) -> Result<(), CliError> {
    let mut names = covariate_header(x.ncols());
    let mut cols = vec![x.to_owned()];
    for (name, values) in extra {
        names.push(name.clone());
        cols.push(Array2::from_shape_vec((values.len(), 1), values.clone()).map_err(|e| CliError::Internal(e.to_string()))?);
    }
    let views: Vec<_> = cols.iter().map(|c| c.view()).collect();
    let all = ndarray::concatenate(ndarray::Axis(1), &views).map_err(|e| CliError::Internal(e.to_string()))?;
    write_table(path, &names, all.view())?;
    Ok(())
}

pub fn run_simulate(cli: &Cli, a: &SimulateArgs) -> Result<i32, CliError> {
    let design = Design::from_id(a.design)?;
    let mut spec = DesignSpec::new(design, a.n, a.sampler.seed);
    if let Some(d) = a.d {
        spec.d = d;
    }
    spec.validate()?;
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    create_dir(&a.out)?;
    let taus = study_taus();
    for r in 0..a.reps {
        let rs = DesignSpec {
            seed: spec.seed.wrapping_add(r as u64),
            ..spec
        };
        let data = generate(&rs)?;
        write_with_columns(&a.out.join(format!("data_{r}.csv")), data.x.view(), &[("y".into(), data.y.to_vec())])?;
        let grid = quinn_core::sim::eval_grid(&rs)?;
        let truth = true_quantile_matrix(design, grid.view(), &taus)?;
        let extra: Vec<(String, Vec<f64>)> = taus
            .iter()
            .enumerate()
            .map(|(k, t)| (format!("q_{}", tau_label(*t)), truth.column(k).to_vec()))
            .collect();
        write_with_columns(&a.out.join(format!("truth_{r}.csv")), grid.view(), &extra)?;
    }
    if a.study {
        check_grid(&a.model)?;
        let study = StudyConfig {
            reps: a.reps,
            interiors: a.model.p.clone(),
            hiddens: a.model.v.clone(),
            model: model_config(&a.model, &a.sampler),
            nuts: nuts_config(&a.sampler),
        };
        let report = replicate_study(&spec, &study)?;
        write_text(&a.out.join("study_summary.csv"), &report.summary_csv())?;
        write_text(&a.out.join("study_replicates.csv"), &report.replicates_csv())?;
        write_text(&a.out.join("study_cells.csv"), &report.cells_csv())?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
        write_text(&a.out.join("study.json"), &(json + "\n"))?;
        print!("{}", report.summary_csv());
        if let Some(c) = report.waic_rmise_rank_correlation() {
            println!("rank correlation of WAIC and out-of-sample RMISE: {c:.3}");
        }
    }
    write_run_config(cli, &a.out)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draw_subsets_are_spread() {
        assert_eq!(draw_subset(10, 0), (0..10).collect::<Vec<_>>());
        assert_eq!(draw_subset(10, 20).len(), 10);
        assert_eq!(draw_subset(10, 5), vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn tau_labels_are_short() {
        assert_eq!(tau_label(0.05), "0.05");
        assert_eq!(tau_label(0.5), "0.5");
    }
}
