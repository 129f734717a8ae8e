//! Versioned on-disk layout of a fitted model.
//!
//! ```text
//! run/
//!   schema_version      "1"
//!   model.json          model, sampler and posterior settings, variable names
//!   normalization.json  min-max ranges
//!   chain_<k>.csv       kept draws, one column per parameter
//!   chain_<k>.json      seed, step size, acceptance, divergences, log-posterior trace
//!   loglik.csv          pointwise log-likelihood, observations by pooled draws
//! ```

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{read_text, write_table, write_text, Table};
use crate::error::{QuinnError, Result};
use crate::model::{FitResult, ModelConfig, Normalization};
use crate::network::NetworkShape;
use crate::posterior::PosteriorConfig;
use crate::sampler::{Chain, NutsConfig};
use crate::spline::KnotVector;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    model: ModelConfig,
    nuts: NutsConfig,
    degree: usize,
    interior: usize,
    shape: NetworkShape,
    prior_scale: f64,
    n_chains: usize,
    covariates: Vec<String>,
    response: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainMeta {
    seed: u64,
    step_size: f64,
    accept_stat: f64,
    divergences: usize,
    warmup_divergences: usize,
    log_posterior: Vec<f64>,
}

fn format_err(path: &Path, message: impl Into<String>) -> QuinnError {
    QuinnError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn from_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| format_err(path, e.to_string()))
}

/// Write `fit` into `dir`, creating it if needed.
pub fn save_fit(fit: &FitResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| QuinnError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    write_text(&dir.join("schema_version"), &format!("{SCHEMA_VERSION}\n"))?;
    let shape = fit.shape();
    let model = ModelFile {
        model: fit.model.clone(),
        nuts: fit.nuts.clone(),
        degree: fit.posterior.knots.degree(),
        interior: fit.posterior.knots.interior(),
        shape,
        prior_scale: fit.posterior.prior_scale,
        n_chains: fit.chains.len(),
        covariates: fit.covariate_names.clone(),
        response: fit.response_name.clone(),
    };
    write_text(&dir.join("model.json"), &to_json(&model))?;
    write_text(&dir.join("normalization.json"), &to_json(&fit.normalization))?;
    let names = shape.param_names();
    for (k, chain) in fit.chains.iter().enumerate() {
        let flat: Vec<f64> = chain.draws.iter().flatten().copied().collect();
        let draws = Array2::from_shape_vec((chain.draws.len(), names.len()), flat)
            .map_err(|e| QuinnError::shape(e.to_string()))?;
        write_table(&dir.join(format!("chain_{k}.csv")), &names, draws.view())?;
        let meta = ChainMeta {
            seed: chain.seed,
            step_size: chain.step_size,
            accept_stat: chain.accept_stat,
            divergences: chain.divergences,
            warmup_divergences: chain.warmup_divergences,
            log_posterior: chain.log_posterior_trace.clone(),
        };
        write_text(&dir.join(format!("chain_{k}.json")), &to_json(&meta))?;
    }
    let draw_names: Vec<String> = (0..fit.loglik.ncols()).map(|t| format!("draw_{t}")).collect();
    write_table(&dir.join("loglik.csv"), &draw_names, fit.loglik.view())
}

/// Load a run directory written by [`save_fit`].
pub fn load_fit(dir: &Path) -> Result<FitResult> {
    let version_path = dir.join("schema_version");
    let version = read_text(&version_path)?;
    if version.trim() != SCHEMA_VERSION {
        return Err(format_err(
            &version_path,
            format!(
                "unsupported schema version `{}` (expected {SCHEMA_VERSION})",
                version.trim()
            ),
        ));
    }
    let model_path = dir.join("model.json");
    let m: ModelFile = from_json(&model_path)?;
    let knots = KnotVector::new(m.degree, m.interior)?;
    if m.shape.outputs != knots.basis_count() {
        return Err(format_err(&model_path, "network outputs do not match the knot vector"));
    }
    let posterior = PosteriorConfig::new(knots, m.shape, m.prior_scale)?;
    let normalization: Normalization = from_json(&dir.join("normalization.json"))?;
    if normalization.n_covariates() != m.shape.inputs || m.covariates.len() != m.shape.inputs {
        return Err(format_err(&model_path, "covariate count mismatch"));
    }
    let names = m.shape.param_names();
    let mut chains = Vec::with_capacity(m.n_chains);
    for k in 0..m.n_chains {
        let csv_path = dir.join(format!("chain_{k}.csv"));
        let table = Table::read(&csv_path)?;
        if table.names != names {
            return Err(format_err(&csv_path, "parameter header does not match the model"));
        }
        let meta: ChainMeta = from_json(&dir.join(format!("chain_{k}.json")))?;
        let draws: Vec<Vec<f64>> = table.values.rows().into_iter().map(|r| r.to_vec()).collect();
        if meta.log_posterior.len() != draws.len() {
            return Err(format_err(&csv_path, "draw count differs from the trace length"));
        }
        chains.push(Chain {
            draws,
            log_posterior_trace: meta.log_posterior,
            accept_stat: meta.accept_stat,
            step_size: meta.step_size,
            divergences: meta.divergences,
            warmup_divergences: meta.warmup_divergences,
            seed: meta.seed,
        });
    }
    let ll_path = dir.join("loglik.csv");
    let loglik = Table::read(&ll_path)?.values;
    let total: usize = chains.iter().map(|c| c.draws.len()).sum();
    if loglik.ncols() != total {
        return Err(format_err(&ll_path, "column count differs from the number of draws"));
    }
    Ok(FitResult {
        model: m.model,
        nuts: m.nuts,
        posterior,
        normalization,
        chains,
        loglik,
        covariate_names: m.covariates,
        response_name: m.response,
    })
}
