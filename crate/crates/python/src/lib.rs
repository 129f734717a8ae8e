//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use ndarray::{Array1, Array2, ArrayView2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use quinn_core::ale::{column_bins, effects_for, EffectTarget};
use quinn_core::diagnostics::scalar_diagnostics;
use quinn_core::model::{grid_search, FitResult, ModelConfig, DEFAULT_GRID_SIZE};
use quinn_core::persist::{load_fit, save_fit};
use quinn_core::sampler::NutsConfig;
use quinn_core::sim::{generate as sim_generate, rmise as sim_rmise, true_quantile_matrix, Design, DesignSpec};
use quinn_core::spline::{eval_ispline, eval_mspline, KnotVector};
use quinn_core::QuinnError;

fn py_err(e: QuinnError) -> PyErr {
    if e.is_user_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len().checked_div(ncols).unwrap_or(0), ncols), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(a: ArrayView2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn design(id: u32) -> PyResult<Design> {
    Design::from_id(id).map_err(py_err)
}

/// Bayesian quantile-process regression model.
#[pyclass]
struct Model {
    model: ModelConfig,
    nuts: NutsConfig,
    interiors: Vec<usize>,
    hiddens: Vec<usize>,
    fitted: Option<FitResult>,
    /// (p, V, WAIC or None) per grid cell.
    table: Vec<(usize, usize, Option<f64>)>,
}

impl Model {
    fn fitted(&self) -> PyResult<&FitResult> {
        self.fitted
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("model has not been fitted"))
    }
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (
        p = vec![5], v = vec![5], degree = 2, prior_scale = 30.0, margin = 0.05, chains = 4,
        iters = 4000, warmup = 1000, thin = 5, seed = 0, target_accept = 0.8, max_depth = 10
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        p: Vec<usize>,
        v: Vec<usize>,
        degree: usize,
        prior_scale: f64,
        margin: f64,
        chains: usize,
        iters: usize,
        warmup: usize,
        thin: usize,
        seed: u64,
        target_accept: f64,
        max_depth: usize,
    ) -> PyResult<Self> {
        let model = ModelConfig {
            degree,
            interior: p.first().copied().unwrap_or(5),
            hidden: v.first().copied().unwrap_or(5),
            prior_scale,
            response_margin: margin,
            chains,
        };
        let nuts = NutsConfig {
            n_iter: iters,
            n_warmup: warmup,
            thin,
            target_accept,
            max_tree_depth: max_depth,
            seed,
        };
        model.validate().map_err(py_err)?;
        nuts.validate().map_err(py_err)?;
        Ok(Model {
            model,
            nuts,
            interiors: p,
            hiddens: v,
            fitted: None,
            table: Vec::new(),
        })
    }

    /// Fit every (p, V) cell and keep the minimum-WAIC model.
    #[pyo3(signature = (x, y, names = None, response = "y".to_string()))]
    fn fit(
        &mut self,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        names: Option<Vec<String>>,
        response: String,
    ) -> PyResult<()> {
        let x = matrix(x)?;
        let y = Array1::from(y);
        let search = grid_search(x.view(), y.view(), &self.interiors, &self.hiddens, &self.model, &self.nuts)
            .map_err(py_err)?;
        let names = names.unwrap_or_else(|| (1..=x.ncols()).map(|j| format!("x{j}")).collect());
        let best = search.best_fit().clone().with_names(names, response).map_err(py_err)?;
        self.table = search
            .cells
            .iter()
            .map(|c| (c.interior, c.hidden, c.waic().map(|w| w.waic)))
            .collect();
        self.fitted = Some(best);
        Ok(())
    }

    /// Posterior-mean quantiles, rows x levels. With `bands`, returns
    /// `(quantiles, lower, upper)` instead.
    #[pyo3(signature = (x, taus, bands = None))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        x: Vec<Vec<f64>>,
        taus: Vec<f64>,
        bands: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let fit = self.fitted()?;
        let x = matrix(x)?;
        let pred = fit.predictor(DEFAULT_GRID_SIZE).map_err(py_err)?;
        let q = rows(pred.predict(x.view(), &taus).map_err(py_err)?.view());
        match bands {
            None => Ok(q.into_pyobject(py)?.into_any()),
            Some(level) => {
                let (lo, hi) = pred.predict_bands(x.view(), &taus, level).map_err(py_err)?;
                Ok((q, rows(lo.view()), rows(hi.view())).into_pyobject(py)?.into_any())
            }
        }
    }

    /// `(waic, p_waic, lppd)` of the selected model.
    fn waic(&self) -> PyResult<(f64, f64, f64)> {
        let w = self.fitted()?.waic().map_err(py_err)?;
        Ok((w.waic, w.p_waic, w.lppd))
    }

    /// `(p, V, waic)` for every grid cell; failed cells have `None`.
    fn waic_table(&self) -> Vec<(usize, usize, Option<f64>)> {
        self.table.clone()
    }

    #[getter]
    fn covariates(&self) -> PyResult<Vec<String>> {
        Ok(self.fitted()?.covariate_names.clone())
    }

    #[getter]
    fn n_draws(&self) -> PyResult<usize> {
        Ok(self.fitted()?.n_draws())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_fit(self.fitted()?, &path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let fit = load_fit(&path).map_err(py_err)?;
        Ok(Model {
            model: fit.model.clone(),
            nuts: fit.nuts.clone(),
            interiors: vec![fit.model.interior],
            hiddens: vec![fit.model.hidden],
            table: Vec::new(),
            fitted: Some(fit),
        })
    }

    fn __repr__(&self) -> String {
        match &self.fitted {
            Some(f) => format!(
                "Model(p={}, V={}, draws={})",
                f.model.interior,
                f.model.hidden,
                f.n_draws()
            ),
            None => format!("Model(p={:?}, V={:?}, unfitted)", self.interiors, self.hiddens),
        }
    }
}

/// M-spline (`kind="m"`) or I-spline (`kind="i"`) basis at `z`, one row per point.
#[pyfunction]
#[pyo3(signature = (z, degree = 2, interior = 5, kind = "i"))]
fn splines(z: Vec<f64>, degree: usize, interior: usize, kind: &str) -> PyResult<Vec<Vec<f64>>> {
    let kv = KnotVector::new(degree, interior).map_err(py_err)?;
    let basis = match kind {
        "m" => eval_mspline(&kv, &z),
        "i" => eval_ispline(&kv, &z),
        other => return Err(PyValueError::new_err(format!("kind must be \"m\" or \"i\", got {other:?}"))),
    }
    .map_err(py_err)?;
    Ok(rows(basis.values.view()))
}

/// Simulated `(x, y)` from design 1-4.
#[pyfunction]
#[pyo3(signature = (design_id, n, seed = 0, d = None))]
fn generate(design_id: u32, n: usize, seed: u64, d: Option<usize>) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut spec = DesignSpec::new(design(design_id)?, n, seed);
    if let Some(d) = d {
        spec.d = d;
    }
    let data = sim_generate(&spec).map_err(py_err)?;
    Ok((rows(data.x.view()), data.y.to_vec()))
}

/// True conditional quantiles of a design, rows x levels.
#[pyfunction]
fn true_quantiles(design_id: u32, x: Vec<Vec<f64>>, taus: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let x = matrix(x)?;
    let q = true_quantile_matrix(design(design_id)?, x.view(), &taus).map_err(py_err)?;
    Ok(rows(q.view()))
}

/// `(per_level, qp)` root mean integrated squared errors.
#[pyfunction]
fn rmise(truth: Vec<Vec<f64>>, estimate: Vec<Vec<f64>>, taus: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
    let r = sim_rmise(matrix(truth)?.view(), matrix(estimate)?.view(), &taus).map_err(py_err)?;
    Ok((r.per_tau, r.qp))
}

/// `(rhat, ess_bulk, ess_tail, pass, degenerate)` for chains x draws.
#[pyfunction]
fn diagnostics(chains: Vec<Vec<f64>>) -> PyResult<(f64, f64, f64, bool, bool)> {
    let r = scalar_diagnostics(matrix(chains)?.view()).map_err(py_err)?;
    Ok((r.rhat, r.ess_bulk, r.ess_tail, r.pass, r.degenerate))
}

/// Main (or, with `pair`, interaction) ALE of a fitted model under its
/// posterior-mean predictor. Returns `(tau, edges, effect, vi)` per level;
/// pair effects are row-major over the two edge vectors.
#[pyfunction]
#[pyo3(signature = (model, x, covariate, taus, bins = 40, pair = None))]
#[allow(clippy::type_complexity)]
fn ale(
    model: &Model,
    x: Vec<Vec<f64>>,
    covariate: usize,
    taus: Vec<f64>,
    bins: usize,
    pair: Option<usize>,
) -> PyResult<Vec<(f64, Vec<Vec<f64>>, Vec<f64>, f64)>> {
    let fit = model.fitted()?;
    let x = matrix(x)?;
    let pred = fit.predictor(DEFAULT_GRID_SIZE).map_err(py_err)?;
    let (target, cols) = match pair {
        None => (EffectTarget::Main(covariate), vec![covariate]),
        Some(l) => (EffectTarget::Pair(covariate, l), vec![covariate, l]),
    };
    let bins = cols
        .iter()
        .map(|&j| column_bins(x.view(), j, bins, false))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let est = effects_for(&pred, x.view(), target, &bins, &taus).map_err(py_err)?;
    // pairs return interactions first, then joint effects
    Ok(est
        .into_iter()
        .take(taus.len())
        .map(|e| (e.tau, e.edges, e.effect, e.vi))
        .collect())
}

#[pymodule]
fn quinn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(splines, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(true_quantiles, m)?)?;
    m.add_function(wrap_pyfunction!(rmise, m)?)?;
    m.add_function(wrap_pyfunction!(diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(ale, m)?)?;
    Ok(())
}
