//! Fitting and prediction: normalization, posterior-mean CDFs on a dense
//! grid, quantile inversion and WAIC.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuinnError, Result};
use crate::network::{Network, NetworkShape, WeightState};
use crate::posterior::{
    pointwise_log_likelihood_matrix, Dataset, Posterior, PosteriorConfig, DEFAULT_PRIOR_SCALE,
};
use crate::sampler::{run_chains_parallel, Chain, NutsConfig};
use crate::spline::{eval_ispline, KnotVector};

/// Default number of points in the CDF evaluation grid.
pub const DEFAULT_GRID_SIZE: usize = 512;

/// Structural settings of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Spline degree `r`.
    pub degree: usize,
    /// Number of interior knot intervals `p`.
    pub interior: usize,
    /// Hidden width `V`.
    pub hidden: usize,
    pub prior_scale: f64,
    /// Fraction of the response range added below the minimum and above the
    /// maximum before mapping to the unit interval. All M-splines vanish at
    /// zero, so a zero margin gives the smallest response zero density.
    pub response_margin: f64,
    pub chains: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            degree: 2,
            interior: 5,
            hidden: 5,
            prior_scale: DEFAULT_PRIOR_SCALE,
            response_margin: 0.05,
            chains: 4,
        }
    }
}

impl ModelConfig {
    pub fn with_size(interior: usize, hidden: usize) -> Self {
        ModelConfig {
            interior,
            hidden,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.response_margin >= 0.0 && self.response_margin.is_finite()) {
            return Err(QuinnError::domain(format!(
                "response margin must be a finite non-negative number, got {}",
                self.response_margin
            )));
        }
        if self.chains < 1 {
            return Err(QuinnError::domain("need at least one chain"));
        }
        if self.hidden < 1 {
            return Err(QuinnError::domain("hidden width must be at least 1"));
        }
        KnotVector::new(self.degree, self.interior)?;
        Ok(())
    }
}

/// Min-max maps for the response and each covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Lower end of the response interval mapped to 0.
    pub y_min: f64,
    /// Upper end of the response interval mapped to 1.
    pub y_max: f64,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

impl Normalization {
    /// Fit the maps on raw training data, widening the response interval by
    /// `margin * range` on both sides.
    pub fn from_data(x: ArrayView2<f64>, y: ArrayView1<f64>, margin: f64) -> Result<Self> {
        check_finite(x, y)?;
        if y.is_empty() {
            return Err(QuinnError::data("no observations"));
        }
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Err(QuinnError::data(format!("response is constant ({lo})")));
        }
        let pad = margin * (hi - lo);
        let mut x_min = Vec::with_capacity(x.ncols());
        let mut x_max = Vec::with_capacity(x.ncols());
        for (j, col) in x.columns().into_iter().enumerate() {
            let a = col.iter().copied().fold(f64::INFINITY, f64::min);
            let b = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if b <= a {
                return Err(QuinnError::data(format!("covariate column {j} is constant ({a})")));
            }
            x_min.push(a);
            x_max.push(b);
        }
        Ok(Normalization {
            y_min: lo - pad,
            y_max: hi + pad,
            x_min,
            x_max,
        })
    }

    pub fn n_covariates(&self) -> usize {
        self.x_min.len()
    }

    pub fn normalize_y(&self, y: f64) -> f64 {
        (y - self.y_min) / (self.y_max - self.y_min)
    }

    pub fn denormalize_y(&self, z: f64) -> f64 {
        self.y_min + z * (self.y_max - self.y_min)
    }

    /// Map raw covariates to the unit cube, clamping values outside the
    /// training range. Returns the mapped matrix and the number of clamped
    /// cells.
    pub fn normalize_x(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, usize)> {
        if x.ncols() != self.n_covariates() {
            return Err(QuinnError::shape(format!(
                "expected {} covariates, got {}",
                self.n_covariates(),
                x.ncols()
            )));
        }
        let mut clamped = 0;
        let mut out = Array2::zeros(x.raw_dim());
        for ((i, j), v) in x.indexed_iter() {
            if !v.is_finite() {
                return Err(QuinnError::data(format!("non-finite covariate in row {i}, column {j}")));
            }
            let t = (v - self.x_min[j]) / (self.x_max[j] - self.x_min[j]);
            if !(0.0..=1.0).contains(&t) {
                clamped += 1;
            }
            out[[i, j]] = t.clamp(0.0, 1.0);
        }
        Ok((out, clamped))
    }
}

fn check_finite(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(QuinnError::shape(format!(
            "{} covariate rows but {} responses",
            x.nrows(),
            y.len()
        )));
    }
    for (i, row) in x.rows().into_iter().enumerate() {
        if !y[i].is_finite() || row.iter().any(|v| !v.is_finite()) {
            return Err(QuinnError::data(format!("missing or non-finite value in row {i}")));
        }
    }
    Ok(())
}

/// Posterior sample together with everything needed to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelConfig,
    pub nuts: NutsConfig,
    pub posterior: PosteriorConfig,
    pub normalization: Normalization,
    pub chains: Vec<Chain>,
    /// Pointwise log-likelihood, observations by pooled draws.
    pub loglik: Array2<f64>,
    pub covariate_names: Vec<String>,
    pub response_name: String,
}

impl FitResult {
    /// Replace the default `x1, x2, ...` and `y` variable names.
    pub fn with_names(mut self, covariates: Vec<String>, response: String) -> Result<Self> {
        if covariates.len() != self.normalization.n_covariates() {
            return Err(QuinnError::shape(format!(
                "{} names for {} covariates",
                covariates.len(),
                self.normalization.n_covariates()
            )));
        }
        self.covariate_names = covariates;
        self.response_name = response;
        Ok(self)
    }

    pub fn shape(&self) -> NetworkShape {
        self.posterior.shape
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    /// Draws of all chains, chain by chain.
    pub fn pooled_draws(&self) -> Vec<Vec<f64>> {
        self.chains.iter().flat_map(|c| c.draws.iter().cloned()).collect()
    }

    pub fn weight_states(&self) -> Result<Vec<WeightState>> {
        self.chains
            .iter()
            .flat_map(|c| c.draws.iter())
            .map(|d| WeightState::from_flat(self.shape(), d))
            .collect()
    }

    /// Predictor using every pooled draw on a grid of `grid_size` points.
    pub fn predictor(&self, grid_size: usize) -> Result<Predictor> {
        Predictor::new(self, grid_size)
    }

    pub fn waic(&self) -> Result<Waic> {
        waic(self.loglik.view())
    }
}

/// Normalize the data, sample the posterior and record the pointwise
/// log-likelihood of every kept draw.
pub fn fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    model: &ModelConfig,
    nuts: &NutsConfig,
) -> Result<FitResult> {
    model.validate()?;
    nuts.validate()?;
    let normalization = Normalization::from_data(x, y, model.response_margin)?;
    let (xn, _) = normalization.normalize_x(x)?;
    let z: Array1<f64> = y.mapv(|v| normalization.normalize_y(v));
    let data = Dataset::new(xn, z)?;
    let knots = KnotVector::new(model.degree, model.interior)?;
    let shape = NetworkShape::new(x.ncols(), model.hidden, knots.basis_count())?;
    let posterior = PosteriorConfig::new(knots, shape, model.prior_scale)?;

    let post = Posterior::new(&data, &posterior)?;
    let start = crate::network::init_state(shape, nuts.seed).to_flat();
    if !(post.log_likelihood(&start) + post.log_prior(&start)).is_finite() {
        return Err(QuinnError::data(
            "log-posterior is not finite at the initial state; a response value at the lower \
             end of the unit interval has zero density, so use a positive response margin",
        ));
    }
    log::info!(
        "fitting p={} V={} ({} parameters) with {} chain(s)",
        model.interior,
        model.hidden,
        shape.param_count(),
        model.chains
    );
    let chains = run_chains_parallel(model.chains, &data, &posterior, nuts)?;
    for (k, c) in chains.iter().enumerate() {
        log::info!(
            "chain {k}: step size {:.4}, accept {:.3}, divergences {} (+{} in warmup)",
            c.step_size,
            c.accept_stat,
            c.divergences,
            c.warmup_divergences
        );
    }
    let draws: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.draws.iter().cloned()).collect();
    let loglik = pointwise_log_likelihood_matrix(&post, &draws);
    if loglik.iter().any(|v| !v.is_finite()) {
        return Err(QuinnError::NonFinite { block: "log_likelihood" });
    }
    Ok(FitResult {
        model: model.clone(),
        nuts: nuts.clone(),
        posterior,
        normalization,
        chains,
        loglik,
        covariate_names: (1..=x.ncols()).map(|j| format!("x{j}")).collect(),
        response_name: "y".to_string(),
    })
}

/// Equidistant grid of `n` points on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// Invert a non-decreasing CDF tabulated on `z_grid` by linear
/// interpolation, returning one z-scale quantile per level.
pub fn invert_cdf(cdf: &[f64], z_grid: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
    if cdf.len() != z_grid.len() || cdf.len() < 2 {
        return Err(QuinnError::shape(format!(
            "CDF has {} values for a grid of {}",
            cdf.len(),
            z_grid.len()
        )));
    }
    taus.iter().map(|&tau| invert_one(cdf, z_grid, tau)).collect()
}

fn invert_one(cdf: &[f64], z: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(QuinnError::domain(format!("quantile level {tau} is outside (0, 1)")));
    }
    // first k with cdf[k] >= tau
    let k = cdf.partition_point(|&c| c < tau);
    if k == 0 {
        return Ok(z[0]);
    }
    if k == cdf.len() {
        return Ok(z[z.len() - 1]);
    }
    if cdf[k] == tau {
        return Ok(z[k]);
    }
    let (c0, c1) = (cdf[k - 1], cdf[k]);
    Ok(z[k - 1] + (tau - c0) / (c1 - c0) * (z[k] - z[k - 1]))
}

/// Anything that maps raw covariate rows to quantiles (rows x levels).
pub trait QuantileFunction: Sync {
    fn quantiles(&self, x: ArrayView2<f64>, taus: &[f64]) -> Result<Array2<f64>>;
}

impl<F> QuantileFunction for F
where
    F: Fn(ArrayView2<f64>, &[f64]) -> Array2<f64> + Sync,
{
    fn quantiles(&self, x: ArrayView2<f64>, taus: &[f64]) -> Result<Array2<f64>> {
        Ok(self(x, taus))
    }
}

/// Posterior-mean quantile predictor over a set of draws.
#[derive(Debug, Clone)]
pub struct Predictor {
    nets: Vec<Network>,
    z_grid: Vec<f64>,
    /// I-spline values on the grid, `grid x M`, row-major
    ibasis: Vec<f64>,
    outputs: usize,
    normalization: Normalization,
}

impl Predictor {
    pub fn new(fit: &FitResult, grid_size: usize) -> Result<Self> {
        let states = fit.weight_states()?;
        if states.is_empty() {
            return Err(QuinnError::domain("fit has no posterior draws"));
        }
        Self::from_states(&states, &fit.posterior.knots, fit.normalization.clone(), grid_size)
    }

    pub fn from_states(
        states: &[WeightState],
        knots: &KnotVector,
        normalization: Normalization,
        grid_size: usize,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(QuinnError::domain("no posterior draws"));
        }
        if grid_size < 2 {
            return Err(QuinnError::domain("CDF grid needs at least two points"));
        }
        let z_grid = unit_grid(grid_size);
        let basis = eval_ispline(knots, &z_grid)?;
        let outputs = basis.basis_count();
        if states[0].shape().outputs != outputs {
            return Err(QuinnError::shape("draws do not match the spline basis"));
        }
        Ok(Predictor {
            nets: states.iter().map(Network::new).collect(),
            z_grid,
            ibasis: basis.values.iter().copied().collect(),
            outputs,
            normalization,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.nets.len()
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z_grid
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// Predictor restricted to the given draw indices.
    pub fn subset(&self, draws: &[usize]) -> Result<Predictor> {
        if draws.is_empty() {
            return Err(QuinnError::domain("empty draw subset"));
        }
        let nets = draws
            .iter()
            .map(|&t| {
                self.nets.get(t).cloned().ok_or_else(|| {
                    QuinnError::domain(format!("draw {t} out of range ({} draws)", self.nets.len()))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Predictor {
            nets,
            ..self.clone()
        })
    }

    fn theta(&self, net: &Network, xn: &[f64], hidden: &mut Vec<f64>, out: &mut [f64]) {
        net.theta_into(xn, hidden, out);
    }

    /// Mean simplex weights over the draws at one normalized covariate row.
    fn mean_theta(&self, xn: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.outputs];
        let mut th = vec![0.0; self.outputs];
        let mut hidden = Vec::new();
        for net in &self.nets {
            self.theta(net, xn, &mut hidden, &mut th);
            for (a, t) in acc.iter_mut().zip(&th) {
                *a += t;
            }
        }
        let inv = 1.0 / self.nets.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        acc
    }

    fn cdf_from_theta(&self, theta: &[f64]) -> Vec<f64> {
        let m = self.outputs;
        let mut cdf: Vec<f64> = self
            .ibasis
            .chunks_exact(m)
            .map(|row| row.iter().zip(theta).map(|(b, t)| b * t).sum::<f64>())
            .collect();
        // guard against rounding: clamp and make non-decreasing
        let last = cdf.len() - 1;
        cdf[0] = 0.0;
        cdf[last] = 1.0;
        for k in 1..last {
            cdf[k] = cdf[k].clamp(cdf[k - 1], 1.0);
        }
        cdf
    }

    /// Posterior-mean CDF on the grid for one normalized covariate row.
    pub fn cdf_normalized(&self, xn: &[f64]) -> Vec<f64> {
        self.cdf_from_theta(&self.mean_theta(xn))
    }

    /// Posterior-mean CDF on the grid for one raw covariate row.
    pub fn posterior_mean_cdf(&self, x: ArrayView1<f64>) -> Result<Vec<f64>> {
        let xm = x.to_owned().insert_axis(Axis(0));
        let (xn, clamped) = self.normalization.normalize_x(xm.view())?;
        warn_clamped(clamped);
        Ok(self.cdf_normalized(xn.row(0).as_slice().expect("contiguous")))
    }

    /// Point predictions on the response scale, rows x levels.
    pub fn predict(&self, x: ArrayView2<f64>, taus: &[f64]) -> Result<Array2<f64>> {
        check_taus(taus)?;
        let (xn, clamped) = self.normalization.normalize_x(x)?;
        warn_clamped(clamped);
        let rows: Vec<Vec<f64>> = xn
            .rows()
            .into_iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|row| {
                let cdf = self.cdf_normalized(row.as_slice().expect("contiguous"));
                invert_cdf(&cdf, &self.z_grid, taus)
            })
            .collect::<Result<_>>()?;
        Ok(self.to_response_scale(rows, taus.len()))
    }

    /// Pointwise posterior quantiles of per-draw predictions: each draw's
    /// CDF is inverted separately and the `(1-level)/2` and `(1+level)/2`
    /// quantiles are taken across draws.
    pub fn predict_bands(
        &self,
        x: ArrayView2<f64>,
        taus: &[f64],
        level: f64,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        check_taus(taus)?;
        if !(level > 0.0 && level < 1.0) {
            return Err(QuinnError::domain(format!("band level {level} is outside (0, 1)")));
        }
        let (xn, clamped) = self.normalization.normalize_x(x)?;
        warn_clamped(clamped);
        let t = taus.len();
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = xn
            .rows()
            .into_iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|row| {
                let xr = row.as_slice().expect("contiguous");
                let mut per_draw = vec![Vec::with_capacity(self.nets.len()); t];
                let mut th = vec![0.0; self.outputs];
                let mut hidden = Vec::new();
                for net in &self.nets {
                    self.theta(net, xr, &mut hidden, &mut th);
                    let q = invert_cdf(&self.cdf_from_theta(&th), &self.z_grid, taus)?;
                    for (k, v) in q.into_iter().enumerate() {
                        per_draw[k].push(v);
                    }
                }
                let lo = per_draw.iter_mut().map(|v| percentile(v, (1.0 - level) / 2.0)).collect();
                let hi = per_draw.iter_mut().map(|v| percentile(v, (1.0 + level) / 2.0)).collect();
                Ok((lo, hi))
            })
            .collect::<Result<_>>()?;
        let (lo, hi): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        Ok((self.to_response_scale(lo, t), self.to_response_scale(hi, t)))
    }

    fn to_response_scale(&self, rows: Vec<Vec<f64>>, t: usize) -> Array2<f64> {
        let n = rows.len();
        let flat: Vec<f64> = rows
            .into_iter()
            .flatten()
            .map(|z| self.normalization.denormalize_y(z))
            .collect();
        Array2::from_shape_vec((n, t), flat).expect("rectangular")
    }
}

impl QuantileFunction for Predictor {
    fn quantiles(&self, x: ArrayView2<f64>, taus: &[f64]) -> Result<Array2<f64>> {
        self.predict(x, taus)
    }
}

fn warn_clamped(clamped: usize) {
    if clamped > 0 {
        log::warn!("{clamped} covariate value(s) outside the training range were clamped");
    }
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(QuinnError::domain("no quantile levels given"));
    }
    match taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        Some(t) => Err(QuinnError::domain(format!("quantile level {t} is outside (0, 1)"))),
        None => Ok(()),
    }
}

/// Linear-interpolation (type 7) sample quantile; sorts `values` in place.
pub fn percentile(values: &mut [f64], prob: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

/// Posterior-mean CDF of `fit` at one raw covariate row on an explicit grid.
pub fn posterior_mean_cdf(fit: &FitResult, x: ArrayView1<f64>, z_grid: &[f64]) -> Result<Vec<f64>> {
    let states = fit.weight_states()?;
    if states.is_empty() {
        return Err(QuinnError::domain("fit has no posterior draws"));
    }
    let basis = eval_ispline(&fit.posterior.knots, z_grid)?;
    let xm = x.to_owned().insert_axis(Axis(0));
    let (xn, clamped) = fit.normalization.normalize_x(xm.view())?;
    warn_clamped(clamped);
    let xr = xn.row(0).to_vec();
    let m = basis.basis_count();
    let mut mean = vec![0.0; m];
    let mut th = vec![0.0; m];
    let mut hidden = Vec::new();
    for s in &states {
        Network::new(s).theta_into(&xr, &mut hidden, &mut th);
        for (a, t) in mean.iter_mut().zip(&th) {
            *a += t / states.len() as f64;
        }
    }
    Ok(basis
        .values
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&mean).map(|(b, t)| b * t).sum())
        .collect())
}

/// Predict quantiles on the response scale with the default grid.
pub fn predict_quantiles(fit: &FitResult, x: ArrayView2<f64>, taus: &[f64]) -> Result<Array2<f64>> {
    fit.predictor(DEFAULT_GRID_SIZE)?.predict(x, taus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub p_waic: f64,
    pub lppd: f64,
}

/// WAIC from an observations x draws log-likelihood matrix.
pub fn waic(loglik: ArrayView2<f64>) -> Result<Waic> {
    let s = loglik.ncols();
    if s < 2 {
        return Err(QuinnError::domain("WAIC needs at least two posterior draws"));
    }
    if loglik.iter().any(|v| !v.is_finite()) {
        return Err(QuinnError::NonFinite { block: "log_likelihood" });
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for row in loglik.rows() {
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_exp = row.iter().map(|v| (v - mx).exp()).sum::<f64>() / s as f64;
        lppd += mx + mean_exp.ln();
        let mean = row.sum() / s as f64;
        p_waic += row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
    }
    Ok(Waic {
        waic: -2.0 * (lppd - p_waic),
        p_waic,
        lppd,
    })
}

/// One cell of a (p, V) grid search.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub interior: usize,
    pub hidden: usize,
    pub outcome: std::result::Result<(Waic, FitResult), String>,
}

impl GridCell {
    pub fn waic(&self) -> Option<Waic> {
        self.outcome.as_ref().ok().map(|(w, _)| *w)
    }

    pub fn fit(&self) -> Option<&FitResult> {
        self.outcome.as_ref().ok().map(|(_, f)| f)
    }
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub cells: Vec<GridCell>,
    /// Index of the minimum-WAIC cell among those that succeeded.
    pub best: usize,
}

impl GridSearch {
    pub fn best_fit(&self) -> &FitResult {
        self.cells[self.best].fit().expect("best cell succeeded")
    }

    /// Rank of each cell by WAIC (0 = best); failed cells get `None`.
    pub fn waic_ranks(&self) -> Vec<Option<usize>> {
        let mut order: Vec<usize> = (0..self.cells.len())
            .filter(|&i| self.cells[i].waic().is_some())
            .collect();
        order.sort_by(|&a, &b| {
            self.cells[a]
                .waic()
                .unwrap()
                .waic
                .total_cmp(&self.cells[b].waic().unwrap().waic)
        });
        let mut ranks = vec![None; self.cells.len()];
        for (r, &i) in order.iter().enumerate() {
            ranks[i] = Some(r);
        }
        ranks
    }
}

/// Fit every `(p, V)` combination and select the minimum-WAIC model.
/// Failed cells are kept with their error message.
pub fn grid_search(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    interiors: &[usize],
    hiddens: &[usize],
    base: &ModelConfig,
    nuts: &NutsConfig,
) -> Result<GridSearch> {
    if interiors.is_empty() || hiddens.is_empty() {
        return Err(QuinnError::domain("grid search needs at least one p and one V"));
    }
    let combos: Vec<(usize, usize)> = interiors
        .iter()
        .flat_map(|&p| hiddens.iter().map(move |&v| (p, v)))
        .collect();
    let cells: Vec<GridCell> = combos
        .par_iter()
        .map(|&(p, v)| {
            let cfg = ModelConfig {
                interior: p,
                hidden: v,
                ..base.clone()
            };
            let outcome = fit(x, y, &cfg, nuts)
                .and_then(|f| f.waic().map(|w| (w, f)))
                .map_err(|e| {
                    log::warn!("grid cell p={p} V={v} failed: {e}");
                    e.to_string()
                });
            GridCell {
                interior: p,
                hidden: v,
                outcome,
            }
        })
        .collect();
    let best = (0..cells.len())
        .filter(|&i| cells[i].waic().is_some())
        .min_by(|&a, &b| {
            cells[a].waic().unwrap().waic.total_cmp(&cells[b].waic().unwrap().waic)
        })
        .ok_or_else(|| {
            let msgs: Vec<String> = cells
                .iter()
                .filter_map(|c| c.outcome.as_ref().err().cloned())
                .collect();
            QuinnError::Sampler(format!("every grid cell failed: {}", msgs.join("; ")))
        })?;
    Ok(GridSearch { cells, best })
}
