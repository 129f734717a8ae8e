//! Simulation designs with known quantile functions, RMISE scoring and
//! replicate studies.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{QuinnError, Result};
use crate::model::{grid_search, ModelConfig, DEFAULT_GRID_SIZE};
use crate::sampler::NutsConfig;

/// Slant of the skew-normal noise in the first design.
pub const SKEW_SLANT: f64 = 4.0;

/// Number of held-out rows for the fourth design.
pub const DESIGN4_TEST_ROWS: usize = 200;

/// The 19 levels 0.05, 0.10, ..., 0.95.
pub fn study_taus() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    /// `x + sin 2x + 3e`, skew-normal noise, `x ~ U(0, 5)`.
    One,
    /// Heteroscedastic normal noise, `x ~ U(0, 1)`.
    Two,
    /// Two covariates with t(3) noise.
    Three,
    /// Closed-form quantile function with six active covariates.
    Four,
}

impl Design {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Design::One),
            2 => Ok(Design::Two),
            3 => Ok(Design::Three),
            4 => Ok(Design::Four),
            _ => Err(QuinnError::domain(format!("unknown design {id}; expected 1 to 4"))),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Design::One => 1,
            Design::Two => 2,
            Design::Three => 3,
            Design::Four => 4,
        }
    }

    /// Covariate dimension, `None` when it is free (design 4).
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            Design::One | Design::Two => Some(1),
            Design::Three => Some(2),
            Design::Four => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub design: Design,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl DesignSpec {
    /// Spec with the design's natural dimension (10 for design 4).
    pub fn new(design: Design, n: usize, seed: u64) -> Self {
        DesignSpec {
            design,
            n,
            d: design.fixed_dim().unwrap_or(10),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.design.fixed_dim() {
            Some(d) if d != self.d => Err(QuinnError::domain(format!(
                "design {} has {} covariate(s), got d = {}",
                self.design.id(),
                d,
                self.d
            ))),
            None if self.d < 6 => Err(QuinnError::domain(format!(
                "design 4 needs at least 6 covariates, got d = {}",
                self.d
            ))),
            _ if self.n < 1 => Err(QuinnError::domain("sample size must be positive")),
            _ => Ok(()),
        }
    }
}

/// Simulated covariates and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid normal")
}

pub fn normal_quantile(tau: f64) -> f64 {
    std_normal().inverse_cdf(tau)
}

pub fn t3_quantile(tau: f64) -> f64 {
    StudentsT::new(0.0, 1.0, 3.0).expect("valid t").inverse_cdf(tau)
}

/// Draw from the skew-normal with location 0, scale 1 and slant `alpha`
/// via `delta |U0| + sqrt(1 - delta^2) U1`.
pub fn skew_normal_sample<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let u0: f64 = StandardNormal.sample(rng);
    let u1: f64 = StandardNormal.sample(rng);
    delta * u0.abs() + (1.0 - delta * delta).sqrt() * u1
}

// 20-point Gauss-Legendre rule on [-1, 1]
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = 20;
        (0..n)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// Owen's T function `T(h, a)`.
pub fn owens_t(h: f64, a: f64) -> f64 {
    let panels = 16;
    let width = a / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * width;
        for &(x, w) in gauss_legendre() {
            let t = mid + 0.5 * width * x;
            let s = 1.0 + t * t;
            total += w * 0.5 * width * (-0.5 * h * h * s).exp() / s;
        }
    }
    total / (2.0 * PI)
}

/// CDF of the skew-normal with location 0, scale 1 and slant `alpha`.
pub fn skew_normal_cdf(x: f64, alpha: f64) -> f64 {
    (std_normal().cdf(x) - 2.0 * owens_t(x, alpha)).clamp(0.0, 1.0)
}

/// Skew-normal quantile by bisection on the CDF.
pub fn skew_normal_quantile(tau: f64, alpha: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(QuinnError::domain(format!("quantile level {tau} is outside (0, 1)")));
    }
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if skew_normal_cdf(mid, alpha) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// True conditional quantile of `design` at level `tau` and covariates `x`.
pub fn true_quantile(design: Design, tau: f64, x: &[f64]) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(QuinnError::domain(format!("quantile level {tau} is outside (0, 1)")));
    }
    let need = design.fixed_dim().unwrap_or(6);
    if x.len() < need || (design.fixed_dim().is_some() && x.len() != need) {
        return Err(QuinnError::shape(format!(
            "design {} expects {} covariate(s), got {}",
            design.id(),
            need,
            x.len()
        )));
    }
    Ok(match design {
        Design::One => {
            let x = x[0];
            x + (2.0 * x).sin() + 3.0 * skew_normal_quantile(tau, SKEW_SLANT)?
        }
        Design::Two => {
            let x = x[0];
            3.0 * x + (0.5 + 2.0 * x + (3.0 * PI * x + 1.0).sin()) * normal_quantile(tau)
        }
        Design::Three => {
            let (a, b) = (x[0], x[1]);
            (2.0 * PI * a).sin()
                + (2.0 * PI * b).cos()
                + (2.0 * (a * a + b * b)).sqrt() * t3_quantile(tau)
        }
        Design::Four => design4_quantile(tau, x, normal_quantile(tau)),
    })
}

fn design4_quantile(tau: f64, x: &[f64], z: f64) -> f64 {
    3.0 * (tau - 0.5) * (x[0] + 0.6).powi(3)
        + 15.0 * (x[1] + 4.0 * (x[1] - 0.5).powi(2)) * (-x[1] * x[1]).exp()
        + 12.0 * ((x[2] + 0.5).powi(2) * (x[3] - 0.5).powi(2)).exp()
        + 5.0 * (tau - 1.0) * (x[4] + 0.4) * (x[5] + 0.5).powi(2)
        + 0.25 * z
}

/// True quantiles on a grid, rows x levels. Noise quantiles are computed
/// once per level.
pub fn true_quantile_matrix(design: Design, grid: ArrayView2<f64>, taus: &[f64]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((grid.nrows(), taus.len()));
    for (k, &tau) in taus.iter().enumerate() {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(QuinnError::domain(format!("quantile level {tau} is outside (0, 1)")));
        }
        let noise = match design {
            Design::One => skew_normal_quantile(tau, SKEW_SLANT)?,
            Design::Two | Design::Four => normal_quantile(tau),
            Design::Three => t3_quantile(tau),
        };
        for (i, row) in grid.rows().into_iter().enumerate() {
            let x = row.to_vec();
            if x.len() < design.fixed_dim().unwrap_or(6) {
                return Err(QuinnError::shape("grid has too few columns"));
            }
            out[[i, k]] = match design {
                Design::One => x[0] + (2.0 * x[0]).sin() + 3.0 * noise,
                Design::Two => 3.0 * x[0] + (0.5 + 2.0 * x[0] + (3.0 * PI * x[0] + 1.0).sin()) * noise,
                Design::Three => {
                    (2.0 * PI * x[0]).sin()
                        + (2.0 * PI * x[1]).cos()
                        + (2.0 * (x[0] * x[0] + x[1] * x[1])).sqrt() * noise
                }
                Design::Four => design4_quantile(tau, &x, noise),
            };
        }
    }
    Ok(out)
}

fn covariates<R: Rng>(spec: &DesignSpec, n: usize, rng: &mut R) -> Array2<f64> {
    let scale = if spec.design == Design::One { 5.0 } else { 1.0 };
    Array2::from_shape_fn((n, spec.d), |_| scale * rng.random::<f64>())
}

/// Simulate a training sample; identical specs give identical data.
pub fn generate(spec: &DesignSpec) -> Result<SimData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = covariates(spec, spec.n, &mut rng);
    let t3 = StudentT::new(3.0).expect("valid t");
    let y = Array1::from_shape_fn(spec.n, |i| {
        let row = x.row(i);
        match spec.design {
            Design::One => {
                let v = row[0];
                v + (2.0 * v).sin() + 3.0 * skew_normal_sample(SKEW_SLANT, &mut rng)
            }
            Design::Two => {
                let v = row[0];
                let e: f64 = StandardNormal.sample(&mut rng);
                3.0 * v + (0.5 + 2.0 * v + (3.0 * PI * v + 1.0).sin()) * e
            }
            Design::Three => {
                let (a, b) = (row[0], row[1]);
                (2.0 * PI * a).sin()
                    + (2.0 * PI * b).cos()
                    + (2.0 * (a * a + b * b)).sqrt() * t3.sample(&mut rng)
            }
            Design::Four => {
                // open interval keeps the normal quantile finite
                let u = loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                };
                design4_quantile(u, row.as_slice().expect("contiguous"), normal_quantile(u))
            }
        }
    });
    Ok(SimData { x, y })
}

/// Held-out covariates for design 4, drawn from a separate stream.
pub fn test_covariates(spec: &DesignSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    Ok(covariates(spec, DESIGN4_TEST_ROWS, &mut rng))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Points at which estimated and true quantiles are compared.
pub fn eval_grid(spec: &DesignSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    Ok(match spec.design {
        Design::One => Array2::from_shape_vec((101, 1), linspace(0.0, 5.0, 101)).expect("shape"),
        Design::Two => Array2::from_shape_vec((101, 1), linspace(0.0, 1.0, 101)).expect("shape"),
        Design::Three => {
            let g = linspace(0.0, 1.0, 21);
            Array2::from_shape_fn((21 * 21, 2), |(i, j)| if j == 0 { g[i / 21] } else { g[i % 21] })
        }
        Design::Four => test_covariates(spec)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmiseReport {
    pub taus: Vec<f64>,
    pub per_tau: Vec<f64>,
    /// Root mean square of `per_tau`.
    pub qp: f64,
}

/// Root mean integrated squared error per level (columns) over grid
/// points (rows).
pub fn rmise(truth: ArrayView2<f64>, estimate: ArrayView2<f64>, taus: &[f64]) -> Result<RmiseReport> {
    if truth.dim() != estimate.dim() || truth.ncols() != taus.len() || truth.nrows() == 0 {
        return Err(QuinnError::shape(format!(
            "truth {:?}, estimate {:?} and {} levels do not match",
            truth.dim(),
            estimate.dim(),
            taus.len()
        )));
    }
    let g = truth.nrows() as f64;
    let per_tau: Vec<f64> = (0..taus.len())
        .map(|k| {
            let ss: f64 = truth
                .column(k)
                .iter()
                .zip(estimate.column(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (ss / g).sqrt()
        })
        .collect();
    let qp = (per_tau.iter().map(|r| r * r).sum::<f64>() / per_tau.len() as f64).sqrt();
    Ok(RmiseReport {
        taus: taus.to_vec(),
        per_tau,
        qp,
    })
}

/// One fitted grid cell of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub interior: usize,
    pub hidden: usize,
    pub waic: Option<f64>,
    pub waic_rank: Option<usize>,
    pub rmise_qp: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub data_seed: u64,
    pub selected: Option<(usize, usize)>,
    pub rmise: Option<RmiseReport>,
    pub cells: Vec<CellRecord>,
    pub error: Option<String>,
}

impl ReplicateRecord {
    pub fn rmise_qp(&self) -> Option<f64> {
        self.rmise.as_ref().map(|r| r.qp)
    }

    /// Smallest out-of-sample RMISE over the grid.
    pub fn grid_best_rmise(&self) -> Option<f64> {
        self.cells
            .iter()
            .filter_map(|c| c.rmise_qp)
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub spec: DesignSpec,
    pub replicates: Vec<ReplicateRecord>,
}

impl StudyReport {
    fn successes(&self) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.rmise_qp()).collect()
    }

    pub fn mean_rmise_qp(&self) -> Option<f64> {
        let v = self.successes();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Sample standard deviation across successful replicates.
    pub fn sd_rmise_qp(&self) -> Option<f64> {
        let v = self.successes();
        if v.len() < 2 {
            return None;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        Some((v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
    }

    pub fn se_rmise_qp(&self) -> Option<f64> {
        self.sd_rmise_qp().map(|s| s / (self.successes().len() as f64).sqrt())
    }

    /// Spearman correlation between WAIC rank and out-of-sample RMISE rank,
    /// pooled over the cells of all replicates (ranks within replicate).
    pub fn waic_rmise_rank_correlation(&self) -> Option<f64> {
        let mut pairs = Vec::new();
        for r in &self.replicates {
            let ok: Vec<&CellRecord> = r
                .cells
                .iter()
                .filter(|c| c.waic_rank.is_some() && c.rmise_qp.is_some())
                .collect();
            let mut order: Vec<usize> = (0..ok.len()).collect();
            order.sort_by(|&a, &b| ok[a].rmise_qp.unwrap().total_cmp(&ok[b].rmise_qp.unwrap()));
            for (rank, &i) in order.iter().enumerate() {
                pairs.push((ok[i].waic_rank.unwrap() as f64, rank as f64));
            }
        }
        pearson(&pairs)
    }

    pub fn summary_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut s = String::from("design,n,d,reps,succeeded,mean_rmise_qp,sd_rmise_qp,se_rmise_qp\n");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            self.spec.design.id(),
            self.spec.n,
            self.spec.d,
            self.replicates.len(),
            self.successes().len(),
            fmt(self.mean_rmise_qp()),
            fmt(self.sd_rmise_qp()),
            fmt(self.se_rmise_qp())
        );
        s
    }

    pub fn replicates_csv(&self) -> String {
        let mut s = String::from("replicate,data_seed,p,V,rmise_qp,error\n");
        for r in &self.replicates {
            let (p, v) = r
                .selected
                .map(|(p, v)| (p.to_string(), v.to_string()))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.replicate,
                r.data_seed,
                p,
                v,
                r.rmise_qp().map(|x| format!("{x:.6}")).unwrap_or_default(),
                csv_text(r.error.as_deref().unwrap_or(""))
            );
        }
        s
    }

    pub fn cells_csv(&self) -> String {
        let mut s = String::from("replicate,p,V,waic,waic_rank,rmise_qp,error\n");
        for r in &self.replicates {
            for c in &r.cells {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.replicate,
                    c.interior,
                    c.hidden,
                    c.waic.map(|x| format!("{x:.6}")).unwrap_or_default(),
                    c.waic_rank.map(|x| (x + 1).to_string()).unwrap_or_default(),
                    c.rmise_qp.map(|x| format!("{x:.6}")).unwrap_or_default(),
                    csv_text(c.error.as_deref().unwrap_or(""))
                );
            }
        }
        s
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Settings of a replicate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub reps: usize,
    pub interiors: Vec<usize>,
    pub hiddens: Vec<usize>,
    pub model: ModelConfig,
    pub nuts: NutsConfig,
}

/// Simulate `reps` data sets (seed `spec.seed + r`), grid-search each by
/// WAIC and score every cell against the true quantiles. Replicate `r`
/// samples with NUTS seed `nuts.seed + 1000 r`. Failures are recorded per
/// replicate.
pub fn replicate_study(spec: &DesignSpec, study: &StudyConfig) -> Result<StudyReport> {
    spec.validate()?;
    if study.reps < 1 {
        return Err(QuinnError::domain("need at least one replicate"));
    }
    let taus = study_taus();
    let replicates = (0..study.reps)
        .into_par_iter()
        .map(|r| {
            let rep_spec = DesignSpec {
                seed: spec.seed.wrapping_add(r as u64),
                ..*spec
            };
            let nuts = NutsConfig {
                seed: study.nuts.seed.wrapping_add(1000 * r as u64),
                ..study.nuts.clone()
            };
            let outcome = run_replicate(&rep_spec, study, &nuts, &taus);
            let record = match outcome {
                Ok((selected, rmise, cells)) => ReplicateRecord {
                    replicate: r,
                    data_seed: rep_spec.seed,
                    selected: Some(selected),
                    rmise: Some(rmise),
                    cells,
                    error: None,
                },
                Err(e) => ReplicateRecord {
                    replicate: r,
                    data_seed: rep_spec.seed,
                    selected: None,
                    rmise: None,
                    cells: Vec::new(),
                    error: Some(e.to_string()),
                },
            };
            log::info!(
                "replicate {r}: selected {:?}, RMISE_QP {:?}",
                record.selected,
                record.rmise_qp()
            );
            record
        })
        .collect();
    Ok(StudyReport {
        spec: *spec,
        replicates,
    })
}

type ReplicateOutcome = ((usize, usize), RmiseReport, Vec<CellRecord>);

fn run_replicate(
    spec: &DesignSpec,
    study: &StudyConfig,
    nuts: &NutsConfig,
    taus: &[f64],
) -> Result<ReplicateOutcome> {
    let data = generate(spec)?;
    let grid = eval_grid(spec)?;
    let truth = true_quantile_matrix(spec.design, grid.view(), taus)?;
    let search = grid_search(
        data.x.view(),
        data.y.view(),
        &study.interiors,
        &study.hiddens,
        &study.model,
        nuts,
    )?;
    let ranks = search.waic_ranks();
    let mut cells = Vec::with_capacity(search.cells.len());
    let mut selected_rmise = None;
    for (i, cell) in search.cells.iter().enumerate() {
        let scored = cell.fit().map(|f| {
            f.predictor(DEFAULT_GRID_SIZE)
                .and_then(|p| p.predict(grid.view(), taus))
                .and_then(|est| rmise(truth.view(), est.view(), taus))
        });
        let (rm, err) = match scored {
            Some(Ok(r)) => (Some(r), None),
            Some(Err(e)) => (None, Some(e.to_string())),
            None => (None, cell.outcome.as_ref().err().cloned()),
        };
        if i == search.best {
            selected_rmise = rm.clone();
        }
        cells.push(CellRecord {
            interior: cell.interior,
            hidden: cell.hidden,
            waic: cell.waic().map(|w| w.waic),
            waic_rank: ranks[i],
            rmise_qp: rm.map(|r| r.qp),
            error: err,
        });
    }
    let best = &search.cells[search.best];
    let rmise = selected_rmise
        .ok_or_else(|| QuinnError::Sampler("selected model could not be scored".to_string()))?;
    Ok(((best.interior, best.hidden), rmise, cells))
}
