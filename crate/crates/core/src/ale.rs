//! Accumulated local effects of covariates on predicted quantiles, and the
//! variable-importance scores derived from them.
//!
//! Every estimator takes a [`QuantileFunction`] and evaluates it on copies of
//! the data with one or two columns moved to bin edges, for all requested
//! quantile levels at once.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{QuinnError, Result};
use crate::model::{percentile, Predictor, QuantileFunction};

pub const DEFAULT_MAIN_BINS: usize = 40;
pub const DEFAULT_PAIR_BINS: usize = 20;

/// Partition of one covariate's sample range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleBins {
    /// Strictly increasing bin edges (continuous) or sorted levels
    /// (categorical).
    pub edges: Vec<f64>,
    /// Observations per bin `(e[k-1], e[k]]` (continuous, the first bin is
    /// closed) or per level (categorical).
    pub counts: Vec<usize>,
    pub categorical: bool,
    /// Bin (or level) index of each observation.
    pub assignment: Vec<usize>,
}

impl AleBins {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Centering weight of the effect at each edge: the count of the bin the
    /// edge closes (zero for the first edge), or the level count.
    pub fn edge_weights(&self) -> Vec<f64> {
        if self.categorical {
            self.counts.iter().map(|&c| c as f64).collect()
        } else {
            std::iter::once(0.0)
                .chain(self.counts.iter().map(|&c| c as f64))
                .collect()
        }
    }
}

fn type7(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn assign_continuous(edges: &[f64], values: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let nb = edges.len() - 1;
    let mut counts = vec![0; nb];
    let assignment = values
        .iter()
        .map(|&v| {
            let b = edges.partition_point(|&e| e < v).max(1).min(nb) - 1;
            counts[b] += 1;
            b
        })
        .collect();
    (assignment, counts)
}

/// Bin a covariate at the `k/K` sample percentiles (type 7), merging
/// duplicate edges and empty bins, or by its unique values when
/// categorical.
pub fn make_bins(values: &[f64], k: usize, categorical: bool) -> Result<AleBins> {
    if k < 2 {
        return Err(QuinnError::domain(format!("need at least 2 bins, got {k}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(QuinnError::data("covariate has non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if categorical {
        sorted.dedup();
        if sorted.len() < 2 {
            return Err(QuinnError::data("categorical covariate has a single level"));
        }
        let mut counts = vec![0; sorted.len()];
        let assignment = values
            .iter()
            .map(|v| {
                let b = sorted.partition_point(|e| e < v);
                counts[b] += 1;
                b
            })
            .collect();
        return Ok(AleBins {
            edges: sorted,
            counts,
            categorical,
            assignment,
        });
    }
    if values.len() < k {
        return Err(QuinnError::domain(format!(
            "{} observations are too few for {k} bins",
            values.len()
        )));
    }
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(QuinnError::data(format!("covariate is constant ({})", sorted[0])));
    }
    let mut edges: Vec<f64> = (0..=k).map(|i| type7(&sorted, i as f64 / k as f64)).collect();
    edges.dedup();
    loop {
        let (assignment, counts) = assign_continuous(&edges, values);
        match counts.iter().position(|&c| c == 0) {
            None => {
                return Ok(AleBins {
                    edges,
                    counts,
                    categorical,
                    assignment,
                })
            }
            // merge the empty bin with its right neighbour (left for the last)
            Some(b) if b + 1 < counts.len() => {
                edges.remove(b + 1);
            }
            Some(b) => {
                edges.remove(b);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AleKind {
    Main,
    Joint,
    Interaction,
}

impl AleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AleKind::Main => "main",
            AleKind::Joint => "joint",
            AleKind::Interaction => "interaction",
        }
    }
}

/// Centered effect on the bin-edge grid of one or two covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleEstimate {
    pub tau: f64,
    pub kind: AleKind,
    pub covariates: Vec<usize>,
    /// One edge vector per covariate.
    pub edges: Vec<Vec<f64>>,
    /// Effect at every edge (row-major over the edge grid for pairs).
    pub effect: Vec<f64>,
    /// Centering weight of every grid point.
    pub weights: Vec<f64>,
    pub categorical: bool,
    pub vi: f64,
}

impl AleEstimate {
    /// Weighted mean of the effect; zero for centered estimates.
    pub fn weighted_mean(&self) -> f64 {
        let w: f64 = self.weights.iter().sum();
        self.effect.iter().zip(&self.weights).map(|(e, w)| e * w).sum::<f64>() / w
    }

    /// Edge-grid shape, `(edges_j, edges_l)` with `edges_l = 1` for mains.
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.edges[0].len(), self.edges.get(1).map_or(1, Vec::len))
    }

    fn scored(mut self) -> Self {
        self.vi = vi_score(&self, self.categorical);
        self
    }
}

/// Importance of an effect: the standard deviation (divisor `K`) of its
/// values at the upper edges of the bins, or a quarter of the range when
/// categorical.
pub fn vi_score(est: &AleEstimate, categorical: bool) -> f64 {
    if est.effect.is_empty() {
        return 0.0;
    }
    if categorical {
        let lo = est.effect.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = est.effect.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return (hi - lo) / 4.0;
    }
    // drop the leading edge of each axis: only bin upper edges carry data
    let (rows, cols) = est.grid_shape();
    let vals: Vec<f64> = match est.edges.len() {
        1 => est.effect.iter().skip(1).copied().collect(),
        _ => (1..rows)
            .flat_map(|a| (1..cols).map(move |b| a * cols + b))
            .map(|i| est.effect[i])
            .collect(),
    };
    if vals.is_empty() {
        return 0.0;
    }
    let k = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / k;
    (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / k).sqrt()
}

fn check_inputs(x: ArrayView2<f64>, j: usize, taus: &[f64]) -> Result<()> {
    if j >= x.ncols() {
        return Err(QuinnError::domain(format!(
            "covariate {j} out of range ({} columns)",
            x.ncols()
        )));
    }
    if taus.is_empty() {
        return Err(QuinnError::domain("no quantile levels given"));
    }
    if x.nrows() == 0 {
        return Err(QuinnError::data("no observations"));
    }
    Ok(())
}

/// Bins for column `j`, with errors naming the column.
pub fn column_bins(x: ArrayView2<f64>, j: usize, k: usize, categorical: bool) -> Result<AleBins> {
    let col: Vec<f64> = x.column(j).to_vec();
    make_bins(&col, k, categorical).map_err(|e| match e {
        QuinnError::Data(m) => QuinnError::Data(format!("covariate {j}: {m}")),
        QuinnError::Domain(m) => QuinnError::Domain(format!("covariate {j}: {m}")),
        other => other,
    })
}

/// Main-effect ALE of column `j` at each level in `taus`.
pub fn ale_main<Q: QuantileFunction + ?Sized>(
    predict: &Q,
    x: ArrayView2<f64>,
    j: usize,
    bins: &AleBins,
    taus: &[f64],
) -> Result<Vec<AleEstimate>> {
    check_inputs(x, j, taus)?;
    if bins.assignment.len() != x.nrows() {
        return Err(QuinnError::shape("bins were built on different data"));
    }
    let effects = if bins.categorical {
        main_categorical(predict, x, j, bins, taus)?
    } else {
        main_continuous(predict, x, j, bins, taus)?
    };
    let weights = bins.edge_weights();
    Ok(taus
        .iter()
        .zip(effects)
        .map(|(&tau, effect)| {
            AleEstimate {
                tau,
                kind: AleKind::Main,
                covariates: vec![j],
                edges: vec![bins.edges.clone()],
                effect,
                weights: weights.clone(),
                categorical: bins.categorical,
                vi: 0.0,
            }
            .scored()
        })
        .collect())
}

/// Centered values `f - sum(w f) / sum(w)`.
fn center(f: &mut [f64], w: &[f64]) {
    let total: f64 = w.iter().sum();
    let c = f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    f.iter_mut().for_each(|v| *v -= c);
}

fn main_continuous<Q: QuantileFunction + ?Sized>(
    predict: &Q,
    x: ArrayView2<f64>,
    j: usize,
    bins: &AleBins,
    taus: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = x.nrows();
    let mut moved = Array2::zeros((2 * n, x.ncols()));
    for i in 0..n {
        let b = bins.assignment[i];
        moved.row_mut(i).assign(&x.row(i));
        moved.row_mut(n + i).assign(&x.row(i));
        moved[[i, j]] = bins.edges[b];
        moved[[n + i, j]] = bins.edges[b + 1];
    }
    let q = predict.quantiles(moved.view(), taus)?;
    check_prediction(&q, 2 * n, taus.len())?;
    let nb = bins.n_bins();
    let weights = bins.edge_weights();
    Ok((0..taus.len())
        .map(|t| {
            let mut sums = vec![0.0; nb];
            for i in 0..n {
                sums[bins.assignment[i]] += q[[n + i, t]] - q[[i, t]];
            }
            let mut f = vec![0.0; nb + 1];
            for b in 0..nb {
                f[b + 1] = f[b] + sums[b] / bins.counts[b] as f64;
            }
            center(&mut f, &weights);
            f
        })
        .collect())
}

/// Level-wise effects: step `k` averages the prediction change when
/// observations at level `k-1` move up and those at level `k` move down.
fn main_categorical<Q: QuantileFunction + ?Sized>(
    predict: &Q,
    x: ArrayView2<f64>,
    j: usize,
    bins: &AleBins,
    taus: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = x.nrows();
    let levels = &bins.edges;
    let nl = levels.len();
    // rows: each observation at its own level, one level up, one level down
    let mut rows = Vec::new();
    let mut plan = Vec::new(); // (obs, step, sign)
    for i in 0..n {
        let b = bins.assignment[i];
        if b + 1 < nl {
            plan.push((rows.len(), i, b + 1, 1.0));
            let mut r = x.row(i).to_owned();
            r[j] = levels[b + 1];
            rows.push(r);
        }
        if b > 0 {
            plan.push((rows.len(), i, b, -1.0));
            let mut r = x.row(i).to_owned();
            r[j] = levels[b - 1];
            rows.push(r);
        }
    }
    let mut moved = Array2::zeros((n + rows.len(), x.ncols()));
    for i in 0..n {
        moved.row_mut(i).assign(&x.row(i));
        moved[[i, j]] = levels[bins.assignment[i]];
    }
    for (r, row) in rows.iter().enumerate() {
        moved.row_mut(n + r).assign(row);
    }
    let q = predict.quantiles(moved.view(), taus)?;
    check_prediction(&q, moved.nrows(), taus.len())?;
    let weights = bins.edge_weights();
    Ok((0..taus.len())
        .map(|t| {
            let mut sums = vec![0.0; nl];
            for &(r, i, step, sign) in &plan {
                // up-move from level step-1 to step, or down-move from step to step-1
                sums[step] += sign * (q[[n + r, t]] - q[[i, t]]);
            }
            let mut f = vec![0.0; nl];
            for s in 1..nl {
                let m = (bins.counts[s - 1] + bins.counts[s]) as f64;
                f[s] = f[s - 1] + sums[s] / m;
            }
            center(&mut f, &weights);
            f
        })
        .collect())
}

fn check_prediction(q: &Array2<f64>, rows: usize, cols: usize) -> Result<()> {
    if q.dim() != (rows, cols) {
        return Err(QuinnError::shape(format!(
            "predictor returned {:?}, expected ({rows}, {cols})",
            q.dim()
        )));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(QuinnError::NonFinite { block: "prediction" });
    }
    Ok(())
}

/// Pure second-order effect of columns `(j, l)` on the edge grid, per level:
/// accumulated second differences with lower-order terms removed and
/// centered. Empty cells borrow the mean difference of the nearest
/// non-empty cell.
fn pure_pair<Q: QuantileFunction + ?Sized>(
    predict: &Q,
    x: ArrayView2<f64>,
    (j, l): (usize, usize),
    (bj, bl): (&AleBins, &AleBins),
    taus: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = x.nrows();
    let (k1, k2) = (bj.n_bins(), bl.n_bins());
    let mut moved = Array2::zeros((4 * n, x.ncols()));
    for i in 0..n {
        let (a, b) = (bj.assignment[i], bl.assignment[i]);
        for (c, (da, db)) in [(1, 1), (0, 1), (1, 0), (0, 0)].into_iter().enumerate() {
            let r = c * n + i;
            moved.row_mut(r).assign(&x.row(i));
            moved[[r, j]] = bj.edges[a + da];
            moved[[r, l]] = bl.edges[b + db];
        }
    }
    let q = predict.quantiles(moved.view(), taus)?;
    check_prediction(&q, 4 * n, taus.len())?;

    let mut counts = vec![0usize; k1 * k2];
    for i in 0..n {
        counts[bj.assignment[i] * k2 + bl.assignment[i]] += 1;
    }
    let nearest = nearest_filled(&counts, k2);
    let row_n: Vec<f64> = (0..k1).map(|a| bj.counts[a] as f64).collect();
    let col_n: Vec<f64> = (0..k2).map(|b| bl.counts[b] as f64).collect();
    let (r1, c1) = (k1 + 1, k2 + 1);

    Ok((0..taus.len())
        .map(|t| {
            let mut delta = vec![0.0; k1 * k2];
            for i in 0..n {
                let d = q[[i, t]] - q[[n + i, t]] - q[[2 * n + i, t]] + q[[3 * n + i, t]];
                delta[bj.assignment[i] * k2 + bl.assignment[i]] += d;
            }
            for c in 0..k1 * k2 {
                if counts[c] > 0 {
                    delta[c] /= counts[c] as f64;
                }
            }
            let filled: Vec<f64> = (0..k1 * k2).map(|c| delta[nearest[c]]).collect();

            // accumulate onto the (K1+1) x (K2+1) edge grid
            let mut f = vec![0.0; r1 * c1];
            for a in 1..r1 {
                for b in 1..c1 {
                    f[a * c1 + b] = filled[(a - 1) * k2 + (b - 1)] + f[(a - 1) * c1 + b]
                        + f[a * c1 + b - 1]
                        - f[(a - 1) * c1 + b - 1];
                }
            }
            // remove the main effects implied by the accumulated surface
            let mut main_j = vec![0.0; r1];
            for a in 1..r1 {
                let mut s = 0.0;
                for b in 1..c1 {
                    let d_hi = f[a * c1 + b] - f[(a - 1) * c1 + b];
                    let d_lo = f[a * c1 + b - 1] - f[(a - 1) * c1 + b - 1];
                    s += counts[(a - 1) * k2 + (b - 1)] as f64 * (d_hi + d_lo) / 2.0;
                }
                main_j[a] = main_j[a - 1] + s / row_n[a - 1];
            }
            let mut main_l = vec![0.0; c1];
            for b in 1..c1 {
                let mut s = 0.0;
                for a in 1..r1 {
                    let d_hi = f[a * c1 + b] - f[a * c1 + b - 1];
                    let d_lo = f[(a - 1) * c1 + b] - f[(a - 1) * c1 + b - 1];
                    s += counts[(a - 1) * k2 + (b - 1)] as f64 * (d_hi + d_lo) / 2.0;
                }
                main_l[b] = main_l[b - 1] + s / col_n[b - 1];
            }
            for a in 0..r1 {
                for b in 0..c1 {
                    f[a * c1 + b] -= main_j[a] + main_l[b];
                }
            }
            center(&mut f, &pair_weights(&counts, k1, k2));
            f
        })
        .collect())
}

/// Index of the nearest non-empty cell (Euclidean in cell indices, ties to
/// the lowest index) for every cell.
fn nearest_filled(counts: &[usize], k2: usize) -> Vec<usize> {
    let filled: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    (0..counts.len())
        .map(|c| {
            if counts[c] > 0 {
                return c;
            }
            let (a, b) = ((c / k2) as i64, (c % k2) as i64);
            *filled
                .iter()
                .min_by_key(|&&o| {
                    let (oa, ob) = ((o / k2) as i64, (o % k2) as i64);
                    (oa - a).pow(2) + (ob - b).pow(2)
                })
                .expect("at least one observation")
        })
        .collect()
}

/// Cell counts placed on the upper corner of each cell.
fn pair_weights(counts: &[usize], k1: usize, k2: usize) -> Vec<f64> {
    let c1 = k2 + 1;
    let mut w = vec![0.0; (k1 + 1) * c1];
    for a in 0..k1 {
        for b in 0..k2 {
            w[(a + 1) * c1 + b + 1] = counts[a * k2 + b] as f64;
        }
    }
    w
}

fn pair_counts(bj: &AleBins, bl: &AleBins) -> Vec<usize> {
    let k2 = bl.n_bins();
    let mut counts = vec![0usize; bj.n_bins() * k2];
    for (a, b) in bj.assignment.iter().zip(&bl.assignment) {
        counts[a * k2 + b] += 1;
    }
    counts
}

fn transpose(v: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for a in 0..rows {
        for b in 0..cols {
            out[b * rows + a] = v[a * cols + b];
        }
    }
    out
}

/// Joint second-order ALE of columns `j` and `l`: the pure interaction plus
/// both main effects on the same edges. Both covariates must be continuous.
pub fn ale_second_order<Q: QuantileFunction + ?Sized>(
    predict: &Q,
    x: ArrayView2<f64>,
    (j, l): (usize, usize),
    (bj, bl): (&AleBins, &AleBins),
    taus: &[f64],
) -> Result<Vec<AleEstimate>> {
    check_inputs(x, j, taus)?;
    check_inputs(x, l, taus)?;
    if j == l {
        return Err(QuinnError::domain("second-order effects need two distinct covariates"));
    }
    if bj.categorical || bl.categorical {
        return Err(QuinnError::domain(
            "second-order effects are only available for continuous covariates",
        ));
    }
    if bj.assignment.len() != x.nrows() || bl.assignment.len() != x.nrows() {
        return Err(QuinnError::shape("bins were built on different data"));
    }
    // evaluate in canonical order so swapping j and l transposes exactly
    let pure = if j < l {
        pure_pair(predict, x, (j, l), (bj, bl), taus)?
    } else {
        pure_pair(predict, x, (l, j), (bl, bj), taus)?
            .into_iter()
            .map(|p| transpose(&p, bl.n_bins() + 1, bj.n_bins() + 1))
            .collect()
    };
    let mains_j = ale_main(predict, x, j, bj, taus)?;
    let mains_l = ale_main(predict, x, l, bl, taus)?;
    let c1 = bl.edges.len();
    let weights = pair_weights(&pair_counts(bj, bl), bj.n_bins(), bl.n_bins());
    Ok(taus
        .iter()
        .enumerate()
        .map(|(t, &tau)| {
            let effect = (0..pure[t].len())
                .map(|i| {
                    let (a, b) = (mains_j[t].effect[i / c1], mains_l[t].effect[i % c1]);
                    // same summation order for (j, l) and (l, j)
                    if j < l {
                        pure[t][i] + a + b
                    } else {
                        pure[t][i] + b + a
                    }
                })
                .collect();
            AleEstimate {
                tau,
                kind: AleKind::Joint,
                covariates: vec![j, l],
                edges: vec![bj.edges.clone(), bl.edges.clone()],
                effect,
                weights: weights.clone(),
                categorical: false,
                vi: 0.0,
            }
            .scored()
        })
        .collect())
}

/// Pure interaction: joint effect minus both main effects on its grid.
pub fn ale_interaction(
    joint: &AleEstimate,
    main_j: &AleEstimate,
    main_l: &AleEstimate,
) -> Result<AleEstimate> {
    if joint.kind != AleKind::Joint || main_j.kind != AleKind::Main || main_l.kind != AleKind::Main {
        return Err(QuinnError::domain("expected a joint effect and two main effects"));
    }
    if joint.covariates[0] == joint.covariates[1] {
        return Err(QuinnError::domain("interaction of a covariate with itself"));
    }
    if joint.edges[0] != main_j.edges[0] || joint.edges[1] != main_l.edges[0] {
        return Err(QuinnError::shape("main-effect edges do not match the joint grid"));
    }
    if joint.tau != main_j.tau || joint.tau != main_l.tau {
        return Err(QuinnError::domain("effects are for different quantile levels"));
    }
    let c1 = joint.edges[1].len();
    let effect = joint
        .effect
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (a, b) = (main_j.effect[i / c1], main_l.effect[i % c1]);
            if joint.covariates[0] < joint.covariates[1] {
                v - a - b
            } else {
                v - b - a
            }
        })
        .collect();
    Ok(AleEstimate {
        kind: AleKind::Interaction,
        effect,
        vi: 0.0,
        ..joint.clone()
    }
    .scored())
}

/// Which effect to summarize over posterior draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectTarget {
    Main(usize),
    /// Joint and interaction effects of a pair.
    Pair(usize, usize),
}

/// Pointwise posterior summary of one effect at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleSummary {
    pub tau: f64,
    pub kind: AleKind,
    pub covariates: Vec<usize>,
    pub edges: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub vi_mean: f64,
    pub vi_lower: f64,
    pub vi_upper: f64,
    pub n_draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorAle {
    /// Estimates per draw (outer) and per effect/level (inner).
    pub per_draw: Vec<Vec<AleEstimate>>,
    pub summaries: Vec<AleSummary>,
}

/// ALE under each selected draw's own quantile predictor, summarized by the
/// pointwise mean and 2.5% / 97.5% posterior quantiles.
pub fn posterior_ale(
    predictor: &Predictor,
    x: ArrayView2<f64>,
    target: EffectTarget,
    bins: &[AleBins],
    taus: &[f64],
    draws: &[usize],
) -> Result<PosteriorAle> {
    if draws.is_empty() {
        return Err(QuinnError::domain("empty draw subset"));
    }
    let per_draw = draws
        .iter()
        .map(|&d| {
            let single = predictor.subset(&[d])?;
            effects_for(&single, x, target, bins, taus)
        })
        .collect::<Result<Vec<_>>>()?;
    let n_effects = per_draw[0].len();
    let summaries = (0..n_effects)
        .map(|e| summarize(per_draw.iter().map(|d| &d[e]).collect()))
        .collect();
    Ok(PosteriorAle {
        per_draw,
        summaries,
    })
}

/// Point estimates for one target under any predictor.
pub fn effects_for<Q: QuantileFunction + ?Sized>(
    predict: &Q,
    x: ArrayView2<f64>,
    target: EffectTarget,
    bins: &[AleBins],
    taus: &[f64],
) -> Result<Vec<AleEstimate>> {
    match target {
        EffectTarget::Main(j) => {
            let b = bins.first().ok_or_else(|| QuinnError::domain("missing bins"))?;
            ale_main(predict, x, j, b, taus)
        }
        EffectTarget::Pair(j, l) => {
            let (bj, bl) = match bins {
                [a, b, ..] => (a, b),
                _ => return Err(QuinnError::domain("pair effects need two sets of bins")),
            };
            let joints = ale_second_order(predict, x, (j, l), (bj, bl), taus)?;
            let mains_j = ale_main(predict, x, j, bj, taus)?;
            let mains_l = ale_main(predict, x, l, bl, taus)?;
            let mut out = Vec::with_capacity(2 * taus.len());
            for t in 0..taus.len() {
                out.push(ale_interaction(&joints[t], &mains_j[t], &mains_l[t])?);
            }
            out.extend(joints);
            Ok(out)
        }
    }
}

fn summarize(draws: Vec<&AleEstimate>) -> AleSummary {
    let first = draws[0];
    let len = first.effect.len();
    let s = draws.len() as f64;
    let mut mean = vec![0.0; len];
    let mut lower = vec![0.0; len];
    let mut upper = vec![0.0; len];
    let mut column = Vec::with_capacity(draws.len());
    for i in 0..len {
        column.clear();
        column.extend(draws.iter().map(|d| d.effect[i]));
        mean[i] = column.iter().sum::<f64>() / s;
        lower[i] = percentile(&mut column, 0.025);
        upper[i] = percentile(&mut column, 0.975);
    }
    let mut vis: Vec<f64> = draws.iter().map(|d| d.vi).collect();
    AleSummary {
        tau: first.tau,
        kind: first.kind,
        covariates: first.covariates.clone(),
        edges: first.edges.clone(),
        mean,
        vi_mean: vis.iter().sum::<f64>() / s,
        vi_lower: percentile(&mut vis, 0.025),
        vi_upper: percentile(&mut vis, 0.975),
        lower,
        upper,
        n_draws: draws.len(),
    }
}
