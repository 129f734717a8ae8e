//! Rank-normalized split R-hat and bulk/tail effective sample size for a
//! scalar monitored across chains.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{QuinnError, Result};
use crate::model::{percentile, FitResult};
use crate::posterior::{Dataset, Posterior, PosteriorConfig};
use crate::sampler::Chain;

/// Convergence thresholds used for `pass`.
pub const RHAT_MAX: f64 = 1.05;
pub const ESS_MIN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rhat: f64,
    pub ess_bulk: f64,
    pub ess_tail: f64,
    pub pass: bool,
    /// Some chain has zero variance; the statistics are NaN.
    pub degenerate: bool,
}

/// Diagnostics for a `chains x draws` matrix. A single chain is allowed
/// (it is split in two); at least four draws per chain are required.
///
/// R-hat is floored at 1 and ESS values are capped at the total number of
/// draws.
pub fn scalar_diagnostics(chains: ArrayView2<f64>) -> Result<DiagnosticsReport> {
    let (m, n) = chains.dim();
    if m < 1 || n < 4 {
        return Err(QuinnError::domain(format!(
            "diagnostics need at least one chain of four draws, got {m} x {n}"
        )));
    }
    if chains.iter().any(|v| !v.is_finite()) {
        return Err(QuinnError::data("chains contain non-finite values"));
    }
    let degenerate = chains.rows().into_iter().any(|row| {
        let first = row[0];
        row.iter().all(|&v| v == first)
    });
    if degenerate {
        return Ok(DiagnosticsReport {
            rhat: f64::NAN,
            ess_bulk: f64::NAN,
            ess_tail: f64::NAN,
            pass: false,
            degenerate: true,
        });
    }
    let split = split_chains(chains);
    let z = rank_normalize(split.view());
    let rhat_bulk = rhat_basic(z.view());

    let mut pooled: Vec<f64> = chains.iter().copied().collect();
    let median = percentile(&mut pooled, 0.5);
    let folded = split.mapv(|v| (v - median).abs());
    let rhat_tail = rhat_basic(rank_normalize(folded.view()).view());
    // the variance ratio dips below one by sampling noise alone; report 1
    let rhat = rhat_bulk.max(rhat_tail).max(1.0);

    let total = (m * n) as f64;
    let ess_bulk = ess_basic(z.view()).min(total);
    let q05 = percentile(&mut pooled, 0.05);
    let q95 = percentile(&mut pooled, 0.95);
    let tail = |q: f64| ess_basic(split.mapv(|v| f64::from(u8::from(v <= q))).view());
    let ess_tail = tail(q05).min(tail(q95)).min(total);

    let pass = rhat < RHAT_MAX && ess_bulk > ESS_MIN && ess_tail > ESS_MIN;
    Ok(DiagnosticsReport {
        rhat,
        ess_bulk,
        ess_tail,
        pass,
        degenerate: false,
    })
}

fn split_chains(chains: ArrayView2<f64>) -> Array2<f64> {
    let (m, n) = chains.dim();
    let half = n / 2;
    let mut out = Array2::zeros((2 * m, half));
    for (c, row) in chains.rows().into_iter().enumerate() {
        for t in 0..half {
            out[[2 * c, t]] = row[t];
            out[[2 * c + 1, t]] = row[n - half + t];
        }
    }
    out
}

/// Average ranks of all values mapped through the normal quantile with the
/// `(r - 3/8) / (S + 1/4)` offset.
pub fn rank_normalize(x: ArrayView2<f64>) -> Array2<f64> {
    let flat: Vec<f64> = x.iter().copied().collect();
    let s = flat.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| flat[a].total_cmp(&flat[b]));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && flat[order[j + 1]] == flat[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie block
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let z: Vec<f64> = ranks
        .iter()
        .map(|r| normal.inverse_cdf((r - 0.375) / (s as f64 + 0.25)))
        .collect();
    Array2::from_shape_vec(x.raw_dim(), z).expect("same shape")
}

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    v.sum::<f64>() / n
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v.iter().copied());
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Classic R-hat of already split chains.
fn rhat_basic(x: ArrayView2<f64>) -> f64 {
    let n = x.ncols() as f64;
    let means: Vec<f64> = x.rows().into_iter().map(|r| mean(r.iter().copied())).collect();
    let vars: Vec<f64> = x.rows().into_iter().map(|r| var(&r.to_vec())).collect();
    let w = mean(vars.iter().copied());
    let b = if means.len() > 1 { n * var(&means) } else { 0.0 };
    let var_hat = (n - 1.0) / n * w + b / n;
    (var_hat / w).sqrt()
}

/// Effective sample size with Geyer's initial monotone sequence.
fn ess_basic(x: ArrayView2<f64>) -> f64 {
    let (m, n) = x.dim();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let means: Vec<f64> = rows.iter().map(|r| mean(r.iter().copied())).collect();
    // mean over chains of the biased autocovariance at `lag`
    let acov = |lag: usize| {
        rows.iter()
            .zip(&means)
            .map(|(r, mu)| {
                (0..n - lag).map(|t| (r[t] - mu) * (r[t + lag] - mu)).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / m as f64
    };
    let nf = n as f64;
    let mean_var = acov(0) * nf / (nf - 1.0);
    if mean_var <= 0.0 {
        return f64::NAN;
    }
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += var(&means);
    }
    let rho = |lag: usize| 1.0 - (mean_var - acov(lag)) / var_plus;

    let mut rho_t = vec![0.0; n];
    rho_t[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_t[1] = odd;
    let mut t = 1;
    while t + 3 < n && even + odd > 0.0 {
        even = rho(t + 1);
        odd = rho(t + 2);
        if even + odd >= 0.0 {
            rho_t[t + 1] = even;
            rho_t[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t.saturating_sub(2).max(1);
    if even > 0.0 && max_t + 1 < n {
        rho_t[max_t + 1] = even;
    }
    let mut t = 1;
    while t + 2 <= max_t {
        let prev = rho_t[t - 1] + rho_t[t];
        if rho_t[t + 1] + rho_t[t + 2] > prev {
            rho_t[t + 1] = prev / 2.0;
            rho_t[t + 2] = prev / 2.0;
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tail: f64 = rho_t[max_t..(max_t + 2).min(n)].iter().sum();
    let tau = (-1.0 + 2.0 * rho_t[..max_t].iter().sum::<f64>() + tail).max(1.0 / total.log10());
    total / tau
}

/// Data log-likelihood of every kept draw, `chains x draws`.
pub fn loglik_trace(chains: &[Chain], data: &Dataset, cfg: &PosteriorConfig) -> Result<Array2<f64>> {
    if chains.is_empty() {
        return Err(QuinnError::domain("no chains"));
    }
    let n = chains[0].draws.len();
    if chains.iter().any(|c| c.draws.len() != n) {
        return Err(QuinnError::shape("chains have different numbers of draws"));
    }
    let post = Posterior::new(data, cfg)?;
    let mut out = Array2::zeros((chains.len(), n));
    for (k, c) in chains.iter().enumerate() {
        for (t, d) in c.draws.iter().enumerate() {
            out[[k, t]] = post.log_likelihood(d);
        }
    }
    Ok(out)
}

/// Log-likelihood trace recovered from a fit's pointwise matrix.
pub fn fit_loglik_trace(fit: &FitResult) -> Result<Array2<f64>> {
    let n = fit.chains.first().map_or(0, |c| c.draws.len());
    if fit.chains.is_empty() || fit.chains.iter().any(|c| c.draws.len() != n) {
        return Err(QuinnError::shape("chains are empty or of unequal length"));
    }
    let totals = fit.loglik.sum_axis(ndarray::Axis(0));
    Array2::from_shape_vec((fit.chains.len(), n), totals.to_vec())
        .map_err(|e| QuinnError::shape(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(m: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, n), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn iid_chains_pass() {
        let r = scalar_diagnostics(iid(4, 1000, 1).view()).unwrap();
        assert!(r.rhat >= 1.0 - 1e-8 && r.rhat <= 1.01, "{r:?}");
        assert!(r.ess_bulk >= 2000.0, "{r:?}");
        assert!(r.ess_tail > 100.0 && r.ess_bulk <= 4000.0);
        assert!(r.pass && !r.degenerate);
    }

    #[test]
    fn shifted_chains_fail() {
        let mut x = iid(2, 1000, 2);
        x.row_mut(1).mapv_inplace(|v| v + 10.0);
        let r = scalar_diagnostics(x.view()).unwrap();
        assert!(r.rhat > 1.5);
        assert!(!r.pass);
    }

    #[test]
    fn constant_chains_are_flagged() {
        let x = Array2::from_elem((3, 50), 2.5);
        let r = scalar_diagnostics(x.view()).unwrap();
        assert!(r.degenerate && !r.pass);
        assert!(r.rhat.is_nan());
    }

    #[test]
    fn autocorrelated_chain_has_low_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Array2::zeros((4, 1000));
        for c in 0..4 {
            let mut v = 0.0;
            for t in 0..1000 {
                let e: f64 = StandardNormal.sample(&mut rng);
                v = 0.95 * v + e;
                x[[c, t]] = v;
            }
        }
        let r = scalar_diagnostics(x.view()).unwrap();
        // AR(1) with phi = 0.95 has ESS about S (1 - phi) / (1 + phi)
        let expect = 4000.0 * 0.05 / 1.95;
        assert!(r.ess_bulk > 0.5 * expect && r.ess_bulk < 2.0 * expect, "{r:?}");
    }

    #[test]
    fn rank_normalization_of_ties() {
        let x = Array2::from_shape_vec((1, 4), vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        let z = rank_normalize(x.view());
        assert_eq!(z[[0, 1]], z[[0, 2]]);
        assert!((z[[0, 0]] + z[[0, 3]]).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_input() {
        assert!(scalar_diagnostics(iid(2, 3, 0).view()).is_err());
    }
}
