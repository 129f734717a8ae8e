//! Log-likelihood, log-prior and analytic gradient of the network posterior.
//!
//! The density of an observation is `sum_m theta_m(x) M_m(z)` with softmax
//! coefficients. In log space one row contributes
//! `logsumexp(u + log M(z)) - logsumexp(u)`. Priors are standard normal on
//! the standardised weights and half-normal `N+(0, a^2)` on the scales, which
//! after the log transform gives `-exp(2s) / (2a^2) + s` per log-scale.
//! Additive constants are dropped.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{QuinnError, Result};
use crate::network::{NetworkShape, WeightState};
use crate::sampler::LogDensity;
use crate::spline::{eval_mspline, KnotVector};

/// Default half-normal prior scale, `a^2 = 900`.
pub const DEFAULT_PRIOR_SCALE: f64 = 30.0;

/// Normalised training data: covariates and response in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub z: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, z: Array1<f64>) -> Result<Self> {
        if x.nrows() != z.len() {
            return Err(QuinnError::shape(format!(
                "{} covariate rows but {} responses",
                x.nrows(),
                z.len()
            )));
        }
        if let Some(v) = z.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(QuinnError::data(format!("response value {v} outside [0, 1]")));
        }
        if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(QuinnError::data(format!("covariate value {v} outside [0, 1]")));
        }
        Ok(Dataset { x, z })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorConfig {
    pub knots: KnotVector,
    pub shape: NetworkShape,
    /// Half-normal prior scale `a` for the weight scales.
    pub prior_scale: f64,
}

impl PosteriorConfig {
    pub fn new(knots: KnotVector, shape: NetworkShape, prior_scale: f64) -> Result<Self> {
        if shape.outputs != knots.basis_count() {
            return Err(QuinnError::shape(format!(
                "network has {} outputs but the spline basis has {} functions",
                shape.outputs,
                knots.basis_count()
            )));
        }
        if !(prior_scale > 0.0 && prior_scale.is_finite()) {
            return Err(QuinnError::domain(format!(
                "prior scale must be positive, got {prior_scale}"
            )));
        }
        Ok(PosteriorConfig {
            knots,
            shape,
            prior_scale,
        })
    }
}

/// Posterior with the training M-spline matrix cached.
#[derive(Debug, Clone)]
pub struct Posterior {
    shape: NetworkShape,
    prior_scale: f64,
    /// covariates with a leading column of ones, `n x (d+1)`, row-major
    x_aug: Vec<f64>,
    /// M-spline values of the response, `n x M`, row-major
    mspline: Vec<f64>,
    n: usize,
}

/// Gradient of the log-posterior, laid out like a [`WeightState`].
pub type Gradient = WeightState;

impl Posterior {
    pub fn new(data: &Dataset, cfg: &PosteriorConfig) -> Result<Self> {
        if data.x.ncols() != cfg.shape.inputs {
            return Err(QuinnError::shape(format!(
                "data has {} covariates but the network expects {}",
                data.x.ncols(),
                cfg.shape.inputs
            )));
        }
        let basis = eval_mspline(&cfg.knots, data.z.as_slice().expect("contiguous"))?;
        let n = data.len();
        let d1 = cfg.shape.inputs + 1;
        let mut x_aug = Vec::with_capacity(n * d1);
        for row in data.x.rows() {
            x_aug.push(1.0);
            x_aug.extend(row.iter().copied());
        }
        Ok(Posterior {
            shape: cfg.shape,
            prior_scale: cfg.prior_scale,
            x_aug,
            mspline: basis.values.iter().copied().collect(),
            n,
        })
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    /// Log-likelihood contribution of every observation.
    pub fn pointwise_log_likelihood(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.evaluate(theta, None, Some(&mut out));
        out
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, None, None).0
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        log_prior_flat(self.shape, self.prior_scale, theta, None)
    }

    /// Log-posterior and its gradient; errors name the first parameter block
    /// with a non-finite derivative.
    pub fn log_posterior_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        grad.fill(0.0);
        let (ll, finite) = self.evaluate(theta, Some(grad), None);
        let lp = log_prior_flat(self.shape, self.prior_scale, theta, Some(grad));
        if !finite {
            return Err(QuinnError::NonFinite { block: "log_likelihood" });
        }
        let shape = self.shape;
        let n1 = (shape.inputs + 1) * shape.hidden;
        let n2 = (shape.hidden + 1) * shape.outputs;
        let blocks: [(&'static str, std::ops::Range<usize>); 4] = [
            ("B1", 0..n1),
            ("B2", n1..n1 + n2),
            ("sigma_tilde", n1 + n2..n1 + n2 + shape.inputs + 1),
            ("gamma_tilde", grad.len() - 1..grad.len()),
        ];
        for (name, range) in blocks {
            if grad[range].iter().any(|g| !g.is_finite()) {
                return Err(QuinnError::NonFinite { block: name });
            }
        }
        Ok(ll + lp)
    }

    /// Forward (and optionally backward) pass over the data. Returns the
    /// total log-likelihood and whether every row had positive density.
    fn evaluate(
        &self,
        theta: &[f64],
        grad: Option<&mut [f64]>,
        mut pointwise: Option<&mut [f64]>,
    ) -> (f64, bool) {
        let NetworkShape {
            inputs: d,
            hidden: nh,
            outputs: m,
        } = self.shape;
        let d1 = d + 1;
        let n1 = d1 * nh;
        let n2 = (nh + 1) * m;
        let b1 = &theta[..n1];
        let b2 = &theta[n1..n1 + n2];
        let sig = &theta[n1 + n2..n1 + n2 + d1];
        let g = theta[n1 + n2 + d1].exp();

        // effective input-hidden weights
        let mut w1 = vec![0.0; n1];
        for j in 0..d1 {
            let s = sig[j].exp();
            for v in 0..nh {
                w1[j * nh + v] = s * b1[j * nh + v];
            }
        }

        let mut total = 0.0;
        let mut finite = true;
        let mut act = vec![0.0; nh];
        let mut u = vec![0.0; m];
        let mut e = vec![0.0; m];
        let mut resid = vec![0.0; m];
        let mut dact = vec![0.0; nh];

        // accumulators for the backward pass
        let want_grad = grad.is_some();
        let mut g_b1 = if want_grad { vec![0.0; n1] } else { Vec::new() };
        let mut g_b2 = if want_grad { vec![0.0; n2] } else { Vec::new() };
        let mut g_gamma = 0.0;

        for i in 0..self.n {
            let xa = &self.x_aug[i * d1..(i + 1) * d1];
            let mz = &self.mspline[i * m..(i + 1) * m];
            for v in 0..nh {
                let mut h = 0.0;
                for j in 0..d1 {
                    h += xa[j] * w1[j * nh + v];
                }
                act[v] = h.tanh();
            }
            for k in 0..m {
                let mut acc = b2[k];
                for v in 0..nh {
                    acc += act[v] * b2[(v + 1) * m + k];
                }
                u[k] = g * acc;
            }
            let mx = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            let mut t = 0.0;
            for k in 0..m {
                e[k] = (u[k] - mx).exp();
                s += e[k];
                t += e[k] * mz[k];
            }
            let li = if t > 0.0 { t.ln() - s.ln() } else { f64::NEG_INFINITY };
            if !li.is_finite() {
                finite = false;
            }
            total += li;
            if let Some(pw) = pointwise.as_deref_mut() {
                pw[i] = li;
            }
            if !want_grad || t <= 0.0 {
                continue;
            }
            // d ll_i / d u_k = e_k M_k / t - e_k / s
            for k in 0..m {
                resid[k] = e[k] * mz[k] / t - e[k] / s;
                g_gamma += resid[k] * u[k];
                g_b2[k] += g * resid[k];
            }
            for v in 0..nh {
                let a = act[v];
                let row = &mut g_b2[(v + 1) * m..(v + 2) * m];
                let mut back = 0.0;
                for k in 0..m {
                    row[k] += g * a * resid[k];
                    back += resid[k] * b2[(v + 1) * m + k];
                }
                dact[v] = g * back * (1.0 - a * a);
            }
            for j in 0..d1 {
                let xj = xa[j];
                if xj == 0.0 {
                    continue;
                }
                for v in 0..nh {
                    g_b1[j * nh + v] += xj * dact[v];
                }
            }
        }

        if let Some(grad) = grad {
            for j in 0..d1 {
                let s = sig[j].exp();
                let mut dsig = 0.0;
                for v in 0..nh {
                    let gb = s * g_b1[j * nh + v];
                    grad[j * nh + v] += gb;
                    dsig += b1[j * nh + v] * gb;
                }
                grad[n1 + n2 + j] += dsig;
            }
            for (dst, src) in grad[n1..n1 + n2].iter_mut().zip(&g_b2) {
                *dst += src;
            }
            grad[n1 + n2 + d1] += g_gamma;
        }
        (total, finite)
    }
}

fn log_prior_flat(shape: NetworkShape, a: f64, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let d1 = shape.inputs + 1;
    let nb = d1 * shape.hidden + (shape.hidden + 1) * shape.outputs;
    let inv_a2 = 1.0 / (a * a);
    let mut lp = 0.0;
    for &b in &theta[..nb] {
        lp -= 0.5 * b * b;
    }
    for &s in &theta[nb..nb + d1 + 1] {
        lp += -0.5 * (2.0 * s).exp() * inv_a2 + s;
    }
    if let Some(grad) = grad {
        for (g, &b) in grad[..nb].iter_mut().zip(&theta[..nb]) {
            *g -= b;
        }
        for (g, &s) in grad[nb..nb + d1 + 1].iter_mut().zip(&theta[nb..nb + d1 + 1]) {
            *g += -(2.0 * s).exp() * inv_a2 + 1.0;
        }
    }
    lp
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        self.shape.param_count()
    }

    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.log_posterior_grad(position, grad)
    }
}

fn check_state(state: &WeightState, cfg: &PosteriorConfig) -> Result<()> {
    if state.shape() != cfg.shape || state.sigma_tilde.len() != cfg.shape.inputs + 1 {
        return Err(QuinnError::shape(format!(
            "weight state shape {:?} does not match configuration {:?}",
            state.shape(),
            cfg.shape
        )));
    }
    Ok(())
}

/// Data log-likelihood `sum_i log sum_m theta_m(x_i) M_m(z_i)`.
pub fn log_likelihood(data: &Dataset, state: &WeightState, cfg: &PosteriorConfig) -> Result<f64> {
    check_state(state, cfg)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    Ok(Posterior::new(data, cfg)?.log_likelihood(&state.to_flat()))
}

/// Log-prior after the non-centred reparameterisation and log transform of
/// the scales, constants dropped.
pub fn log_prior(state: &WeightState, cfg: &PosteriorConfig) -> Result<f64> {
    check_state(state, cfg)?;
    Ok(log_prior_flat(cfg.shape, cfg.prior_scale, &state.to_flat(), None))
}

pub fn log_posterior(data: &Dataset, state: &WeightState, cfg: &PosteriorConfig) -> Result<f64> {
    Ok(log_likelihood(data, state, cfg)? + log_prior(state, cfg)?)
}

/// Analytic gradient of [`log_posterior`].
pub fn grad_log_posterior(
    data: &Dataset,
    state: &WeightState,
    cfg: &PosteriorConfig,
) -> Result<Gradient> {
    check_state(state, cfg)?;
    let post = Posterior::new(data, cfg)?;
    let mut grad = vec![0.0; cfg.shape.param_count()];
    post.log_posterior_grad(&state.to_flat(), &mut grad)?;
    WeightState::from_flat(cfg.shape, &grad)
}

/// `n x T` matrix of per-observation log-likelihoods for a set of draws.
pub fn pointwise_log_likelihood_matrix(post: &Posterior, draws: &[Vec<f64>]) -> Array2<f64> {
    let mut out = Array2::zeros((post.n_obs(), draws.len()));
    for (t, draw) in draws.iter().enumerate() {
        let col = post.pointwise_log_likelihood(draw);
        out.column_mut(t).assign(&ArrayView1::from(&col));
    }
    out
}

/// Convenience for building a [`Dataset`] from views.
pub fn dataset_from_views(x: ArrayView2<f64>, z: ArrayView1<f64>) -> Result<Dataset> {
    Dataset::new(x.to_owned(), z.to_owned())
}
