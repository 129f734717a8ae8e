//! Single-hidden-layer network mapping covariates to spline coefficients.
//!
//! Weights use the non-centred parameterisation: standardised matrices `b1`,
//! `b2` plus log-scales. The effective input-hidden weight in row `j` is
//! `exp(sigma_tilde[j]) * b1[j, v]`; every hidden-output weight is scaled by
//! `exp(gamma_tilde)`. Row 0 of each matrix holds the bias weights.

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{QuinnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    /// Covariate dimension.
    pub inputs: usize,
    /// Hidden width.
    pub hidden: usize,
    /// Output dimension, equal to the spline basis count.
    pub outputs: usize,
}

impl NetworkShape {
    pub fn new(inputs: usize, hidden: usize, outputs: usize) -> Result<Self> {
        if inputs < 1 || hidden < 1 || outputs < 2 {
            return Err(QuinnError::domain(format!(
                "invalid network shape d={inputs}, V={hidden}, M={outputs} \
                 (need d >= 1, V >= 1, M >= 2)"
            )));
        }
        Ok(NetworkShape {
            inputs,
            hidden,
            outputs,
        })
    }

    /// Length of the flattened parameter vector.
    pub fn param_count(&self) -> usize {
        (self.inputs + 1) * self.hidden + (self.hidden + 1) * self.outputs + self.inputs + 2
    }

    /// Names of the flattened parameters, in storage order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.param_count());
        for j in 0..=self.inputs {
            for v in 0..self.hidden {
                names.push(format!("B1_{j}_{v}"));
            }
        }
        for v in 0..=self.hidden {
            for m in 0..self.outputs {
                names.push(format!("B2_{v}_{m}"));
            }
        }
        for j in 0..=self.inputs {
            names.push(format!("sigma_tilde_{j}"));
        }
        names.push("gamma_tilde".to_string());
        names
    }
}

/// Full unconstrained parameter state of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    /// `(d+1) x V` standardised input-hidden weights, bias row first.
    pub b1: Array2<f64>,
    /// `(V+1) x M` standardised hidden-output weights, bias row first.
    pub b2: Array2<f64>,
    /// Log-scales of the input-hidden weights, one per input row.
    pub sigma_tilde: Array1<f64>,
    /// Log-scale shared by the hidden-output weights.
    pub gamma_tilde: f64,
}

impl WeightState {
    pub fn zeros(shape: NetworkShape) -> Self {
        WeightState {
            b1: Array2::zeros((shape.inputs + 1, shape.hidden)),
            b2: Array2::zeros((shape.hidden + 1, shape.outputs)),
            sigma_tilde: Array1::zeros(shape.inputs + 1),
            gamma_tilde: 0.0,
        }
    }

    pub fn shape(&self) -> NetworkShape {
        NetworkShape {
            inputs: self.b1.nrows() - 1,
            hidden: self.b1.ncols(),
            outputs: self.b2.ncols(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.b1.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
            && self.sigma_tilde.iter().all(|v| v.is_finite())
            && self.gamma_tilde.is_finite()
    }

    /// Flatten in the order `b1` (row-major), `b2` (row-major),
    /// `sigma_tilde`, `gamma_tilde`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shape().param_count());
        out.extend(self.b1.iter().copied());
        out.extend(self.b2.iter().copied());
        out.extend(self.sigma_tilde.iter().copied());
        out.push(self.gamma_tilde);
        out
    }

    pub fn from_flat(shape: NetworkShape, flat: &[f64]) -> Result<Self> {
        if flat.len() != shape.param_count() {
            return Err(QuinnError::shape(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                flat.len()
            )));
        }
        let n1 = (shape.inputs + 1) * shape.hidden;
        let n2 = (shape.hidden + 1) * shape.outputs;
        let b1 = Array2::from_shape_vec((shape.inputs + 1, shape.hidden), flat[..n1].to_vec())
            .expect("length checked");
        let b2 = Array2::from_shape_vec((shape.hidden + 1, shape.outputs), flat[n1..n1 + n2].to_vec())
            .expect("length checked");
        let sigma_tilde = Array1::from(flat[n1 + n2..n1 + n2 + shape.inputs + 1].to_vec());
        Ok(WeightState {
            b1,
            b2,
            sigma_tilde,
            gamma_tilde: flat[flat.len() - 1],
        })
    }

    /// Effective input-hidden weights `exp(sigma_tilde[j]) * b1[j, v]`.
    pub fn effective_w1(&self) -> Array2<f64> {
        let mut w = self.b1.clone();
        for (mut row, &s) in w.rows_mut().into_iter().zip(self.sigma_tilde.iter()) {
            row *= s.exp();
        }
        w
    }

    /// Effective hidden-output weights `exp(gamma_tilde) * b2`.
    pub fn effective_w2(&self) -> Array2<f64> {
        &self.b2 * self.gamma_tilde.exp()
    }
}

/// Draw a starting state: standard normal `b1`, `b2` and unit scales.
pub fn init_state(shape: NetworkShape, seed: u64) -> WeightState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = WeightState::zeros(shape);
    for v in state.b1.iter_mut().chain(state.b2.iter_mut()) {
        *v = StandardNormal.sample(&mut rng);
    }
    state
}

/// Precomputed effective weights for repeated forward passes.
#[derive(Debug, Clone)]
pub struct Network {
    w1: Array2<f64>,
    w2: Array2<f64>,
}

impl Network {
    pub fn new(state: &WeightState) -> Self {
        Network {
            w1: state.effective_w1(),
            w2: state.effective_w2(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w1.nrows() - 1
    }

    pub fn outputs(&self) -> usize {
        self.w2.ncols()
    }

    /// Scores `u_m(x)` for one covariate vector, written into `out`.
    pub fn scores_into(&self, x: &[f64], hidden: &mut Vec<f64>, out: &mut [f64]) {
        let nh = self.w1.ncols();
        hidden.clear();
        hidden.extend(self.w1.row(0).iter().copied());
        for (j, &xj) in x.iter().enumerate() {
            for (h, &w) in hidden.iter_mut().zip(self.w1.row(j + 1).iter()) {
                *h += xj * w;
            }
        }
        for h in hidden.iter_mut() {
            *h = h.tanh();
        }
        out.copy_from_slice(self.w2.row(0).as_slice().expect("standard layout"));
        for v in 0..nh {
            let a = hidden[v];
            for (o, &w) in out.iter_mut().zip(self.w2.row(v + 1).iter()) {
                *o += a * w;
            }
        }
    }

    /// Simplex coefficients `theta_m(x)` for one covariate vector.
    pub fn theta_into(&self, x: &[f64], hidden: &mut Vec<f64>, out: &mut [f64]) {
        self.scores_into(x, hidden, out);
        softmax_in_place(out);
    }
}

/// Unconstrained scores `U[i, m] = u_m(x_i)` with a `tanh` hidden layer.
pub fn forward_scores(x: ArrayView2<f64>, state: &WeightState) -> Result<Array2<f64>> {
    let shape = state.shape();
    if x.ncols() != shape.inputs {
        return Err(QuinnError::shape(format!(
            "covariate matrix has {} columns, network expects {}",
            x.ncols(),
            shape.inputs
        )));
    }
    if state.sigma_tilde.len() != shape.inputs + 1 || state.b2.nrows() != shape.hidden + 1 {
        return Err(QuinnError::shape("inconsistent weight state".to_string()));
    }
    let w1 = state.effective_w1();
    let w2 = state.effective_w2();
    // hidden pre-activations: bias row + X * W1[1..]
    let mut h = x.dot(&w1.slice(ndarray::s![1.., ..]));
    h += &w1.row(0);
    h.mapv_inplace(f64::tanh);
    let mut u = h.dot(&w2.slice(ndarray::s![1.., ..]));
    u += &w2.row(0);
    Ok(u)
}

fn softmax_in_place(row: &mut [f64]) {
    let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - mx).exp();
        s += *v;
    }
    for v in row.iter_mut() {
        *v /= s;
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(u: ArrayView2<f64>) -> Result<Array2<f64>> {
    if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
        return Err(QuinnError::domain(format!(
            "softmax input contains non-finite value {bad}"
        )));
    }
    let mut out = u.to_owned();
    for mut row in out.rows_mut() {
        softmax_in_place(row.as_slice_mut().expect("owned rows are contiguous"));
    }
    Ok(out)
}
