//! No-U-Turn sampler with dual-averaging step-size adaptation.
//!
//! This is the slice-sampling variant with recursive tree doubling
//! (Hoffman & Gelman, 2014, Algorithm 6) under an identity mass matrix.
//! Trajectories whose joint log-density falls more than [`MAX_ENERGY_ERROR`]
//! below the slice variable are marked divergent and stop growing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuinnError, Result};
use crate::network::init_state;
use crate::posterior::{Dataset, Posterior, PosteriorConfig};

/// Energy error (in nats) beyond which a trajectory is declared divergent.
pub const MAX_ENERGY_ERROR: f64 = 1000.0;

// dual averaging constants
const DA_GAMMA: f64 = 0.05;
const DA_T0: f64 = 10.0;
const DA_KAPPA: f64 = 0.75;

/// Differentiable log-density over an unconstrained vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Write the gradient into `grad` and return the log-density.
    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutsConfig {
    /// Total iterations, warmup included.
    pub n_iter: usize,
    pub n_warmup: usize,
    pub thin: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
}

impl Default for NutsConfig {
    fn default() -> Self {
        NutsConfig {
            n_iter: 4000,
            n_warmup: 1000,
            thin: 5,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed: 0,
        }
    }
}

impl NutsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_warmup >= self.n_iter {
            return Err(QuinnError::domain(format!(
                "warmup ({}) must be smaller than the number of iterations ({})",
                self.n_warmup, self.n_iter
            )));
        }
        if self.thin < 1 {
            return Err(QuinnError::domain("thin must be >= 1"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(QuinnError::domain(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if !(1..=15).contains(&self.max_tree_depth) {
            return Err(QuinnError::domain(format!(
                "max tree depth must lie in [1, 15], got {}",
                self.max_tree_depth
            )));
        }
        Ok(())
    }

    /// Number of draws kept after warmup and thinning.
    pub fn kept_draws(&self) -> usize {
        (self.n_iter - self.n_warmup) / self.thin
    }
}

/// Position, momentum, gradient and log-density at one point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    /// Log-density at `q`; `-inf` when the evaluation failed.
    pub logp: f64,
}

impl PhasePoint {
    /// Evaluate the target at `q` with zero momentum.
    pub fn new<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let logp = eval(target, &q, &mut grad);
        let p = vec![0.0; q.len()];
        PhasePoint { q, p, grad, logp }
    }

    /// Joint log-density `logp - |p|^2 / 2`, i.e. the negative Hamiltonian.
    pub fn joint(&self) -> f64 {
        self.logp - 0.5 * dot(&self.p, &self.p)
    }

    pub fn is_valid(&self) -> bool {
        self.logp.is_finite()
    }
}

fn eval<T: LogDensity + ?Sized>(target: &T, q: &[f64], grad: &mut [f64]) -> f64 {
    match target.logp_grad(q, grad) {
        Ok(lp) if lp.is_finite() && grad.iter().all(|g| g.is_finite()) => lp,
        _ => {
            grad.fill(0.0);
            f64::NEG_INFINITY
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One leapfrog step of size `eps` (negative to integrate backwards). A
/// failed density evaluation yields a point with `logp = -inf`.
pub fn leapfrog<T: LogDensity + ?Sized>(target: &T, point: &PhasePoint, eps: f64) -> PhasePoint {
    let mut p: Vec<f64> = point
        .p
        .iter()
        .zip(&point.grad)
        .map(|(pi, gi)| pi + 0.5 * eps * gi)
        .collect();
    let q: Vec<f64> = point.q.iter().zip(&p).map(|(qi, pi)| qi + eps * pi).collect();
    let mut grad = vec![0.0; q.len()];
    let logp = eval(target, &q, &mut grad);
    for (pi, gi) in p.iter_mut().zip(&grad) {
        *pi += 0.5 * eps * gi;
    }
    PhasePoint { q, p, grad, logp }
}

/// Diagnostics of one NUTS transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Mean Metropolis acceptance probability over the final tree.
    pub accept_stat: f64,
    pub divergent: bool,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
}

struct Tree {
    minus: PhasePoint,
    plus: PhasePoint,
    proposal: PhasePoint,
    n_valid: usize,
    keep_going: bool,
    divergent: bool,
    alpha: f64,
    n_alpha: usize,
}

fn no_uturn(minus: &PhasePoint, plus: &PhasePoint) -> bool {
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..minus.q.len() {
        let dq = plus.q[i] - minus.q[i];
        a += dq * minus.p[i];
        b += dq * plus.p[i];
    }
    a >= 0.0 && b >= 0.0
}

#[allow(clippy::too_many_arguments)]
fn build_tree<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    start: &PhasePoint,
    log_u: f64,
    direction: f64,
    depth: usize,
    eps: f64,
    joint0: f64,
    rng: &mut R,
) -> Tree {
    if depth == 0 {
        let next = leapfrog(target, start, direction * eps);
        let joint = if next.is_valid() { next.joint() } else { f64::NEG_INFINITY };
        let joint = if joint.is_nan() { f64::NEG_INFINITY } else { joint };
        let keep_going = log_u < MAX_ENERGY_ERROR + joint;
        let alpha = if joint.is_finite() {
            (joint - joint0).exp().min(1.0)
        } else {
            0.0
        };
        return Tree {
            minus: next.clone(),
            plus: next.clone(),
            proposal: next,
            n_valid: usize::from(log_u <= joint),
            keep_going,
            divergent: !keep_going,
            alpha,
            n_alpha: 1,
        };
    }
    let mut tree = build_tree(target, start, log_u, direction, depth - 1, eps, joint0, rng);
    if !tree.keep_going {
        return tree;
    }
    let edge = if direction < 0.0 { &tree.minus } else { &tree.plus };
    let outer = build_tree(target, edge, log_u, direction, depth - 1, eps, joint0, rng);
    let total = tree.n_valid + outer.n_valid;
    if total > 0 && rng.random::<f64>() < outer.n_valid as f64 / total as f64 {
        tree.proposal = outer.proposal;
    }
    if direction < 0.0 {
        tree.minus = outer.minus;
    } else {
        tree.plus = outer.plus;
    }
    tree.alpha += outer.alpha;
    tree.n_alpha += outer.n_alpha;
    tree.n_valid = total;
    tree.divergent |= outer.divergent;
    tree.keep_going = outer.keep_going && no_uturn(&tree.minus, &tree.plus);
    tree
}

/// One NUTS transition from `current` with step size `eps`. The momentum of
/// `current` is resampled; the returned point carries the final momentum of
/// the selected state, which callers should ignore.
pub fn nuts_step<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    current: &PhasePoint,
    eps: f64,
    max_tree_depth: usize,
    rng: &mut R,
) -> (PhasePoint, StepStats) {
    let mut start = current.clone();
    for p in start.p.iter_mut() {
        *p = StandardNormal.sample(rng);
    }
    let joint0 = start.joint();
    // u ~ Uniform(0, exp(joint0)); 1 - U avoids ln(0)
    let log_u = joint0 + (1.0 - rng.random::<f64>()).ln();

    let mut minus = start.clone();
    let mut plus = start.clone();
    let mut proposal = start;
    let mut n_valid = 1usize;
    let mut depth = 0;
    let mut alpha = 0.0;
    let mut n_alpha = 0usize;
    let mut divergent = false;

    loop {
        let direction = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let edge = if direction < 0.0 { &minus } else { &plus };
        let tree = build_tree(target, edge, log_u, direction, depth, eps, joint0, rng);
        alpha += tree.alpha;
        n_alpha += tree.n_alpha;
        divergent |= tree.divergent;
        if direction < 0.0 {
            minus = tree.minus;
        } else {
            plus = tree.plus;
        }
        if tree.keep_going && rng.random::<f64>() < tree.n_valid as f64 / n_valid as f64 {
            proposal = tree.proposal;
        }
        n_valid += tree.n_valid;
        depth += 1;
        if !tree.keep_going || !no_uturn(&minus, &plus) || depth >= max_tree_depth {
            break;
        }
    }
    let stats = StepStats {
        accept_stat: if n_alpha > 0 { alpha / n_alpha as f64 } else { 0.0 },
        divergent,
        tree_depth: depth,
        n_leapfrog: n_alpha,
    };
    (proposal, stats)
}

/// Heuristic initial step size: double or halve until the one-step
/// acceptance ratio crosses 1/2.
pub fn find_reasonable_step_size<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    current: &PhasePoint,
    rng: &mut R,
) -> f64 {
    let mut start = current.clone();
    for p in start.p.iter_mut() {
        *p = StandardNormal.sample(rng);
    }
    let joint0 = start.joint();
    let log_ratio = |eps: f64| {
        let next = leapfrog(target, &start, eps);
        let j = next.joint();
        if j.is_finite() {
            j - joint0
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut eps = 1.0;
    let mut lr = log_ratio(eps);
    let a: f64 = if lr > 0.5f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        if a * lr <= -a * 2f64.ln() {
            break;
        }
        eps *= 2f64.powf(a);
        lr = log_ratio(eps);
    }
    eps
}

/// Dual-averaging state for step-size adaptation.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps_bar: f64,
    count: f64,
}

impl DualAveraging {
    pub fn new(initial_eps: f64, target_accept: f64) -> Self {
        DualAveraging {
            mu: (10.0 * initial_eps).ln(),
            target: target_accept,
            h_bar: 0.0,
            log_eps_bar: 0.0,
            count: 0.0,
        }
    }

    /// Feed one acceptance statistic and return the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.count += 1.0;
        let m = self.count;
        let w = 1.0 / (m + DA_T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat);
        let log_eps = self.mu - m.sqrt() / DA_GAMMA * self.h_bar;
        let decay = m.powf(-DA_KAPPA);
        self.log_eps_bar = decay * log_eps + (1.0 - decay) * self.log_eps_bar;
        log_eps.exp()
    }

    /// Step size to freeze after warmup.
    pub fn final_step_size(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Output of one sampler run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Kept draws, flattened.
    pub draws: Vec<Vec<f64>>,
    /// Log-posterior of each kept draw.
    pub log_posterior_trace: Vec<f64>,
    /// Mean acceptance statistic over the sampling iterations.
    pub accept_stat: f64,
    /// Step size frozen after warmup.
    pub step_size: f64,
    /// Divergent transitions after warmup.
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub seed: u64,
}

/// Run one chain from `init` on an arbitrary target.
pub fn sample_chain<T: LogDensity + ?Sized>(
    target: &T,
    init: Vec<f64>,
    cfg: &NutsConfig,
) -> Result<Chain> {
    cfg.validate()?;
    if init.len() != target.dim() {
        return Err(QuinnError::shape(format!(
            "initial point has {} entries, target dimension is {}",
            init.len(),
            target.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut current = PhasePoint::new(target, init);
    if !current.is_valid() {
        return Err(QuinnError::Sampler(
            "log-density is not finite at the initial point".to_string(),
        ));
    }
    let mut eps = find_reasonable_step_size(target, &current, &mut rng);
    let mut adapt = DualAveraging::new(eps, cfg.target_accept);

    let mut draws = Vec::with_capacity(cfg.kept_draws());
    let mut trace = Vec::with_capacity(cfg.kept_draws());
    let mut divergences = 0;
    let mut warmup_divergences = 0;
    let mut accept_sum = 0.0;

    for iter in 0..cfg.n_iter {
        let (next, stats) = nuts_step(target, &current, eps, cfg.max_tree_depth, &mut rng);
        current = next;
        if iter < cfg.n_warmup {
            warmup_divergences += usize::from(stats.divergent);
            eps = adapt.update(stats.accept_stat);
            if iter + 1 == cfg.n_warmup {
                if warmup_divergences == cfg.n_warmup {
                    return Err(QuinnError::Sampler(format!(
                        "every warmup iteration diverged (last step size {eps:.3e}); \
                         the target is likely non-finite or badly scaled"
                    )));
                }
                eps = adapt.final_step_size();
            }
            continue;
        }
        divergences += usize::from(stats.divergent);
        accept_sum += stats.accept_stat;
        if (iter - cfg.n_warmup + 1).is_multiple_of(cfg.thin) {
            draws.push(current.q.clone());
            trace.push(current.logp);
        }
    }
    Ok(Chain {
        draws,
        log_posterior_trace: trace,
        accept_stat: accept_sum / (cfg.n_iter - cfg.n_warmup) as f64,
        step_size: eps,
        divergences,
        warmup_divergences,
        seed: cfg.seed,
    })
}

/// Run one chain per initial point in parallel; chain `k` uses seed
/// `cfg.seed + k`.
pub fn sample_chains_parallel<T: LogDensity + ?Sized>(
    target: &T,
    inits: Vec<Vec<f64>>,
    cfg: &NutsConfig,
) -> Result<Vec<Chain>> {
    inits
        .into_par_iter()
        .enumerate()
        .map(|(k, init)| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(k as u64);
            sample_chain(target, init, &c).map_err(|e| QuinnError::Chain {
                index: k,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Sample the network posterior from the seeded default initialisation.
pub fn run_chain(data: &Dataset, cfg: &PosteriorConfig, nuts: &NutsConfig) -> Result<Chain> {
    let post = Posterior::new(data, cfg)?;
    let init = init_state(cfg.shape, nuts.seed).to_flat();
    sample_chain(&post, init, nuts)
}

/// `k` independent chains with seeds `nuts.seed, nuts.seed + 1, ...`.
pub fn run_chains_parallel(
    k: usize,
    data: &Dataset,
    cfg: &PosteriorConfig,
    nuts: &NutsConfig,
) -> Result<Vec<Chain>> {
    if k < 1 {
        return Err(QuinnError::domain("need at least one chain"));
    }
    let post = Posterior::new(data, cfg)?;
    let inits = (0..k)
        .map(|c| init_state(cfg.shape, nuts.seed.wrapping_add(c as u64)).to_flat())
        .collect();
    sample_chains_parallel(&post, inits, nuts)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent normal target with per-coordinate scales.
    pub(crate) struct Gaussian {
        pub scales: Vec<f64>,
    }

    impl LogDensity for Gaussian {
        fn dim(&self) -> usize {
            self.scales.len()
        }
        fn logp_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
            let mut lp = 0.0;
            for i in 0..q.len() {
                let s2 = self.scales[i] * self.scales[i];
                lp -= 0.5 * q[i] * q[i] / s2;
                grad[i] = -q[i] / s2;
            }
            Ok(lp)
        }
    }

    fn std_normal(dim: usize) -> Gaussian {
        Gaussian {
            scales: vec![1.0; dim],
        }
    }

    #[test]
    fn leapfrog_is_reversible() {
        let target = Gaussian {
            scales: vec![1.0, 2.0, 0.5],
        };
        let mut start = PhasePoint::new(&target, vec![0.3, -1.2, 0.8]);
        start.p = vec![0.5, 0.1, -0.7];
        let fwd = leapfrog(&target, &start, 0.1);
        let mut back = fwd.clone();
        back.p.iter_mut().for_each(|p| *p = -*p);
        let mut ret = leapfrog(&target, &back, 0.1);
        ret.p.iter_mut().for_each(|p| *p = -*p);
        for i in 0..3 {
            assert!((ret.q[i] - start.q[i]).abs() < 1e-10);
            assert!((ret.p[i] - start.p[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn leapfrog_zero_step_is_identity() {
        let target = std_normal(2);
        let mut start = PhasePoint::new(&target, vec![0.3, -1.2]);
        start.p = vec![1.0, 2.0];
        let same = leapfrog(&target, &start, 0.0);
        assert_eq!(same.q, start.q);
        assert_eq!(same.p, start.p);
    }

    #[test]
    fn leapfrog_energy_error_small() {
        let target = std_normal(2);
        let mut pt = PhasePoint::new(&target, vec![1.0, -0.5]);
        pt.p = vec![0.2, 0.9];
        let h0 = pt.joint();
        for _ in 0..100 {
            pt = leapfrog(&target, &pt, 0.01);
        }
        assert!((pt.joint() - h0).abs() <= 1e-3);
    }

    #[test]
    fn leapfrog_preserves_volume() {
        // linear-gradient target with correlated precision
        struct Quad;
        impl LogDensity for Quad {
            fn dim(&self) -> usize {
                3
            }
            fn logp_grad(&self, q: &[f64], g: &mut [f64]) -> Result<f64> {
                let a = [[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 0.5]];
                let mut lp = 0.0;
                for i in 0..3 {
                    g[i] = -(0..3).map(|j| a[i][j] * q[j]).sum::<f64>();
                    lp += 0.5 * q[i] * g[i];
                }
                Ok(lp)
            }
        }
        let base_q = [0.1, 0.2, -0.3];
        let base_p = [0.4, -0.1, 0.2];
        let step = |z: &[f64; 6]| {
            let mut pt = PhasePoint::new(&Quad, z[..3].to_vec());
            pt.p = z[3..].to_vec();
            let o = leapfrog(&Quad, &pt, 0.3);
            [o.q[0], o.q[1], o.q[2], o.p[0], o.p[1], o.p[2]]
        };
        let z0 = [base_q[0], base_q[1], base_q[2], base_p[0], base_p[1], base_p[2]];
        let h = 1e-5;
        let mut jac = [[0.0; 6]; 6];
        for c in 0..6 {
            let mut zp = z0;
            let mut zm = z0;
            zp[c] += h;
            zm[c] -= h;
            let (fp, fm) = (step(&zp), step(&zm));
            for r in 0..6 {
                jac[r][c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let det = determinant(jac);
        assert!((det - 1.0).abs() < 1e-6, "det = {det}");
    }

    fn determinant<const N: usize>(mut a: [[f64; N]; N]) -> f64 {
        let mut det = 1.0;
        for c in 0..N {
            let piv = (c..N)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            if piv != c {
                a.swap(piv, c);
                det = -det;
            }
            det *= a[c][c];
            for r in c + 1..N {
                let f = a[r][c] / a[c][c];
                for k in c..N {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        det
    }

    #[test]
    fn huge_step_diverges_and_stays_put() {
        let target = std_normal(2);
        let current = PhasePoint::new(&target, vec![0.5, -0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (next, stats) = nuts_step(&target, &current, 1e3, 10, &mut rng);
        assert!(stats.divergent);
        assert_eq!(next.q, current.q);
    }

    #[test]
    fn two_d_normal_moments() {
        let target = std_normal(2);
        let cfg = NutsConfig {
            n_iter: 3000,
            n_warmup: 1000,
            thin: 1,
            seed: 42,
            ..Default::default()
        };
        let chain = sample_chain(&target, vec![1.0, -1.0], &cfg).unwrap();
        assert_eq!(chain.draws.len(), 2000);
        let n = chain.draws.len() as f64;
        let mean: Vec<f64> = (0..2)
            .map(|i| chain.draws.iter().map(|d| d[i]).sum::<f64>() / n)
            .collect();
        for i in 0..2 {
            assert!(mean[i].abs() < 0.1, "mean {mean:?}");
            for j in 0..2 {
                let c = chain
                    .draws
                    .iter()
                    .map(|d| (d[i] - mean[i]) * (d[j] - mean[j]))
                    .sum::<f64>()
                    / (n - 1.0);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((c - expect).abs() < 0.15, "cov[{i},{j}] = {c}");
            }
        }
        // empirical quantiles against the analytic normal ones
        for (level, q) in [(0.1, -1.2815515655446004), (0.5, 0.0), (0.9, 1.2815515655446004)] {
            let mut xs: Vec<f64> = chain.draws.iter().map(|d| d[0]).collect();
            xs.sort_by(f64::total_cmp);
            let emp = xs[(level * n) as usize];
            assert!((emp - q).abs() < 0.1, "level {level}: {emp}");
        }
        assert!(chain.log_posterior_trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn deterministic_given_seed() {
        let target = std_normal(3);
        let cfg = NutsConfig {
            n_iter: 300,
            n_warmup: 100,
            thin: 2,
            seed: 9,
            ..Default::default()
        };
        let a = sample_chain(&target, vec![0.0; 3], &cfg).unwrap();
        let b = sample_chain(&target, vec![0.0; 3], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 100);
    }

    #[test]
    fn thinning_to_single_draw() {
        let target = std_normal(2);
        let cfg = NutsConfig {
            n_iter: 150,
            n_warmup: 50,
            thin: 100,
            seed: 3,
            ..Default::default()
        };
        let chain = sample_chain(&target, vec![0.0; 2], &cfg).unwrap();
        assert_eq!(chain.draws.len(), 1);
    }

    #[test]
    fn higher_target_accept_gives_smaller_steps() {
        let target = Gaussian {
            scales: vec![1.0, 0.3, 2.0, 0.7],
        };
        let run = |delta: f64| {
            let cfg = NutsConfig {
                n_iter: 1200,
                n_warmup: 1000,
                thin: 1,
                target_accept: delta,
                seed: 17,
                ..Default::default()
            };
            sample_chain(&target, vec![0.1; 4], &cfg).unwrap().step_size
        };
        assert!(run(0.95) < run(0.6));
    }

    #[test]
    fn config_validation() {
        let bad = [
            NutsConfig { n_warmup: 10, n_iter: 10, ..Default::default() },
            NutsConfig { thin: 0, ..Default::default() },
            NutsConfig { target_accept: 1.0, ..Default::default() },
            NutsConfig { max_tree_depth: 0, ..Default::default() },
            NutsConfig { max_tree_depth: 16, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        assert!(NutsConfig::default().validate().is_ok());
    }

    #[test]
    fn non_finite_start_is_rejected() {
        struct Broken;
        impl LogDensity for Broken {
            fn dim(&self) -> usize {
                1
            }
            fn logp_grad(&self, _: &[f64], _: &mut [f64]) -> Result<f64> {
                Ok(f64::NEG_INFINITY)
            }
        }
        let cfg = NutsConfig { n_iter: 20, n_warmup: 10, ..Default::default() };
        assert!(matches!(sample_chain(&Broken, vec![0.0], &cfg), Err(QuinnError::Sampler(_))));
    }

    #[test]
    fn parallel_single_chain_matches_serial() {
        let target = std_normal(2);
        let cfg = NutsConfig { n_iter: 200, n_warmup: 100, thin: 1, seed: 5, ..Default::default() };
        let serial = sample_chain(&target, vec![0.2, 0.1], &cfg).unwrap();
        let par = sample_chains_parallel(&target, vec![vec![0.2, 0.1]], &cfg).unwrap();
        assert_eq!(par, vec![serial]);
        let two = sample_chains_parallel(&target, vec![vec![0.2, 0.1]; 2], &cfg).unwrap();
        assert_ne!(two[0].draws[0], two[1].draws[0]);
    }
}
