use ndarray::{Array1, Array2};
use quinn_core::network::NetworkShape;
use quinn_core::posterior::{Dataset, Posterior, PosteriorConfig, DEFAULT_PRIOR_SCALE};
use quinn_core::spline::KnotVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn tiny_problem(seed: u64) -> Posterior {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 20;
    let x = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
    let z = Array1::from_shape_fn(n, |_| 0.02 + 0.96 * rng.random::<f64>());
    let data = Dataset::new(x, z).unwrap();
    let knots = KnotVector::new(2, 5).unwrap();
    let shape = NetworkShape::new(2, 3, knots.basis_count()).unwrap();
    let cfg = PosteriorConfig::new(knots, shape, DEFAULT_PRIOR_SCALE).unwrap();
    Posterior::new(&data, &cfg).unwrap()
}

fn random_state(post: &Posterior, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let shape = post.shape();
    let nb = shape.param_count() - shape.inputs - 2;
    (0..shape.param_count())
        .map(|i| {
            if i < nb {
                rng.sample::<f64, _>(StandardNormal)
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect()
}

fn logp(post: &Posterior, theta: &[f64]) -> f64 {
    post.log_likelihood(theta) + post.log_prior(theta)
}

fn central_difference(post: &Posterior, theta: &[f64], h: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            t[i] = theta[i] + h;
            let up = logp(post, &t);
            t[i] = theta[i] - h;
            let down = logp(post, &t);
            t[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn block_of(shape: NetworkShape, i: usize) -> usize {
    let n1 = (shape.inputs + 1) * shape.hidden;
    let n2 = (shape.hidden + 1) * shape.outputs;
    match i {
        _ if i < n1 => 0,
        _ if i < n1 + n2 => 1,
        _ if i < n1 + n2 + shape.inputs + 1 => 2,
        _ => 3,
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let post = tiny_problem(11);
    let shape = post.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = [0.0f64; 4];
    let mut grad = vec![0.0; shape.param_count()];
    for _ in 0..100 {
        let theta = random_state(&post, &mut rng);
        let value = post.log_posterior_grad(&theta, &mut grad).unwrap();
        assert!((value - logp(&post, &theta)).abs() < 1e-10);
        let fd = central_difference(&post, &theta, 1e-5);
        for i in 0..theta.len() {
            let rel = (grad[i] - fd[i]).abs() / grad[i].abs().max(fd[i].abs()).max(1.0);
            let b = block_of(shape, i);
            worst[b] = worst[b].max(rel);
        }
    }
    for (name, w) in ["B1", "B2", "sigma_tilde", "gamma_tilde"].iter().zip(worst) {
        assert!(w <= 1e-5, "{name}: max relative error {w:.3e}");
    }
}

#[test]
fn directional_derivatives_are_second_order_accurate() {
    let post = tiny_problem(3);
    let dim = post.shape().param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut grad = vec![0.0; dim];
    for _ in 0..50 {
        let theta = random_state(&post, &mut rng);
        let mut u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= norm);
        post.log_posterior_grad(&theta, &mut grad).unwrap();
        let exact: f64 = grad.iter().zip(&u).map(|(g, v)| g * v).sum();
        let fd = |h: f64| {
            let plus: Vec<f64> = theta.iter().zip(&u).map(|(t, v)| t + h * v).collect();
            let minus: Vec<f64> = theta.iter().zip(&u).map(|(t, v)| t - h * v).collect();
            (logp(&post, &plus) - logp(&post, &minus)) / (2.0 * h)
        };
        // halving h should cut the error roughly fourfold
        let e1 = (fd(1e-2) - exact).abs();
        let e2 = (fd(5e-3) - exact).abs();
        assert!(e2 <= e1 / 3.0 + 1e-9, "errors {e1:.3e} -> {e2:.3e}");
        assert!((fd(1e-5) - exact).abs() <= 1e-6 * exact.abs().max(1.0));
    }
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn gradient_vanishes_at_a_local_maximum() {
    let post = tiny_problem(21);
    let dim = post.shape().param_count();
    let mut theta = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut f = post.log_posterior_grad(&theta, &mut grad).unwrap();

    // backtracking gradient ascent to get near a mode
    let mut step = 0.1;
    for _ in 0..5000 {
        let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g).collect();
        let mut g2 = vec![0.0; dim];
        match post.log_posterior_grad(&cand, &mut g2) {
            Ok(f2) if f2 > f => {
                theta = cand;
                grad = g2;
                f = f2;
                step *= 1.2;
            }
            _ => step *= 0.5,
        }
    }
    // Newton polish with a Hessian differenced from the analytic gradient
    for _ in 0..20 {
        let h = 1e-6;
        let mut hess = vec![vec![0.0; dim]; dim];
        for c in 0..dim {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[c] += h;
            tm[c] -= h;
            let (mut gp, mut gm) = (vec![0.0; dim], vec![0.0; dim]);
            post.log_posterior_grad(&tp, &mut gp).unwrap();
            post.log_posterior_grad(&tm, &mut gm).unwrap();
            for r in 0..dim {
                hess[r][c] = (gp[r] - gm[r]) / (2.0 * h);
            }
        }
        let delta = solve(hess, grad.iter().map(|g| -g).collect());
        for (t, d) in theta.iter_mut().zip(&delta) {
            *t += d;
        }
        post.log_posterior_grad(&theta, &mut grad).unwrap();
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm <= 1e-6, "gradient norm at the optimum {norm:.3e}");
}
