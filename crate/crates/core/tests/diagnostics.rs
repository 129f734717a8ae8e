use ndarray::Array2;
use quinn_core::diagnostics::{scalar_diagnostics, ESS_MIN, RHAT_MAX};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn iid(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[test]
fn copies_of_one_sequence_look_converged() {
    // copies share every value, so only the split halves can disagree
    let v = iid(1000, 8);
    let x = Array2::from_shape_fn((4, 1000), |(_, t)| v[t]);
    let r = scalar_diagnostics(x.view()).unwrap();
    assert!(r.rhat >= 1.0 && r.rhat < 1.01, "{r:?}");
}

#[test]
fn ess_is_capped_at_the_draw_count() {
    // antithetic chains have negative autocorrelation and raw ESS above S
    let x = Array2::from_shape_fn((4, 500), |(c, t)| {
        let s = if t % 2 == 0 { 1.0 } else { -1.0 };
        s * (1.0 + 0.001 * (c * 500 + t) as f64 % 0.7)
    });
    let r = scalar_diagnostics(x.view()).unwrap();
    assert!(r.ess_bulk <= 2000.0 && r.ess_tail <= 2000.0, "{r:?}");
    assert!(r.ess_bulk > 0.0);
}

#[test]
fn single_chain_is_split_in_two() {
    let v = iid(2000, 9);
    let x = Array2::from_shape_vec((1, 2000), v).unwrap();
    let r = scalar_diagnostics(x.view()).unwrap();
    assert!(r.rhat < RHAT_MAX && r.ess_bulk > ESS_MIN, "{r:?}");
}

#[test]
fn one_constant_chain_is_degenerate() {
    let mut x = Array2::from_shape_vec((3, 100), iid(300, 10)).unwrap();
    x.row_mut(2).fill(0.25);
    let r = scalar_diagnostics(x.view()).unwrap();
    assert!(r.degenerate && !r.pass);
    assert!(r.ess_bulk.is_nan() && r.ess_tail.is_nan());
}
