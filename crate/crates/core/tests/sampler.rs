use ndarray::Array2;
use quinn_core::diagnostics::scalar_diagnostics;
use quinn_core::model::{fit, ModelConfig};
use quinn_core::sampler::{sample_chains_parallel, LogDensity, NutsConfig};
use quinn_core::sim::{generate, Design, DesignSpec};
use quinn_core::Result;

/// Independent Gaussian with per-coordinate scales.
struct Gaussian {
    scales: Vec<f64>,
}

impl LogDensity for Gaussian {
    fn dim(&self) -> usize {
        self.scales.len()
    }

    fn logp_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut lp = 0.0;
        for ((g, x), s) in grad.iter_mut().zip(q).zip(&self.scales) {
            *g = -x / (s * s);
            lp -= 0.5 * x * x / (s * s);
        }
        Ok(lp)
    }
}

#[test]
fn anisotropic_gaussian_moments() {
    let target = Gaussian {
        scales: vec![0.5, 1.0, 2.0, 4.0],
    };
    let cfg = NutsConfig {
        n_iter: 3000,
        n_warmup: 1000,
        thin: 1,
        seed: 21,
        ..NutsConfig::default()
    };
    let inits = vec![vec![1.0, -1.0, 0.5, 2.0]; 4];
    let chains = sample_chains_parallel(&target, inits, &cfg).unwrap();
    for (d, s) in target.scales.iter().enumerate() {
        let vals: Vec<f64> = chains.iter().flat_map(|c| c.draws.iter().map(move |q| q[d])).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.1 * s, "coordinate {d}: mean {mean}");
        assert!((var / (s * s) - 1.0).abs() < 0.15, "coordinate {d}: var {var}");
        let trace = Array2::from_shape_fn((4, chains[0].draws.len()), |(c, t)| chains[c].draws[t][d]);
        let r = scalar_diagnostics(trace.view()).unwrap();
        assert!(r.pass, "coordinate {d}: {r:?}");
    }
    assert!(chains.iter().all(|c| c.divergences == 0));
    // dual averaging lands near the requested acceptance rate
    for c in &chains {
        assert!((c.accept_stat - 0.8).abs() < 0.1, "{}", c.accept_stat);
    }
}

#[test]
fn chain_seeds_are_offset_per_chain() {
    let target = Gaussian { scales: vec![1.0; 3] };
    let cfg = NutsConfig {
        n_iter: 200,
        n_warmup: 100,
        thin: 1,
        seed: 5,
        ..NutsConfig::default()
    };
    let chains = sample_chains_parallel(&target, vec![vec![0.1; 3]; 3], &cfg).unwrap();
    assert_eq!(chains.iter().map(|c| c.seed).collect::<Vec<_>>(), vec![5, 6, 7]);
    assert_ne!(chains[0].draws, chains[1].draws);
}

#[test]
fn design_one_smoke_has_few_divergences() {
    let data = generate(&DesignSpec::new(Design::One, 50, 1)).unwrap();
    let model = ModelConfig {
        chains: 2,
        ..ModelConfig::with_size(5, 3)
    };
    let nuts = NutsConfig {
        n_iter: 800,
        n_warmup: 400,
        thin: 2,
        seed: 3,
        ..NutsConfig::default()
    };
    let f = fit(data.x.view(), data.y.view(), &model, &nuts).unwrap();
    for c in &f.chains {
        assert_eq!(c.draws.len(), 200);
        let rate = c.divergences as f64 / nuts.n_iter as f64;
        assert!(rate < 0.05, "divergence rate {rate}");
        assert!(c.log_posterior_trace.iter().all(|v| v.is_finite()));
    }
    assert!(f.loglik.iter().all(|v| v.is_finite()));
}
