use ndarray::Array2;
use proptest::prelude::*;
use quinn_core::ale::make_bins;
use quinn_core::model::{invert_cdf, unit_grid};
use quinn_core::network::softmax_rows;
use quinn_core::spline::{eval_ispline, eval_mspline, KnotVector};

proptest! {
    #[test]
    fn softmax_is_on_the_simplex(v in prop::collection::vec(-300.0f64..300.0, 1..12)) {
        let u = Array2::from_shape_vec((1, v.len()), v).unwrap();
        let s = softmax_rows(u.view()).unwrap();
        prop_assert!(s.iter().all(|&p| (0.0..=1.0).contains(&p)));
        prop_assert!((s.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_ignores_shifts(v in prop::collection::vec(-20.0f64..20.0, 2..8), c in -50.0f64..50.0) {
        let a = Array2::from_shape_vec((1, v.len()), v.clone()).unwrap();
        let b = a.mapv(|x| x + c);
        let (sa, sb) = (softmax_rows(a.view()).unwrap(), softmax_rows(b.view()).unwrap());
        for (x, y) in sa.iter().zip(sb.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ispline_mixtures_are_cdfs(
        degree in 1usize..4,
        interior in 2usize..12,
        raw in prop::collection::vec(0.0f64..1.0, 14),
    ) {
        let kv = KnotVector::new(degree, interior).unwrap();
        let m = kv.basis_count();
        let total: f64 = raw[..m].iter().sum::<f64>() + 1e-9;
        let w: Vec<f64> = raw[..m].iter().map(|v| (v + 1e-9 / m as f64) / total).collect();
        let grid = unit_grid(201);
        let ib = eval_ispline(&kv, &grid).unwrap().values;
        let mb = eval_mspline(&kv, &grid).unwrap().values;
        let cdf: Vec<f64> = ib.rows().into_iter().map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
        prop_assert!(cdf[0].abs() < 1e-14);
        prop_assert!((cdf[200] - 1.0).abs() < 1e-12);
        for k in 1..cdf.len() {
            prop_assert!(cdf[k] >= cdf[k - 1] - 1e-14);
        }
        prop_assert!(mb.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn inversion_is_monotone_in_tau(
        steps in prop::collection::vec(0.0f64..1.0, 10..60),
        mut taus in prop::collection::vec(0.001f64..0.999, 1..20),
    ) {
        // a valid CDF from non-negative increments
        let total: f64 = steps.iter().sum::<f64>() + 1e-6;
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        for s in &steps {
            acc += (s + 1e-6 / steps.len() as f64) / total;
            cdf.push(acc.min(1.0));
        }
        *cdf.last_mut().unwrap() = 1.0;
        let grid = unit_grid(cdf.len());
        taus.sort_by(f64::total_cmp);
        let q = invert_cdf(&cdf, &grid, &taus).unwrap();
        for k in 1..q.len() {
            prop_assert!(q[k] >= q[k - 1]);
        }
        prop_assert!(q.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn bins_partition_the_sample(
        values in prop::collection::vec(-5.0f64..5.0, 2..300),
        k in 2usize..50,
        coarse in any::<bool>(),
    ) {
        // rounding produces heavy ties on request
        let values: Vec<f64> = if coarse { values.iter().map(|v| v.round()).collect() } else { values };
        let distinct = {
            let mut s = values.clone();
            s.sort_by(f64::total_cmp);
            s.dedup();
            s.len()
        };
        prop_assume!(distinct >= 2 && values.len() >= k);
        let b = make_bins(&values, k, false).unwrap();
        prop_assert!(b.edges.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(b.counts.iter().sum::<usize>(), values.len());
        prop_assert!(b.counts.iter().all(|&c| c > 0));
        prop_assert!(b.n_bins() <= k);
        for (v, &a) in values.iter().zip(&b.assignment) {
            let (lo, hi) = (b.edges[a], b.edges[a + 1]);
            prop_assert!(*v <= hi && (*v > lo || (a == 0 && *v == lo)));
        }
    }
}
