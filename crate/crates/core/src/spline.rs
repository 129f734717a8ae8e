//! M-spline and I-spline bases on the unit interval.
//!
//! The knot sequence holds `r` zeros, `p` equal interior gaps of width `1/p`
//! and a final block of ones, for a total length of `p + 2r`. Splines of
//! degree `r` on this sequence give `p + r - 1` basis functions. M-splines are
//! B-splines rescaled to integrate to one; I-splines are their running
//! integrals, evaluated in closed form as suffix sums of degree `r + 1`
//! B-splines.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{QuinnError, Result};

/// Number of extra boundary knots added on each side before running the
/// Cox-de Boor recursion, so that every span has a full set of neighbours.
const PAD: usize = 2;

/// Clamped knot sequence for splines of degree `degree` with `interior`
/// equal-width intervals on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    degree: usize,
    interior: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, interior: usize) -> Result<Self> {
        if degree < 1 {
            return Err(QuinnError::domain(format!(
                "spline degree must be >= 1, got {degree}"
            )));
        }
        if interior < 2 {
            return Err(QuinnError::domain(format!(
                "interior knot count must be >= 2, got {interior}"
            )));
        }
        let mut knots = Vec::with_capacity(interior + 2 * degree);
        knots.extend(std::iter::repeat_n(0.0, degree));
        for k in 1..=interior {
            knots.push(if k == interior {
                1.0
            } else {
                k as f64 / interior as f64
            });
        }
        knots.extend(std::iter::repeat_n(1.0, degree));
        Ok(KnotVector {
            degree,
            interior,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interior(&self) -> usize {
        self.interior
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `p + r - 1`.
    pub fn basis_count(&self) -> usize {
        self.interior + self.degree - 1
    }

    /// Knot sequence with `PAD` extra copies of each boundary value.
    fn padded(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.knots.len() + 2 * PAD);
        t.extend(std::iter::repeat_n(0.0, PAD));
        t.extend_from_slice(&self.knots);
        t.extend(std::iter::repeat_n(1.0, PAD));
        t
    }
}

/// Convenience constructor matching [`KnotVector::new`].
pub fn build_knots(degree: usize, interior: usize) -> Result<KnotVector> {
    KnotVector::new(degree, interior)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    MSpline,
    ISpline,
}

/// Basis functions evaluated at a set of points: one row per point, one
/// column per basis function.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    pub values: Array2<f64>,
    pub kind: BasisKind,
}

impl BasisMatrix {
    pub fn basis_count(&self) -> usize {
        self.values.ncols()
    }
}

/// Index `mu` of the knot span `[t[mu], t[mu+1])` containing `z`. The point
/// `z = 1` is assigned to the last non-empty span (left limit).
fn find_span(t: &[f64], z: f64) -> usize {
    // Last index with t[mu] <= z and t[mu] < 1.
    let last = t.iter().rposition(|&k| k < 1.0).expect("knots contain 0");
    if z >= 1.0 {
        return last;
    }
    // t[..=last] is sorted; find the rightmost knot <= z.
    let upto = t[..=last].partition_point(|&k| k <= z);
    upto - 1
}

/// Values of the `order` B-splines that are non-zero on span `mu`, i.e.
/// functions `mu + 1 - order ..= mu` (indices into the padded sequence).
fn nonzero_bsplines(t: &[f64], order: usize, mu: usize, z: f64, out: &mut [f64]) {
    let q = order - 1;
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    out[0] = 1.0;
    for j in 1..=q {
        left[j] = z - t[mu + 1 - j];
        right[j] = t[mu + j] - z;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom > 0.0 { out[r] / denom } else { 0.0 };
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

fn check_unit(z: &[f64]) -> Result<()> {
    if let Some((i, v)) = z
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(QuinnError::domain(format!(
            "spline argument z[{i}] = {v} lies outside [0, 1]"
        )));
    }
    Ok(())
}

/// Evaluate every M-spline basis function at each point of `z`.
pub fn eval_mspline(kv: &KnotVector, z: &[f64]) -> Result<BasisMatrix> {
    check_unit(z)?;
    let t = kv.padded();
    let order = kv.degree + 1;
    let m = kv.basis_count();
    let mut values = Array2::<f64>::zeros((z.len(), m));
    let mut buf = vec![0.0; order];
    for (row, &zi) in z.iter().enumerate() {
        let mu = find_span(&t, zi);
        nonzero_bsplines(&t, order, mu, zi, &mut buf);
        for (a, &b) in buf.iter().enumerate() {
            // padded index of this function, then original index
            let padded = mu + 1 + a - order;
            let Some(orig) = padded.checked_sub(PAD) else {
                continue;
            };
            if orig >= m {
                continue;
            }
            let width = t[padded + order] - t[padded];
            if width > 0.0 {
                values[[row, orig]] = order as f64 * b / width;
            }
        }
    }
    Ok(BasisMatrix {
        values,
        kind: BasisKind::MSpline,
    })
}

/// Evaluate every I-spline basis function (running integral of the matching
/// M-spline) at each point of `z`.
pub fn eval_ispline(kv: &KnotVector, z: &[f64]) -> Result<BasisMatrix> {
    check_unit(z)?;
    let t = kv.padded();
    let order = kv.degree + 2;
    let m = kv.basis_count();
    let mut values = Array2::<f64>::zeros((z.len(), m));
    let mut buf = vec![0.0; order];
    for (row, &zi) in z.iter().enumerate() {
        if zi == 0.0 {
            continue;
        }
        if zi == 1.0 {
            values.row_mut(row).fill(1.0);
            continue;
        }
        let mu = find_span(&t, zi);
        nonzero_bsplines(&t, order, mu, zi, &mut buf);
        // Padded index of the first non-zero degree r+1 B-spline.
        let first_padded = mu + 1 - order;
        // I_i(z) = sum_{j >= i} N_j(z) over original indices j < m.
        let mut suffix = 0.0;
        let mut sums = vec![0.0; order];
        for a in (0..order).rev() {
            let padded = first_padded + a;
            if padded >= PAD && padded - PAD < m {
                suffix += buf[a];
            }
            sums[a] = suffix;
        }
        for i in 0..m {
            let padded = i + PAD;
            let v = if padded < first_padded {
                sums[0]
            } else if padded - first_padded < order {
                sums[padded - first_padded]
            } else {
                0.0
            };
            values[[row, i]] = v.clamp(0.0, 1.0);
        }
    }
    Ok(BasisMatrix {
        values,
        kind: BasisKind::ISpline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn knots_r2_p5() {
        let kv = build_knots(2, 5).unwrap();
        let expect = [0.0, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.0, 1.0];
        assert_eq!(kv.knots().len(), expect.len());
        for (a, b) in kv.knots().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(kv.basis_count(), 6);
    }

    #[test]
    fn knots_r1_p2() {
        let kv = build_knots(1, 2).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.5, 1.0, 1.0]);
        assert_eq!(kv.basis_count(), 2);
    }

    #[test]
    fn knots_reject_bad_args() {
        assert!(matches!(build_knots(2, 1), Err(QuinnError::Domain(_))));
        assert!(matches!(build_knots(0, 5), Err(QuinnError::Domain(_))));
    }

    #[test]
    fn knot_gaps_are_uniform() {
        for r in 1..=4 {
            for p in 2..=12 {
                let kv = build_knots(r, p).unwrap();
                let t = kv.knots();
                assert_eq!(t.len(), p + 2 * r);
                assert!(t.windows(2).all(|w| w[0] <= w[1]));
                for k in 1..=p {
                    let gap = t[r + k - 1] - t[r + k - 2];
                    assert!((gap - 1.0 / p as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let kv = build_knots(2, 5).unwrap();
        assert!(eval_mspline(&kv, &[0.5, 1.0 + 1e-9]).is_err());
        assert!(eval_ispline(&kv, &[-1e-12]).is_err());
    }

    #[test]
    fn linear_msplines_match_hat_functions() {
        // r = 1, p = 2: knots [0, .5, 1, 1]. M_1 = 2 * hat on [0, 1] peaking
        // at 0.5, M_2 = 4 * ramp on [0.5, 1].
        let kv = build_knots(1, 2).unwrap();
        let z = [0.0, 0.1, 0.25, 0.5, 0.7, 0.9, 1.0];
        let b = eval_mspline(&kv, &z).unwrap().values;
        for (row, &zi) in z.iter().enumerate() {
            let hat = if zi <= 0.5 { zi / 0.5 } else { (1.0 - zi) / 0.5 };
            let ramp = if zi <= 0.5 { 0.0 } else { (zi - 0.5) / 0.5 };
            assert!((b[[row, 0]] - 2.0 * hat).abs() < 1e-12, "z={zi}");
            assert!((b[[row, 1]] - 4.0 * ramp).abs() < 1e-12, "z={zi}");
        }
    }

    #[test]
    fn mspline_vanishes_at_zero() {
        for r in 1..=3 {
            let kv = build_knots(r, 5).unwrap();
            let b = eval_mspline(&kv, &[0.0]).unwrap().values;
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn mspline_unit_integral() {
        let z = grid(2001);
        let h = 1.0 / 2000.0;
        for r in 1..=3 {
            for p in [2, 5, 8, 10] {
                let kv = build_knots(r, p).unwrap();
                let b = eval_mspline(&kv, &z).unwrap().values;
                assert!(b.iter().all(|&v| v >= 0.0));
                for col in b.columns() {
                    let s: f64 = col.windows(2).into_iter().map(|w| 0.5 * h * (w[0] + w[1])).sum();
                    assert!((s - 1.0).abs() < 1e-4, "r={r} p={p} integral {s}");
                }
            }
        }
    }

    #[test]
    fn ispline_endpoints() {
        let kv = build_knots(3, 8).unwrap();
        let b = eval_ispline(&kv, &[0.0, 1.0]).unwrap().values;
        assert!(b.row(0).iter().all(|&v| v == 0.0));
        assert!(b.row(1).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ispline_monotone_and_bounded() {
        let z = grid(501);
        let kv = build_knots(2, 7).unwrap();
        let b = eval_ispline(&kv, &z).unwrap().values;
        for col in b.columns() {
            assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(col.windows(2).into_iter().all(|w| w[1] >= w[0] - 1e-14));
        }
    }

    #[test]
    fn ispline_derivative_is_mspline() {
        let kv = build_knots(3, 5).unwrap();
        let h = 1e-5;
        // points away from knots
        let z: Vec<f64> = [0.03, 0.11, 0.37, 0.55, 0.71, 0.93].to_vec();
        let zp: Vec<f64> = z.iter().map(|v| v + h).collect();
        let zm: Vec<f64> = z.iter().map(|v| v - h).collect();
        let ip = eval_ispline(&kv, &zp).unwrap().values;
        let im = eval_ispline(&kv, &zm).unwrap().values;
        let m = eval_mspline(&kv, &z).unwrap().values;
        for i in 0..z.len() {
            for j in 0..kv.basis_count() {
                let fd = (ip[[i, j]] - im[[i, j]]) / (2.0 * h);
                assert!((fd - m[[i, j]]).abs() < 1e-6, "z={} j={j}", z[i]);
            }
        }
    }

    #[test]
    fn equal_weight_cdf_is_interior_at_half() {
        let kv = build_knots(2, 5).unwrap();
        let b = eval_ispline(&kv, &[0.5]).unwrap().values;
        let f = b.row(0).sum() / kv.basis_count() as f64;
        assert!(f > 0.0 && f < 1.0);
    }
}
