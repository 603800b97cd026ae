//! Hilbert projective metric and the Birkhoff contraction coefficient.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{FMat, IntMatrix, RatMatrix};
use crate::rational::{q_f64, q_str, Q};

/// D(x, y) = ln max_i (x_i / y_i) - ln min_j (x_j / y_j).
pub fn projective_metric(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Argument("vectors must have the same positive length".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Argument("projective metric needs strictly positive vectors".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (a, b) in x.iter().zip(y) {
        let r = a / b;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((hi / lo).ln().max(0.0))
}

fn check_rows(rows: usize, cols: usize, zero_row: impl Fn(usize) -> bool) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Argument("empty matrix".into()));
    }
    if let Some(i) = (0..rows).find(|&i| zero_row(i)) {
        return Err(Error::Argument(format!("row {i} is zero")));
    }
    Ok(())
}

/// φ(A) = min a_ij a_rs / (a_rj a_is), zero when A has a zero entry.
///
/// For a pair of rows (i, r) the minimum over (j, s) splits into
/// min_j (a_ij / a_rj) divided by max_s (a_is / a_rs).
pub fn phi(a: &RatMatrix) -> Result<Q> {
    check_rows(a.rows(), a.cols(), |i| a.row(i).iter().all(|x| x.is_zero()))?;
    if a.entries().iter().any(|x| x.is_zero()) {
        return Ok(Q::zero());
    }
    let mut best = Q::one();
    for i in 0..a.rows() {
        for r in i + 1..a.rows() {
            let ratios: Vec<Q> = (0..a.cols()).map(|j| a.get(i, j) / a.get(r, j)).collect();
            let lo = ratios.iter().min().unwrap();
            let hi = ratios.iter().max().unwrap();
            let v = lo / hi;
            if v < best {
                best = v;
            }
        }
    }
    Ok(best)
}

pub fn phi_int(a: &IntMatrix) -> Result<Q> {
    phi(&a.to_rat())
}

/// Float φ, used on long products where exact entries are too large.
pub fn phi_f64(a: &FMat) -> f64 {
    if a.data.iter().any(|x| *x <= 0.0) {
        return 0.0;
    }
    let mut best = 1.0f64;
    for i in 0..a.rows {
        for r in i + 1..a.rows {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for j in 0..a.cols {
                let q = a.get(i, j) / a.get(r, j);
                lo = lo.min(q);
                hi = hi.max(q);
            }
            best = best.min(lo / hi);
        }
    }
    best
}

/// τ = (1 - √φ) / (1 + √φ).
pub fn tau_of_phi(phi: f64) -> f64 {
    let s = phi.max(0.0).sqrt();
    (1.0 - s) / (1.0 + s)
}

pub fn tau_f64(a: &FMat) -> f64 {
    tau_of_phi(phi_f64(a))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionStats {
    #[serde(serialize_with = "ser_q")]
    pub phi: Q,
    pub tau: f64,
}

fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q_str(x))
}

pub fn contraction_stats(a: &IntMatrix) -> Result<ContractionStats> {
    let phi = phi_int(a)?;
    let tau = tau_of_phi(q_f64(&phi));
    Ok(ContractionStats { phi, tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn metric_examples() {
        assert_eq!(projective_metric(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), 0.0);
        let d = projective_metric(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert!((d - 4f64.ln()).abs() < 1e-15);
        assert!(projective_metric(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = contraction_stats(&IntMatrix::from_i64(&[&[5, 1], &[1, 5]])).unwrap();
        assert_eq!(s.phi, q(1, 25));
        assert!((s.tau - 2.0 / 3.0).abs() < 1e-15);
        let z = contraction_stats(&IntMatrix::from_i64(&[&[1, 0], &[1, 1]])).unwrap();
        assert_eq!((z.phi, z.tau), (Q::zero(), 1.0));
        let one = contraction_stats(&IntMatrix::from_i64(&[&[1, 2], &[2, 4]])).unwrap();
        assert_eq!((one.phi, one.tau), (Q::one(), 0.0));
        assert!(phi_int(&IntMatrix::from_i64(&[&[0, 0], &[1, 1]])).is_err());
    }
}
