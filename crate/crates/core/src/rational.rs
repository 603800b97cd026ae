//! Small helpers around `BigRational`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qb(n: &BigInt) -> Q {
    Q::from_integer(n.clone())
}

/// Parses `"p/q"`, `"p"` or a plain integer.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Schema(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let n: BigInt = a.trim().parse().map_err(|_| bad())?;
            let d: BigInt = b.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Always `p/q`, including integers (`3/1`).
pub fn q_str(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn q_f64(x: &Q) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => big_ratio_f64(x.numer(), x.denom()),
    }
}

/// Ratio of two big integers as f64 without overflowing the parts.
pub fn big_ratio_f64(n: &BigInt, d: &BigInt) -> f64 {
    if n.is_zero() {
        return 0.0;
    }
    let shift = n.bits().max(d.bits()).saturating_sub(1000) as usize;
    let ns = (n.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
    let ds = (d.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
    let v = if ds == 0.0 {
        f64::INFINITY
    } else if ns.is_finite() && ds.is_finite() {
        ns / ds
    } else {
        let nb = n.bits() as i64;
        let db = d.bits() as i64;
        let sh_n = (nb - 60).max(0) as usize;
        let sh_d = (db - 60).max(0) as usize;
        let a = (n.abs() >> sh_n).to_f64().unwrap();
        let b = (d.abs() >> sh_d).to_f64().unwrap();
        (a / b) * 2f64.powi((sh_n as i64 - sh_d as i64) as i32)
    };
    if n.sign() == d.sign() {
        v
    } else {
        -v
    }
}

pub fn big_f64(n: &BigInt) -> f64 {
    big_ratio_f64(n, &BigInt::one())
}

/// Rational approximation of a finite float (exact binary expansion).
pub fn f64_q(x: f64) -> Q {
    Q::from_float(x).unwrap_or_else(Q::zero)
}

/// Formats a float with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.11e}", x);
    let v: f64 = s.parse().unwrap();
    let mut out = format!("{}", v);
    if out.len() > 24 {
        out = s;
    }
    out
}

/// Rounds a float to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.11e}", x).parse().unwrap()
}

pub fn q_abs(x: &Q) -> Q {
    x.abs()
}

pub fn q_pow(x: &Q, e: u32) -> Q {
    let mut r = Q::one();
    for _ in 0..e {
        r *= x;
    }
    r
}
