//! Decision procedures for series and products whose terms are rational
//! functions or hypergeometric terms in `n`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{Poly, RatFn};
use crate::rational::{qi, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converges,
    Diverges,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    Zero,
    Positive,
    Infinite,
}

/// Convergence of the sum of an eventually sign-definite rational function.
pub fn ratfn_series(f: &RatFn) -> SeriesVerdict {
    if f.decay() >= 2 {
        SeriesVerdict::Converges
    } else {
        SeriesVerdict::Diverges
    }
}

/// Convergence of the sum of sqrt(f(n)).
pub fn sqrt_series(f: &RatFn) -> SeriesVerdict {
    if f.decay() > 2 {
        SeriesVerdict::Converges
    } else {
        SeriesVerdict::Diverges
    }
}

/// Positive term t(n), n >= anchor, with t(n+1) = t(n) * ratio(n).
#[derive(Clone, Debug, PartialEq)]
pub struct HTerm {
    anchor: i64,
    value: Q,
    ratio: RatFn,
    /// First index from which the term vanishes.
    zero_from: Option<i64>,
}

fn first_root_at_or_after(p: &Poly, from: i64) -> Result<Option<i64>> {
    if p.is_zero() {
        return Ok(Some(from));
    }
    let roots = p
        .integer_roots()
        .ok_or_else(|| Error::Argument(format!("cannot isolate integer roots of {p}")))?;
    Ok(roots
        .into_iter()
        .filter(|r| *r >= BigInt::from(from))
        .map(|r| i64::try_from(r).unwrap_or(i64::MAX))
        .min())
}

impl HTerm {
    pub fn new(anchor: i64, value: Q, ratio: RatFn) -> Result<HTerm> {
        if value.is_negative() {
            return Err(Error::Argument("hypergeometric term must be nonnegative".into()));
        }
        if let Some(r) = first_root_at_or_after(&ratio.den, anchor)? {
            return Err(Error::Argument(format!("ratio {ratio} has a pole at n = {r}")));
        }
        let zero_from = if value.is_zero() {
            Some(anchor)
        } else {
            first_root_at_or_after(&ratio.num, anchor)?.map(|r| r + 1)
        };
        // A sign change of the ratio after the anchor would make the term negative.
        if zero_from.is_none() {
            let mut n = anchor;
            let stop = anchor + 64;
            while n < stop {
                if ratio.eval(&qi(n)).is_some_and(|v| v.is_negative()) {
                    return Err(Error::Argument(format!("ratio {ratio} negative at n = {n}")));
                }
                n += 1;
            }
            if ratio.eventual_sign() < 0 {
                return Err(Error::Argument(format!("ratio {ratio} eventually negative")));
            }
        }
        Ok(HTerm { anchor, value, ratio, zero_from })
    }

    /// t(n) = f(n) for a rational function nonvanishing from the anchor on.
    pub fn from_ratfn(anchor: i64, f: &RatFn) -> Result<HTerm> {
        let value = f
            .eval(&qi(anchor))
            .ok_or_else(|| Error::Argument(format!("{f} undefined at {anchor}")))?;
        if value.is_zero() {
            return Ok(HTerm { anchor, value, ratio: RatFn::constant(Q::one()), zero_from: Some(anchor) });
        }
        let value = value.abs();
        let ratio = f.shift(1).div(f);
        HTerm::new(anchor, value, ratio)
    }

    pub fn anchor(&self) -> i64 {
        self.anchor
    }

    pub fn ratio(&self) -> &RatFn {
        &self.ratio
    }

    pub fn at(&self, n: i64) -> Q {
        assert!(n >= self.anchor, "term evaluated before its anchor");
        if self.zero_from.is_some_and(|z| n >= z) {
            return Q::zero();
        }
        let mut v = self.value.clone();
        for k in self.anchor..n {
            v *= self.ratio.eval(&qi(k)).expect("pole excluded at construction");
        }
        v
    }

    pub fn advance_to(&self, m: i64) -> HTerm {
        if m <= self.anchor {
            return self.clone();
        }
        HTerm { anchor: m, value: self.at(m), ratio: self.ratio.clone(), zero_from: self.zero_from }
    }

    pub fn mul(&self, o: &HTerm) -> Result<HTerm> {
        let m = self.anchor.max(o.anchor);
        let a = self.advance_to(m);
        let b = o.advance_to(m);
        let zero_from = match (a.zero_from, b.zero_from) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        if let Some(z) = zero_from {
            return Ok(HTerm { anchor: m, value: a.value * b.value, ratio: RatFn::constant(Q::one()), zero_from: Some(z) });
        }
        HTerm::new(m, a.value * b.value, a.ratio.mul(&b.ratio))
    }

    pub fn inv(&self) -> Result<HTerm> {
        if self.zero_from.is_some() {
            return Err(Error::Argument("inverse of an eventually vanishing term".into()));
        }
        HTerm::new(self.anchor, Q::one() / &self.value, RatFn::new(self.ratio.den.clone(), self.ratio.num.clone()))
    }

    /// n -> t(n + k).
    pub fn shift(&self, k: i64) -> HTerm {
        HTerm {
            anchor: self.anchor - k,
            value: self.value.clone(),
            ratio: self.ratio.shift(k),
            zero_from: self.zero_from.map(|z| z - k),
        }
    }

    pub fn mul_ratfn(&self, f: &RatFn) -> Result<HTerm> {
        let mut a = self.anchor;
        // skip past poles and zeros of f to get a clean anchor
        loop {
            match f.eval(&qi(a)) {
                Some(v) if !v.is_zero() => break,
                _ => a += 1,
            }
            if a > self.anchor + 10_000 {
                return Err(Error::Argument(format!("{f} vanishes identically")));
            }
        }
        let mut out = self.mul(&HTerm::from_ratfn(a, f)?)?;
        if let Some(z) = first_root_at_or_after(&f.num, a)? {
            out.zero_from = Some(out.zero_from.map_or(z, |x| x.min(z)));
        }
        Ok(out)
    }

    fn gauss(&self) -> (i64, Q, Q) {
        let p = &self.ratio.num;
        let q = &self.ratio.den;
        let (dp, dq) = (p.degree(), q.degree());
        if dp != dq {
            return (dp - dq, Q::zero(), Q::zero());
        }
        let l = p.lc() / q.lc();
        if !l.is_one() {
            return (0, l, Q::zero());
        }
        let d = dp as usize;
        let gamma = if d == 0 { Q::zero() } else { (p.coeff(d - 1) - q.coeff(d - 1)) / p.lc() };
        (0, l, gamma)
    }

    /// Behaviour of t(n) as n grows.
    pub fn limit(&self) -> LimitClass {
        if self.zero_from.is_some() {
            return LimitClass::Zero;
        }
        let (dd, l, gamma) = self.gauss();
        if dd < 0 {
            return LimitClass::Zero;
        }
        if dd > 0 {
            return LimitClass::Infinite;
        }
        if l < Q::one() {
            LimitClass::Zero
        } else if l > Q::one() {
            LimitClass::Infinite
        } else if gamma.is_negative() {
            LimitClass::Zero
        } else if gamma.is_positive() {
            LimitClass::Infinite
        } else {
            LimitClass::Positive
        }
    }

    /// Convergence of the sum of t(n) (Gauss test).
    pub fn series(&self) -> SeriesVerdict {
        if self.zero_from.is_some() {
            return SeriesVerdict::Converges;
        }
        let (dd, l, gamma) = self.gauss();
        let conv = if dd != 0 {
            dd < 0
        } else if l != Q::one() {
            l < Q::one()
        } else {
            gamma < qi(-1)
        };
        if conv {
            SeriesVerdict::Converges
        } else {
            SeriesVerdict::Diverges
        }
    }

    /// Partial sums of t(n) for n = anchor .. anchor + count - 1.
    pub fn partial_sums(&self, count: usize) -> Vec<Q> {
        let mut out = Vec::with_capacity(count);
        let mut acc = Q::zero();
        let mut v = self.value.clone();
        for k in 0..count as i64 {
            let n = self.anchor + k;
            if self.zero_from.is_some_and(|z| n >= z) {
                v = Q::zero();
            }
            acc += &v;
            out.push(acc.clone());
            if !v.is_zero() {
                v *= self.ratio.eval(&qi(n)).unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn p(c: &[i64]) -> Poly {
        Poly::from_coeffs(c.iter().map(|&v| qi(v)).collect())
    }

    #[test]
    fn harmonic_and_squares() {
        // 1/n
        let h = HTerm::from_ratfn(1, &RatFn::new(p(&[1]), p(&[0, 1]))).unwrap();
        assert_eq!(h.series(), SeriesVerdict::Diverges);
        assert_eq!(h.limit(), LimitClass::Zero);
        assert_eq!(h.at(4), q(1, 4));
        // 1/n^2
        let s = HTerm::from_ratfn(1, &RatFn::new(p(&[1]), p(&[0, 0, 1]))).unwrap();
        assert_eq!(s.series(), SeriesVerdict::Converges);
        let ps = s.partial_sums(3);
        assert_eq!(ps[2], q(49, 36));
    }

    #[test]
    fn factorial_ratio_and_products() {
        // prod n^2/(n^2+1) has a positive limit
        let t = HTerm::new(1, Q::one(), RatFn::new(p(&[0, 0, 1]), p(&[1, 0, 1]))).unwrap();
        assert_eq!(t.limit(), LimitClass::Positive);
        // prod n/(n+1) -> 0 like 1/n
        let t = HTerm::new(1, Q::one(), RatFn::new(p(&[0, 1]), p(&[1, 1]))).unwrap();
        assert_eq!(t.limit(), LimitClass::Zero);
        assert_eq!(t.series(), SeriesVerdict::Diverges);
        // n! grows
        let f = HTerm::new(1, Q::one(), RatFn::poly(p(&[1, 1]))).unwrap();
        assert_eq!(f.limit(), LimitClass::Infinite);
        assert_eq!(f.at(5), qi(120));
        let g = f.inv().unwrap().mul(&f).unwrap();
        assert_eq!(g.at(7), Q::one());
        assert_eq!(f.shift(1).at(1), qi(2));
    }

    #[test]
    fn vanishing_terms() {
        let t = HTerm::new(1, Q::one(), RatFn::poly(p(&[-3, 1]))).unwrap();
        assert_eq!(t.at(3), qi(2));
        assert_eq!(t.at(4), Q::zero());
        assert_eq!(t.series(), SeriesVerdict::Converges);
        assert!(HTerm::new(0, Q::one(), RatFn::new(p(&[1]), p(&[-2, 1]))).is_err());
    }

    #[test]
    fn ratfn_degree_tests() {
        assert_eq!(ratfn_series(&RatFn::new(p(&[2]), p(&[1, 0, 1]))), SeriesVerdict::Converges);
        assert_eq!(ratfn_series(&RatFn::new(p(&[0, 1]), p(&[1, 0, 1]))), SeriesVerdict::Diverges);
        assert_eq!(sqrt_series(&RatFn::new(p(&[1]), p(&[0, 0, 1]))), SeriesVerdict::Diverges);
        assert_eq!(sqrt_series(&RatFn::new(p(&[1]), p(&[0, 0, 0, 1]))), SeriesVerdict::Converges);
    }
}
