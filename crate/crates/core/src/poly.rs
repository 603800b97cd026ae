//! Univariate polynomials and rational functions in `n` with rational coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::rational::{q_f64, qb, Q};

/// Coefficients low to high; no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    c: Vec<Q>,
}

impl Poly {
    pub fn from_coeffs(mut c: Vec<Q>) -> Poly {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Poly { c }
    }

    pub fn zero() -> Poly {
        Poly { c: vec![] }
    }

    pub fn one() -> Poly {
        Poly::constant(Q::one())
    }

    pub fn constant(v: Q) -> Poly {
        Poly::from_coeffs(vec![v])
    }

    pub fn constant_int(v: BigInt) -> Poly {
        Poly::constant(qb(&v))
    }

    pub fn int(v: i64) -> Poly {
        Poly::constant_int(BigInt::from(v))
    }

    /// The polynomial `n`.
    pub fn x() -> Poly {
        Poly::from_coeffs(vec![Q::zero(), Q::one()])
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree, or -1 for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.c.len() as i64 - 1
    }

    pub fn coeff(&self, k: usize) -> Q {
        self.c.get(k).cloned().unwrap_or_else(Q::zero)
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.c
    }

    pub fn lc(&self) -> Q {
        self.c.last().cloned().unwrap_or_else(Q::zero)
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut r = Poly::one();
        for _ in 0..e {
            r = &r * self;
        }
        r
    }

    pub fn eval(&self, x: &Q) -> Q {
        let mut acc = Q::zero();
        for a in self.c.iter().rev() {
            acc = acc * x + a;
        }
        acc
    }

    pub fn eval_int(&self, n: &BigInt) -> BigInt {
        self.eval(&qb(n)).to_integer()
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for a in self.c.iter().rev() {
            acc = acc * x + q_f64(a);
        }
        acc
    }

    pub fn scale(&self, k: &Q) -> Poly {
        Poly::from_coeffs(self.c.iter().map(|a| a * k).collect())
    }

    /// p(n + s).
    pub fn shift(&self, s: i64) -> Poly {
        let lin = Poly::from_coeffs(vec![Q::from_integer(BigInt::from(s)), Q::one()]);
        let mut acc = Poly::zero();
        for a in self.c.iter().rev() {
            acc = &(&acc * &lin) + &Poly::constant(a.clone());
        }
        acc
    }

    /// Integer multiple with integer coefficients and positive content removed.
    pub fn primitive_int(&self) -> Vec<BigInt> {
        let mut l = BigInt::one();
        for a in &self.c {
            l = l.lcm(a.denom());
        }
        self.c.iter().map(|a| (a * qb(&l)).to_integer()).collect()
    }

    /// Cauchy bound: every real root has absolute value below it.
    pub fn root_bound(&self) -> Q {
        if self.degree() <= 0 {
            return Q::zero();
        }
        let lc = self.lc().abs();
        let m = self.c[..self.c.len() - 1]
            .iter()
            .map(|a| a.abs() / &lc)
            .max()
            .unwrap_or_else(Q::zero);
        m + Q::one()
    }

    /// All integer roots, or None if the search space is too large.
    pub fn integer_roots(&self) -> Option<Vec<BigInt>> {
        if self.is_zero() {
            return None;
        }
        let ints = self.primitive_int();
        let mut roots = vec![];
        let lowest = ints.iter().position(|a| !a.is_zero()).unwrap();
        if lowest > 0 {
            roots.push(BigInt::zero());
        }
        let a0 = ints[lowest].abs();
        let bound = self.root_bound().ceil().to_integer();
        let lim = a0.clone().min(bound);
        let lim = lim.to_u64()?;
        if lim > 5_000_000 {
            return None;
        }
        for d in 1..=lim {
            let db = BigInt::from(d);
            if !(&a0 % &db).is_zero() {
                continue;
            }
            for cand in [db.clone(), -db] {
                if self.eval(&qb(&cand)).is_zero() {
                    roots.push(cand);
                }
            }
        }
        roots.sort();
        Some(roots)
    }

    /// Whether p(n) > 0 for every integer n >= n0. None when undecided.
    pub fn positive_from(&self, n0: i64) -> Option<bool> {
        self.sign_from(n0, true)
    }

    /// Whether p(n) >= 0 for every integer n >= n0. None when undecided.
    pub fn nonnegative_from(&self, n0: i64) -> Option<bool> {
        if self.is_zero() {
            return Some(true);
        }
        self.sign_from(n0, false)
    }

    fn sign_from(&self, n0: i64, strict: bool) -> Option<bool> {
        if self.is_zero() {
            return Some(!strict);
        }
        if self.lc().is_negative() {
            return Some(false);
        }
        let sh = self.shift(n0);
        let c0_ok = if strict { sh.coeff(0).is_positive() } else { !sh.coeff(0).is_negative() };
        if c0_ok && sh.c.iter().all(|a| !a.is_negative()) {
            return Some(true);
        }
        let bound = self.root_bound().ceil().to_integer().to_i64()?;
        if bound.saturating_sub(n0) > 200_000 {
            return None;
        }
        let mut n = n0;
        while n <= bound.max(n0) {
            let v = self.eval(&Q::from_integer(BigInt::from(n)));
            if v.is_negative() || (strict && v.is_zero()) {
                return Some(false);
            }
            n += 1;
        }
        Some(true)
    }

    /// Sign for all sufficiently large n.
    pub fn eventual_sign(&self) -> i32 {
        if self.is_zero() {
            0
        } else if self.lc().is_positive() {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, a) in self.c.iter().enumerate().rev() {
            if a.is_zero() {
                continue;
            }
            let neg = a.is_negative();
            if first {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            first = false;
            let m = a.abs();
            let show_coeff = k == 0 || !m.is_one();
            if show_coeff {
                if m.is_integer() {
                    write!(f, "{}", m.numer())?;
                } else {
                    write!(f, "({}/{})", m.numer(), m.denom())?;
                }
                if k > 0 {
                    f.write_str("*")?;
                }
            }
            match k {
                0 => {}
                1 => f.write_str("n")?,
                _ => write!(f, "n^{k}")?,
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly::from_coeffs((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly::from_coeffs((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![Q::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::from_coeffs(c)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::from_coeffs(self.c.iter().map(|a| -a).collect())
    }
}

/// `num / den` with `den` nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct RatFn {
    pub num: Poly,
    pub den: Poly,
}

impl RatFn {
    pub fn new(num: Poly, den: Poly) -> RatFn {
        assert!(!den.is_zero(), "zero denominator");
        if den.lc().is_negative() {
            RatFn { num: -&num, den: -&den }
        } else {
            RatFn { num, den }
        }
    }

    pub fn poly(p: Poly) -> RatFn {
        RatFn::new(p, Poly::one())
    }

    pub fn constant(v: Q) -> RatFn {
        RatFn::poly(Poly::constant(v))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn eval(&self, x: &Q) -> Option<Q> {
        let d = self.den.eval(x);
        if d.is_zero() {
            None
        } else {
            Some(self.num.eval(x) / d)
        }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.num.eval_f64(x) / self.den.eval_f64(x)
    }

    /// deg den - deg num; large for the zero function.
    pub fn decay(&self) -> i64 {
        if self.num.is_zero() {
            i64::MAX
        } else {
            self.den.degree() - self.num.degree()
        }
    }

    pub fn eventual_sign(&self) -> i32 {
        self.num.eventual_sign() * self.den.eventual_sign()
    }

    /// Limit as n grows when it is finite.
    pub fn limit(&self) -> Option<Q> {
        match self.decay() {
            d if d > 0 => Some(Q::zero()),
            0 => Some(self.num.lc() / self.den.lc()),
            _ => None,
        }
    }

    pub fn add(&self, o: &RatFn) -> RatFn {
        RatFn::new(&(&self.num * &o.den) + &(&o.num * &self.den), &self.den * &o.den)
    }

    pub fn sub(&self, o: &RatFn) -> RatFn {
        RatFn::new(&(&self.num * &o.den) - &(&o.num * &self.den), &self.den * &o.den)
    }

    pub fn mul(&self, o: &RatFn) -> RatFn {
        RatFn::new(&self.num * &o.num, &self.den * &o.den)
    }

    pub fn div(&self, o: &RatFn) -> RatFn {
        RatFn::new(&self.num * &o.den, &self.den * &o.num)
    }

    pub fn shift(&self, s: i64) -> RatFn {
        RatFn::new(self.num.shift(s), self.den.shift(s))
    }

    /// Compares two functions for large n: -1, 0 or 1.
    pub fn eventual_cmp(&self, o: &RatFn) -> i32 {
        self.sub(o).eventual_sign()
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == Poly::one() || self.num.is_zero() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}
