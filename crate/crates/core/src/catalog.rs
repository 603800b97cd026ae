//! Ready-made diagram families.

use num_bigint::BigInt;
use num_traits::Signed;

use crate::asymptotic::{ratfn_series, SeriesVerdict};
use crate::diagram::{BratteliDiagram, DiagramRule, SymIdx};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::matrix::IntMatrix;
use crate::poly::{Poly, RatFn};

fn exprs(entries: &[&[&str]]) -> Result<Vec<Vec<Expr>>> {
    entries.iter().map(|r| r.iter().map(|s| Expr::parse(s)).collect()).collect()
}

/// The same square matrix at every level.
pub fn stationary(m: &IntMatrix) -> Result<BratteliDiagram> {
    if m.rows() != m.cols() || m.rows() == 0 {
        return Err(Error::Param("stationary diagrams need a square matrix".into()));
    }
    if !m.is_nonnegative() {
        return Err(Error::Param("incidence entries must be nonnegative".into()));
    }
    let entries = (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| Expr::parse(&v.to_string())).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    BratteliDiagram::from_rule("stationary", None, vec![], DiagramRule::constant(1, entries)?)
}

/// Constant-shape rule whose rows all have the same sum polynomial.
pub fn ers(name: &str, entries: &[&[&str]]) -> Result<BratteliDiagram> {
    let rule = DiagramRule::constant(1, exprs(entries)?)?;
    let sums: Vec<Poly> = rule.sym_rows().into_iter().map(|r| rule.sym_row_sum(r)).collect();
    if sums.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Param(format!("rows do not have equal sums: {}", sums.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "))));
    }
    BratteliDiagram::from_rule(name, None, vec![], rule)
}

/// [[a(n), 1], [1, a(n)]].
pub fn two_vertex(a: &str) -> Result<BratteliDiagram> {
    ers(&format!("two-vertex {a}"), &[&[a, "1"], &["1", a]])
}

/// [[n, 1], [1, n]].
pub fn linear_two_vertex() -> BratteliDiagram {
    two_vertex("n").expect("valid family")
}

/// [[n^2, 1], [1, n^2]].
pub fn quadratic_two_vertex() -> BratteliDiagram {
    two_vertex("n^2").expect("valid family")
}

/// Stationary [[3, 0], [1, 2]].
pub fn triangular_stationary() -> BratteliDiagram {
    stationary(&IntMatrix::from_i64(&[&[3, 0], &[1, 2]])).expect("valid matrix").with_name("triangular")
}

/// Odometer with constant base k (k root edges, k edges per level).
pub fn odometer(k: u64) -> Result<BratteliDiagram> {
    if k == 0 {
        return Err(Error::Param("odometer base must be positive".into()));
    }
    let e = Expr::parse(&k.to_string())?;
    let d = BratteliDiagram::from_rule("odometer", Some(vec![BigInt::from(k)]), vec![], DiagramRule::constant(1, vec![vec![e]])?)?;
    Ok(d)
}

/// Odometer with base b(n) at level n and b(0) root edges.
pub fn odometer_expr(b: &str) -> Result<BratteliDiagram> {
    let e = Expr::parse(b)?;
    let root = e.eval(0);
    if !root.is_positive() {
        return Err(Error::Param("odometer base must be positive at n = 0".into()));
    }
    if e.poly().positive_from(1) != Some(true) {
        return Err(Error::Param(format!("odometer base {b} must stay positive")));
    }
    BratteliDiagram::from_rule("odometer", Some(vec![root]), vec![], DiagramRule::constant(1, vec![vec![e]])?)
}

/// Pascal graph: V_n = {0..n}, vertex k of level n + 1 fed by k - 1 and k.
pub fn pascal() -> BratteliDiagram {
    BratteliDiagram::from_rule("pascal", None, vec![], DiagramRule::pascal(1)).expect("valid family")
}

/// Countable family: row k has a(n) at column k and ones elsewhere, the last row repeating.
/// Requires the sum of n / (a(n) + n) to converge.
pub fn countable_chain(a: &str) -> Result<BratteliDiagram> {
    let e = Expr::parse(a)?;
    let f = RatFn::new(Poly::x(), e.poly() + &Poly::x());
    if e.poly().lc().is_negative() || ratfn_series(&f) == SeriesVerdict::Diverges {
        return Err(Error::Param(format!("sum of n/(a(n)+n) diverges for a = {a}")));
    }
    if e.poly().positive_from(1) != Some(true) {
        return Err(Error::Param(format!("a(n) = {a} must be positive from level 1")));
    }
    let rule = DiagramRule::countable_chain(1, e);
    BratteliDiagram::from_rule(&format!("countable chain {a}"), None, vec![], rule)
}

/// Symbolic index helper for fixed vertices.
pub fn idx(i: usize) -> SymIdx {
    SymIdx::Index(i)
}
