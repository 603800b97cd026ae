//! Closed-form description of diagrams with equal row sums (ERS).
//!
//! When every row of F̃_n sums to r(n) and the heights at some level are all
//! equal, they stay equal, h(n + 1) = r(n) h(n), and every stochastic entry is
//! the rational function f̃_vw(n) / r(n).

use crate::asymptotic::HTerm;
use crate::diagram::{BratteliDiagram, DiagramRule, SymIdx};
use crate::poly::{Poly, RatFn};
use crate::rational::qb;

/// Columns selected symbolically.
#[derive(Clone, Debug, PartialEq)]
pub enum ColSel {
    Set(Vec<SymIdx>),
    Complement(Vec<SymIdx>),
}

pub struct ErsTail<'a> {
    pub rule: &'a DiagramRule,
    /// First level where the closed forms hold and heights are equal.
    pub start: usize,
    pub row_sum: Poly,
    pub height: HTerm,
}

impl<'a> ErsTail<'a> {
    /// Symbolic tail valid for vertex indices up to `max_index` from either end.
    pub fn of(d: &'a BratteliDiagram, max_index: usize) -> Option<ErsTail<'a>> {
        let rule = d.rule()?;
        let rows = rule.sym_rows();
        let r = rule.sym_row_sum(rows[0]);
        if r.is_zero() || rows.iter().any(|&x| rule.sym_row_sum(x) != r) {
            return None;
        }
        let mut start = rule.sym_threshold(max_index).max(d.prefix_len() + 1);
        let limit = start + 4;
        while start <= limit {
            let h = d.heights(start).ok()?;
            if h.iter().all(|x| *x == h[0]) {
                break;
            }
            start += 1;
        }
        if start > limit || r.positive_from(start as i64) != Some(true) {
            return None;
        }
        // the closed form must agree with the materialized matrix
        let m = d.matrix(start).ok()?;
        let n = num_bigint::BigInt::from(start);
        if m.row_sums().iter().any(|s| *s != r.eval_int(&n)) {
            return None;
        }
        let h0 = d.heights(start).ok()?[0].clone();
        let height = HTerm::new(start as i64, qb(&h0), RatFn::poly(r.clone())).ok()?;
        Some(ErsTail { rule, start, row_sum: r, height })
    }

    pub fn entry(&self, row: SymIdx, col: SymIdx) -> Poly {
        self.rule.sym_entry(row, col)
    }

    /// Stochastic entry f_vw(n).
    pub fn stochastic(&self, row: SymIdx, col: SymIdx) -> RatFn {
        RatFn::new(self.entry(row, col), self.row_sum.clone())
    }

    /// Sum of f_vw(n) over the selected columns.
    pub fn stochastic_sum(&self, row: SymIdx, cols: &ColSel) -> RatFn {
        let mut uniq = match cols {
            ColSel::Set(c) | ColSel::Complement(c) => c.clone(),
        };
        uniq.sort();
        uniq.dedup();
        let s = uniq.iter().fold(Poly::zero(), |acc, &c| &acc + &self.entry(row, c));
        let num = match cols {
            ColSel::Set(_) => s,
            ColSel::Complement(_) => &self.row_sum - &s,
        };
        RatFn::new(num, self.row_sum.clone())
    }

    /// Rows whose formulas can differ; the others behave like the generic row.
    pub fn rows(&self) -> Vec<SymIdx> {
        self.rule.sym_rows()
    }

    /// Whether the rule has a fixed number of vertices per level.
    pub fn fixed_rank(&self) -> Option<usize> {
        match &self.rule.kind {
            crate::diagram::RuleKind::Constant { entries } => Some(entries.len()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::rational::{q, qi};

    #[test]
    fn linear_family_closed_forms() {
        let d = catalog::linear_two_vertex();
        let t = ErsTail::of(&d, 2).unwrap();
        assert_eq!(t.start, 1);
        let f = t.stochastic(SymIdx::Index(0), SymIdx::Index(0));
        assert_eq!(f.eval(&qi(4)), Some(q(4, 5)));
        assert_eq!(t.height.at(5), qi(120));
        let off = t.stochastic_sum(SymIdx::Index(1), &ColSel::Complement(vec![SymIdx::Index(1)]));
        assert_eq!(off.eval(&qi(3)), Some(q(1, 4)));
    }

    #[test]
    fn pascal_is_not_ers() {
        assert!(ErsTail::of(&catalog::pascal(), 2).is_none());
    }

    #[test]
    fn countable_chain_is_ers() {
        let d = catalog::countable_chain("n^3").unwrap();
        let t = ErsTail::of(&d, 3).unwrap();
        let n = qi(t.start as i64 + 2);
        assert_eq!(t.row_sum.eval(&n), n.clone() * &n * &n + &n);
        assert_eq!(
            t.stochastic(SymIdx::FromEnd(0), SymIdx::FromEnd(0)).eval(&n),
            Some(n.clone() * &n * &n / (n.clone() * &n * &n + &n))
        );
    }
}
