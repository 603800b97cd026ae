//! Exact measure count from products of stochastic determinants.
//!
//! For a rank-K diagram with nonsingular F_n, there are exactly K ergodic
//! probability measures iff Σ (1 - |det F_n|) < ∞.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde_json::json;

use super::{constant_rule, level_range, partial_sums, series_trend, SeriesTrend};
use crate::asymptotic::{ratfn_series, SeriesVerdict};
use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::ers::ErsTail;
use crate::poly::{Poly, RatFn};
use crate::rational::{big_ratio_f64, q_str, qb};
use crate::verdict::{Direction, Verdict};

#[derive(Clone, Debug)]
pub struct DetOptions {
    pub depth: usize,
    pub start: usize,
    /// Apply the criterion to the tail past the last singular level when
    /// only finitely many levels are singular.
    pub skip_singular_prefix: bool,
}

impl Default for DetOptions {
    fn default() -> Self {
        DetOptions { depth: 64, start: 1, skip_singular_prefix: false }
    }
}

pub(crate) fn poly_det(m: &[Vec<Poly>]) -> Poly {
    let k = m.len();
    match k {
        0 => Poly::one(),
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        _ => {
            let mut acc = Poly::zero();
            for j in 0..k {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Poly>> =
                    m[1..].iter().map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, p)| p.clone()).collect()).collect();
                let t = &m[0][j] * &poly_det(&minor);
                acc = if j % 2 == 0 { &acc + &t } else { &acc - &t };
            }
            acc
        }
    }
}

/// det F_n = det F̃_n · Π h^(n) / Π h^(n+1), as a float, with the exact determinant.
fn stochastic_det(d: &BratteliDiagram, n: usize) -> Result<(BigInt, f64)> {
    let det = d.matrix(n)?.det();
    if det.is_zero() {
        return Ok((det, 0.0));
    }
    let h: BigInt = d.heights(n)?.iter().product();
    let h1: BigInt = d.heights(n + 1)?.iter().product();
    Ok((det.clone(), big_ratio_f64(&(det * h), &h1)))
}

fn claim(k: usize) -> String {
    format!("exactly {k} ergodic invariant probability measures")
}

pub fn exact_count_determinant(d: &BratteliDiagram, o: &DetOptions) -> Result<Verdict> {
    let k = d
        .constant_rank()
        .ok_or_else(|| Error::Rank("the determinant criterion needs a constant number of vertices per level".into()))?;
    if let Some((_, polys)) = constant_rule(d) {
        if let Some(t) = ErsTail::of(d, k) {
            return symbolic(d, o, k, &polys, &t);
        }
    }
    numeric(d, o, k)
}

fn symbolic(d: &BratteliDiagram, o: &DetOptions, k: usize, polys: &[Vec<Poly>], t: &ErsTail) -> Result<Verdict> {
    let det = poly_det(polys);
    if det.is_zero() {
        return Err(Error::Singular { level: t.start });
    }
    let mut singular = vec![];
    for n in o.start..t.start {
        if d.matrix(n)?.det().is_zero() {
            singular.push(n);
        }
    }
    let Some(roots) = det.integer_roots() else {
        return Ok(Verdict::inconclusive(&claim(k), "could not locate the integer roots of the determinant polynomial")
            .note("det", det.to_string()));
    };
    singular.extend(roots.iter().filter(|r| **r >= BigInt::from(t.start.max(o.start))).map(|r| {
        use num_traits::ToPrimitive;
        r.to_usize().unwrap_or(usize::MAX)
    }));
    singular.sort_unstable();
    let mut first = o.start;
    if let Some(&bad) = singular.first() {
        if !o.skip_singular_prefix {
            return Err(Error::Singular { level: bad });
        }
        first = singular.last().unwrap() + 1;
    }
    let rk = t.row_sum.pow(k as u32);
    let s = det.eventual_sign();
    let signed = if s < 0 { -&det } else { det.clone() };
    let term = RatFn::new(&rk - &signed, rk.clone());
    let mut terms = vec![];
    for n in first..first + o.depth {
        let v = if n >= t.start { term.eval_f64(n as f64) } else { 1.0 - stochastic_det(d, n)?.1.abs() };
        terms.push((n, v));
    }
    let trace = partial_sums(&terms);
    let method = "degree test on Σ (1 - |det F_n|)";
    let v = match ratfn_series(&term) {
        SeriesVerdict::Converges => Verdict::proved(&claim(k), method),
        SeriesVerdict::Diverges => Verdict::refuted(&claim(k), method),
    };
    Ok(v.with_depth(o.depth)
        .with_trace(trace)
        .note("rank", k)
        .note("det", det.to_string())
        .note("summand", term.to_string())
        .note("singular_levels", json!(singular))
        .note("from_level", first))
}

fn numeric(d: &BratteliDiagram, o: &DetOptions, k: usize) -> Result<Verdict> {
    let (start, end) = level_range(d, o.start, o.depth)?;
    let mut dets = vec![];
    for n in start..=end {
        dets.push((n, stochastic_det(d, n)?));
    }
    let singular: Vec<usize> = dets.iter().filter(|(_, (e, _))| e.is_zero()).map(|(n, _)| *n).collect();
    let mut first = start;
    if let Some(&bad) = singular.first() {
        if !o.skip_singular_prefix {
            return Err(Error::Singular { level: bad });
        }
        first = singular.last().unwrap() + 1;
    }
    let terms: Vec<(usize, f64)> =
        dets.iter().filter(|(n, _)| *n >= first).map(|(n, (_, z))| (*n, 1.0 - z.abs())).collect();
    if terms.len() < 4 {
        return Ok(Verdict::inconclusive(&claim(k), "too few nonsingular levels in range").note("singular_levels", json!(singular)));
    }
    let exact_last = {
        let (n, (det, _)) = dets.last().unwrap();
        let h: BigInt = d.heights(*n)?.iter().product();
        let h1: BigInt = d.heights(n + 1)?.iter().product();
        q_str(&(qb(&(det * h)) / qb(&h1)).abs())
    };
    let (trend, slope) = series_trend(&terms);
    let trace = partial_sums(&terms);
    let v = match trend {
        SeriesTrend::Converging => {
            Verdict::evidence(&claim(k), Direction::For, "partial sums of 1 - |det F_n| level off", trace)
        }
        SeriesTrend::Diverging => {
            Verdict::evidence(&claim(k), Direction::Against, "partial sums of 1 - |det F_n| keep growing", trace)
        }
        SeriesTrend::Unclear => Verdict::inconclusive(&claim(k), "decay of 1 - |det F_n| is borderline").with_trace(trace),
    };
    let v = v
        .with_depth(terms.len())
        .note("rank", k)
        .note("singular_levels", json!(singular))
        .note("from_level", first)
        .note("last_abs_det", exact_last);
    Ok(match slope {
        Some(s) => v.note("tail_slope", s),
        None => v,
    })
}
