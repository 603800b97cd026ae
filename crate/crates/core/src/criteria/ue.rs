//! Sufficient conditions and characterizations of unique ergodicity.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;
use serde::Serialize;
use serde_json::json;

use super::{
    constant_rule, eventual_max, eventual_min, level_range, partial_sums, series_trend, tau_f64, FloatLevels,
    SeriesTrend,
};
use crate::asymptotic::{ratfn_series, sqrt_series, SeriesVerdict};
use crate::diagram::{BratteliDiagram, SymIdx};
use crate::error::{Error, Result};
use crate::ers::ErsTail;
use crate::matrix::{FMat, IntMatrix};
use crate::measure::diameter_f64;
use crate::poly::{Poly, RatFn};
use crate::verdict::{Direction, Verdict};

pub const UE_CLAIM: &str = "uniquely ergodic";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Telescoping with vanishing row differences.
    RowDiff,
    /// Σ min_{v,w} f_vw = ∞.
    MinSum,
    /// τ of incidence products tends to zero.
    TauProduct,
    /// Σ √φ(F̃_n) = ∞.
    PhiSum,
    /// Σ (min entry / max entry) = ∞.
    RatioSum,
    /// ‖F̃_n‖₁ grows at most linearly.
    NormGrowth,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::RowDiff,
        Criterion::MinSum,
        Criterion::TauProduct,
        Criterion::PhiSum,
        Criterion::RatioSum,
        Criterion::NormGrowth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::RowDiff => "row_diff",
            Criterion::MinSum => "min_sum",
            Criterion::TauProduct => "tau_product",
            Criterion::PhiSum => "phi_sum",
            Criterion::RatioSum => "ratio_sum",
            Criterion::NormGrowth => "norm_growth",
        }
    }

    pub fn parse(s: &str) -> Result<Criterion> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown criterion {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct UeOptions {
    /// Number of levels (or sum terms) examined numerically.
    pub depth: usize,
    /// row_diff: reach diameter < 2^-k for k = 1..=targets.
    pub targets: usize,
    /// row_diff: total number of levels the search may consume.
    pub budget: usize,
    pub start: usize,
}

impl Default for UeOptions {
    fn default() -> Self {
        UeOptions { depth: 64, targets: 8, budget: 1 << 24, start: 1 }
    }
}

pub fn unique_ergodicity(d: &BratteliDiagram, c: Criterion, o: &UeOptions) -> Result<Verdict> {
    let v = match c {
        Criterion::RowDiff => row_diff(d, o)?,
        Criterion::MinSum => min_sum(d, o)?,
        Criterion::TauProduct => tau_product(d, o)?,
        Criterion::PhiSum => phi_sum(d, o)?,
        Criterion::RatioSum => ratio_sum(d, o)?,
        Criterion::NormGrowth => norm_growth(d, o)?,
    };
    Ok(v.note("criterion", c.name()))
}

fn pow2_index(m: usize) -> Option<u32> {
    m.is_power_of_two().then(|| m.trailing_zeros())
}

/// Greedy telescoping: from level n_k multiply stochastic matrices until the
/// row diameter drops below 2^-k, then restart one level further down.
fn row_diff(d: &BratteliDiagram, o: &UeOptions) -> Result<Verdict> {
    let mut fl = FloatLevels::new(d, o.start)?;
    let mut used = 0usize;
    let mut witness = vec![o.start];
    let mut reached = vec![];
    for k in 1..=o.targets.max(1) {
        let eps = 0.5f64.powi(k as i32);
        let Some(mut g) = fl.next_matrix()? else {
            return Ok(row_diff_fail(&witness, &reached, vec![], "finite diagram exhausted", k, used));
        };
        used += 1;
        // deep levels contract slowly; the window grows with the level
        let window = fl.level().max(64);
        let mut m = 0usize;
        let mut marks: BTreeMap<u32, f64> = BTreeMap::new();
        let mut history = vec![];
        loop {
            let dm = diameter_f64(&g);
            if history.len() < 4096 {
                history.push(dm);
            }
            if dm < eps {
                reached.push(dm);
                witness.push(fl.level());
                break;
            }
            if let Some(j) = pow2_index(m) {
                marks.insert(j, dm);
                if m >= window && marks.get(&(j - 1)).is_some_and(|prev| dm > 0.999 * prev) {
                    let reason = format!("row diameter stalled near {dm:.6} after {m} further levels");
                    return Ok(row_diff_fail(&witness, &reached, history, &reason, k, used));
                }
            }
            if used >= o.budget {
                return Ok(row_diff_fail(&witness, &reached, history, "level budget exhausted", k, used));
            }
            let Some(f) = fl.next_matrix()? else {
                return Ok(row_diff_fail(&witness, &reached, history, "finite diagram exhausted", k, used));
            };
            used += 1;
            g = f.mul(&g);
            m += 1;
        }
    }
    let telescoping: Vec<usize> = std::iter::once(0).chain(witness.iter().copied()).collect();
    Ok(Verdict::evidence(UE_CLAIM, Direction::For, "greedy telescoping, row diameter below 2^-k", reached)
        .with_depth(used)
        .note("witness_levels", json!(witness))
        .note("telescoping", json!(telescoping)))
}

fn row_diff_fail(
    witness: &[usize],
    reached: &[f64],
    history: Vec<f64>,
    reason: &str,
    k: usize,
    used: usize,
) -> Verdict {
    let stalled = reason.contains("stalled");
    let mut v = if stalled {
        Verdict::evidence(UE_CLAIM, Direction::Against, "greedy telescoping, row diameter bounded below", history)
    } else {
        Verdict::inconclusive(UE_CLAIM, reason).with_trace(history)
    };
    v = v.with_depth(used);
    v.note("reason", reason)
        .note("failed_target", k)
        .note("witness_levels", json!(witness))
        .note("reached", json!(reached))
}

fn symbolic_series_verdict(
    summand: &RatFn,
    series: SeriesVerdict,
    method: &str,
    fails: &str,
    start: usize,
    depth: usize,
) -> Verdict {
    let trace: Vec<f64> = {
        let mut acc = 0.0;
        (start..start + depth)
            .map(|n| {
                let t = summand.eval_f64(n as f64);
                acc += if t.is_finite() { t } else { 0.0 };
                acc
            })
            .collect()
    };
    let v = match series {
        SeriesVerdict::Diverges => Verdict::proved(UE_CLAIM, method),
        SeriesVerdict::Converges => Verdict::inconclusive(UE_CLAIM, fails).note("method", method),
    };
    v.with_depth(depth).with_trace(trace).note("summand", summand.to_string()).note("from_level", start)
}

fn numeric_series_verdict(terms: Vec<(usize, f64)>, method: &str, fails: &str) -> Verdict {
    let depth = terms.len();
    let (trend, slope) = series_trend(&terms);
    let sums = partial_sums(&terms);
    let v = match trend {
        SeriesTrend::Diverging => Verdict::evidence(UE_CLAIM, Direction::For, method, sums),
        _ => Verdict::inconclusive(UE_CLAIM, fails).with_trace(sums).note("method", method),
    };
    let v = v.with_depth(depth);
    match slope {
        Some(s) => v.note("tail_slope", s),
        None => v,
    }
}

fn min_sum(d: &BratteliDiagram, o: &UeOptions) -> Result<Verdict> {
    const METHOD: &str = "divergent sum of minimal stochastic entries";
    const FAILS: &str = "the sum of minimal stochastic entries appears finite; the sufficient condition fails";
    if let Some((_, polys)) = constant_rule(d) {
        if let Some(t) = ErsTail::of(d, polys.len()) {
            let k = polys.len();
            let c = polys[0].len();
            let entries =
                (0..k).flat_map(|v| (0..c).map(move |w| (v, w))).map(|(v, w)| t.stochastic(SymIdx::Index(v), SymIdx::Index(w)));
            let m = eventual_min(entries).unwrap();
            if m.is_zero() {
                return Ok(Verdict::inconclusive(UE_CLAIM, "a stochastic entry vanishes identically, so the minimum is 0")
                    .note("method", METHOD));
            }
            return Ok(symbolic_series_verdict(&m, ratfn_series(&m), "degree test on Σ min f_vw", FAILS, t.start, o.depth));
        }
    }
    let (start, end) = level_range(d, o.start, o.depth)?;
    let mut fl = FloatLevels::new(d, start)?;
    let mut terms = vec![];
    while fl.level() <= end {
        let n = fl.level();
        let Some(f) = fl.next_matrix()? else { break };
        terms.push((n, f.data.iter().cloned().fold(f64::INFINITY, f64::min)));
    }
    Ok(numeric_series_verdict(terms, METHOD, FAILS))
}

/// Entry polynomials when every one of them is eventually positive.
fn positive_rule(d: &BratteliDiagram) -> std::result::Result<(usize, Vec<Vec<Poly>>), &'static str> {
    let Some((start, polys)) = constant_rule(d) else {
        return Err("needs a rule diagram of constant shape");
    };
    if polys.iter().flatten().any(|p| p.is_zero()) {
        return Err("an incidence entry vanishes identically");
    }
    Ok((start, polys))
}

fn rf(p: &Poly) -> RatFn {
    RatFn::poly(p.clone())
}

fn phi_sum(d: &BratteliDiagram, o: &UeOptions) -> Result<Verdict> {
    match positive_rule(d) {
        Ok((start, e)) => {
            let (k, c) = (e.len(), e[0].len());
            let mut quads = vec![];
            for i in 0..k {
                for r in 0..k {
                    for j in 0..c {
                        for s in 0..c {
                            if i != r && j != s {
                                quads.push(RatFn::new(&e[i][j] * &e[r][s], &e[r][j] * &e[i][s]));
                            }
                        }
                    }
                }
            }
            let phi = eventual_min(quads).unwrap_or_else(|| RatFn::constant(num_rational::BigRational::one()));
            let series = sqrt_series(&phi);
            let sqrt_trace = |n: usize| phi.eval_f64(n as f64).max(0.0).sqrt();
            let mut acc = 0.0;
            let trace = (start..start + o.depth)
                .map(|n| {
                    acc += sqrt_trace(n);
                    acc
                })
                .collect();
            let v = match series {
                SeriesVerdict::Diverges => Verdict::proved(UE_CLAIM, "degree test on Σ √φ(F̃_n)"),
                SeriesVerdict::Converges => Verdict::inconclusive(UE_CLAIM, "Σ √φ converges; the sufficient condition fails")
                    .note("method", "degree test on Σ √φ(F̃_n)"),
            };
            Ok(v.with_depth(o.depth).with_trace(trace).note("phi", phi.to_string()).note("from_level", start))
        }
        Err(why) => {
            let (start, end) = level_range(d, o.start, o.depth)?;
            if d.constant_rank().is_none() {
                return Err(Error::Rank(format!("phi_sum needs finite rank ({why})")));
            }
            let mut terms = vec![];
            for n in start..=end {
                terms.push((n, tau_phi_sqrt(&d.matrix_f64(n)?)));
            }
            Ok(numeric_series_verdict(terms, "partial sums of √φ(F̃_n)", "Σ √φ appears finite; the sufficient condition fails")
                .note("symbolic_unavailable", why))
        }
    }
}

fn tau_phi_sqrt(m: &FMat) -> f64 {
    super::phi_f64(m).sqrt()
}

fn ratio_sum(d: &BratteliDiagram, o: &UeOptions) -> Result<Verdict> {
    match positive_rule(d) {
        Ok((start, e)) => {
            let lo = eventual_min(e.iter().flatten().map(rf)).unwrap();
            let hi = eventual_max(e.iter().flatten().map(rf)).unwrap();
            let ratio = lo.div(&hi);
            Ok(symbolic_series_verdict(
                &ratio,
                ratfn_series(&ratio),
                "degree test on Σ m̃_n / M̃_n",
                "Σ m̃_n / M̃_n converges; the sufficient condition fails",
                start,
                o.depth,
            ))
        }
        Err(why) => {
            let (start, end) = level_range(d, o.start, o.depth)?;
            if d.constant_rank().is_none() {
                return Err(Error::Rank(format!("ratio_sum needs finite rank ({why})")));
            }
            let mut terms = vec![];
            for n in start..=end {
                let m = d.matrix_f64(n)?;
                let lo = m.data.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = m.data.iter().cloned().fold(0.0, f64::max);
                terms.push((n, lo / hi));
            }
            Ok(numeric_series_verdict(terms, "partial sums of m̃_n / M̃_n", "Σ m̃_n / M̃_n appears finite")
                .note("symbolic_unavailable", why))
        }
    }
}

/// Some power of a square nonnegative matrix is positive (Wielandt bound).
pub(crate) fn is_primitive(m: &IntMatrix) -> bool {
    let k = m.rows();
    if k != m.cols() {
        return false;
    }
    let pat: Vec<bool> = m.pattern();
    let mul = |a: &[bool], b: &[bool]| {
        let mut out = vec![false; k * k];
        for i in 0..k {
            for l in 0..k {
                if a[i * k + l] {
                    for j in 0..k {
                        out[i * k + j] |= b[l * k + j];
                    }
                }
            }
        }
        out
    };
    let mut p = pat.clone();
    for _ in 0..(k * k).saturating_sub(2 * k) + 2 {
        if p.iter().all(|x| *x) {
            return true;
        }
        p = mul(&p, &pat);
    }
    p.iter().all(|x| *x)
}

fn norm_growth(d: &BratteliDiagram, o: &UeOptions) -> Result<Verdict> {
    if let Some(m) = d.stationary_matrix() {
        let method = "stationary diagram: one repeated incidence matrix";
        return Ok(if is_primitive(&m) {
            Verdict::proved(UE_CLAIM, method).note("primitive", true)
        } else {
            Verdict::inconclusive(UE_CLAIM, "the repeated matrix is not primitive").note("method", method)
        }
        .with_depth(1));
    }
    match positive_rule(d) {
        Ok((start, e)) => {
            let total = e.iter().flatten().fold(Poly::zero(), |acc, p| &acc + p);
            let method = "degree of ‖F̃_n‖₁";
            let trace: Vec<f64> = (start..start + o.depth).map(|n| total.eval_f64(n as f64)).collect();
            let v = if total.degree() <= 1 {
                Verdict::proved(UE_CLAIM, method)
            } else {
                Verdict::inconclusive(UE_CLAIM, "‖F̃_n‖₁ grows faster than linearly").note("method", method)
            };
            Ok(v.with_depth(o.depth).with_trace(trace).note("norm", total.to_string()))
        }
        Err(why) => {
            let (start, end) = level_range(d, o.start, o.depth)?;
            if d.constant_rank().is_none() {
                return Err(Error::Rank(format!("norm_growth needs finite rank ({why})")));
            }
            let mut trace = vec![];
            let mut ratio = vec![];
            for n in start..=end {
                let s: BigInt = d.matrix(n)?.entries().iter().sum();
                let x = crate::rational::big_f64(&s);
                trace.push(x);
                ratio.push(x / n as f64);
            }
            let bounded = ratio.len() >= 4 && {
                let half = &ratio[ratio.len() / 2..];
                half.last().unwrap() <= &(1.01 * half[0].max(ratio[0]))
            };
            let v = if bounded {
                Verdict::evidence(UE_CLAIM, Direction::For, "‖F̃_n‖₁ / n bounded on the examined levels", trace)
            } else {
                Verdict::inconclusive(UE_CLAIM, "‖F̃_n‖₁ / n is not visibly bounded").with_trace(trace)
            };
            Ok(v.with_depth(end + 1 - start).note("symbolic_unavailable", why))
        }
    }
}

/// τ of F̃_n ⋯ F̃_m for several starting levels m; UE iff all tend to 0.
fn tau_product(d: &BratteliDiagram, o: &UeOptions) -> Result<Verdict> {
    if d.constant_rank().is_none() {
        return Err(Error::Rank("tau_product needs a diagram of finite rank".into()));
    }
    let (start, end) = level_range(d, o.start, o.depth)?;
    let span = end + 1 - start;
    let mut starts = vec![start, start + span / 4, start + span / 2];
    starts.dedup();
    let mut traces: Vec<(usize, Vec<f64>)> = vec![];
    for &m in &starts {
        let mut p: Option<FMat> = None;
        let mut tr = vec![];
        for n in m..=end {
            let mut f = d.matrix_f64(n)?;
            f.normalize_rows();
            let mut q = match p {
                None => f,
                Some(prev) => f.mul(&prev),
            };
            q.normalize_rows();
            let pos = q.data.iter().all(|x| *x > 0.0);
            if pos {
                tr.push(tau_f64(&q));
            }
            p = Some(q);
        }
        if tr.is_empty() {
            return Err(Error::Primitivity(format!(
                "products of incidence matrices from level {m} stay non-positive up to level {end}"
            )));
        }
        traces.push((m, tr));
    }
    let decaying = |tr: &Vec<f64>| {
        let last = *tr.last().unwrap();
        let mid = tr[tr.len() / 2];
        last < 1e-9 || last < 0.8 * mid
    };
    let all = traces.iter().all(|(_, t)| decaying(t));
    let (_, shown) = traces.last().unwrap().clone();
    let mut v = if all {
        Verdict::evidence(UE_CLAIM, Direction::For, "τ of incidence products decreasing to 0", shown)
    } else {
        Verdict::evidence(UE_CLAIM, Direction::Against, "τ of incidence products bounded away from 0", shown)
    };
    v = v.with_depth(span).note("start_levels", json!(starts));
    let finals: Vec<f64> = traces.iter().map(|(_, t)| *t.last().unwrap()).collect();
    Ok(v.note("final_tau", json!(finals)))
}
