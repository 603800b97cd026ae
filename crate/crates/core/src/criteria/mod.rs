//! Criteria for unique ergodicity and for exact counts of ergodic measures.
//!
//! Rule diagrams with polynomial entries get exact verdicts from degree and
//! Gauss tests; everything else gets numeric evidence with its trace.

mod blocks;
mod chains;
mod contraction;
mod determinant;
mod ue;

pub use blocks::{blocks_analysis, BlockPartition, BlocksOptions, BlocksReport, VanishingBlock};
pub use chains::{chain_analysis, ChainOptions, ChainReport};
pub use contraction::{
    contraction_stats, phi, phi_f64, phi_int, projective_metric, tau_f64, tau_of_phi, ContractionStats,
};
pub use determinant::{exact_count_determinant, DetOptions};
pub use ue::{unique_ergodicity, Criterion, UeOptions, UE_CLAIM};
pub(crate) use blocks::{series_evidence, to_zero_evidence};
pub(crate) use ue::is_primitive;

use crate::diagram::{BratteliDiagram, RuleKind};
use crate::error::{Error, Result};
use crate::matrix::FMat;
use crate::poly::{Poly, RatFn};

/// Float stochastic matrices F_n, F_{n+1}, ... with heights carried along.
pub(crate) struct FloatLevels<'a> {
    d: &'a BratteliDiagram,
    n: usize,
    h: Vec<f64>,
}

impl<'a> FloatLevels<'a> {
    pub(crate) fn new(d: &'a BratteliDiagram, start: usize) -> Result<FloatLevels<'a>> {
        Ok(FloatLevels { d, n: start, h: d.heights_f64_normalized(start)? })
    }

    /// Level of the next matrix returned.
    pub(crate) fn level(&self) -> usize {
        self.n
    }

    /// Next stochastic matrix, None once a finite diagram is exhausted.
    pub(crate) fn next_matrix(&mut self) -> Result<Option<FMat>> {
        if self.d.max_matrix_level().is_some_and(|m| self.n > m) {
            return Ok(None);
        }
        let mut m = self.d.matrix_f64(self.n)?;
        let mut s = vec![0.0; m.rows];
        for v in 0..m.rows {
            for w in 0..m.cols {
                let x = m.data[v * m.cols + w] * self.h[w];
                m.data[v * m.cols + w] = x;
                s[v] += x;
            }
        }
        for v in 0..m.rows {
            if s[v] > 0.0 {
                for x in &mut m.data[v * m.cols..(v + 1) * m.cols] {
                    *x /= s[v];
                }
            }
        }
        let top = s.iter().cloned().fold(0.0, f64::max);
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::Convergence(format!("height normalization failed at level {}", self.n)));
        }
        self.h = s.into_iter().map(|x| x / top).collect();
        self.n += 1;
        Ok(Some(m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SeriesTrend {
    Diverging,
    Converging,
    Unclear,
}

/// Least-squares slope of log t against log n over the upper half of the terms.
pub(crate) fn tail_slope(terms: &[(usize, f64)]) -> Option<f64> {
    let half = &terms[terms.len() / 2..];
    let pts: Vec<(f64, f64)> =
        half.iter().filter(|(n, t)| *t > 0.0 && *n > 0).map(|(n, t)| ((*n as f64).ln(), t.ln())).collect();
    if pts.len() < 4 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Guess whether Σ t_n converges from the decay of the tail terms.
pub(crate) fn series_trend(terms: &[(usize, f64)]) -> (SeriesTrend, Option<f64>) {
    let half = &terms[terms.len() / 2..];
    if !half.is_empty() && half.iter().all(|(_, t)| *t <= 1e-300) {
        return (SeriesTrend::Converging, None);
    }
    match tail_slope(terms) {
        Some(s) if s >= -1.05 => (SeriesTrend::Diverging, Some(s)),
        Some(s) if s <= -1.3 => (SeriesTrend::Converging, Some(s)),
        s => (SeriesTrend::Unclear, s),
    }
}

pub(crate) fn partial_sums(terms: &[(usize, f64)]) -> Vec<f64> {
    let mut acc = 0.0;
    terms
        .iter()
        .map(|(_, t)| {
            acc += t;
            acc
        })
        .collect()
}

pub(crate) fn eventual_min(fs: impl IntoIterator<Item = RatFn>) -> Option<RatFn> {
    fs.into_iter().reduce(|a, b| if b.eventual_cmp(&a) < 0 { b } else { a })
}

pub(crate) fn eventual_max(fs: impl IntoIterator<Item = RatFn>) -> Option<RatFn> {
    fs.into_iter().reduce(|a, b| if b.eventual_cmp(&a) > 0 { b } else { a })
}

/// Entry polynomials of a constant-shape rule and the first level they describe.
pub(crate) fn constant_rule(d: &BratteliDiagram) -> Option<(usize, Vec<Vec<Poly>>)> {
    let r = d.rule()?;
    let RuleKind::Constant { entries } = &r.kind else { return None };
    let polys = entries.iter().map(|row| row.iter().map(|e| e.poly().clone()).collect()).collect();
    Some((r.from_level.max(d.prefix_len() + 1), polys))
}

/// Last level usable from `start` for `depth` matrices, clipped to finite diagrams.
pub(crate) fn level_range(d: &BratteliDiagram, start: usize, depth: usize) -> Result<(usize, usize)> {
    if start == 0 {
        return Err(Error::Argument("levels are numbered from 1".into()));
    }
    let mut end = start + depth.max(1) - 1;
    if let Some(m) = d.max_matrix_level() {
        if start > m {
            return Err(Error::Depth { requested: start, available: m });
        }
        end = end.min(m);
    }
    Ok((start, end))
}
