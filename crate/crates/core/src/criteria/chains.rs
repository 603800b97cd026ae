//! Chains of blocks for diagrams whose partitions grow with the level.
//!
//! Block j of level n + 1 hangs below block i of level n when every row of
//! block j sends more than half of its stochastic mass into block i. A chain
//! is a path in the resulting forest; chains whose subdiagram carries a
//! single path from some level on only support atoms and are discarded.

use num_traits::{One, Zero};
use serde::Serialize;
use serde_json::json;

use super::blocks::BlockPartition;
use super::{eventual_max, partial_sums, series_trend, SeriesTrend};
use crate::asymptotic::{ratfn_series, SeriesVerdict};
use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::ers::ErsTail;
use crate::matrix::RatMatrix;
use crate::poly::RatFn;
use crate::rational::{q, q_f64, Q};
use crate::verdict::{Direction, Verdict};

#[derive(Clone, Debug)]
pub struct ChainOptions {
    pub depth: usize,
    /// First level of the chains; chosen automatically when None.
    pub start: Option<usize>,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { depth: 10, start: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub start: usize,
    pub depth: usize,
    /// Chain prefixes ending at each level start, …, start + depth.
    pub prefix_counts: Vec<usize>,
    /// Surviving chain prefixes (block indices, 1-based, per level), at most 64 listed.
    pub chains: Vec<Vec<usize>>,
    pub chain_count: usize,
    pub atomic_discarded: usize,
    /// Blocks without a majority parent, per level after the first.
    pub orphans: Vec<usize>,
    pub c1: Verdict,
    pub d1: Verdict,
    pub e1_1: Verdict,
    pub e1_2: Verdict,
    pub count_claim: Verdict,
}

struct Level {
    blocks: Vec<Vec<usize>>,
    rest: Vec<usize>,
}

fn load_levels(d: &BratteliDiagram, p: &BlockPartition, from: usize, to: usize) -> Result<Vec<Level>> {
    (from..=to)
        .map(|n| {
            let len = d.vertex_count(n)?;
            let blocks = p.at(n, len)?;
            let rest = BlockPartition::rest(&blocks, len);
            Ok(Level { blocks, rest })
        })
        .collect()
}

fn mass(f: &RatMatrix, v: usize, cols: &[usize]) -> Q {
    cols.iter().fold(Q::zero(), |acc, &w| acc + f.get(v, w))
}

/// Majority parent of every block of the lower level.
fn parents(f: &RatMatrix, up: &Level, down: &Level) -> Vec<Option<usize>> {
    let half = q(1, 2);
    down.blocks
        .iter()
        .map(|bj| {
            up.blocks.iter().position(|bi| bj.iter().all(|&v| mass(f, v, bi) > half))
        })
        .collect()
}

fn auto_start(d: &BratteliDiagram, p: &BlockPartition) -> Result<usize> {
    let last = d.max_matrix_level().unwrap_or(usize::MAX).min(8);
    for s in 1..=last {
        let lv = load_levels(d, p, s, s + 1)?;
        let f = d.stochastic(s)?;
        if parents(&f, &lv[0], &lv[1]).iter().all(Option::is_some) {
            return Ok(s);
        }
    }
    Ok(1)
}

/// Leakage of the singleton-block chain structure as a rational function, for ERS rules.
fn symbolic_leakage(d: &BratteliDiagram, p: &BlockPartition) -> Option<(usize, RatFn)> {
    if *p != BlockPartition::Singletons {
        return None;
    }
    let t = ErsTail::of(d, 3)?;
    let r = &t.row_sum;
    let mut leaks = vec![];
    for row in t.rows() {
        let top = eventual_max(t.rule.sym_row_entries(row).into_iter().map(RatFn::poly))?;
        let share = top.div(&RatFn::poly(r.clone()));
        // the majority parent must be unambiguous for large n
        if share.limit().is_none_or(|l| l <= q(1, 2)) {
            return None;
        }
        leaks.push(RatFn::constant(Q::one()).sub(&share));
    }
    Some((t.start, eventual_max(leaks)?))
}

pub fn chain_analysis(d: &BratteliDiagram, p: &BlockPartition, o: &ChainOptions) -> Result<ChainReport> {
    let s = match o.start {
        Some(s) if s >= 1 => s,
        Some(_) => return Err(Error::Argument("levels are numbered from 1".into())),
        None => auto_start(d, p)?,
    };
    let end = s + o.depth;
    if let Some(m) = d.max_vertex_level() {
        if end > m {
            return Err(Error::Depth { requested: end, available: m });
        }
    }
    let levels = load_levels(d, p, s, end)?;
    let mats: Vec<RatMatrix> = (s..end).map(|n| d.stochastic(n)).collect::<Result<_>>()?;
    let links: Vec<Vec<Option<usize>>> = (0..o.depth).map(|k| parents(&mats[k], &levels[k], &levels[k + 1])).collect();

    // alive[k][j]: block j of level s + k descends from level s
    let mut alive: Vec<Vec<bool>> = vec![vec![true; levels[0].blocks.len()]];
    for k in 0..o.depth {
        let prev = &alive[k];
        alive.push(links[k].iter().map(|pj| pj.is_some_and(|i| prev[i])).collect());
    }
    let prefix_counts: Vec<usize> = alive.iter().map(|a| a.iter().filter(|x| **x).count()).collect();
    let orphans: Vec<usize> = links.iter().map(|l| l.iter().filter(|x| x.is_none()).count()).collect();

    let path_to = |j: usize| -> Vec<usize> {
        let mut out = vec![j];
        let mut cur = j;
        for k in (0..o.depth).rev() {
            cur = links[k][cur].unwrap();
            out.push(cur);
        }
        out.reverse();
        out
    };

    // a chain is atomic if its subdiagram has a single path through each
    // vertex over the second half of the range
    let mid = o.depth / 2;
    let mut survivors = vec![];
    let mut atomic = 0usize;
    for (j, ok) in alive[o.depth].iter().enumerate() {
        if !ok {
            continue;
        }
        let path = path_to(j);
        let mut paths: Vec<num_bigint::BigInt> = vec![num_bigint::BigInt::one(); levels[mid].blocks[path[mid]].len()];
        for k in mid..o.depth {
            let m = d.matrix(s + k)?;
            let (rows, cols) = (&levels[k + 1].blocks[path[k + 1]], &levels[k].blocks[path[k]]);
            paths = rows.iter().map(|&v| cols.iter().zip(&paths).map(|(&w, h)| m.get(v, w) * h).sum()).collect();
        }
        if paths.iter().all(|h| h.is_one()) {
            atomic += 1;
        } else {
            survivors.push(path);
        }
    }
    let chain_count = survivors.len();

    // (c1)
    let c1_claim = "(c1) Σ max leakage of child blocks out of their parent block < ∞";
    let c1 = if let Some((from, leak)) = symbolic_leakage(d, p) {
        let method = "degree test on the maximal leakage";
        let v = match ratfn_series(&leak) {
            SeriesVerdict::Converges => Verdict::proved(c1_claim, method),
            SeriesVerdict::Diverges => Verdict::refuted(c1_claim, method),
        };
        let terms: Vec<(usize, f64)> = (from..from + o.depth).map(|n| (n, leak.eval_f64(n as f64))).collect();
        v.with_depth(o.depth).with_trace(partial_sums(&terms)).note("summand", leak.to_string())
    } else {
        let terms: Vec<(usize, f64)> = (0..o.depth)
            .map(|k| {
                let worst = links[k]
                    .iter()
                    .enumerate()
                    .filter_map(|(j, pi)| pi.map(|i| (j, i)))
                    .flat_map(|(j, i)| {
                        levels[k + 1].blocks[j].iter().map(move |&v| (v, i))
                    })
                    .map(|(v, i)| q_f64(&(Q::one() - mass(&mats[k], v, &levels[k].blocks[i]))))
                    .fold(0.0, f64::max);
                (s + k, worst)
            })
            .collect();
        let (trend, slope) = series_trend(&terms);
        let tr = partial_sums(&terms);
        let v = match trend {
            SeriesTrend::Converging => Verdict::evidence(c1_claim, Direction::For, "partial sums level off", tr),
            SeriesTrend::Diverging => Verdict::evidence(c1_claim, Direction::Against, "partial sums keep growing", tr),
            SeriesTrend::Unclear => Verdict::inconclusive(c1_claim, "borderline decay").with_trace(tr),
        };
        let v = v.with_depth(o.depth);
        match slope {
            Some(x) => v.note("tail_slope", x),
            None => v,
        }
    };

    // (d1)
    let d1_claim = "(d1) row differences inside blocks tend to 0";
    let singletons = levels.iter().all(|l| l.blocks.iter().all(|b| b.len() == 1));
    let d1 = if singletons {
        Verdict::proved(d1_claim, "single-vertex blocks")
    } else {
        let trace: Vec<f64> = (0..o.depth)
            .map(|k| {
                let f = &mats[k];
                let mut best = 0.0f64;
                for b in &levels[k + 1].blocks {
                    for (x, &v1) in b.iter().enumerate() {
                        for &v2 in &b[x + 1..] {
                            let diff: f64 = (0..f.cols()).map(|w| q_f64(&(f.get(v1, w) - f.get(v2, w))).abs()).sum();
                            best = best.max(diff);
                        }
                    }
                }
                best
            })
            .collect();
        let last = *trace.last().unwrap_or(&0.0);
        let mid = trace.get(trace.len() / 2).copied().unwrap_or(last);
        let v = if last < 1e-6 || (last < 0.5 * mid && last < 0.1) {
            Verdict::evidence(d1_claim, Direction::For, "maximal row difference inside blocks", trace)
        } else {
            Verdict::evidence(d1_claim, Direction::Against, "maximal row difference inside blocks", trace)
        };
        v.with_depth(o.depth)
    };

    // (e1.1), (e1.2)
    let e11_claim = "(e1.1) outside rows send almost all mass into blocks";
    let e12_claim = "(e1.2) outside rows keep every block mass below 1 - C";
    let rest_empty = levels.iter().all(|l| l.rest.is_empty());
    let (e1_1, e1_2) = if rest_empty {
        (Verdict::proved(e11_claim, "V_{n,0} is empty"), Verdict::proved(e12_claim, "V_{n,0} is empty"))
    } else {
        let mut gap = vec![];
        let mut top = vec![];
        for k in 0..o.depth {
            let f = &mats[k];
            let inside: Vec<usize> = levels[k].blocks.iter().flatten().copied().collect();
            let rows = &levels[k + 1].rest;
            gap.push(rows.iter().map(|&v| 1.0 - q_f64(&mass(f, v, &inside))).fold(0.0, f64::max));
            top.push(
                rows.iter()
                    .flat_map(|&v| levels[k].blocks.iter().map(move |b| (v, b)))
                    .map(|(v, b)| q_f64(&mass(f, v, b)))
                    .fold(0.0, f64::max),
            );
        }
        let last = *gap.last().unwrap();
        let e11 = if last < 1e-3 {
            Verdict::evidence(e11_claim, Direction::For, "mass of outside rows left outside the blocks", gap)
        } else {
            Verdict::evidence(e11_claim, Direction::Against, "mass of outside rows left outside the blocks", gap)
        };
        let tail_max = top[top.len() / 2..].iter().cloned().fold(0.0, f64::max);
        let e12 = if tail_max < 0.99 {
            Verdict::evidence(e12_claim, Direction::For, "largest block mass of outside rows", top)
        } else {
            Verdict::evidence(e12_claim, Direction::Against, "largest block mass of outside rows", top)
        };
        (e11.with_depth(o.depth), e12.with_depth(o.depth))
    };

    let all_hold = [&c1, &d1, &e1_1, &e1_2].iter().all(|v| v.leans_true());
    let growing = prefix_counts.len() >= 3 && prefix_counts[prefix_counts.len() / 2..].windows(2).all(|w| w[1] > w[0]);
    let count_claim = if !all_hold {
        Verdict::inconclusive("ergodic measures correspond to chains", "some chain condition fails or is undecided")
            .note("chains", chain_count)
    } else if growing && chain_count > 0 {
        Verdict::evidence(
            "countably many ergodic invariant probability measures",
            Direction::For,
            "chain prefixes keep multiplying with the depth",
            prefix_counts.iter().map(|&c| c as f64).collect(),
        )
        .note("chains", chain_count)
    } else {
        let claim = format!("exactly {chain_count} ergodic invariant probability measures");
        Verdict::evidence(&claim, Direction::For, "chain conditions hold; one measure per chain", vec![chain_count as f64])
            .note("chains", chain_count)
    };

    Ok(ChainReport {
        start: s,
        depth: o.depth,
        prefix_counts,
        chains: survivors.iter().take(64).map(|c| c.iter().map(|x| x + 1).collect()).collect(),
        chain_count,
        atomic_discarded: atomic,
        orphans,
        c1,
        d1,
        e1_1,
        e1_2,
        count_claim: count_claim.with_depth(o.depth).note("start_level", json!(s)),
    })
}
