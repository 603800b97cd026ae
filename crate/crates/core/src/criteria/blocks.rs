//! Finite-rank measure counting through vertex blocks.

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use super::{
    constant_rule, eventual_max, eventual_min, level_range, partial_sums, series_trend, FloatLevels, SeriesTrend,
};
use crate::asymptotic::{ratfn_series, SeriesVerdict};
use crate::diagram::{BratteliDiagram, SymIdx};
use crate::error::{Error, Result};
use crate::ers::{ColSel, ErsTail};
use crate::matrix::FMat;
use crate::poly::RatFn;
use crate::rational::{q_f64, Q};
use crate::verdict::{Direction, Verdict};

/// Blocks V_{n,1}, …, V_{n,l}; the uncovered vertices form V_{n,0}.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockPartition {
    /// Every vertex is its own block and V_{n,0} is empty.
    Singletons,
    /// The entry with the largest level ≤ n applies at level n.
    Levels(Vec<(usize, Vec<Vec<usize>>)>),
}

impl BlockPartition {
    pub fn constant(sets: Vec<Vec<usize>>) -> BlockPartition {
        BlockPartition::Levels(vec![(1, sets)])
    }

    /// `{"blocks": [{"level": n, "sets": [[…]…]}…]}` or `{"singletons": true}`.
    pub fn from_json(v: &Value) -> Result<BlockPartition> {
        let bad = |m: &str| Error::Schema(format!("partition: {m}"));
        let obj = v.as_object().ok_or_else(|| bad("expected an object"))?;
        if obj.get("singletons").and_then(Value::as_bool) == Some(true) {
            return Ok(BlockPartition::Singletons);
        }
        let arr = obj.get("blocks").and_then(Value::as_array).ok_or_else(|| bad("missing \"blocks\" array"))?;
        let mut out = vec![];
        for e in arr {
            let level = e.get("level").and_then(Value::as_u64).ok_or_else(|| bad("entry without integer \"level\""))?;
            let sets = e.get("sets").and_then(Value::as_array).ok_or_else(|| bad("entry without \"sets\""))?;
            let mut ss = vec![];
            for s in sets {
                let s = s.as_array().ok_or_else(|| bad("a set must be an array"))?;
                ss.push(
                    s.iter()
                        .map(|x| x.as_u64().map(|x| x as usize).ok_or_else(|| bad("vertex ids are nonnegative integers")))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            out.push((level as usize, ss));
        }
        if out.is_empty() {
            return Err(bad("no entries"));
        }
        out.sort_by_key(|e| e.0);
        if out.windows(2).any(|w| w[0].0 == w[1].0) || out[0].0 == 0 {
            return Err(bad("levels must be distinct and at least 1"));
        }
        Ok(BlockPartition::Levels(out))
    }

    pub fn to_json(&self) -> Value {
        match self {
            BlockPartition::Singletons => json!({ "singletons": true }),
            BlockPartition::Levels(l) => {
                json!({ "blocks": l.iter().map(|(n, s)| json!({ "level": n, "sets": s })).collect::<Vec<_>>() })
            }
        }
    }

    /// Level from which the description no longer changes.
    pub fn stable_from(&self) -> usize {
        match self {
            BlockPartition::Singletons => 1,
            BlockPartition::Levels(l) => l.last().unwrap().0,
        }
    }

    /// Validated blocks at level n of a level with `len` vertices.
    pub fn at(&self, n: usize, len: usize) -> Result<Vec<Vec<usize>>> {
        let sets = match self {
            BlockPartition::Singletons => return Ok((0..len).map(|v| vec![v]).collect()),
            BlockPartition::Levels(l) => {
                let Some((_, s)) = l.iter().rev().find(|(k, _)| *k <= n) else {
                    return Err(Error::Partition(format!("no blocks given for level {n}")));
                };
                s
            }
        };
        let mut seen = vec![false; len];
        let mut out = vec![];
        for (i, s) in sets.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::Partition(format!("block {} is empty at level {n}", i + 1)));
            }
            let mut s = s.clone();
            s.sort_unstable();
            for &v in &s {
                if v >= len {
                    return Err(Error::Partition(format!("vertex {v} of block {} exceeds |V_{n}| = {len}", i + 1)));
                }
                if seen[v] {
                    return Err(Error::Partition(format!("vertex {v} lies in two blocks at level {n}")));
                }
                seen[v] = true;
            }
            out.push(s);
        }
        if out.is_empty() {
            return Err(Error::Partition(format!("no blocks at level {n}")));
        }
        Ok(out)
    }

    /// V_{n,0} for the given blocks.
    pub fn rest(blocks: &[Vec<usize>], len: usize) -> Vec<usize> {
        let mut inb = vec![false; len];
        blocks.iter().flatten().for_each(|&v| inb[v] = true);
        (0..len).filter(|&v| !inb[v]).collect()
    }
}

#[derive(Clone, Debug)]
pub struct BlocksOptions {
    pub depth: usize,
    pub start: usize,
    /// Largest candidate set scanned for vanishing blocks.
    pub max_vanishing_size: usize,
}

impl Default for BlocksOptions {
    fn default() -> Self {
        BlocksOptions { depth: 40, start: 1, max_vanishing_size: 3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingBlock {
    pub set: Vec<usize>,
    pub verdict: Verdict,
    /// Estimated C₁ in min_v Σ_{u∉U} f_vu ≥ C₁ max_v Σ_{u∉U} f_vu.
    pub regularity: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlocksReport {
    pub rank: usize,
    pub blocks: usize,
    pub sizes: Vec<usize>,
    pub a: Verdict,
    pub b: Verdict,
    pub c: Vec<Verdict>,
    pub d: Vec<Verdict>,
    pub e1: Verdict,
    pub e2: Verdict,
    pub vanishing: Vec<VanishingBlock>,
    pub count_claim: Verdict,
}

fn idx(v: &[usize]) -> Vec<SymIdx> {
    v.iter().map(|&i| SymIdx::Index(i)).collect()
}

/// Per-level float data shared by the numeric checks.
struct Numeric {
    levels: Vec<usize>,
    mats: Vec<FMat>,
}

fn numeric_levels(d: &BratteliDiagram, start: usize, end: usize) -> Result<Numeric> {
    let mut fl = FloatLevels::new(d, start)?;
    let mut levels = vec![];
    let mut mats = vec![];
    while fl.level() <= end {
        let n = fl.level();
        let Some(m) = fl.next_matrix()? else { break };
        levels.push(n);
        mats.push(m);
    }
    Ok(Numeric { levels, mats })
}

fn mass(f: &FMat, v: usize, cols: &[usize]) -> f64 {
    cols.iter().map(|&w| f.get(v, w)).sum()
}

pub(crate) fn series_evidence(claim: &str, terms: Vec<(usize, f64)>) -> Verdict {
    let (trend, slope) = series_trend(&terms);
    let n = terms.len();
    let tr = partial_sums(&terms);
    let v = match trend {
        SeriesTrend::Converging => Verdict::evidence(claim, Direction::For, "partial sums level off", tr),
        SeriesTrend::Diverging => Verdict::evidence(claim, Direction::Against, "partial sums keep growing", tr),
        SeriesTrend::Unclear => Verdict::inconclusive(claim, "borderline decay of the summands").with_trace(tr),
    };
    let v = v.with_depth(n);
    match slope {
        Some(s) => v.note("tail_slope", s),
        None => v,
    }
}

/// Evidence that a nonnegative sequence tends to 0.
pub(crate) fn to_zero_evidence(claim: &str, trace: Vec<f64>, method: &str) -> Verdict {
    let n = trace.len();
    let last = *trace.last().unwrap_or(&0.0);
    let mid = trace.get(n / 2).copied().unwrap_or(last);
    let v = if last < 1e-6 || (last < 0.5 * mid && last < 0.1) {
        Verdict::evidence(claim, Direction::For, method, trace)
    } else if last > 0.9 * mid {
        Verdict::evidence(claim, Direction::Against, method, trace)
    } else {
        Verdict::inconclusive(claim, "slow decay").with_trace(trace)
    };
    v.with_depth(n)
}

pub fn blocks_analysis(d: &BratteliDiagram, p: &BlockPartition, o: &BlocksOptions) -> Result<BlocksReport> {
    let k = d.constant_rank().ok_or_else(|| Error::Rank("block analysis needs a diagram of finite rank".into()))?;
    let (start, end) = level_range(d, o.start, o.depth)?;
    let top = end + 1;
    let check_to = top.max(p.stable_from());
    let mut per_level = vec![];
    for n in start..=check_to {
        let len = d.vertex_count(n).unwrap_or(k);
        per_level.push(p.at(n, len)?);
    }
    let blocks = per_level.last().unwrap().clone();
    let l = blocks.len();
    let rest = BlockPartition::rest(&blocks, k);
    let shape = |b: &Vec<Vec<usize>>| -> Vec<usize> {
        let mut s: Vec<usize> = b.iter().map(Vec::len).collect();
        s.push(k - b.iter().map(Vec::len).sum::<usize>());
        s
    };
    let sizes = shape(&blocks);

    let a = Verdict::proved("(a) every block is nonempty", "partition data checked on every level").with_depth(per_level.len());
    let b_claim = "(b) block sizes do not depend on the level";
    let b = match per_level.iter().position(|x| shape(x) != sizes || x.len() != l) {
        None => Verdict::proved(b_claim, "partition data checked on every level"),
        Some(i) => Verdict::refuted(b_claim, "partition data").note("level", start + i),
    }
    .with_depth(per_level.len());

    let sym = constant_rule(d).and_then(|_| ErsTail::of(d, k));
    let num = numeric_levels(d, start.max(p.stable_from()), end.max(p.stable_from()))?;
    let blocks_at = |n: usize| -> &Vec<Vec<usize>> { &per_level[(n - start).min(per_level.len() - 1)] };

    // (c) leakage out of each block is summable
    let mut c = vec![];
    for j in 0..l {
        let claim = format!("(c) block {}: Σ (1 - min_v Σ_w∈block f_vw) < ∞", j + 1);
        let v = if let Some(t) = &sym {
            let set = idx(&blocks[j]);
            let term = eventual_max(blocks[j].iter().map(|&v| t.stochastic_sum(SymIdx::Index(v), &ColSel::Complement(set.clone()))))
                .unwrap();
            let method = "degree test on the block leakage";
            let mut v = match (term.is_zero(), ratfn_series(&term)) {
                (true, _) | (_, SeriesVerdict::Converges) => Verdict::proved(&claim, method),
                _ => Verdict::refuted(&claim, method),
            };
            let tr: Vec<(usize, f64)> = (t.start..t.start + o.depth).map(|n| (n, term.eval_f64(n as f64))).collect();
            v = v.with_trace(partial_sums(&tr)).with_depth(o.depth);
            v.note("summand", term.to_string())
        } else {
            let terms = num
                .levels
                .iter()
                .zip(&num.mats)
                .map(|(&n, f)| {
                    let (rows, cols) = (&blocks_at(n + 1)[j], &blocks_at(n)[j]);
                    let m = rows.iter().map(|&v| mass(f, v, cols)).fold(f64::INFINITY, f64::min);
                    (n, (1.0 - m).max(0.0))
                })
                .collect();
            series_evidence(&claim, terms)
        };
        c.push(v);
    }

    // (d) rows inside a block become identical
    let mut dv = vec![];
    for j in 0..l {
        let claim = format!("(d) block {}: row differences tend to 0", j + 1);
        let v = if blocks[j].len() == 1 {
            Verdict::proved(&claim, "single-vertex block")
        } else if let Some(t) = &sym {
            let mut ok = true;
            for (x, &v1) in blocks[j].iter().enumerate() {
                for &v2 in &blocks[j][x + 1..] {
                    for w in 0..k {
                        let diff = t.stochastic(SymIdx::Index(v1), SymIdx::Index(w)).sub(&t.stochastic(SymIdx::Index(v2), SymIdx::Index(w)));
                        if diff.limit().is_none_or(|q| !q.is_zero()) {
                            ok = false;
                        }
                    }
                }
            }
            let method = "limits of stochastic entry differences";
            if ok {
                Verdict::proved(&claim, method)
            } else {
                Verdict::refuted(&claim, method)
            }
        } else {
            let trace = num
                .levels
                .iter()
                .zip(&num.mats)
                .map(|(&n, f)| {
                    let rows = &blocks_at(n + 1)[j];
                    let mut best = 0.0f64;
                    for (x, &v1) in rows.iter().enumerate() {
                        for &v2 in &rows[x + 1..] {
                            best = best.max((0..f.cols).map(|w| (f.get(v1, w) - f.get(v2, w)).abs()).sum());
                        }
                    }
                    best
                })
                .collect();
            to_zero_evidence(&claim, trace, "maximal row difference inside the block")
        };
        dv.push(v);
    }

    let rest_empty = per_level.iter().enumerate().all(|(i, b)| {
        let len = d.vertex_count(start + i).unwrap_or(k);
        BlockPartition::rest(b, len).is_empty()
    });

    let e1_claim = "(e1) simplices spanned by block barycentres and outside vertices collapse";
    let e1 = if rest_empty {
        Verdict::proved(e1_claim, "V_{n,0} is empty")
    } else {
        e1_volumes(d, p, start, end, l, e1_claim)?
    };

    let e2_claim = "(e2) outside vertices keep mass bounded away from 1 in every block";
    let e2 = if rest_empty {
        Verdict::proved(e2_claim, "V_{n,0} is empty")
    } else if let Some(t) = &sym {
        let mut worst = Q::zero();
        for &v in &rest {
            for bj in &blocks {
                let lim = t.stochastic_sum(SymIdx::Index(v), &ColSel::Set(idx(bj))).limit().unwrap_or_else(Q::one);
                if lim > worst {
                    worst = lim;
                }
            }
        }
        let method = "limits of block masses of outside rows";
        let v = if worst < Q::one() { Verdict::proved(e2_claim, method) } else { Verdict::refuted(e2_claim, method) };
        v.note("sup_limit", q_f64(&worst))
    } else {
        let trace: Vec<f64> = num
            .levels
            .iter()
            .zip(&num.mats)
            .map(|(&n, f)| {
                let rows = BlockPartition::rest(blocks_at(n + 1), f.rows);
                blocks_at(n).iter().flat_map(|bj| rows.iter().map(move |&v| mass(f, v, bj))).fold(0.0, f64::max)
            })
            .collect();
        let tail_max = trace[trace.len() / 2..].iter().cloned().fold(0.0, f64::max);
        let v = if tail_max < 0.99 {
            Verdict::evidence(e2_claim, Direction::For, "largest block mass of outside rows", trace)
        } else {
            Verdict::evidence(e2_claim, Direction::Against, "largest block mass of outside rows", trace)
        };
        v.note("tail_max", tail_max)
    };

    let vanishing = scan_vanishing(k, o, sym.as_ref(), &num)?;

    let count = format!("exactly {l} ergodic invariant probability measures");
    let parts: Vec<&Verdict> = [&a, &b, &e1, &e2].into_iter().chain(c.iter()).chain(dv.iter()).collect();
    let nonsingular = match &sym {
        Some(_) => {
            let (_, polys) = constant_rule(d).unwrap();
            !super::determinant::poly_det(&polys).is_zero()
        }
        None => false,
    };
    let count_claim = if k >= 2 && nonsingular && parts.iter().all(|v| v.is_proved()) {
        Verdict::proved(&count, "block conditions (a)-(e2) with eventually nonsingular matrices")
    } else if parts.iter().all(|v| v.leans_true()) {
        Verdict::evidence(&count, Direction::For, "block conditions (a)-(e2) hold or are evidenced", vec![])
    } else {
        Verdict::inconclusive(&count, "some block condition fails or is undecided")
    };

    Ok(BlocksReport { rank: k, blocks: l, sizes, a, b, c, d: dv, e1, e2, vanishing, count_claim })
}

/// l-volume of the simplex with the given vertices.
fn simplex_volume(pts: &[Vec<f64>]) -> f64 {
    let base = pts.last().unwrap();
    let l = pts.len() - 1;
    if l == 0 {
        return 0.0;
    }
    let e: Vec<Vec<f64>> = pts[..l].iter().map(|p| p.iter().zip(base).map(|(a, b)| a - b).collect()).collect();
    let g = DMatrix::from_fn(l, l, |i, j| e[i].iter().zip(&e[j]).map(|(a, b)| a * b).sum::<f64>());
    let fact: f64 = (1..=l).map(|x| x as f64).product();
    g.determinant().max(0.0).sqrt() / fact
}

fn e1_volumes(
    d: &BratteliDiagram,
    p: &BlockPartition,
    start: usize,
    end: usize,
    l: usize,
    claim: &str,
) -> Result<Verdict> {
    // rows of G = F_{n-1} ⋯ F_1 are the vectors y^(n)(w) in Δ^(1)
    let mut fl = FloatLevels::new(d, 1)?;
    let mut g = FMat::identity(d.vertex_count(1)?);
    let mut trace = vec![];
    for n in 2..=end + 1 {
        let Some(f) = fl.next_matrix()? else { break };
        g = f.mul(&g);
        if n < start.max(2) {
            continue;
        }
        let blocks = p.at(n, g.rows)?;
        if blocks.len() != l {
            continue;
        }
        let rest = BlockPartition::rest(&blocks, g.rows);
        let bary: Vec<Vec<f64>> = blocks
            .iter()
            .map(|b| (0..g.cols).map(|c| b.iter().map(|&w| g.get(w, c)).sum::<f64>() / b.len() as f64).collect())
            .collect();
        let worst = rest
            .iter()
            .map(|&w| {
                let mut pts = bary.clone();
                pts.push(g.row(w).to_vec());
                simplex_volume(&pts)
            })
            .fold(0.0, f64::max);
        trace.push(worst);
    }
    if trace.is_empty() {
        return Ok(Verdict::inconclusive(claim, "no level with outside vertices in range"));
    }
    Ok(to_zero_evidence(claim, trace, "largest simplex volume over outside vertices"))
}

fn subsets(k: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    for mask in 1u64..(1u64 << k) - 1 {
        let s: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        if s.len() <= max {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

fn scan_vanishing(
    k: usize,
    o: &BlocksOptions,
    sym: Option<&ErsTail>,
    num: &Numeric,
) -> Result<Vec<VanishingBlock>> {
    if k < 2 || k > 20 {
        return Ok(vec![]);
    }
    let mut out = vec![];
    for u in subsets(k, o.max_vanishing_size.min(k - 1)) {
        let claim = format!("{u:?} is a block of vanishing weights");
        if let Some(t) = sym {
            let comp = ColSel::Complement(idx(&u));
            let rows: Vec<RatFn> = u.iter().map(|&v| t.stochastic_sum(SymIdx::Index(v), &comp)).collect();
            let weight = rows.iter().fold(RatFn::constant(Q::zero()), |a, b| a.add(b));
            if weight.limit().is_none_or(|q| !q.is_zero()) {
                continue;
            }
            let lo = eventual_min(rows.clone()).unwrap();
            let hi = eventual_max(rows).unwrap();
            let regularity = if hi.is_zero() { Some(1.0) } else { lo.div(&hi).limit().map(|q| q_f64(&q)).filter(|c| *c > 0.0) };
            let v = Verdict::proved(&claim, "limit of the off-block weight").note("weight", weight.to_string());
            out.push(VanishingBlock { set: u, verdict: v, regularity });
        } else {
            let trace: Vec<f64> =
                num.mats.iter().map(|f| u.iter().map(|&v| (0..k).filter(|w| !u.contains(w)).map(|w| f.get(v, w)).sum::<f64>()).sum()).collect();
            if trace.is_empty() {
                continue;
            }
            let v = to_zero_evidence(&claim, trace, "off-block weight");
            if !v.leans_true() {
                continue;
            }
            let tail = &num.mats[num.mats.len() / 2..];
            let regularity = tail
                .iter()
                .map(|f| {
                    let m: Vec<f64> = u.iter().map(|&v| (0..k).filter(|w| !u.contains(w)).map(|w| f.get(v, w)).sum()).collect();
                    let hi = m.iter().cloned().fold(0.0, f64::max);
                    if hi == 0.0 {
                        1.0
                    } else {
                        m.iter().cloned().fold(f64::INFINITY, f64::min) / hi
                    }
                })
                .fold(f64::INFINITY, f64::min);
            out.push(VanishingBlock { set: u, verdict: v, regularity: (regularity > 0.0).then_some(regularity) });
        }
    }
    Ok(out)
}
