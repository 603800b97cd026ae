//! Invariant measures given by tower values, polytope slices and measure counting.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use serde_json::Value;

use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::matrix::{FMat, RatMatrix};
use crate::rational::{parse_q, q_f64, q_pow, q_str, qb, round12, Q};
use crate::verdict::{Direction, Verdict};

/// How tower values q_v^(n) = μ(X_v^(n)) are produced.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureForm {
    /// Explicit vectors for levels 1..=N.
    Explicit(Vec<Vec<Q>>),
    /// Bernoulli-type measure on the Pascal graph: cylinders ending at k have measure p^k (1-p)^(n-k).
    Pascal(Q),
    /// q_v^(n) = scale * x_v * h_v^(n) / rho^(n-1).
    HeightScaled { x: Vec<Q>, rho: Q, scale: Q },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TowerMeasure {
    pub form: MeasureForm,
}

impl TowerMeasure {
    pub fn explicit(levels: Vec<Vec<Q>>) -> TowerMeasure {
        TowerMeasure { form: MeasureForm::Explicit(levels) }
    }

    pub fn pascal(p: Q) -> Result<TowerMeasure> {
        if !p.is_positive() || p >= Q::one() {
            return Err(Error::Param("Pascal parameter must lie in (0, 1)".into()));
        }
        Ok(TowerMeasure { form: MeasureForm::Pascal(p) })
    }

    /// Deepest level available (None for closed forms).
    pub fn depth(&self) -> Option<usize> {
        match &self.form {
            MeasureForm::Explicit(l) => Some(l.len()),
            _ => None,
        }
    }

    /// q^(n).
    pub fn level(&self, d: &BratteliDiagram, n: usize) -> Result<Vec<Q>> {
        if n == 0 {
            return Err(Error::Argument("tower values are indexed from level 1".into()));
        }
        match &self.form {
            MeasureForm::Explicit(l) => {
                l.get(n - 1).cloned().ok_or(Error::Depth { requested: n, available: l.len() })
            }
            MeasureForm::Pascal(p) => {
                let k = d.vertex_count(n)?;
                if k != n + 1 {
                    return Err(Error::Argument("Pascal measure needs a Pascal-shaped diagram".into()));
                }
                let one_m = Q::one() - p;
                Ok((0..=n)
                    .map(|k| qb(&binomial(BigInt::from(n), BigInt::from(k))) * q_pow(p, k as u32) * q_pow(&one_m, (n - k) as u32))
                    .collect())
            }
            MeasureForm::HeightScaled { x, rho, scale } => {
                let h = d.heights(n)?;
                if h.len() != x.len() {
                    return Err(Error::Argument("eigenvector length does not match the level".into()));
                }
                let r = q_pow(rho, (n - 1) as u32);
                Ok(x.iter().zip(h.iter()).map(|(xv, hv)| scale * xv * qb(hv) / &r).collect())
            }
        }
    }

    /// Reads `{ "diagram": ..., "q": [["p/q", ...], ...] }`.
    pub fn from_json(v: &Value) -> Result<TowerMeasure> {
        let q = v.get("q").and_then(Value::as_array).ok_or_else(|| Error::Schema("measure file needs \"q\"".into()))?;
        let levels = q
            .iter()
            .map(|lvl| {
                lvl.as_array()
                    .ok_or_else(|| Error::Schema("each level of q must be an array".into()))?
                    .iter()
                    .map(|x| match x {
                        Value::String(s) => parse_q(s),
                        Value::Number(n) => parse_q(&n.to_string()),
                        _ => Err(Error::Schema(format!("not a rational: {x}"))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if levels.is_empty() {
            return Err(Error::Schema("measure has no levels".into()));
        }
        Ok(TowerMeasure::explicit(levels))
    }

    pub fn to_json(&self, d: &BratteliDiagram, depth: usize) -> Result<Value> {
        let levels: Result<Vec<Vec<String>>> =
            (1..=depth).map(|n| Ok(self.level(d, n)?.iter().map(q_str).collect())).collect();
        Ok(serde_json::json!({ "diagram": d.name(), "q": levels? }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceCheck {
    pub holds: bool,
    pub depth: usize,
    pub first_failure: Option<usize>,
    pub detail: Option<String>,
}

/// Exact check of F_nᵀ q^(n+1) = q^(n) for n < depth and of normalization.
pub fn check_invariance(d: &BratteliDiagram, mu: &TowerMeasure, depth: usize) -> Result<InvarianceCheck> {
    if depth == 0 {
        return Err(Error::Argument("depth must be positive".into()));
    }
    let fail = |n: usize, s: String| InvarianceCheck { holds: false, depth, first_failure: Some(n), detail: Some(s) };
    let mut cur = mu.level(d, 1)?;
    for n in 1..=depth {
        if cur.len() != d.vertex_count(n)? {
            return Ok(fail(n, format!("q^({n}) has {} entries, level has {}", cur.len(), d.vertex_count(n)?)));
        }
        if cur.iter().any(|x| x.is_negative()) {
            return Ok(fail(n, "negative tower value".into()));
        }
        let s: Q = cur.iter().sum();
        if !s.is_one() {
            return Ok(fail(n, format!("tower values sum to {}", q_str(&s))));
        }
        if n == depth {
            break;
        }
        let next = mu.level(d, n + 1)?;
        let f = d.stochastic(n)?;
        if next.len() != f.rows() {
            return Ok(fail(n, format!("q^({}) has the wrong length", n + 1)));
        }
        if f.vec_mul(&next) != cur {
            return Ok(fail(n, format!("F_{n}ᵀ q^({}) differs from q^({n})", n + 1)));
        }
        cur = next;
    }
    Ok(InvarianceCheck { holds: true, depth, first_failure: None, detail: None })
}

/// μ of the cylinder of a path through `vertices` (levels 1..=n): q_w^(n) / h_w^(n).
pub fn cylinder_measure(d: &BratteliDiagram, mu: &TowerMeasure, vertices: &[usize]) -> Result<Q> {
    let n = vertices.len();
    if n == 0 {
        return Err(Error::Argument("empty path".into()));
    }
    for k in 1..n {
        let m = d.matrix(k)?;
        if vertices[k] >= m.rows() || vertices[k - 1] >= m.cols() || m.get(vertices[k], vertices[k - 1]).is_zero() {
            return Err(Error::Argument(format!("no edge from vertex {} to vertex {} at level {k}", vertices[k - 1], vertices[k])));
        }
    }
    let w = vertices[n - 1];
    let q = mu.level(d, n)?;
    let h = d.heights(n)?;
    if w >= q.len() {
        return Err(Error::Argument(format!("vertex {w} does not exist at level {n}")));
    }
    Ok(&q[w] / qb(&h[w]))
}

/// Vectors ḡ(v) = Gᵀ e_v of the stochastic product G = F_{n+m} ⋯ F_n.
#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeSlice {
    pub base: usize,
    pub depth: usize,
    pub product: RatMatrix,
}

impl PolytopeSlice {
    pub fn vertex(&self, v: usize) -> &[Q] {
        self.product.row(v)
    }

    pub fn vertex_count(&self) -> usize {
        self.product.rows()
    }

    pub fn to_f64(&self) -> FMat {
        self.product.to_f64()
    }
}

pub fn polytope_slice(d: &BratteliDiagram, n: usize, m: usize) -> Result<PolytopeSlice> {
    Ok(PolytopeSlice { base: n, depth: m, product: d.stochastic_product(n, m)? })
}

fn l1_q(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Largest L1 distance between two vertices of the slice.
pub fn slice_diameter(s: &PolytopeSlice) -> Q {
    let k = s.vertex_count();
    let mut best = Q::zero();
    for i in 0..k {
        for j in i + 1..k {
            let d = l1_q(s.vertex(i), s.vertex(j));
            if d > best {
                best = d;
            }
        }
    }
    best
}

pub fn diameter_f64(g: &FMat) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..g.rows {
        for j in i + 1..g.rows {
            best = best.max(l1(g.row(i), g.row(j)));
        }
    }
    best
}

/// Writes q^(n) as the combination Σ_v q_v^(n+m+1) ḡ(v) and checks it exactly.
pub fn decompose(d: &BratteliDiagram, mu: &TowerMeasure, n: usize, m: usize) -> Result<Vec<Q>> {
    let coeffs = mu.level(d, n + m + 1)?;
    let slice = polytope_slice(d, n, m)?;
    if coeffs.len() != slice.vertex_count() {
        return Err(Error::Invariance { level: n + m + 1, detail: "measure has the wrong number of entries".into() });
    }
    let combo = slice.product.vec_mul(&coeffs);
    if combo != mu.level(d, n)? {
        return Err(Error::Invariance { level: n, detail: "q^(n) is not the combination of the slice vertices".into() });
    }
    Ok(coeffs)
}

#[derive(Clone, Debug)]
pub struct CountOptions {
    /// Base level; None picks the first level after the last rank-deficient matrix.
    pub base: Option<usize>,
    pub depth: usize,
    pub eps: f64,
    pub delta: f64,
    /// Number of base levels used for support sets.
    pub support_levels: usize,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions { base: None, depth: 30, eps: 0.1, delta: 0.01, support_levels: 3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    /// ḡ of the lowest-indexed member.
    pub representative: Vec<String>,
    pub representative_f64: Vec<f64>,
    /// Not within eps of the convex hull of the other representatives.
    pub extreme: bool,
    pub hull_distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportSets {
    pub level: usize,
    pub sets: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureReport {
    pub base: usize,
    pub depth: usize,
    pub eps: f64,
    pub clusters: Vec<Cluster>,
    pub min_separation: Option<f64>,
    pub extreme_count: usize,
    pub affine_dimension: usize,
    pub singular_values: Vec<f64>,
    pub numeric_dimension: usize,
    pub supports: Vec<SupportSets>,
    pub verdict: Verdict,
}

fn union_find_clusters(rows: &[Vec<f64>], eps: f64) -> Vec<Vec<usize>> {
    let k = rows.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..k {
        for j in i + 1..k {
            if l1(&rows[i], &rows[j]) <= eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..k {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// L1 distance from y to the convex hull of `pts` (Frank-Wolfe; an upper bound).
pub fn hull_distance(y: &[f64], pts: &[&[f64]]) -> f64 {
    if pts.is_empty() {
        return f64::INFINITY;
    }
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum::<f64>();
    let start = (0..pts.len())
        .min_by(|&a, &b| dist2(pts[a], y).partial_cmp(&dist2(pts[b], y)).unwrap())
        .unwrap();
    let mut x = pts[start].to_vec();
    for _ in 0..2000 {
        let r: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let grad = |p: &[f64]| p.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let i = (0..pts.len()).min_by(|&a, &b| grad(pts[a]).partial_cmp(&grad(pts[b])).unwrap()).unwrap();
        let dir: Vec<f64> = pts[i].iter().zip(&x).map(|(a, b)| a - b).collect();
        let dd: f64 = dir.iter().map(|v| v * v).sum();
        if dd < 1e-30 {
            break;
        }
        let g = (-r.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() / dd).clamp(0.0, 1.0);
        if g < 1e-15 {
            break;
        }
        for (xv, dv) in x.iter_mut().zip(&dir) {
            *xv += g * dv;
        }
    }
    l1(&x, y)
}

/// Base level after the last rank-deficient incidence matrix among the first levels.
pub fn auto_base(d: &BratteliDiagram, depth: usize) -> Result<usize> {
    let scan = match d.max_matrix_level() {
        Some(m) => m.min(8).min(depth.max(1)),
        None => 8.min(depth.max(1)),
    };
    let mut base = 1;
    for k in 1..=scan {
        let m = d.matrix(k)?;
        if m.to_rat().rank() < m.rows().min(m.cols()) {
            base = k + 1;
        }
    }
    if let Some(m) = d.max_matrix_level() {
        if base > m {
            base = 1;
        }
    }
    Ok(base)
}

/// Clusters the vertices of a deep polytope slice to estimate the ergodic measures.
pub fn count_measures(d: &BratteliDiagram, opts: &CountOptions) -> Result<MeasureReport> {
    if let Some(r) = d.rule() {
        if !r.is_constant_shape() {
            return Err(Error::Rank("the number of vertices per level is unbounded; telescope or restrict first".into()));
        }
    }
    if !(opts.eps > 0.0) || opts.delta < 0.0 {
        return Err(Error::Argument("eps must be positive and delta nonnegative".into()));
    }
    let base = match opts.base {
        Some(b) if b >= 1 => b,
        Some(_) => return Err(Error::Argument("base level must be at least 1".into())),
        None => auto_base(d, opts.depth)?,
    };
    let mut depth = opts.depth;
    if let Some(m) = d.max_matrix_level() {
        if base > m {
            return Err(Error::Depth { requested: base, available: m });
        }
        depth = depth.min(m - base);
    }
    let slice = polytope_slice(d, base, depth)?;
    let rows: Vec<Vec<f64>> = (0..slice.vertex_count()).map(|v| slice.vertex(v).iter().map(q_f64).collect()).collect();
    let groups = union_find_clusters(&rows, opts.eps);

    let reps: Vec<usize> = groups.iter().map(|g| g[0]).collect();
    let mut clusters = vec![];
    for (i, g) in groups.iter().enumerate() {
        let others: Vec<&[f64]> = reps.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &r)| rows[r].as_slice()).collect();
        let hd = if others.is_empty() { None } else { Some(hull_distance(&rows[g[0]], &others)) };
        clusters.push(Cluster {
            members: g.clone(),
            representative: slice.vertex(g[0]).iter().map(q_str).collect(),
            representative_f64: rows[g[0]].iter().map(|&x| round12(x)).collect(),
            extreme: hd.is_none_or(|h| h > opts.eps),
            hull_distance: hd.map(round12),
        });
    }
    let mut min_sep: Option<f64> = None;
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            let s = l1(&rows[reps[i]], &rows[reps[j]]);
            min_sep = Some(min_sep.map_or(s, |m: f64| m.min(s)));
        }
    }

    // affine dimension of the slice vertices
    let k = slice.vertex_count();
    let diffs: Vec<Vec<Q>> = (1..k).map(|v| slice.vertex(v).iter().zip(slice.vertex(0)).map(|(a, b)| a - b).collect()).collect();
    let affine_dimension = if diffs.is_empty() { 0 } else { RatMatrix::from_rows(diffs.clone())?.rank() };
    let singular_values = if diffs.is_empty() {
        vec![]
    } else {
        let cols = diffs[0].len();
        let m = DMatrix::from_fn(diffs.len(), cols, |i, j| q_f64(&diffs[i][j]));
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv.into_iter().map(round12).collect()
    };
    let numeric_dimension = singular_values.iter().filter(|&&s| s > opts.eps).count();

    let mut supports = vec![];
    for lvl in base..base + opts.support_levels {
        if d.max_matrix_level().is_some_and(|m| lvl + depth > m) {
            break;
        }
        let g = polytope_slice(d, lvl, depth)?;
        let r: Vec<Vec<f64>> = (0..g.vertex_count()).map(|v| g.vertex(v).iter().map(q_f64).collect()).collect();
        let groups = union_find_clusters(&r, opts.eps);
        let sets: BTreeSet<Vec<usize>> = groups
            .iter()
            .map(|gr| r[gr[0]].iter().enumerate().filter(|(_, &x)| x >= opts.delta).map(|(i, _)| i).collect())
            .collect();
        supports.push(SupportSets { level: lvl, sets: sets.into_iter().collect() });
    }

    let extreme_count = clusters.iter().filter(|c| c.extreme).count();
    let diam = diameter_f64(&FMat::from_rows(&rows));
    let verdict = Verdict::evidence(
        &format!("exactly {extreme_count} ergodic invariant probability measures"),
        Direction::For,
        "slice clustering",
        vec![diam],
    )
    .with_depth(depth)
    .note("clusters", groups.len())
    .note("base", base);

    Ok(MeasureReport {
        base,
        depth,
        eps: opts.eps,
        clusters,
        min_separation: min_sep.map(round12),
        extreme_count,
        affine_dimension,
        singular_values,
        numeric_dimension,
        supports,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::rational::{q, qi};

    #[test]
    fn pascal_measure_is_invariant() {
        let d = catalog::pascal();
        let mu = TowerMeasure::pascal(q(1, 3)).unwrap();
        assert!(check_invariance(&d, &mu, 10).unwrap().holds);
        assert_eq!(cylinder_measure(&d, &mu, &[1, 1, 2]).unwrap(), q(2, 27));
    }

    #[test]
    fn perturbed_measure_fails_at_first_bad_level() {
        let d = catalog::pascal();
        let mu = TowerMeasure::pascal(q(1, 2)).unwrap();
        let mut levels: Vec<Vec<Q>> = (1..=4).map(|n| mu.level(&d, n).unwrap()).collect();
        levels[2][0] += q(1, 100);
        levels[2][1] -= q(1, 100);
        let bad = TowerMeasure::explicit(levels);
        let c = check_invariance(&d, &bad, 4).unwrap();
        assert!(!c.holds);
        assert_eq!(c.first_failure, Some(2));
        assert!(matches!(decompose(&d, &bad, 1, 1), Err(Error::Invariance { .. })));
    }

    #[test]
    fn odometer_cylinders() {
        let d = catalog::odometer(3).unwrap();
        let mu = TowerMeasure::explicit(vec![vec![Q::one()]; 6]);
        assert!(check_invariance(&d, &mu, 6).unwrap().holds);
        assert_eq!(cylinder_measure(&d, &mu, &[0; 5]).unwrap(), q(1, 243));
    }

    #[test]
    fn decomposition_identity() {
        let d = catalog::pascal();
        let mu = TowerMeasure::pascal(q(2, 5)).unwrap();
        let c = decompose(&d, &mu, 2, 3).unwrap();
        assert_eq!(c.len(), 7);
        assert_eq!(c.iter().sum::<Q>(), qi(1));
    }

    #[test]
    fn rank_error_for_growing_rules() {
        assert!(matches!(count_measures(&catalog::pascal(), &CountOptions::default()), Err(Error::Rank(_))));
    }

    #[test]
    fn hull_distance_detects_midpoint() {
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 1.0, 0.0];
        let m = [0.5, 0.5, 0.0];
        assert!(hull_distance(&m, &[&a, &b]) < 1e-9);
        assert!(hull_distance(&a, &[&b, &m]) > 0.9);
    }
}
