//! Vertex and edge subdiagrams: restriction, thinness and measure extension.
//!
//! Level k of a restricted diagram is level `start + k - 1` of the ambient
//! one; its root edges are the ambient heights at `start` on W_start, so
//! paths are unconstrained before `start`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotic::{ratfn_series, HTerm, LimitClass, SeriesVerdict};
use crate::criteria::{eventual_max, is_primitive, series_evidence, to_zero_evidence};
use crate::diagram::{json_int, BratteliDiagram, SymIdx, Tail};
use crate::error::{Error, Result};
use crate::ers::{ColSel, ErsTail};
use crate::matrix::IntMatrix;
use crate::measure::{check_invariance, TowerMeasure};
use crate::poly::{Poly, RatFn};
use crate::rational::{big_ratio_f64, q_f64, q_str, qb, Q};
use crate::verdict::{Direction, Verdict};

pub const THIN_CLAIM: &str = "the subdiagram path space is null for every ergodic invariant measure";
pub const FINITE_CLAIM: &str = "the extended measure is finite";

/// Vertex sets W_n chosen level by level, starting at level `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexSelection {
    pub start: usize,
    /// Explicit sets for levels start, start + 1, ...
    pub prefix: Vec<Vec<usize>>,
    /// Symbolic set used past the explicit prefix.
    pub tail: Option<Vec<SymIdx>>,
}

impl VertexSelection {
    pub fn fixed(start: usize, tail: Vec<SymIdx>) -> VertexSelection {
        VertexSelection { start, prefix: vec![], tail: Some(tail) }
    }

    pub fn explicit(start: usize, prefix: Vec<Vec<usize>>) -> VertexSelection {
        VertexSelection { start, prefix, tail: None }
    }

    /// Last level with a defined set, None when unbounded.
    pub fn last_level(&self) -> Option<usize> {
        match self.tail {
            Some(_) => None,
            None => Some(self.start + self.prefix.len() - 1),
        }
    }

    /// First level described by the symbolic tail.
    pub fn tail_from(&self) -> usize {
        self.start + self.prefix.len()
    }

    /// Sorted vertex set at `level` of an ambient level with `len` vertices.
    pub fn at(&self, level: usize, len: usize) -> Result<Vec<usize>> {
        if level < self.start {
            return Err(Error::Argument(format!("subdiagram starts at level {}, level {level} requested", self.start)));
        }
        let k = level - self.start;
        let mut set: Vec<usize> = if k < self.prefix.len() {
            self.prefix[k].clone()
        } else if let Some(t) = &self.tail {
            t.iter().filter_map(|s| s.resolve(len)).collect()
        } else {
            return Err(Error::Depth { requested: level, available: self.start + self.prefix.len() - 1 });
        };
        set.sort_unstable();
        set.dedup();
        if set.is_empty() {
            return Err(Error::Structure { level, detail: "subdiagram has no vertex at this level".into() });
        }
        if let Some(&bad) = set.iter().find(|&&v| v >= len) {
            return Err(Error::Structure { level, detail: format!("vertex {bad} does not exist") });
        }
        Ok(set)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SubdiagramSpec {
    Vertex(VertexSelection),
    /// Retained multiplicities Ḡ_n ≤ F̃_n for n = 1, 2, ...; all vertices kept.
    Edge(Vec<IntMatrix>),
}

fn sym_of(k: i64) -> SymIdx {
    if k >= 0 {
        SymIdx::Index(k as usize)
    } else {
        SymIdx::FromEnd((-k - 1) as usize)
    }
}

fn sym_json(s: &SymIdx) -> Value {
    match *s {
        SymIdx::Index(i) => json!(i),
        SymIdx::FromEnd(j) => json!(-(j as i64) - 1),
    }
}

fn index_list(v: &Value, what: &str) -> Result<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| Error::Schema(format!("{what} must be an array of vertex indices")))?
        .iter()
        .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| Error::Schema(format!("bad vertex index {x}"))))
        .collect()
}

impl SubdiagramSpec {
    /// Reads `{"kind": "vertex", "W": [[..], ..] | {"start", "levels", "tail"}}`
    /// or `{"kind": "edge", "G": [matrices]}`. Negative tail entries count from the end (-1 is the last vertex).
    pub fn from_json(v: &Value) -> Result<SubdiagramSpec> {
        let kind = v.get("kind").and_then(Value::as_str).unwrap_or("vertex");
        match kind {
            "vertex" => {
                let w = v.get("W").ok_or_else(|| Error::Schema("vertex subdiagram needs \"W\"".into()))?;
                let sel = match w {
                    Value::Array(levels) => VertexSelection::explicit(
                        1,
                        levels.iter().map(|l| index_list(l, "each level of W")).collect::<Result<_>>()?,
                    ),
                    Value::Object(o) => {
                        let start = o.get("start").and_then(Value::as_u64).unwrap_or(1) as usize;
                        let prefix = match o.get("levels") {
                            Some(l) => l
                                .as_array()
                                .ok_or_else(|| Error::Schema("\"levels\" must be an array".into()))?
                                .iter()
                                .map(|x| index_list(x, "each level"))
                                .collect::<Result<_>>()?,
                            None => vec![],
                        };
                        let tail = match o.get("tail") {
                            Some(t) => Some(
                                t.as_array()
                                    .ok_or_else(|| Error::Schema("\"tail\" must be an array".into()))?
                                    .iter()
                                    .map(|x| x.as_i64().map(sym_of).ok_or_else(|| Error::Schema(format!("bad tail index {x}"))))
                                    .collect::<Result<_>>()?,
                            ),
                            None => None,
                        };
                        VertexSelection { start, prefix, tail }
                    }
                    _ => return Err(Error::Schema("\"W\" must be a list of levels or a rule object".into())),
                };
                if sel.start == 0 {
                    return Err(Error::Schema("subdiagram levels start at 1".into()));
                }
                if sel.prefix.is_empty() && sel.tail.as_ref().is_none_or(|t| t.is_empty()) {
                    return Err(Error::Schema("vertex subdiagram selects no vertices".into()));
                }
                Ok(SubdiagramSpec::Vertex(sel))
            }
            "edge" => {
                let g = v.get("G").and_then(Value::as_array).ok_or_else(|| Error::Schema("edge subdiagram needs \"G\"".into()))?;
                let mats = g
                    .iter()
                    .map(|m| {
                        let rows = m.as_array().ok_or_else(|| Error::Schema("each G_n must be a matrix".into()))?;
                        let rows = rows
                            .iter()
                            .map(|r| {
                                r.as_array()
                                    .ok_or_else(|| Error::Schema("matrix rows must be arrays".into()))?
                                    .iter()
                                    .map(json_int)
                                    .collect::<Result<Vec<BigInt>>>()
                            })
                            .collect::<Result<Vec<_>>>()?;
                        IntMatrix::from_rows(rows).map_err(|_| Error::Schema("G_n is not rectangular".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if mats.is_empty() {
                    return Err(Error::Schema("edge subdiagram needs at least one matrix".into()));
                }
                Ok(SubdiagramSpec::Edge(mats))
            }
            k => Err(Error::Schema(format!("unknown subdiagram kind {k:?}"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            SubdiagramSpec::Vertex(s) => {
                let mut w = json!({ "start": s.start, "levels": s.prefix });
                if let Some(t) = &s.tail {
                    w["tail"] = Value::Array(t.iter().map(sym_json).collect());
                }
                json!({ "kind": "vertex", "W": w })
            }
            SubdiagramSpec::Edge(g) => {
                let mats: Vec<Vec<Vec<String>>> =
                    g.iter().map(|m| m.to_rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect()).collect();
                json!({ "kind": "edge", "G": mats })
            }
        }
    }

    /// Ambient level of the subdiagram's first level.
    pub fn start(&self) -> usize {
        match self {
            SubdiagramSpec::Vertex(s) => s.start,
            SubdiagramSpec::Edge(_) => 1,
        }
    }

    /// Deepest ambient vertex level the subdiagram describes.
    pub fn last_level(&self, d: &BratteliDiagram) -> Option<usize> {
        let own = match self {
            SubdiagramSpec::Vertex(s) => s.last_level(),
            SubdiagramSpec::Edge(g) => Some(g.len() + 1),
        };
        match (own, d.max_vertex_level()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Retained vertices W at ambient level `a`.
    pub fn set_at(&self, d: &BratteliDiagram, a: usize) -> Result<Vec<usize>> {
        let len = d.vertex_count(a)?;
        match self {
            SubdiagramSpec::Vertex(s) => s.at(a, len),
            SubdiagramSpec::Edge(_) => Ok((0..len).collect()),
        }
    }

    /// Retained multiplicities at ambient level `a`, in ambient shape.
    pub fn retained(&self, d: &BratteliDiagram, a: usize) -> Result<IntMatrix> {
        let f = d.matrix(a)?;
        match self {
            SubdiagramSpec::Vertex(_) => {
                let rows = self.set_at(d, a + 1)?;
                let cols = self.set_at(d, a)?;
                let mut g = IntMatrix::zeros(f.rows(), f.cols());
                for &v in &rows {
                    for &w in &cols {
                        g.set(v, w, f.get(v, w).clone());
                    }
                }
                Ok(g)
            }
            SubdiagramSpec::Edge(gs) => {
                let g = gs.get(a - 1).ok_or(Error::Depth { requested: a, available: gs.len() })?;
                if g.rows() != f.rows() || g.cols() != f.cols() {
                    return Err(Error::Argument(format!(
                        "G_{a} is {}x{} but the incidence matrix is {}x{}",
                        g.rows(),
                        g.cols(),
                        f.rows(),
                        f.cols()
                    )));
                }
                if g.entries().iter().zip(f.entries()).any(|(x, y)| x.is_negative() || x > y) {
                    return Err(Error::Argument(format!("G_{a} must satisfy 0 <= G <= F entrywise")));
                }
                Ok(g.clone())
            }
        }
    }

    fn sub_matrix(&self, d: &BratteliDiagram, a: usize) -> Result<IntMatrix> {
        match self {
            SubdiagramSpec::Vertex(_) => Ok(d.matrix(a)?.select(&self.set_at(d, a + 1)?, &self.set_at(d, a)?)),
            SubdiagramSpec::Edge(_) => self.retained(d, a),
        }
    }
}

/// The subdiagram as a diagram of its own.
pub fn restrict(d: &Arc<BratteliDiagram>, s: &SubdiagramSpec) -> Result<BratteliDiagram> {
    let start = s.start();
    if start == 0 {
        return Err(Error::Argument("subdiagram levels start at 1".into()));
    }
    let w0 = s.set_at(d, start)?;
    let h = d.heights(start)?;
    let root: Vec<BigInt> = w0.iter().map(|&v| h[v].clone()).collect();
    let name = format!("{}-sub", d.name());
    if let SubdiagramSpec::Vertex(sel) = s {
        if sel.tail.is_some() && d.is_infinite() {
            let tail = Tail::Restricted { parent: d.clone(), selection: sel.clone() };
            return BratteliDiagram::new(&name, root, vec![], Some(tail));
        }
    }
    let last = s.last_level(d).ok_or_else(|| Error::Argument("subdiagram depth is unbounded".into()))?;
    if last <= start {
        return Err(Error::Argument("subdiagram needs at least two levels".into()));
    }
    let mats = (start..last).map(|a| s.sub_matrix(d, a)).collect::<Result<Vec<_>>>()?;
    BratteliDiagram::new(&name, root, mats, None)
}

/// Number of subdiagram levels usable up to `depth`.
fn sub_depth(d: &BratteliDiagram, s: &SubdiagramSpec, depth: usize) -> usize {
    match s.last_level(d) {
        Some(l) => depth.min(l + 1 - s.start()),
        None => depth,
    }
}

/// max_w h̄_w / h_w at subdiagram levels 1..=depth.
fn ratio_trace(d: &BratteliDiagram, s: &SubdiagramSpec, sub: &BratteliDiagram, depth: usize) -> Result<Vec<f64>> {
    let start = s.start();
    (1..=depth)
        .map(|k| {
            let a = start + k - 1;
            let w = s.set_at(d, a)?;
            let h = d.heights(a)?;
            let hb = sub.heights(k)?;
            Ok(w.iter().zip(hb.iter()).map(|(&v, x)| big_ratio_f64(x, &h[v])).fold(0.0, f64::max))
        })
        .collect()
}

/// Every matrix is eventually positive, or the diagram is stationary primitive.
fn certified_simple(d: &BratteliDiagram) -> bool {
    if let Some(m) = d.stationary_matrix() {
        return is_primitive(&m);
    }
    d.rule().is_some_and(|r| r.polys().iter().all(|p| p.eventual_sign() > 0))
}

/// Closed forms for a symbolic vertex tail of an equal-row-sum diagram whose
/// restricted rows also have equal sums s(n).
struct SymTail<'a> {
    ers: ErsTail<'a>,
    set: Vec<SymIdx>,
    anchor: usize,
    s: Poly,
    /// h̄ / h at the anchor.
    ratio0: Q,
}

impl SymTail<'_> {
    /// h̄(n) / h(n).
    fn thin_ratio(&self) -> Result<HTerm> {
        HTerm::new(self.anchor as i64, self.ratio0.clone(), RatFn::new(self.s.clone(), self.ers.row_sum.clone()))
    }

    /// h(n) / h̄(n).
    fn inverse_ratio(&self) -> Result<HTerm> {
        HTerm::new(
            self.anchor as i64,
            Q::one() / &self.ratio0,
            RatFn::new(self.ers.row_sum.clone(), self.s.clone()),
        )
    }
}

fn sym_tail<'a>(d: &'a BratteliDiagram, sel: &VertexSelection, sub: &BratteliDiagram) -> Option<SymTail<'a>> {
    let mut set = sel.tail.clone()?;
    set.sort();
    set.dedup();
    let max_index = set.iter().map(|x| x.magnitude()).max()? + 1;
    let ers = ErsTail::of(d, max_index)?;
    let sums: Vec<Poly> =
        set.iter().map(|&v| set.iter().fold(Poly::zero(), |acc, &c| &acc + &ers.entry(v, c))).collect();
    if sums.windows(2).any(|w| w[0] != w[1]) {
        return None;
    }
    let s = sums[0].clone();
    let mut anchor = ers.start.max(sel.tail_from());
    let limit = anchor + 4;
    loop {
        let k = anchor + 1 - sel.start;
        let hb = sub.heights(k).ok()?;
        let resolved = sel.at(anchor, d.vertex_count(anchor).ok()?).ok()?;
        if hb.len() == set.len() && resolved.len() == set.len() && hb.iter().all(|x| *x == hb[0]) {
            break;
        }
        anchor += 1;
        if anchor > limit {
            return None;
        }
    }
    if s.positive_from(anchor as i64) != Some(true) {
        return None;
    }
    // closed form must agree with the materialized restricted rows
    let k = anchor + 1 - sel.start;
    let m = sub.matrix(k).ok()?;
    let sv = s.eval_int(&BigInt::from(anchor));
    if m.row_sums().iter().any(|x| *x != sv) {
        return None;
    }
    let hb = sub.heights(k).ok()?[0].clone();
    let h = d.heights(anchor).ok()?[0].clone();
    Some(SymTail { ers, set, anchor, s, ratio0: qb(&hb) / qb(&h) })
}

/// Whether X_B̄ is null for every ergodic measure: max_w h̄_w / h_w → 0.
pub fn thinness_test(d: &Arc<BratteliDiagram>, s: &SubdiagramSpec, depth: usize) -> Result<Verdict> {
    let sub = restrict(d, s)?;
    thin_verdict(d, s, &sub, depth)
}

fn thin_verdict(d: &BratteliDiagram, s: &SubdiagramSpec, sub: &BratteliDiagram, depth: usize) -> Result<Verdict> {
    let n = sub_depth(d, s, depth);
    if n == 0 {
        return Err(Error::Depth { requested: s.start(), available: s.last_level(d).unwrap_or(0) });
    }
    let trace = ratio_trace(d, s, sub, n)?;
    let simple = certified_simple(d);
    if let SubdiagramSpec::Vertex(sel) = s {
        if let Some(t) = sym_tail(d, sel, sub) {
            let r = t.thin_ratio()?;
            let v = match r.limit() {
                LimitClass::Zero => Verdict::proved(THIN_CLAIM, "Gauss test on the height ratio h̄/h"),
                LimitClass::Positive | LimitClass::Infinite if simple => {
                    Verdict::refuted(THIN_CLAIM, "height ratio h̄/h has a positive limit")
                }
                _ => Verdict::inconclusive(THIN_CLAIM, "height ratio stays positive, but the diagram is not certified simple")
                    .note("method", "Gauss test on the height ratio h̄/h"),
            };
            return Ok(v
                .with_trace(trace)
                .with_depth(n)
                .note("ratio", format!("{}", r.ratio()))
                .note("anchor", t.anchor)
                .note("set", t.set.iter().map(sym_json).collect::<Vec<_>>()));
        }
    }
    let v = to_zero_evidence(THIN_CLAIM, trace, "height ratio trace max h̄/h");
    if v.direction == Some(Direction::Against) && !simple {
        return Ok(Verdict::inconclusive(THIN_CLAIM, "height ratios stay positive, but the converse needs a simple diagram")
            .with_trace(v.trace)
            .with_depth(n));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesForm {
    pub name: String,
    /// Exact partial sums, one per level in `levels`.
    pub partial_sums: Vec<String>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtensionReport {
    /// Ambient level n of each summand.
    pub levels: Vec<usize>,
    /// The three equivalent series whose finiteness decides the extension.
    pub forms: Vec<SeriesForm>,
    /// Σ max_v Σ_{w∉W} f_vw, sufficient for finiteness.
    pub sufficient: SeriesForm,
    pub thinness_trace: Vec<f64>,
    pub thin: Verdict,
    pub finite: Verdict,
}

/// The unique measure of a subdiagram with one vertex per level.
fn default_measure(sub: &BratteliDiagram, depth: usize) -> Result<TowerMeasure> {
    let mut levels = vec![];
    for k in 1..=depth {
        if sub.vertex_count(k)? != 1 {
            return Err(Error::Argument(
                "subdiagram has several vertices at some level; supply an invariant measure on it".into(),
            ));
        }
        levels.push(vec![Q::one()]);
    }
    Ok(TowerMeasure::explicit(levels))
}

/// p̄_v = q̄_v / h̄_v at subdiagram level k.
fn cylinder_values(sub: &BratteliDiagram, q: &TowerMeasure, k: usize) -> Result<Vec<Q>> {
    let h = sub.heights(k)?;
    Ok(q.level(sub, k)?.iter().zip(h.iter()).map(|(x, hv)| x / qb(hv)).collect())
}

fn running(terms: &[Q]) -> Vec<String> {
    let mut acc = Q::zero();
    terms
        .iter()
        .map(|t| {
            acc += t;
            q_str(&acc)
        })
        .collect()
}

fn float_terms(levels: &[usize], terms: &[Q]) -> Vec<(usize, f64)> {
    levels.iter().zip(terms).map(|(&n, t)| (n, q_f64(t))).collect()
}

fn sufficient_numeric(levels: &[usize], terms: &[Q]) -> Verdict {
    let v = series_evidence(FINITE_CLAIM, float_terms(levels, terms));
    if v.direction == Some(Direction::For) {
        v
    } else {
        let mut w = Verdict::inconclusive(FINITE_CLAIM, "the sufficient series does not appear to converge")
            .with_trace(v.trace)
            .with_depth(v.depth);
        w.payload.extend(v.payload);
        w
    }
}

fn symbolic_form(term: Result<HTerm>, method: &str) -> Option<Verdict> {
    let t = term.ok()?;
    Some(match t.series() {
        SeriesVerdict::Converges => Verdict::proved(FINITE_CLAIM, method),
        SeriesVerdict::Diverges => Verdict::refuted(FINITE_CLAIM, method),
    })
}

/// Finiteness of the canonical extension of q̄ (default: the unique measure
/// of a one-vertex-per-level subdiagram) to the tail-saturation of X_B̄.
pub fn extension_test(
    d: &Arc<BratteliDiagram>,
    s: &SubdiagramSpec,
    qbar: Option<&TowerMeasure>,
    depth: usize,
) -> Result<ExtensionReport> {
    let sub = restrict(d, s)?;
    let n = sub_depth(d, s, depth);
    if n < 2 {
        return Err(Error::Depth { requested: s.start() + 1, available: s.start() });
    }
    let owned;
    let q = match qbar {
        Some(q) => q,
        None => {
            owned = default_measure(&sub, n)?;
            &owned
        }
    };
    let check = check_invariance(&sub, q, n)?;
    if !check.holds {
        return Err(Error::Invariance {
            level: check.first_failure.unwrap_or(0),
            detail: check.detail.unwrap_or_default(),
        });
    }
    let start = s.start();
    let mut levels = vec![];
    let (mut t1, mut t2, mut t3, mut u) = (vec![], vec![], vec![], vec![]);
    let p = cylinder_values(&sub, q, 1)?;
    let w = s.set_at(d, start)?;
    let mut mass: Q = w.iter().zip(&p).map(|(&v, pv)| qb(&d.heights(start).unwrap()[v]) * pv).sum();
    for k in 1..n {
        let a = start + k - 1;
        let f = d.matrix(a)?;
        let g = s.retained(d, a)?;
        let fs = d.stochastic(a)?;
        let h = d.heights(a)?;
        let h1 = d.heights(a + 1)?;
        let w1 = s.set_at(d, a + 1)?;
        let p1 = cylinder_values(&sub, q, k + 1)?;
        let (mut a1, mut a2) = (Q::zero(), Q::zero());
        let mut worst = Q::zero();
        for (i, &v) in w1.iter().enumerate() {
            let mut lost_edges = Q::zero();
            let mut lost_mass = Q::zero();
            for c in 0..f.cols() {
                let extra = f.get(v, c) - g.get(v, c);
                if !extra.is_zero() {
                    lost_edges += qb(&(extra * &h[c]));
                    // stochastic weight of the edges left out of the subdiagram
                    let share = fs.get(v, c).clone() * qb(&(f.get(v, c) - g.get(v, c))) / qb(f.get(v, c));
                    lost_mass += share;
                }
            }
            a1 += lost_edges * &p1[i];
            a2 += qb(&h1[v]) * &p1[i] * &lost_mass;
            if lost_mass > worst {
                worst = lost_mass;
            }
        }
        let mass1: Q = w1.iter().zip(&p1).map(|(&v, pv)| qb(&h1[v]) * pv).sum();
        t1.push(a1);
        t2.push(a2);
        t3.push(&mass1 - &mass);
        u.push(worst);
        levels.push(a);
        mass = mass1;
    }

    let thin = thin_verdict(d, s, &sub, n)?;
    let mut sym: Option<[Verdict; 4]> = None;
    if let SubdiagramSpec::Vertex(sel) = s {
        if let Some(t) = sym_tail(d, sel, &sub) {
            let r = &t.ers.row_sum;
            let lost = r - &t.s;
            let suff = eventual_max(t.set.iter().map(|&v| t.ers.stochastic_sum(v, &ColSel::Complement(t.set.clone()))));
            let suff_v = suff.map(|f| {
                if f.is_zero() || ratfn_series(&f) == SeriesVerdict::Converges {
                    Verdict::proved(FINITE_CLAIM, "degree test on Σ max_v Σ_{w∉W} f_vw").note("summand", f.to_string())
                } else {
                    Verdict::inconclusive(FINITE_CLAIM, "Σ max_v Σ_{w∉W} f_vw diverges; the sufficient condition fails")
                        .note("summand", f.to_string())
                }
            });
            // the exact forms need the unique measure of a one-vertex tail
            if t.set.len() == 1 && qbar.is_none() {
                let forms = if lost.is_zero() {
                    let v = Verdict::proved(FINITE_CLAIM, "no edges leave the subdiagram past the anchor");
                    Some([v.clone(), v.clone(), v])
                } else {
                    let g = t.inverse_ratio()?;
                    let f1 = symbolic_form(
                        g.mul_ratfn(&RatFn::new(lost.clone(), t.s.clone())),
                        "Gauss test on Σ_v Σ_{w∉W} f̃_vw h_w p̄_v",
                    );
                    let f2 = symbolic_form(
                        g.shift(1).mul_ratfn(&RatFn::new(lost.clone(), r.clone())),
                        "Gauss test on Σ_v μ̂(X_v) Σ_{w∉W} f_vw",
                    );
                    let ratio = RatFn::new(r.clone(), t.s.clone()).sub(&RatFn::constant(Q::one()));
                    let f3 = symbolic_form(g.mul_ratfn(&ratio), "Gauss test on the increments of Σ_w h_w p̄_w");
                    match (f1, f2, f3) {
                        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                        _ => None,
                    }
                };
                if let (Some([a, b, c]), Some(sv)) = (forms, suff_v.clone()) {
                    sym = Some([a, b, c, sv]);
                }
            }
            if sym.is_none() {
                if let Some(sv) = suff_v {
                    let numeric = [&t1, &t2, &t3].map(|ts| series_evidence(FINITE_CLAIM, float_terms(&levels, ts)));
                    let [a, b, c] = numeric;
                    sym = Some([a, b, c, sv]);
                }
            }
        }
    }
    let [v1, v2, v3, vs] = match sym {
        Some(v) => v,
        None => {
            let [a, b, c] = [&t1, &t2, &t3].map(|ts| series_evidence(FINITE_CLAIM, float_terms(&levels, ts)));
            [a, b, c, sufficient_numeric(&levels, &u)]
        }
    };
    let names = ["edges leaving W weighted by p̄", "tower mass times leaving weight", "increments of subdiagram mass"];
    let forms: Vec<SeriesForm> = [(v1, &t1), (v2, &t2), (v3, &t3)]
        .into_iter()
        .zip(names)
        .map(|((v, ts), name)| SeriesForm { name: name.into(), partial_sums: running(ts), verdict: v.with_depth(n) })
        .collect();
    let sufficient = SeriesForm { name: "max leaving weight".into(), partial_sums: running(&u), verdict: vs.with_depth(n) };

    let exact = &forms[0].verdict;
    let finite = if thin.is_proved() {
        if exact.is_proved() || sufficient.verdict.is_proved() {
            Verdict::inconclusive(FINITE_CLAIM, "thinness and a finite series were both proved; the inputs are inconsistent")
        } else {
            Verdict::refuted(FINITE_CLAIM, "a thin subdiagram only carries infinite extensions")
        }
    } else if exact.is_definitive() {
        exact.clone()
    } else if sufficient.verdict.is_proved() {
        sufficient.verdict.clone()
    } else {
        exact.clone()
    };
    Ok(ExtensionReport {
        levels,
        forms,
        sufficient,
        thinness_trace: thin.trace.clone(),
        thin,
        finite: finite.with_depth(n),
    })
}

/// Extends q̄ to the ambient diagram on levels 1..=depth. Tower values at the
/// deepest level are h_v p̄_v on W, normalized, then pulled back by F_nᵀ.
pub fn extend_measure(
    d: &Arc<BratteliDiagram>,
    s: &SubdiagramSpec,
    qbar: Option<&TowerMeasure>,
    depth: usize,
    allow_unproved: bool,
) -> Result<TowerMeasure> {
    let start = s.start();
    if depth < start {
        return Err(Error::Argument(format!("depth {depth} lies above the subdiagram start {start}")));
    }
    let k = depth + 1 - start;
    let report = extension_test(d, s, qbar, k.max(2))?;
    if report.finite.is_refuted() {
        return Err(Error::InfiniteExtension(report.finite.method.clone()));
    }
    if !report.finite.is_proved() && !allow_unproved {
        return Err(Error::Inconclusive("finiteness of the extension is not proved".into()));
    }
    let sub = restrict(d, s)?;
    let owned;
    let q = match qbar {
        Some(q) => q,
        None => {
            owned = default_measure(&sub, k)?;
            &owned
        }
    };
    let p = cylinder_values(&sub, q, k)?;
    let w = s.set_at(d, depth)?;
    let h = d.heights(depth)?;
    let mut top = vec![Q::zero(); h.len()];
    for (&v, pv) in w.iter().zip(&p) {
        top[v] = qb(&h[v]) * pv;
    }
    let total: Q = top.iter().sum();
    if !total.is_positive() {
        return Err(Error::Argument("the subdiagram measure vanishes at the deepest level".into()));
    }
    for x in top.iter_mut() {
        *x /= &total;
    }
    let mut levels = vec![top];
    for a in (1..depth).rev() {
        let next = d.stochastic(a)?.vec_mul(levels.last().unwrap());
        levels.push(next);
    }
    levels.reverse();
    Ok(TowerMeasure::explicit(levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::rational::q;
    use crate::verdict::Status;

    fn one(d: BratteliDiagram, v: usize) -> (Arc<BratteliDiagram>, SubdiagramSpec) {
        (Arc::new(d), SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(v)])))
    }

    #[test]
    fn linear_single_vertex_heights() {
        let (d, s) = one(catalog::linear_two_vertex(), 0);
        let sub = restrict(&d, &s).unwrap();
        let mut fact = BigInt::one();
        for n in 1..12usize {
            assert_eq!(sub.heights(n).unwrap()[0], fact);
            fact *= BigInt::from(n);
        }
    }

    #[test]
    fn linear_single_vertex_is_thin() {
        let (d, s) = one(catalog::linear_two_vertex(), 0);
        let v = thinness_test(&d, &s, 20).unwrap();
        assert_eq!(v.status, Status::Proved);
        assert!((v.trace[9] - 0.1).abs() < 1e-12);
        let r = extension_test(&d, &s, None, 20).unwrap();
        assert!(r.finite.is_refuted());
        assert!(r.forms.iter().all(|f| f.verdict.is_refuted()));
        assert!(matches!(extend_measure(&d, &s, None, 10, true), Err(Error::InfiniteExtension(_))));
    }

    #[test]
    fn quadratic_single_vertex_extends() {
        let (d, s) = one(catalog::quadratic_two_vertex(), 0);
        assert_eq!(thinness_test(&d, &s, 30).unwrap().status, Status::Refuted);
        let r = extension_test(&d, &s, None, 30).unwrap();
        assert!(r.finite.is_proved());
        assert!(r.sufficient.verdict.is_proved());
        assert!(r.forms.iter().all(|f| f.verdict.is_proved()));
        // the three partial-sum sequences coincide exactly
        assert_eq!(r.forms[0].partial_sums, r.forms[1].partial_sums);
        assert_eq!(r.forms[0].partial_sums, r.forms[2].partial_sums);
        assert_eq!(r.sufficient.partial_sums[1], q_str(&(q(1, 2) + q(1, 5))));
        let m = extend_measure(&d, &s, None, 12, false).unwrap();
        assert!(check_invariance(&d, &m, 12).unwrap().holds);
    }

    #[test]
    fn full_selection_is_identity() {
        let d = Arc::new(catalog::triangular_stationary());
        let s = SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(0), SymIdx::Index(1)]));
        let sub = restrict(&d, &s).unwrap();
        for n in 1..8 {
            assert_eq!(*sub.matrix(n).unwrap(), *d.matrix(n).unwrap());
        }
        // ratio 1 forever, but the triangular diagram is not simple
        let ratios = thinness_test(&d, &s, 10).unwrap();
        assert!(ratios.trace.iter().all(|&x| x == 1.0));
        assert_eq!(ratios.status, Status::Inconclusive);
        let d = Arc::new(catalog::linear_two_vertex());
        assert_eq!(thinness_test(&d, &s, 10).unwrap().status, Status::Refuted);
        let q = TowerMeasure::explicit(vec![vec![q(1, 2), q(1, 2)]; 9]);
        let r = extension_test(&d, &s, Some(&q), 9).unwrap();
        assert!(r.forms[0].partial_sums.iter().all(|x| x == "0/1"));
        let m = extend_measure(&d, &s, Some(&q), 9, true).unwrap();
        assert_eq!(m, q);
    }

    #[test]
    fn edge_subdiagram_checks_bounds() {
        let d = Arc::new(catalog::linear_two_vertex());
        let bad = SubdiagramSpec::Edge(vec![IntMatrix::from_i64(&[&[2, 1], &[1, 1]])]);
        assert!(matches!(restrict(&d, &bad), Err(Error::Argument(_))));
        let lost_row = SubdiagramSpec::Edge(vec![IntMatrix::from_i64(&[&[1, 1], &[0, 0]])]);
        assert!(matches!(restrict(&d, &lost_row), Err(Error::Structure { .. })));
    }

    #[test]
    fn json_round_trip() {
        let v = json!({ "kind": "vertex", "W": { "start": 2, "levels": [[0, 1]], "tail": [0, -1] } });
        let s = SubdiagramSpec::from_json(&v).unwrap();
        match &s {
            SubdiagramSpec::Vertex(sel) => {
                assert_eq!(sel.tail, Some(vec![SymIdx::Index(0), SymIdx::FromEnd(0)]));
                assert_eq!(sel.start, 2);
            }
            _ => panic!("expected a vertex spec"),
        }
        assert_eq!(SubdiagramSpec::from_json(&s.to_json()).unwrap(), s);
        let e = json!({ "kind": "edge", "G": [[[1, 1], [1, 0]]] });
        let s = SubdiagramSpec::from_json(&e).unwrap();
        assert_eq!(SubdiagramSpec::from_json(&s.to_json()).unwrap(), s);
        assert!(SubdiagramSpec::from_json(&json!({ "kind": "blob" })).is_err());
    }

    #[test]
    fn wrong_measure_is_rejected() {
        let d = Arc::new(catalog::quadratic_two_vertex());
        let s = SubdiagramSpec::Vertex(VertexSelection::explicit(1, vec![vec![0, 1]; 4]));
        let bad = TowerMeasure::explicit(vec![vec![q(1, 2), q(1, 2)], vec![q(1, 3), q(2, 3)], vec![q(1, 2), q(1, 2)], vec![q(1, 2), q(1, 2)]]);
        assert!(matches!(extension_test(&d, &s, Some(&bad), 4), Err(Error::Invariance { .. })));
        assert!(matches!(extension_test(&d, &s, None, 4), Err(Error::Argument(_))));
    }
}
