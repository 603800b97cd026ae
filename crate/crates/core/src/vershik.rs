//! Edge orders, extremal paths, the Vershik successor map and orbit statistics.

use std::collections::BTreeSet;

use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::Value;

use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::rational::Q;

/// Largest number of incoming edges enumerated at a single vertex.
const MAX_FAN_IN: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum OrderSpec {
    /// Incoming edges ordered by source vertex, then multiplicity.
    Consecutive,
    Reverse,
    /// `levels[k][v]` orders the edges entering vertex v of level k + 2;
    /// the last entry repeats for deeper levels.
    Explicit { levels: Vec<Vec<Vec<usize>>> },
}

impl OrderSpec {
    pub fn from_json(v: &Value) -> Result<OrderSpec> {
        let scheme = v
            .get("scheme")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Schema("order needs a \"scheme\"".into()))?;
        match scheme {
            "consecutive" => Ok(OrderSpec::Consecutive),
            "reverse" => Ok(OrderSpec::Reverse),
            "explicit" => {
                let data = v.get("data").ok_or_else(|| Error::Schema("explicit order needs \"data\"".into()))?;
                let perm = |x: &Value| -> Result<Vec<usize>> {
                    x.as_array()
                        .ok_or_else(|| Error::Schema("permutation must be an array".into()))?
                        .iter()
                        .map(|i| i.as_u64().map(|u| u as usize).ok_or_else(|| Error::Schema("bad slot index".into())))
                        .collect()
                };
                let arr = data.as_array().ok_or_else(|| Error::Schema("order data must be an array".into()))?;
                let nested = arr
                    .first()
                    .and_then(|a| a.as_array())
                    .and_then(|a| a.first())
                    .is_some_and(|x| x.is_array());
                let levels = if nested {
                    arr.iter()
                        .map(|lvl| {
                            lvl.as_array()
                                .ok_or_else(|| Error::Schema("order level must be an array".into()))?
                                .iter()
                                .map(perm)
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?
                } else {
                    vec![arr.iter().map(perm).collect::<Result<Vec<_>>>()?]
                };
                if levels.is_empty() {
                    return Err(Error::Schema("explicit order has no levels".into()));
                }
                Ok(OrderSpec::Explicit { levels })
            }
            other => Err(Error::Schema(format!("unknown order scheme {other:?}"))),
        }
    }

    /// Checks the order against the validation depth of the diagram.
    pub fn validate(&self, d: &BratteliDiagram) -> Result<()> {
        let depth = d.max_matrix_level().unwrap_or(crate::diagram::VALIDATION_DEPTH);
        for n in 2..=depth + 1 {
            for v in 0..d.vertex_count(n)? {
                incoming(d, self, n, v)?;
            }
        }
        Ok(())
    }
}

/// One edge entering a vertex: its source (0 for the root) and multiplicity index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EdgeSlot {
    pub source: usize,
    pub mult: usize,
}

/// Finite path from the root: `edges[k]` enters `vertices[k]`, a vertex of level k + 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PathPrefix {
    pub vertices: Vec<usize>,
    pub edges: Vec<EdgeSlot>,
}

impl PathPrefix {
    pub fn depth(&self) -> usize {
        self.vertices.len()
    }

    pub fn restrict(&self, depth: usize) -> PathPrefix {
        PathPrefix { vertices: self.vertices[..depth].to_vec(), edges: self.edges[..depth].to_vec() }
    }

    pub fn starts_with(&self, c: &PathPrefix) -> bool {
        c.depth() <= self.depth() && self.edges[..c.depth()] == c.edges[..] && self.vertices[..c.depth()] == c.vertices[..]
    }
}

/// Incoming edges of vertex v at level n, smallest first.
pub fn incoming(d: &BratteliDiagram, order: &OrderSpec, n: usize, v: usize) -> Result<Vec<EdgeSlot>> {
    let consecutive: Vec<EdgeSlot> = if n == 1 {
        let k = d.root_edges()[v].to_usize().filter(|&k| k <= MAX_FAN_IN).ok_or_else(too_many)?;
        (0..k).map(|m| EdgeSlot { source: 0, mult: m }).collect()
    } else {
        let mat = d.matrix(n - 1)?;
        let total: usize = mat.row(v).iter().map(|x| x.to_usize().unwrap_or(usize::MAX)).fold(0usize, |a, b| a.saturating_add(b));
        if total > MAX_FAN_IN {
            return Err(too_many());
        }
        let mut out = Vec::with_capacity(total);
        for (w, x) in mat.row(v).iter().enumerate() {
            for m in 0..x.to_usize().unwrap() {
                out.push(EdgeSlot { source: w, mult: m });
            }
        }
        out
    };
    match order {
        OrderSpec::Consecutive => Ok(consecutive),
        OrderSpec::Reverse => Ok(consecutive.into_iter().rev().collect()),
        OrderSpec::Explicit { levels } => {
            if n == 1 {
                return Ok(consecutive);
            }
            let lvl = &levels[(n - 2).min(levels.len() - 1)];
            let perm = lvl.get(v).ok_or_else(|| {
                Error::Schema(format!("explicit order has no permutation for vertex {v} of level {n}"))
            })?;
            let mut seen = vec![false; consecutive.len()];
            if perm.len() != consecutive.len()
                || perm.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true))
            {
                return Err(Error::Schema(format!(
                    "explicit order for vertex {v} of level {n} is not a permutation of its {} incoming edges",
                    consecutive.len()
                )));
            }
            Ok(perm.iter().map(|&i| consecutive[i]).collect())
        }
    }
}

fn too_many() -> Error {
    Error::Argument(format!("more than {MAX_FAN_IN} edges enter one vertex"))
}

/// Ordered incoming edges for every vertex of levels 1..=depth.
pub struct OrderedTruncation {
    depth: usize,
    /// lists[n-1][v]: ordered incoming edges of vertex v at level n.
    lists: Vec<Vec<Vec<EdgeSlot>>>,
    /// rank[n-1][v][consecutive index] = position in the order.
    rank: Vec<Vec<Vec<usize>>>,
    /// offsets[n-1][v][w]: consecutive index of the first edge from w.
    offsets: Vec<Vec<Vec<usize>>>,
}

impl OrderedTruncation {
    pub fn new(d: &BratteliDiagram, order: &OrderSpec, depth: usize) -> Result<OrderedTruncation> {
        if depth == 0 {
            return Err(Error::Argument("truncation depth must be positive".into()));
        }
        let mut lists = vec![];
        let mut rank = vec![];
        let mut offsets = vec![];
        for n in 1..=depth {
            let k = d.vertex_count(n)?;
            let sources = d.vertex_count(n - 1)?;
            let mut ln = vec![];
            let mut rn = vec![];
            let mut on = vec![];
            for v in 0..k {
                let list = incoming(d, order, n, v)?;
                let mut off = vec![0usize; sources + 1];
                for e in &list {
                    off[e.source + 1] += 1;
                }
                for w in 0..sources {
                    off[w + 1] += off[w];
                }
                let mut r = vec![0usize; list.len()];
                for (pos, e) in list.iter().enumerate() {
                    r[off[e.source] + e.mult] = pos;
                }
                ln.push(list);
                rn.push(r);
                on.push(off);
            }
            lists.push(ln);
            rank.push(rn);
            offsets.push(on);
        }
        Ok(OrderedTruncation { depth, lists, rank, offsets })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn vertex_count(&self, n: usize) -> usize {
        self.lists[n - 1].len()
    }

    fn rank_of(&self, n: usize, v: usize, e: EdgeSlot) -> usize {
        self.rank[n - 1][v][self.offsets[n - 1][v][e.source] + e.mult]
    }

    pub fn is_max_edge(&self, n: usize, v: usize, e: EdgeSlot) -> bool {
        self.rank_of(n, v, e) + 1 == self.lists[n - 1][v].len()
    }

    pub fn is_min_edge(&self, n: usize, v: usize, e: EdgeSlot) -> bool {
        self.rank_of(n, v, e) == 0
    }

    fn extremal_into(&self, level: usize, v: usize, max: bool) -> PathPrefix {
        let mut vertices = vec![0; level];
        let mut edges = vec![EdgeSlot { source: 0, mult: 0 }; level];
        let mut cur = v;
        for n in (1..=level).rev() {
            let list = &self.lists[n - 1][cur];
            let e = if max { *list.last().unwrap() } else { list[0] };
            vertices[n - 1] = cur;
            edges[n - 1] = e;
            cur = e.source;
        }
        PathPrefix { vertices, edges }
    }

    pub fn min_path_into(&self, level: usize, v: usize) -> PathPrefix {
        self.extremal_into(level, v, false)
    }

    pub fn max_path_into(&self, level: usize, v: usize) -> PathPrefix {
        self.extremal_into(level, v, true)
    }

    pub fn is_maximal(&self, p: &PathPrefix) -> bool {
        (1..=p.depth()).all(|n| self.is_max_edge(n, p.vertices[n - 1], p.edges[n - 1]))
    }

    pub fn is_minimal(&self, p: &PathPrefix) -> bool {
        (1..=p.depth()).all(|n| self.is_min_edge(n, p.vertices[n - 1], p.edges[n - 1]))
    }

    /// Vershik successor; None when every edge of `p` is maximal.
    pub fn successor(&self, p: &PathPrefix) -> Option<PathPrefix> {
        let n = (1..=p.depth()).find(|&n| !self.is_max_edge(n, p.vertices[n - 1], p.edges[n - 1]))?;
        let v = p.vertices[n - 1];
        let r = self.rank_of(n, v, p.edges[n - 1]);
        let e = self.lists[n - 1][v][r + 1];
        let mut out = p.clone();
        out.edges[n - 1] = e;
        if n > 1 {
            let low = self.min_path_into(n - 1, e.source);
            out.vertices[..n - 1].copy_from_slice(&low.vertices);
            out.edges[..n - 1].copy_from_slice(&low.edges);
        }
        Some(out)
    }

    /// Successor on the truncation: the maximal prefix into the i-th top vertex
    /// wraps to the minimal prefix into vertex (i + 1) mod |V_depth|.
    pub fn step(&self, p: &PathPrefix) -> (PathPrefix, bool) {
        match self.successor(p) {
            Some(q) => (q, false),
            None => {
                let top = *p.vertices.last().unwrap();
                let k = self.vertex_count(p.depth());
                (self.min_path_into(p.depth(), (top + 1) % k), true)
            }
        }
    }
}

/// Vershik successor of a prefix of a (possibly infinite) diagram.
pub fn successor(d: &BratteliDiagram, order: &OrderSpec, p: &PathPrefix) -> Result<PathPrefix> {
    let t = OrderedTruncation::new(d, order, p.depth())?;
    check_path(d, &t, p)?;
    t.successor(p).ok_or_else(|| Error::MaximalPath("every edge of the prefix is maximal".into()))
}

fn check_path(d: &BratteliDiagram, t: &OrderedTruncation, p: &PathPrefix) -> Result<()> {
    if p.vertices.len() != p.edges.len() || p.vertices.is_empty() {
        return Err(Error::Argument("path prefix needs one edge per vertex".into()));
    }
    for n in 1..=p.depth() {
        let v = p.vertices[n - 1];
        if v >= d.vertex_count(n)? {
            return Err(Error::Argument(format!("vertex {v} does not exist at level {n}")));
        }
        let e = p.edges[n - 1];
        let src_ok = if n == 1 { e.source == 0 } else { e.source == p.vertices[n - 2] };
        if !src_ok || !t.lists[n - 1][v].contains(&e) {
            return Err(Error::Argument(format!("edge {e:?} does not enter vertex {v} of level {n}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtremalPrefixes {
    pub depth: usize,
    pub lookahead: usize,
    pub max: Vec<PathPrefix>,
    pub min: Vec<PathPrefix>,
}

/// Distinct depth-N restrictions of extremal paths into level N + lookahead.
pub fn extremal_prefixes(d: &BratteliDiagram, order: &OrderSpec, depth: usize, lookahead: usize) -> Result<ExtremalPrefixes> {
    let t = OrderedTruncation::new(d, order, depth + lookahead)?;
    let top = depth + lookahead;
    let mut max = BTreeSet::new();
    let mut min = BTreeSet::new();
    for v in 0..t.vertex_count(top) {
        max.insert(t.max_path_into(top, v).restrict(depth));
        min.insert(t.min_path_into(top, v).restrict(depth));
    }
    Ok(ExtremalPrefixes { depth, lookahead, max: max.into_iter().collect(), min: min.into_iter().collect() })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderDiagnostics {
    /// (depth, number of maximal prefixes, number of minimal prefixes)
    pub counts: Vec<(usize, usize, usize)>,
    /// Equal numbers of maximal and minimal prefixes at the deepest level checked.
    pub perfect_necessary_ok: bool,
    /// A single maximal and a single minimal prefix at every depth checked.
    pub proper_evidence: bool,
}

pub fn order_diagnostics(d: &BratteliDiagram, order: &OrderSpec, depth: usize, lookahead: usize) -> Result<OrderDiagnostics> {
    let mut counts = vec![];
    for n in 1..=depth {
        let e = extremal_prefixes(d, order, n, lookahead)?;
        counts.push((n, e.max.len(), e.min.len()));
    }
    let last = *counts.last().ok_or_else(|| Error::Argument("depth must be positive".into()))?;
    Ok(OrderDiagnostics {
        perfect_necessary_ok: last.1 == last.2,
        proper_evidence: counts.iter().all(|c| c.1 == 1 && c.2 == 1),
        counts,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitStats {
    pub depth: usize,
    pub steps: usize,
    pub wraps: usize,
    pub visits: Vec<usize>,
    pub frequencies: Vec<f64>,
    pub exact_frequencies: Vec<String>,
    pub end: PathPrefix,
}

/// Runs `steps` successor steps from `start` and counts visits to each cylinder.
pub fn orbit_frequencies(
    d: &BratteliDiagram,
    order: &OrderSpec,
    start: &PathPrefix,
    steps: usize,
    cylinders: &[PathPrefix],
) -> Result<OrbitStats> {
    if steps == 0 {
        return Err(Error::Argument("orbit needs at least one step".into()));
    }
    let t = OrderedTruncation::new(d, order, start.depth())?;
    check_path(d, &t, start)?;
    for c in cylinders {
        if c.depth() > start.depth() || c.depth() == 0 {
            return Err(Error::Argument("cylinder deeper than the truncation".into()));
        }
        check_path(d, &t, c)?;
    }
    let mut visits = vec![0usize; cylinders.len()];
    let mut wraps = 0;
    let mut p = start.clone();
    for _ in 0..steps {
        for (i, c) in cylinders.iter().enumerate() {
            if p.starts_with(c) {
                visits[i] += 1;
            }
        }
        let (next, wrapped) = t.step(&p);
        wraps += wrapped as usize;
        p = next;
    }
    let total = Q::from_integer(steps.into());
    Ok(OrbitStats {
        depth: start.depth(),
        steps,
        wraps,
        frequencies: visits.iter().map(|&v| v as f64 / steps as f64).collect(),
        exact_frequencies: visits
            .iter()
            .map(|&v| crate::rational::q_str(&(Q::from_integer(v.into()) / &total)))
            .collect(),
        visits,
        end: p,
    })
}

/// All depth-k cylinders (prefixes) of the truncation.
pub fn cylinders(d: &BratteliDiagram, order: &OrderSpec, k: usize) -> Result<Vec<PathPrefix>> {
    let t = OrderedTruncation::new(d, order, k)?;
    let mut out = vec![];
    for v in 0..t.vertex_count(k) {
        let first = t.min_path_into(k, v);
        let mut p = first.clone();
        loop {
            out.push(p.clone());
            match t.successor(&p) {
                Some(q) => p = q,
                None => break,
            }
        }
    }
    Ok(out)
}
