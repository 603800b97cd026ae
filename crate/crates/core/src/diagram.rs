//! Bratteli diagrams: incidence matrices, heights, stochastic matrices and telescoping.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::matrix::{FMat, IntMatrix, RatMatrix};
use crate::poly::Poly;
use crate::rational::{big_f64, qb, Q};
use crate::subdiagram::VertexSelection;
use crate::vershik::OrderSpec;

/// Vertex index that is either fixed or counted from the end of its level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymIdx {
    Index(usize),
    FromEnd(usize),
}

impl SymIdx {
    pub fn resolve(self, len: usize) -> Option<usize> {
        match self {
            SymIdx::Index(i) if i < len => Some(i),
            SymIdx::FromEnd(j) if j < len => Some(len - 1 - j),
            _ => None,
        }
    }

    pub fn magnitude(self) -> usize {
        match self {
            SymIdx::Index(i) | SymIdx::FromEnd(i) => i,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandFamily {
    Pascal,
    CountableChain,
    Custom,
}

/// Banded matrices with `n + row_offset` rows and `n + col_offset` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Banded {
    pub family: BandFamily,
    pub row_offset: i64,
    pub col_offset: i64,
    pub default: Expr,
    /// (column - row, value)
    pub bands: Vec<(i64, Expr)>,
    /// Bands running past the last column land on the last column.
    pub clamp: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RuleKind {
    Constant { entries: Vec<Vec<Expr>> },
    Banded(Banded),
}

/// Closed-form incidence matrices valid from `from_level` on.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagramRule {
    pub from_level: usize,
    pub kind: RuleKind,
}

impl DiagramRule {
    pub fn constant(from_level: usize, entries: Vec<Vec<Expr>>) -> Result<DiagramRule> {
        let c = entries.first().map_or(0, |r| r.len());
        if entries.is_empty() || c == 0 || entries.iter().any(|r| r.len() != c) {
            return Err(Error::Schema("constant rule needs a rectangular, nonempty entry table".into()));
        }
        Ok(DiagramRule { from_level, kind: RuleKind::Constant { entries } })
    }

    pub fn pascal(from_level: usize) -> DiagramRule {
        DiagramRule {
            from_level,
            kind: RuleKind::Banded(Banded {
                family: BandFamily::Pascal,
                row_offset: 2,
                col_offset: 1,
                default: Expr::parse("0").unwrap(),
                bands: vec![(0, Expr::parse("1").unwrap()), (-1, Expr::parse("1").unwrap())],
                clamp: false,
            }),
        }
    }

    pub fn countable_chain(from_level: usize, a: Expr) -> DiagramRule {
        DiagramRule {
            from_level,
            kind: RuleKind::Banded(Banded {
                family: BandFamily::CountableChain,
                row_offset: 2,
                col_offset: 1,
                default: Expr::parse("1").unwrap(),
                bands: vec![(0, a)],
                clamp: true,
            }),
        }
    }

    pub fn is_constant_shape(&self) -> bool {
        matches!(self.kind, RuleKind::Constant { .. })
    }

    pub fn shape(&self, n: usize) -> (usize, usize) {
        match &self.kind {
            RuleKind::Constant { entries } => (entries.len(), entries[0].len()),
            RuleKind::Banded(b) => ((n as i64 + b.row_offset) as usize, (n as i64 + b.col_offset) as usize),
        }
    }

    fn banded_col(b: &Banded, i: usize, cols: usize, off: i64) -> Option<usize> {
        let j = i as i64 + off;
        if j < 0 {
            None
        } else if (j as usize) < cols {
            Some(j as usize)
        } else if b.clamp {
            Some(cols - 1)
        } else {
            None
        }
    }

    pub fn matrix(&self, n: usize) -> Result<IntMatrix> {
        let ni = n as i64;
        let m = match &self.kind {
            RuleKind::Constant { entries } => IntMatrix::from_rows(
                entries.iter().map(|r| r.iter().map(|e| e.eval(ni)).collect()).collect(),
            )?,
            RuleKind::Banded(b) => {
                let (r, c) = self.shape(n);
                let d = b.default.eval(ni);
                let mut m = IntMatrix::zeros(r, c);
                for i in 0..r {
                    for j in 0..c {
                        m.set(i, j, d.clone());
                    }
                    for (off, e) in &b.bands {
                        if let Some(j) = Self::banded_col(b, i, c, *off) {
                            m.set(i, j, e.eval(ni));
                        }
                    }
                }
                m
            }
        };
        if !m.is_nonnegative() {
            return Err(Error::Structure { level: n, detail: "negative incidence entry".into() });
        }
        Ok(m)
    }

    pub fn matrix_f64(&self, n: usize) -> FMat {
        let x = n as f64;
        match &self.kind {
            RuleKind::Constant { entries } => {
                FMat::from_rows(&entries.iter().map(|r| r.iter().map(|e| e.eval_f64(x)).collect()).collect::<Vec<_>>())
            }
            RuleKind::Banded(b) => {
                let (r, c) = self.shape(n);
                let d = b.default.eval_f64(x);
                let mut m = FMat { rows: r, cols: c, data: vec![d; r * c] };
                for i in 0..r {
                    for (off, e) in &b.bands {
                        if let Some(j) = Self::banded_col(b, i, c, *off) {
                            m.data[i * c + j] = e.eval_f64(x);
                        }
                    }
                }
                m
            }
        }
    }

    /// Every polynomial appearing in the rule.
    pub fn polys(&self) -> Vec<&Poly> {
        match &self.kind {
            RuleKind::Constant { entries } => entries.iter().flatten().map(|e| e.poly()).collect(),
            RuleKind::Banded(b) => {
                let mut v = vec![b.default.poly()];
                v.extend(b.bands.iter().map(|(_, e)| e.poly()));
                v
            }
        }
    }

    /// Rigorous check that every entry is nonnegative for all n >= from_level.
    pub fn check_nonnegative(&self) -> Result<()> {
        for p in self.polys() {
            match p.nonnegative_from(self.from_level as i64) {
                Some(true) => {}
                Some(false) => {
                    return Err(Error::Schema(format!("rule entry {p} takes negative values from level {}", self.from_level)))
                }
                None => return Err(Error::Schema(format!("cannot certify that rule entry {p} stays nonnegative"))),
            }
        }
        Ok(())
    }

    /// Entry polynomial for large n; rows and columns given symbolically.
    pub fn sym_entry(&self, row: SymIdx, col: SymIdx) -> Poly {
        match &self.kind {
            RuleKind::Constant { entries } => {
                let (r, c) = (entries.len(), entries[0].len());
                match (row.resolve(r), col.resolve(c)) {
                    (Some(i), Some(j)) => entries[i][j].poly().clone(),
                    _ => Poly::zero(),
                }
            }
            RuleKind::Banded(b) => {
                let mut hit: Option<&Expr> = None;
                for (off, e) in &b.bands {
                    let target = match row {
                        SymIdx::Index(i) => {
                            let j = i as i64 + off;
                            if j < 0 {
                                None
                            } else {
                                Some(SymIdx::Index(j as usize))
                            }
                        }
                        SymIdx::FromEnd(a) => {
                            // row index rows-1-a, column (rows-1-a+off) = cols-1-(col_offset-row_offset+a-off)
                            let from_end = b.col_offset - b.row_offset + a as i64 - off;
                            if from_end >= 0 {
                                Some(SymIdx::FromEnd(from_end as usize))
                            } else if b.clamp {
                                Some(SymIdx::FromEnd(0))
                            } else {
                                None
                            }
                        }
                    };
                    if target == Some(col) {
                        hit = Some(e);
                    }
                }
                hit.unwrap_or(&b.default).poly().clone()
            }
        }
    }

    /// Row sum polynomial for a symbolic row (large n).
    pub fn sym_row_sum(&self, row: SymIdx) -> Poly {
        match &self.kind {
            RuleKind::Constant { entries } => {
                let r = entries.len();
                match row.resolve(r) {
                    Some(i) => entries[i].iter().fold(Poly::zero(), |acc, e| &acc + e.poly()),
                    None => Poly::zero(),
                }
            }
            RuleKind::Banded(b) => {
                let cols = &Poly::x() + &Poly::int(b.col_offset);
                let mut present = vec![];
                for (off, e) in &b.bands {
                    let p = match row {
                        SymIdx::Index(i) => i as i64 + off >= 0,
                        SymIdx::FromEnd(a) => b.clamp || b.col_offset - b.row_offset + a as i64 - off >= 0,
                    };
                    if p {
                        present.push(e);
                    }
                }
                let k = Poly::int(present.len() as i64);
                let base = b.default.poly() * &(&cols - &k);
                present.iter().fold(base, |acc, e| &acc + e.poly())
            }
        }
    }

    /// Entry polynomials present in a symbolic row for large n.
    pub fn sym_row_entries(&self, row: SymIdx) -> Vec<Poly> {
        match &self.kind {
            RuleKind::Constant { entries } => match row.resolve(entries.len()) {
                Some(i) => entries[i].iter().map(|e| e.poly().clone()).collect(),
                None => vec![],
            },
            RuleKind::Banded(b) => {
                let mut v = vec![b.default.poly().clone()];
                for (off, e) in &b.bands {
                    let present = match row {
                        SymIdx::Index(i) => i as i64 + off >= 0,
                        SymIdx::FromEnd(a) => b.clamp || b.col_offset - b.row_offset + a as i64 - off >= 0,
                    };
                    if present {
                        v.push(e.poly().clone());
                    }
                }
                v
            }
        }
    }

    /// Symbolic rows whose behaviour differs from the generic interior row.
    pub fn sym_rows(&self) -> Vec<SymIdx> {
        match &self.kind {
            RuleKind::Constant { entries } => (0..entries.len()).map(SymIdx::Index).collect(),
            RuleKind::Banded(b) => {
                let lo = b.bands.iter().map(|(o, _)| (-o).max(0)).max().unwrap_or(0) as usize;
                let hi = b
                    .bands
                    .iter()
                    .map(|(o, _)| (b.row_offset - b.col_offset + o).max(0))
                    .max()
                    .unwrap_or(0) as usize;
                let mut v: Vec<SymIdx> = (0..=lo).map(SymIdx::Index).collect();
                v.extend((0..=hi).map(SymIdx::FromEnd));
                v
            }
        }
    }

    /// Level from which symbolic entries match concrete evaluation for indices up to `k`.
    pub fn sym_threshold(&self, k: usize) -> usize {
        match &self.kind {
            RuleKind::Constant { .. } => self.from_level,
            RuleKind::Banded(b) => {
                let spread = b.bands.iter().map(|(o, _)| o.unsigned_abs() as usize).max().unwrap_or(0);
                self.from_level.max(2 * k + 2 * spread + 4)
            }
        }
    }
}

/// How levels past the stored prefix are produced.
#[derive(Clone, Debug)]
pub enum Tail {
    Rule(DiagramRule),
    /// Level k is level k + offset of the parent.
    Shifted { parent: Arc<BratteliDiagram>, offset: usize },
    /// Vertex subdiagram of the parent.
    Restricted { parent: Arc<BratteliDiagram>, selection: VertexSelection },
}

#[derive(Default, Debug)]
struct Cache {
    mats: BTreeMap<usize, Arc<IntMatrix>>,
    heights: Vec<Arc<Vec<BigInt>>>,
}

#[derive(Debug)]
pub struct BratteliDiagram {
    name: String,
    root_edges: Vec<BigInt>,
    prefix: Vec<IntMatrix>,
    tail: Option<Tail>,
    order: Option<OrderSpec>,
    cache: RwLock<Cache>,
}

impl Clone for BratteliDiagram {
    fn clone(&self) -> Self {
        BratteliDiagram {
            name: self.name.clone(),
            root_edges: self.root_edges.clone(),
            prefix: self.prefix.clone(),
            tail: self.tail.clone(),
            order: self.order.clone(),
            cache: RwLock::new(Cache::default()),
        }
    }
}

/// Levels checked when a diagram with an infinite tail is validated.
pub const VALIDATION_DEPTH: usize = 12;

impl BratteliDiagram {
    /// Builds and validates a diagram.
    pub fn new(name: &str, root_edges: Vec<BigInt>, prefix: Vec<IntMatrix>, tail: Option<Tail>) -> Result<BratteliDiagram> {
        if let Some(Tail::Rule(r)) = &tail {
            if r.from_level == 0 || r.from_level > prefix.len() + 1 {
                return Err(Error::Schema(format!(
                    "rule from_level {} must lie in 1..={}",
                    r.from_level,
                    prefix.len() + 1
                )));
            }
            r.check_nonnegative()?;
        }
        let d = BratteliDiagram {
            name: name.to_string(),
            root_edges,
            prefix,
            tail,
            order: None,
            cache: RwLock::new(Cache::default()),
        };
        d.validate()?;
        Ok(d)
    }

    /// Diagram given by its first incidence matrices only.
    pub fn from_prefix(name: &str, root_edges: Option<Vec<BigInt>>, prefix: Vec<IntMatrix>) -> Result<BratteliDiagram> {
        let first = prefix.first().ok_or_else(|| Error::Schema("no levels".into()))?;
        let root = root_edges.unwrap_or_else(|| vec![BigInt::one(); first.cols()]);
        BratteliDiagram::new(name, root, prefix, None)
    }

    /// Diagram generated by a rule (plus an optional explicit prefix).
    pub fn from_rule(name: &str, root_edges: Option<Vec<BigInt>>, prefix: Vec<IntMatrix>, rule: DiagramRule) -> Result<BratteliDiagram> {
        let v1 = match prefix.first() {
            Some(m) => m.cols(),
            None => rule.shape(rule.from_level).1,
        };
        let root = root_edges.unwrap_or_else(|| vec![BigInt::one(); v1]);
        BratteliDiagram::new(name, root, prefix, Some(Tail::Rule(rule)))
    }

    pub fn with_order(mut self, order: OrderSpec) -> BratteliDiagram {
        self.order = Some(order);
        self
    }

    pub fn with_name(mut self, name: &str) -> BratteliDiagram {
        self.name = name.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root_edges(&self) -> &[BigInt] {
        &self.root_edges
    }

    pub fn order(&self) -> Option<&OrderSpec> {
        self.order.as_ref()
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    pub fn tail(&self) -> Option<&Tail> {
        self.tail.as_ref()
    }

    /// The generating rule, if the diagram is rule-based.
    pub fn rule(&self) -> Option<&DiagramRule> {
        match &self.tail {
            Some(Tail::Rule(r)) => Some(r),
            _ => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.tail.is_some()
    }

    /// Number of available incidence matrices (None when unbounded).
    pub fn max_matrix_level(&self) -> Option<usize> {
        if self.tail.is_some() {
            None
        } else {
            Some(self.prefix.len())
        }
    }

    /// Deepest vertex level (None when unbounded).
    pub fn max_vertex_level(&self) -> Option<usize> {
        self.max_matrix_level().map(|m| m + 1)
    }

    fn check_matrix_level(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Argument("incidence matrices are indexed from level 1".into()));
        }
        if let Some(m) = self.max_matrix_level() {
            if n > m {
                return Err(Error::Depth { requested: n, available: m });
            }
        }
        Ok(())
    }

    fn compute_matrix(&self, n: usize) -> Result<IntMatrix> {
        if n <= self.prefix.len() {
            return Ok(self.prefix[n - 1].clone());
        }
        match &self.tail {
            Some(Tail::Rule(r)) => r.matrix(n),
            Some(Tail::Shifted { parent, offset }) => Ok((*parent.matrix(n + offset)?).clone()),
            Some(Tail::Restricted { parent, selection }) => {
                let a = n + selection.start - 1;
                let rows = selection.at(a + 1, parent.vertex_count(a + 1)?)?;
                let cols = selection.at(a, parent.vertex_count(a)?)?;
                Ok(parent.matrix(a)?.select(&rows, &cols))
            }
            None => Err(Error::Depth { requested: n, available: self.prefix.len() }),
        }
    }

    /// Incidence matrix F̃_n (rows V_{n+1}, columns V_n).
    pub fn matrix(&self, n: usize) -> Result<Arc<IntMatrix>> {
        self.check_matrix_level(n)?;
        if let Some(m) = self.cache.read().unwrap().mats.get(&n) {
            return Ok(m.clone());
        }
        let m = Arc::new(self.compute_matrix(n)?);
        self.cache.write().unwrap().mats.insert(n, m.clone());
        Ok(m)
    }

    /// Float copy of F̃_n, computed directly from the rule when there is one.
    pub fn matrix_f64(&self, n: usize) -> Result<FMat> {
        self.check_matrix_level(n)?;
        if n > self.prefix.len() {
            if let Some(Tail::Rule(r)) = &self.tail {
                return Ok(r.matrix_f64(n));
            }
        }
        Ok(self.matrix(n)?.to_f64())
    }

    /// |V_n|.
    pub fn vertex_count(&self, n: usize) -> Result<usize> {
        if n == 0 {
            return Ok(1);
        }
        if n == 1 {
            return Ok(self.root_edges.len());
        }
        if n <= self.prefix.len() + 1 {
            return Ok(self.prefix[n - 2].rows());
        }
        match &self.tail {
            Some(Tail::Rule(r)) => Ok(r.shape(n - 1).0),
            _ => Ok(self.matrix(n - 1)?.rows()),
        }
    }

    /// Heights h^(n): number of root paths to each vertex of level n.
    pub fn heights(&self, n: usize) -> Result<Arc<Vec<BigInt>>> {
        if n == 0 {
            return Err(Error::Argument("heights are indexed from level 1".into()));
        }
        if let Some(m) = self.max_vertex_level() {
            if n > m {
                return Err(Error::Depth { requested: n, available: m });
            }
        }
        {
            let c = self.cache.read().unwrap();
            if let Some(h) = c.heights.get(n - 1) {
                return Ok(h.clone());
            }
        }
        let mut have = self.cache.read().unwrap().heights.len();
        if have == 0 {
            self.cache.write().unwrap().heights.push(Arc::new(self.root_edges.clone()));
            have = 1;
        }
        for k in have..n {
            let prev = self.cache.read().unwrap().heights[k - 1].clone();
            let m = self.matrix(k)?;
            let next = Arc::new(m.mul_vec(&prev));
            let mut c = self.cache.write().unwrap();
            if c.heights.len() == k {
                c.heights.push(next);
            }
        }
        Ok(self.cache.read().unwrap().heights[n - 1].clone())
    }

    /// Heights as floats scaled to have maximum 1.
    pub fn heights_f64_normalized(&self, n: usize) -> Result<Vec<f64>> {
        let h = self.heights(n)?;
        let m = h.iter().max().cloned().unwrap_or_else(BigInt::one);
        Ok(h.iter().map(|v| crate::rational::big_ratio_f64(v, &m)).collect())
    }

    /// Stochastic matrix F_n: f_vw = f̃_vw h_w^(n) / h_v^(n+1).
    pub fn stochastic(&self, n: usize) -> Result<RatMatrix> {
        let m = self.matrix(n)?;
        let h = self.heights(n)?;
        let h1 = self.heights(n + 1)?;
        let mut out = RatMatrix::zeros(m.rows(), m.cols());
        for v in 0..m.rows() {
            let denom = qb(&h1[v]);
            for w in 0..m.cols() {
                let e = m.get(v, w);
                if !e.is_zero() {
                    out.set(v, w, qb(&(e * &h[w])) / &denom);
                }
            }
        }
        Ok(out)
    }

    /// Float stochastic matrix from normalized heights of level n.
    pub fn stochastic_f64_with(&self, n: usize, h: &[f64]) -> Result<FMat> {
        let mut m = self.matrix_f64(n)?;
        for v in 0..m.rows {
            for w in 0..m.cols {
                m.data[v * m.cols + w] *= h[w];
            }
        }
        m.normalize_rows();
        Ok(m)
    }

    /// Stochastic product F_{n+m} ⋯ F_n (rows V_{n+m+1}, columns V_n).
    pub fn stochastic_product(&self, n: usize, m: usize) -> Result<RatMatrix> {
        let mut g = self.stochastic(n)?;
        for k in n + 1..=n + m {
            g = self.stochastic(k)?.mul(&g);
        }
        Ok(g)
    }

    /// Telescopes along 0 = n_0 < n_1 < ⋯: level k of the result is level n_k.
    pub fn telescope(self: &Arc<Self>, levels: &[usize]) -> Result<BratteliDiagram> {
        if levels.len() < 2 || levels[0] != 0 {
            return Err(Error::Argument("telescoping sequence must start at 0 and have a second term".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("telescoping sequence must be strictly increasing".into()));
        }
        let last = *levels.last().unwrap();
        if let Some(m) = self.max_vertex_level() {
            if last > m {
                return Err(Error::Depth { requested: last, available: m });
            }
        }
        let root = (*self.heights(levels[1])?).clone();
        let mut prefix = vec![];
        for w in levels[1..].windows(2) {
            let mut g = (*self.matrix(w[0])?).clone();
            for k in w[0] + 1..w[1] {
                g = self.matrix(k)?.mul(&g);
            }
            prefix.push(g);
        }
        let kmax = levels.len() - 1;
        let tail = if self.is_infinite() {
            Some(Tail::Shifted { parent: self.clone(), offset: last - kmax })
        } else {
            None
        };
        let d = BratteliDiagram {
            name: format!("{}-telescoped", self.name),
            root_edges: root,
            prefix,
            tail,
            order: None,
            cache: RwLock::new(Cache::default()),
        };
        if d.prefix.is_empty() && d.tail.is_none() {
            return Err(Error::Argument("telescoping leaves no incidence matrices".into()));
        }
        d.validate()?;
        Ok(d)
    }

    /// Levels checked by validation.
    fn validation_levels(&self) -> usize {
        match self.max_matrix_level() {
            Some(m) => m,
            None => self.prefix.len().max(VALIDATION_DEPTH),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.root_edges.is_empty() {
            return Err(Error::Schema("level 1 has no vertices".into()));
        }
        if let Some(i) = self.root_edges.iter().position(|r| !r.is_positive()) {
            return Err(Error::Structure { level: 0, detail: format!("root edge count for vertex {i} must be positive") });
        }
        for n in 1..=self.validation_levels() {
            let m = self.matrix(n)?;
            let cols = self.vertex_count(n)?;
            if m.cols() != cols {
                return Err(Error::Structure {
                    level: n,
                    detail: format!("matrix has {} columns but level {n} has {cols} vertices", m.cols()),
                });
            }
            if m.rows() == 0 {
                return Err(Error::Structure { level: n, detail: "empty level".into() });
            }
            if !m.is_nonnegative() {
                return Err(Error::Structure { level: n, detail: "negative incidence entry".into() });
            }
            for v in 0..m.rows() {
                if m.row(v).iter().all(|x| x.is_zero()) {
                    return Err(Error::Structure { level: n, detail: format!("vertex {v} of level {} has no incoming edge", n + 1) });
                }
            }
            for w in 0..m.cols() {
                if (0..m.rows()).all(|v| m.get(v, w).is_zero()) {
                    return Err(Error::Structure { level: n, detail: format!("vertex {w} of level {n} has no outgoing edge") });
                }
            }
        }
        Ok(())
    }

    /// Whether levels 1..=depth, with the root removed, form one connected graph.
    pub fn connected_through(&self, depth: usize) -> Result<bool> {
        let mut offsets = vec![0usize];
        for n in 1..=depth {
            offsets.push(offsets[n - 1] + self.vertex_count(n)?);
        }
        let total = offsets[depth];
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        for n in 1..depth {
            let m = self.matrix(n)?;
            for v in 0..m.rows() {
                for w in 0..m.cols() {
                    if !m.get(v, w).is_zero() {
                        let a = find(&mut parent, offsets[n] + v);
                        let b = find(&mut parent, offsets[n - 1] + w);
                        parent[a] = b;
                    }
                }
            }
        }
        let r0 = find(&mut parent, 0);
        Ok((0..total).all(|x| find(&mut parent, x) == r0))
    }

    /// Whether |V_n| is the same for every level (within the materialized range for prefixes).
    pub fn constant_rank(&self) -> Option<usize> {
        match &self.tail {
            Some(Tail::Rule(r)) if !r.is_constant_shape() => None,
            _ => {
                let k = self.root_edges.len();
                let depth = self.validation_levels() + 1;
                (1..=depth).all(|n| self.vertex_count(n).ok() == Some(k)).then_some(k)
            }
        }
    }

    /// The repeated matrix of a stationary diagram.
    pub fn stationary_matrix(&self) -> Option<IntMatrix> {
        match &self.tail {
            Some(Tail::Rule(r)) => {
                let RuleKind::Constant { entries } = &r.kind else { return None };
                if entries.iter().flatten().any(|e| !e.is_constant()) || entries.len() != entries[0].len() {
                    return None;
                }
                let m = r.matrix(r.from_level).ok()?;
                if self.prefix.iter().all(|p| *p == m) {
                    Some(m)
                } else {
                    None
                }
            }
            None => {
                let first = self.prefix.first()?;
                (first.rows() == first.cols() && self.prefix.iter().all(|p| p == first)).then(|| first.clone())
            }
            _ => None,
        }
    }

    /// Serializable form with the given number of explicit levels.
    pub fn to_json(&self, depth: usize) -> Result<Value> {
        let depth = match self.max_matrix_level() {
            Some(m) => depth.min(m),
            None => depth,
        };
        let levels: Result<Vec<_>> = (1..=depth).map(|n| Ok(serde_json::to_value(&*self.matrix(n)?).unwrap())).collect();
        Ok(serde_json::json!({
            "name": self.name,
            "root_edges": self.root_edges.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "levels": levels?,
        }))
    }

    /// Reads a diagram from its JSON description.
    pub fn from_json_str(s: &str) -> Result<BratteliDiagram> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::Schema(format!("invalid JSON: {e}")))?;
        BratteliDiagram::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<BratteliDiagram> {
        let file: DiagramFile = serde_json::from_value(v.clone()).map_err(|e| Error::Schema(e.to_string()))?;
        let name = file.name.unwrap_or_else(|| "diagram".into());
        let prefix: Vec<IntMatrix> = file
            .levels
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(i, rows)| {
                let rows: Result<Vec<Vec<BigInt>>> =
                    rows.iter().map(|r| r.iter().map(json_int).collect::<Result<Vec<_>>>()).collect();
                let m = IntMatrix::from_rows(rows?).map_err(|_| Error::Schema(format!("level {} is not rectangular", i + 1)))?;
                if m.rows() == 0 || m.cols() == 0 {
                    return Err(Error::Schema(format!("level {} is empty", i + 1)));
                }
                if !m.is_nonnegative() {
                    return Err(Error::Schema(format!("level {} has a negative entry", i + 1)));
                }
                Ok(m)
            })
            .collect::<Result<_>>()?;
        let root = match &file.root_edges {
            Some(r) => Some(r.iter().map(json_int).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        let mut d = match file.rule {
            Some(r) => {
                let rule = r.into_rule(prefix.len())?;
                BratteliDiagram::from_rule(&name, root, prefix, rule)?
            }
            None => {
                if prefix.is_empty() {
                    return Err(Error::Schema("diagram needs levels or a rule".into()));
                }
                BratteliDiagram::from_prefix(&name, root, prefix)?
            }
        };
        if let Some(o) = file.order {
            let spec = OrderSpec::from_json(&o)?;
            spec.validate(&d)?;
            d.order = Some(spec);
        }
        Ok(d)
    }
}

pub(crate) fn json_int(v: &Value) -> Result<BigInt> {
    let bad = || Error::Schema(format!("not a nonnegative integer: {v}"));
    let n: BigInt = match v {
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                BigInt::from(u)
            } else if let Some(i) = n.as_i64() {
                BigInt::from(i)
            } else {
                return Err(bad());
            }
        }
        Value::String(s) => s.trim().parse().map_err(|_| bad())?,
        _ => return Err(bad()),
    };
    if n.is_negative() {
        return Err(bad());
    }
    Ok(n)
}

fn json_expr(v: &Value) -> Result<Expr> {
    match v {
        Value::String(s) => Expr::parse(s),
        Value::Number(_) => Expr::parse(&json_int(v)?.to_string()),
        _ => Err(Error::Schema(format!("not an expression: {v}"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagramFile {
    name: Option<String>,
    root_edges: Option<Vec<Value>>,
    levels: Option<Vec<Vec<Vec<Value>>>>,
    rule: Option<RuleFile>,
    order: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    from_level: Option<usize>,
    shape: String,
    rows: Option<Value>,
    cols: Option<Value>,
    entries: Option<Vec<Vec<Value>>>,
    a: Option<Value>,
    default: Option<Value>,
    bands: Option<Vec<(i64, Value)>>,
    clamp: Option<bool>,
    row_offset: Option<i64>,
    col_offset: Option<i64>,
}

impl RuleFile {
    fn into_rule(self, prefix_len: usize) -> Result<DiagramRule> {
        let from = self.from_level.unwrap_or(prefix_len + 1).max(1);
        match self.shape.as_str() {
            "constant" => {
                let entries = self.entries.ok_or_else(|| Error::Schema("constant rule needs entries".into()))?;
                let entries: Vec<Vec<Expr>> =
                    entries.iter().map(|r| r.iter().map(json_expr).collect::<Result<_>>()).collect::<Result<_>>()?;
                let (r, c) = (entries.len(), entries.first().map_or(0, |x| x.len()));
                for (key, want, got) in [("rows", r, &self.rows), ("cols", c, &self.cols)] {
                    if let Some(g) = got {
                        let g = json_int(g)?.to_usize().unwrap_or(usize::MAX);
                        if g != want {
                            return Err(Error::Schema(format!("rule {key} = {g} but entries give {want}")));
                        }
                    }
                }
                DiagramRule::constant(from, entries)
            }
            "pascal" => Ok(DiagramRule::pascal(from)),
            "countable_chain" => {
                let a = self.a.as_ref().ok_or_else(|| Error::Schema("countable_chain rule needs \"a\"".into()))?;
                Ok(DiagramRule::countable_chain(from, json_expr(a)?))
            }
            "banded" => {
                let default = json_expr(self.default.as_ref().unwrap_or(&Value::from(0)))?;
                let bands = self
                    .bands
                    .unwrap_or_default()
                    .iter()
                    .map(|(o, e)| Ok((*o, json_expr(e)?)))
                    .collect::<Result<Vec<_>>>()?;
                let clamp = self.clamp.unwrap_or(false);
                if clamp && bands.len() != 1 {
                    return Err(Error::Schema("clamped banded rules take exactly one band".into()));
                }
                let row_offset = self.row_offset.unwrap_or(2);
                let col_offset = self.col_offset.unwrap_or(1);
                if row_offset != col_offset + 1 {
                    return Err(Error::Schema("banded rule needs row_offset = col_offset + 1".into()));
                }
                Ok(DiagramRule {
                    from_level: from,
                    kind: RuleKind::Banded(Banded { family: BandFamily::Custom, row_offset, col_offset, default, bands, clamp }),
                })
            }
            other => Err(Error::Schema(format!("unknown rule shape {other:?}"))),
        }
    }
}

/// Exact stochastic entry as a float (helper for traces).
pub fn ratio_f64(a: &BigInt, b: &BigInt) -> f64 {
    if b.is_zero() {
        0.0
    } else {
        crate::rational::big_ratio_f64(a, b)
    }
}

pub fn big_to_f64(a: &BigInt) -> f64 {
    big_f64(a)
}

pub fn q_of(a: &BigInt) -> Q {
    qb(a)
}
