//! Stationary diagrams: vertex classes, certified spectral radii, distinguished
//! classes and the measures they carry.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use serde_json::Value;

use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::matrix::{IntMatrix, RatMatrix};
use crate::measure::{MeasureForm, TowerMeasure};
use crate::rational::{big_f64, q_f64, q_pow, q_str, qb, qi, round12, Q};

/// Strongly connected classes of the graph with an edge v -> w whenever f̃_vw > 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassDecomposition {
    /// Classes in sink-first order; members ascending.
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
    /// reach[a][b]: class b is reachable from class a (reflexive).
    pub reach: Vec<Vec<bool>>,
    /// Vertex order that puts the matrix in block lower-triangular form.
    pub permutation: Vec<usize>,
}

impl ClassDecomposition {
    /// a ≻ b: b reachable from a and a ≠ b.
    pub fn above(&self, a: usize, b: usize) -> bool {
        a != b && self.reach[a][b]
    }

    /// Vertices reachable from class a.
    pub fn reachable_vertices(&self, a: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.classes.len()).filter(|&b| self.reach[a][b]).flat_map(|b| self.classes[b].clone()).collect();
        v.sort_unstable();
        v
    }
}

struct Tarjan<'a> {
    adj: &'a [Vec<usize>],
    index: Vec<Option<usize>>,
    low: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    next: usize,
    out: Vec<Vec<usize>>,
}

impl Tarjan<'_> {
    fn run(&mut self, root: usize) {
        // iterative DFS: (vertex, next neighbour position)
        let mut call = vec![(root, 0usize)];
        self.visit(root);
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = self.adj[v].get(*pos) {
                *pos += 1;
                match self.index[w] {
                    None => {
                        self.visit(w);
                        call.push((w, 0));
                    }
                    Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                    _ => {}
                }
                continue;
            }
            call.pop();
            if let Some(&(u, _)) = call.last() {
                self.low[u] = self.low[u].min(self.low[v]);
            }
            if Some(self.low[v]) == self.index[v] {
                let mut comp = vec![];
                loop {
                    let w = self.stack.pop().unwrap();
                    self.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                self.out.push(comp);
            }
        }
    }

    fn visit(&mut self, v: usize) {
        self.index[v] = Some(self.next);
        self.low[v] = self.next;
        self.next += 1;
        self.stack.push(v);
        self.on_stack[v] = true;
    }
}

pub fn class_decomposition(m: &IntMatrix) -> Result<ClassDecomposition> {
    if m.rows() != m.cols() {
        return Err(Error::Argument("class decomposition needs a square matrix".into()));
    }
    let k = m.rows();
    let adj: Vec<Vec<usize>> = (0..k).map(|v| (0..k).filter(|&w| !m.get(v, w).is_zero()).collect()).collect();
    let mut t = Tarjan {
        adj: &adj,
        index: vec![None; k],
        low: vec![0; k],
        on_stack: vec![false; k],
        stack: vec![],
        next: 0,
        out: vec![],
    };
    for v in 0..k {
        if t.index[v].is_none() {
            t.run(v);
        }
    }
    let classes = t.out;
    let mut class_of = vec![0; k];
    for (c, members) in classes.iter().enumerate() {
        for &v in members {
            class_of[v] = c;
        }
    }
    let nc = classes.len();
    let mut reach = vec![vec![false; nc]; nc];
    // sink-first order: every class reachable from c has a smaller index
    for c in 0..nc {
        reach[c][c] = true;
        for &v in &classes[c] {
            for &w in &adj[v] {
                let d = class_of[w];
                if d != c {
                    for e in 0..nc {
                        if reach[d][e] {
                            reach[c][e] = true;
                        }
                    }
                }
            }
        }
    }
    let permutation = classes.iter().flatten().copied().collect();
    Ok(ClassDecomposition { classes, class_of, reach, permutation })
}

/// Certified enclosure of a spectral radius.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralInterval {
    pub lower: Q,
    pub upper: Q,
    pub exact: bool,
    pub converged: bool,
    pub iterations: usize,
}

impl SpectralInterval {
    pub fn point(v: Q) -> SpectralInterval {
        SpectralInterval { lower: v.clone(), upper: v, exact: true, converged: true, iterations: 0 }
    }

    pub fn width(&self) -> Q {
        &self.upper - &self.lower
    }

    pub fn contains(&self, x: &Q) -> bool {
        &self.lower <= x && x <= &self.upper
    }

    pub fn midpoint_f64(&self) -> f64 {
        (q_f64(&self.lower) + q_f64(&self.upper)) / 2.0
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "lower": q_str(&self.lower),
            "upper": q_str(&self.upper),
            "lower_f64": round12(q_f64(&self.lower)),
            "upper_f64": round12(q_f64(&self.upper)),
            "exact": self.exact,
            "converged": self.converged,
            "iterations": self.iterations,
        })
    }
}

/// Positive Perron vector of A for eigenvalue λ, if one exists (then λ = ρ(A)).
fn positive_eigenvector(a: &RatMatrix, lambda: &Q) -> Option<Vec<Q>> {
    let k = a.rows();
    let mut m = a.clone();
    for i in 0..k {
        let v = m.get(i, i) - lambda;
        m.set(i, i, v);
    }
    let ns = m.nullspace();
    if ns.len() != 1 {
        return None;
    }
    let v = &ns[0];
    let sign = if v.iter().any(|x| x.is_positive()) { Q::one() } else { -Q::one() };
    let v: Vec<Q> = v.iter().map(|x| x * &sign).collect();
    v.iter().all(|x| x.is_positive()).then_some(v)
}

const ROUND_BITS: u32 = 48;

fn round_positive(x: &[Q]) -> Vec<Q> {
    let max = x.iter().max().cloned().unwrap_or_else(Q::one);
    let scale = BigInt::one() << ROUND_BITS;
    x.iter()
        .map(|v| {
            let r = (v / &max * qb(&scale)).round().to_integer().max(BigInt::one());
            Q::new(r, scale.clone())
        })
        .collect()
}

/// Collatz–Wielandt enclosure of ρ for an irreducible nonnegative matrix.
pub fn spectral_radius(block: &IntMatrix, width: &Q) -> Result<SpectralInterval> {
    spectral_radius_with(block, width, 20_000)
}

pub fn spectral_radius_with(block: &IntMatrix, width: &Q, max_iter: usize) -> Result<SpectralInterval> {
    if block.rows() != block.cols() || block.rows() == 0 {
        return Err(Error::Argument("spectral radius needs a nonempty square matrix".into()));
    }
    if !block.is_nonnegative() {
        return Err(Error::Argument("matrix must be nonnegative".into()));
    }
    let k = block.rows();
    if k == 1 {
        return Ok(SpectralInterval::point(qb(block.get(0, 0))));
    }
    if class_decomposition(block)?.classes.len() != 1 {
        return Err(Error::Argument("matrix is not irreducible".into()));
    }
    let a = block.to_rat();
    let mut x = vec![Q::one(); k];
    let mut tried: Vec<BigInt> = vec![];
    let mut it = 0;
    loop {
        let ax = a.mul_vec(&x);
        let ratios: Vec<Q> = ax.iter().zip(&x).map(|(p, q)| p / q).collect();
        let lower = ratios.iter().min().unwrap().clone();
        let upper = ratios.iter().max().unwrap().clone();
        // an integer inside the enclosure with a positive eigenvector is ρ itself
        let lo_i = lower.ceil().to_integer();
        let hi_i = upper.floor().to_integer();
        if &hi_i - &lo_i <= BigInt::from(2) {
            let mut c = lo_i.clone();
            while c <= hi_i {
                if !tried.contains(&c) {
                    tried.push(c.clone());
                    if positive_eigenvector(&a, &qb(&c)).is_some() {
                        return Ok(SpectralInterval { lower: qb(&c), upper: qb(&c), exact: true, converged: true, iterations: it });
                    }
                }
                c += 1;
            }
        }
        if &upper - &lower <= *width {
            return Ok(SpectralInterval { lower, upper, exact: false, converged: true, iterations: it });
        }
        if it >= max_iter {
            return Ok(SpectralInterval { lower, upper, exact: false, converged: false, iterations: it });
        }
        let y: Vec<Q> = ax.iter().zip(&x).map(|(p, q)| p + q).collect();
        x = round_positive(&y);
        it += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Greater,
    NotGreater,
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub above: usize,
    pub below: usize,
    pub relation: Relation,
}

pub fn compare(a: &SpectralInterval, b: &SpectralInterval) -> Relation {
    if a.lower > b.upper {
        Relation::Greater
    } else if a.upper <= b.lower {
        Relation::NotGreater
    } else {
        Relation::Undecided
    }
}

#[derive(Clone, Debug)]
pub struct DistinguishedReport {
    pub decomposition: ClassDecomposition,
    pub radii: Vec<SpectralInterval>,
    pub comparisons: Vec<Comparison>,
    pub distinguished: Vec<usize>,
    pub undecided: Vec<usize>,
}

/// Classes whose spectral radius strictly exceeds that of every class below them.
pub fn distinguished_classes(m: &IntMatrix, width: &Q) -> Result<DistinguishedReport> {
    let dec = class_decomposition(m)?;
    let radii: Vec<SpectralInterval> = dec
        .classes
        .iter()
        .map(|c| {
            let b = m.select(c, c);
            spectral_radius(&b, width)
        })
        .collect::<Result<_>>()?;
    let nc = dec.classes.len();
    let mut comparisons = vec![];
    let mut distinguished = vec![];
    let mut undecided = vec![];
    for a in 0..nc {
        if radii[a].upper.is_zero() {
            continue;
        }
        let mut status = Relation::Greater;
        for b in 0..nc {
            if dec.above(a, b) {
                let r = compare(&radii[a], &radii[b]);
                comparisons.push(Comparison { above: a, below: b, relation: r });
                status = match (status, r) {
                    (_, Relation::NotGreater) | (Relation::NotGreater, _) => Relation::NotGreater,
                    (_, Relation::Undecided) | (Relation::Undecided, _) => Relation::Undecided,
                    _ => Relation::Greater,
                };
            }
        }
        match status {
            Relation::Greater => distinguished.push(a),
            Relation::Undecided => undecided.push(a),
            Relation::NotGreater => {}
        }
    }
    Ok(DistinguishedReport { decomposition: dec, radii, comparisons, distinguished, undecided })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Finite,
    Infinite,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationaryMeasure {
    pub class: usize,
    pub kind: MeasureKind,
    pub rho: Value,
    pub exact: bool,
    /// Left eigenvector on the vertices where the measure is finite.
    pub x: Vec<Value>,
    pub finite_on: Vec<usize>,
    pub infinite_on: Vec<usize>,
    pub residual: f64,
    /// values[n-1][v] = μ(X_v^(n)) ("p/q", float, "inf" or 0).
    pub values: Vec<Vec<Value>>,
    #[serde(skip)]
    pub tower: Option<TowerMeasure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationaryReport {
    pub classes: Vec<Vec<usize>>,
    pub radii: Vec<Value>,
    pub comparisons: Vec<Comparison>,
    pub distinguished: Vec<usize>,
    pub undecided: Vec<usize>,
    pub measures: Vec<StationaryMeasure>,
}

fn float_left_eigenvector(a: &IntMatrix, rho: f64) -> (Vec<f64>, f64) {
    let k = a.rows();
    let f = a.to_f64();
    let mut x = vec![1.0; k];
    for _ in 0..100_000 {
        let mut y = x.clone();
        for i in 0..k {
            for j in 0..k {
                y[j] += x[i] * f.get(i, j);
            }
        }
        let s: f64 = y.iter().sum();
        let y: Vec<f64> = y.iter().map(|v| v / s).collect();
        let diff: f64 = y.iter().zip(&x).map(|(p, q)| (p - q).abs()).sum();
        x = y;
        if diff < 1e-15 {
            break;
        }
    }
    let mut res: f64 = 0.0;
    for j in 0..k {
        let xf: f64 = (0..k).map(|i| x[i] * f.get(i, j)).sum();
        res = res.max((xf - rho * x[j]).abs());
    }
    (x, res)
}

/// Finite and infinite ergodic measures of a stationary diagram, tabulated to `depth`.
pub fn stationary_measures(d: &BratteliDiagram, depth: usize, width: &Q) -> Result<StationaryReport> {
    let m = d
        .stationary_matrix()
        .ok_or_else(|| Error::Argument("diagram is not stationary".into()))?;
    let rep = distinguished_classes(&m, width)?;
    let dec = &rep.decomposition;
    let nc = dec.classes.len();
    let k = m.rows();
    let mut measures = vec![];
    for b in 0..nc {
        let rb = &rep.radii[b];
        if rb.upper.is_zero() || rep.undecided.contains(&b) {
            continue;
        }
        // classes where the measure is infinite: reachable through a class with ρ ≥ ρ_b
        let mut bad = vec![false; nc];
        let mut undecided = false;
        for c in 0..nc {
            if dec.above(b, c) {
                match compare(rb, &rep.radii[c]) {
                    Relation::Greater => {}
                    Relation::NotGreater => bad[c] = true,
                    Relation::Undecided => undecided = true,
                }
            }
        }
        if undecided {
            continue;
        }
        let infinite_class: Vec<bool> = (0..nc).map(|c| (0..nc).any(|x| bad[x] && dec.reach[x][c])).collect();
        let finite_on: Vec<usize> = dec.reachable_vertices(b).into_iter().filter(|&v| !infinite_class[dec.class_of[v]]).collect();
        let infinite_on: Vec<usize> = dec.reachable_vertices(b).into_iter().filter(|&v| infinite_class[dec.class_of[v]]).collect();
        let kind = if infinite_on.is_empty() { MeasureKind::Finite } else { MeasureKind::Infinite };
        let sub = m.select(&finite_on, &finite_on);

        let mut exact_x: Option<Vec<Q>> = None;
        if rb.exact {
            let t = sub.transpose().to_rat();
            if let Some(v) = nonneg_eigen(&t, &rb.lower) {
                exact_x = Some(v);
            }
        }
        let (x_vals, residual, tower, values) = match exact_x {
            Some(xs) => {
                let mut full = vec![Q::zero(); k];
                for (i, &v) in finite_on.iter().enumerate() {
                    full[v] = xs[i].clone();
                }
                let h1 = d.heights(1)?;
                let mass: Q = full.iter().zip(h1.iter()).map(|(x, h)| x * qb(h)).sum();
                let scale = if kind == MeasureKind::Finite { Q::one() / &mass } else { Q::one() };
                let tower = TowerMeasure { form: MeasureForm::HeightScaled { x: full.clone(), rho: rb.lower.clone(), scale: scale.clone() } };
                let mut values = vec![];
                for n in 1..=depth {
                    let h = d.heights(n)?;
                    let r = q_pow(&rb.lower, (n - 1) as u32);
                    values.push(
                        (0..k)
                            .map(|v| {
                                if infinite_on.contains(&v) {
                                    Value::from("inf")
                                } else {
                                    Value::from(q_str(&(&scale * &full[v] * qb(&h[v]) / &r)))
                                }
                            })
                            .collect(),
                    );
                }
                let xv = full.iter().map(|x| Value::from(q_str(&(x * &scale)))).collect();
                (xv, 0.0, (kind == MeasureKind::Finite).then_some(tower), values)
            }
            None => {
                let rho = rb.midpoint_f64();
                let (xs, res) = float_left_eigenvector(&sub, rho);
                let mut full = vec![0.0; k];
                for (i, &v) in finite_on.iter().enumerate() {
                    full[v] = xs[i];
                }
                let h1 = d.heights(1)?;
                let mass: f64 = full.iter().zip(h1.iter()).map(|(x, h)| x * big_f64(h)).sum();
                let scale = if kind == MeasureKind::Finite { 1.0 / mass } else { 1.0 };
                let mut values = vec![];
                for n in 1..=depth {
                    let h = d.heights(n)?;
                    values.push(
                        (0..k)
                            .map(|v| {
                                if infinite_on.contains(&v) {
                                    Value::from("inf")
                                } else {
                                    let hv = big_f64(&h[v]) / rho.powi((n - 1) as i32);
                                    Value::from(round12(scale * full[v] * hv))
                                }
                            })
                            .collect(),
                    );
                }
                let xv = full.iter().map(|x| Value::from(round12(x * scale))).collect();
                (xv, res, None, values)
            }
        };
        measures.push(StationaryMeasure {
            class: b,
            kind,
            rho: rb.to_json(),
            exact: rb.exact,
            x: x_vals,
            finite_on,
            infinite_on,
            residual: round12(residual),
            values,
            tower,
        });
    }
    Ok(StationaryReport {
        classes: dec.classes.clone(),
        radii: rep.radii.iter().map(|r| r.to_json()).collect(),
        comparisons: rep.comparisons.clone(),
        distinguished: rep.distinguished.clone(),
        undecided: rep.undecided.clone(),
        measures,
    })
}

/// Nonnegative nonzero solution of A y = λ y when the eigenspace is one-dimensional.
fn nonneg_eigen(a: &RatMatrix, lambda: &Q) -> Option<Vec<Q>> {
    let k = a.rows();
    let mut m = a.clone();
    for i in 0..k {
        let v = m.get(i, i) - lambda;
        m.set(i, i, v);
    }
    let ns = m.nullspace();
    if ns.len() != 1 {
        return None;
    }
    let v = &ns[0];
    let sign = if v.iter().any(|x| x.is_positive()) { Q::one() } else { -Q::one() };
    let v: Vec<Q> = v.iter().map(|x| x * &sign).collect();
    v.iter().all(|x| !x.is_negative()).then_some(v)
}

/// Exact integer spectral radius helper for tests and reports.
pub fn integer_radius(m: &IntMatrix) -> Option<i64> {
    let s = spectral_radius(m, &Q::new(BigInt::one(), BigInt::from(1u64 << 40))).ok()?;
    if s.exact && s.lower.is_integer() {
        s.lower.to_integer().to_i64()
    } else {
        None
    }
}

pub fn default_width() -> Q {
    Q::new(BigInt::one(), BigInt::from(10u64).pow(12))
}

pub fn q_int(v: i64) -> Q {
    qi(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::measure::check_invariance;

    #[test]
    fn triangular_example_has_one_finite_measure() {
        let d = catalog::triangular_stationary();
        let r = stationary_measures(&d, 30, &default_width()).unwrap();
        assert_eq!(r.distinguished.len(), 1);
        assert_eq!(r.classes[r.distinguished[0]], vec![0]);
        let fin: Vec<_> = r.measures.iter().filter(|m| m.kind == MeasureKind::Finite).collect();
        assert_eq!(fin.len(), 1);
        for n in 0..30 {
            assert_eq!(fin[0].values[n][0], Value::from("1/1"));
            assert_eq!(fin[0].values[n][1], Value::from("0/1"));
        }
        let inf: Vec<_> = r.measures.iter().filter(|m| m.kind == MeasureKind::Infinite).collect();
        assert_eq!(inf.len(), 1);
        assert_eq!(inf[0].infinite_on, vec![0]);
        assert!(check_invariance(&d, fin[0].tower.as_ref().unwrap(), 10).unwrap().holds);
    }

    #[test]
    fn collatz_wielandt_brackets_two() {
        let m = IntMatrix::from_i64(&[&[1, 1], &[1, 1]]);
        let s = spectral_radius(&m, &Q::new(BigInt::one(), BigInt::from(10u64).pow(10))).unwrap();
        assert!(s.contains(&qi(2)));
        assert!(s.width() < Q::new(BigInt::one(), BigInt::from(10u64).pow(9)));
    }

    #[test]
    fn golden_ratio_enclosure() {
        let m = IntMatrix::from_i64(&[&[1, 1], &[1, 0]]);
        let s = spectral_radius(&m, &Q::new(BigInt::one(), BigInt::from(10u64).pow(12))).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(!s.exact);
        assert!(q_f64(&s.lower) <= phi + 1e-15 && phi - 1e-15 <= q_f64(&s.upper));
    }

    #[test]
    fn equal_irrational_radii_are_undecided() {
        let m = IntMatrix::from_i64(&[&[1, 1, 0, 0], &[1, 0, 0, 0], &[1, 0, 1, 1], &[0, 0, 1, 0]]);
        let r = distinguished_classes(&m, &default_width()).unwrap();
        assert_eq!(r.decomposition.classes.len(), 2);
        assert_eq!(r.undecided.len(), 1);
        assert_eq!(r.distinguished.len(), 1);
    }

    #[test]
    fn block_triangular_permutation() {
        let m = IntMatrix::from_i64(&[&[2, 0, 0], &[0, 2, 0], &[1, 1, 1]]);
        let d = class_decomposition(&m).unwrap();
        let p = &d.permutation;
        let pm = m.select(p, p);
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(pm.get(i, j).is_zero());
            }
        }
    }
}
