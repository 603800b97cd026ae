use std::sync::Arc;

use bratteli::catalog;
use bratteli::matrix::IntMatrix;
use bratteli::measure::{check_invariance, count_measures, cylinder_measure, polytope_slice, slice_diameter, CountOptions, TowerMeasure};
use bratteli::rational::{q, qb, Q};
use bratteli::stationary::{default_width, stationary_measures};
use bratteli::BratteliDiagram;
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn prefix(k: usize, levels: usize, hi: i64) -> impl Strategy<Value = Vec<Vec<Vec<i64>>>> {
    let m = prop::collection::vec(prop::collection::vec(0..=hi, k), k).prop_filter("no empty rows or columns", move |m| {
        m.iter().all(|r| r.iter().any(|&x| x > 0)) && (0..k).all(|j| m.iter().any(|r| r[j] > 0))
    });
    prop::collection::vec(m, levels)
}

fn diagram(p: &[Vec<Vec<i64>>]) -> BratteliDiagram {
    let mats = p
        .iter()
        .map(|m| {
            let r: Vec<&[i64]> = m.iter().map(|r| r.as_slice()).collect();
            IntMatrix::from_i64(&r)
        })
        .collect();
    BratteliDiagram::from_prefix("random", None, mats).unwrap()
}

/// Heights by direct recursion from all-ones root edges.
fn heights_oracle(p: &[Vec<Vec<i64>>]) -> Vec<Vec<BigInt>> {
    let mut h = vec![vec![BigInt::one(); p[0][0].len()]];
    for m in p {
        let prev = h.last().unwrap();
        h.push(m.iter().map(|row| row.iter().zip(prev).map(|(&a, b)| BigInt::from(a) * b).sum()).collect());
    }
    h
}

/// Rows of F_base^T ... F_top^T applied to basis vectors at the top level, in floats.
fn pushdown_oracle(p: &[Vec<Vec<i64>>], base: usize, top: usize) -> Vec<Vec<f64>> {
    let h = heights_oracle(p);
    let stoch = |n: usize| -> Vec<Vec<f64>> {
        let m = &p[n - 1];
        m.iter()
            .enumerate()
            .map(|(v, row)| {
                row.iter()
                    .enumerate()
                    .map(|(w, &a)| a as f64 * h[n - 1][w].to_f64().unwrap() / h[n][v].to_f64().unwrap())
                    .collect()
            })
            .collect()
    };
    let k = p[top - 1].len();
    (0..k)
        .map(|v| {
            let mut x: Vec<f64> = (0..k).map(|i| if i == v { 1.0 } else { 0.0 }).collect();
            for n in (base..=top).rev() {
                let f = stoch(n);
                let cols = f[0].len();
                x = (0..cols).map(|w| (0..f.len()).map(|u| x[u] * f[u][w]).sum()).collect();
            }
            x
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn heights_follow_the_incidence_matrices(p in prefix(3, 6, 4)) {
        let d = diagram(&p);
        let h = heights_oracle(&p);
        for n in 1..=7 {
            prop_assert_eq!(&*d.heights(n).unwrap(), &h[n - 1]);
        }
        for n in 1..=6 {
            for s in d.stochastic(n).unwrap().row_sums() {
                prop_assert!(s.is_one());
            }
        }
    }

    #[test]
    fn cluster_representatives_match_pushdown(p in prefix(2, 6, 4)) {
        let d = diagram(&p);
        let r = count_measures(&d, &CountOptions { base: Some(1), depth: 5, eps: 1e-9, ..CountOptions::default() }).unwrap();
        let oracle = pushdown_oracle(&p, r.base, r.base + r.depth);
        for c in &r.clusters {
            let o = &oracle[c.members[0]];
            let dist: f64 = c.representative_f64.iter().zip(o).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(dist < 1e-6, "{:?} vs {:?}", c.representative_f64, o);
        }
    }

    #[test]
    fn cluster_representatives_match_pushdown_3x3(p in prefix(3, 6, 4)) {
        let d = diagram(&p);
        let r = count_measures(&d, &CountOptions { base: Some(2), depth: 4, eps: 0.05, ..CountOptions::default() }).unwrap();
        let oracle = pushdown_oracle(&p, r.base, r.base + r.depth);
        for c in &r.clusters {
            let o = &oracle[c.members[0]];
            let dist: f64 = c.representative_f64.iter().zip(o).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(dist < 1e-6);
        }
    }

    #[test]
    fn slices_are_nested(p in prefix(3, 6, 4), n in 1usize..3) {
        let d = diagram(&p);
        let mut prev: Option<Q> = None;
        for m in 0..=(5 - n) {
            let diam = slice_diameter(&polytope_slice(&d, n, m).unwrap());
            if let Some(p) = &prev {
                prop_assert!(&diam <= p);
            }
            prev = Some(diam);
        }
    }

    #[test]
    fn slices_push_forward(p in prefix(3, 6, 4), n in 1usize..3, m in 0usize..3) {
        let d = diagram(&p);
        let upper = polytope_slice(&d, n + 1, m).unwrap();
        let lower = polytope_slice(&d, n, m + 1).unwrap();
        prop_assert_eq!(upper.product.mul(&d.stochastic(n).unwrap()), lower.product);
    }

    #[test]
    fn ers_heights_are_products_of_row_sums(seed in prefix(3, 5, 4)) {
        // pad each row with a last column so all rows sum to the same r_n
        let padded: Vec<Vec<Vec<i64>>> = seed
            .iter()
            .map(|m| {
                let r = m.iter().map(|row| row.iter().sum::<i64>()).max().unwrap() + 1;
                let k = m.len();
                let mut out: Vec<Vec<i64>> = m.iter().map(|row| row.clone()).collect();
                for row in out.iter_mut() {
                    let s: i64 = row[..k - 1].iter().sum();
                    row[k - 1] = r - s;
                }
                out
            })
            .collect();
        let d = diagram(&padded);
        let mut expect = BigInt::one();
        for (n, m) in padded.iter().enumerate() {
            expect *= BigInt::from(m[0].iter().sum::<i64>());
            prop_assert!(d.heights(n + 2).unwrap().iter().all(|h| *h == expect));
        }
    }

    #[test]
    fn telescoping_composes(a in prop::collection::btree_set(1usize..9, 1..4), b in prop::collection::btree_set(1usize..7, 1..3)) {
        let d = Arc::new(catalog::linear_two_vertex());
        let a: Vec<usize> = std::iter::once(0).chain(a).collect();
        let b: Vec<usize> = std::iter::once(0).chain(b).collect();
        let t = Arc::new(d.telescope(&a).unwrap());
        let u = t.telescope(&b).unwrap();
        // level j of t is a_j inside the list and unit steps past it
        let last = a.len() - 1;
        let lift = |j: usize| if j <= last { a[j] } else { a[last] + j - last };
        // past the end of b, u keeps every level of t, so extend b until it covers a
        let b_last = *b.last().unwrap();
        let c: Vec<usize> = b.iter().copied().chain(b_last + 1..=last.max(b_last)).map(lift).collect();
        let direct = d.telescope(&c).unwrap();
        prop_assert_eq!(u.root_edges(), direct.root_edges());
        for n in 1..6 {
            prop_assert_eq!(&*u.matrix(n).unwrap(), &*direct.matrix(n).unwrap());
        }
    }
}

#[test]
fn cylinder_measures_are_additive() {
    let d = catalog::pascal();
    for p in [q(1, 2), q(1, 3), q(2, 5)] {
        let mu = TowerMeasure::pascal(p).unwrap();
        // paths that always go to the vertex with index min(n - 1, 2)
        for n in 1..8 {
            let path: Vec<usize> = (1..=n).map(|k| (k - 1).min(2)).collect();
            let w = *path.last().unwrap();
            let m = d.matrix(n).unwrap();
            let mut total = Q::zero();
            for v in 0..m.rows() {
                let e = m.get(v, w);
                if e.is_zero() {
                    continue;
                }
                let mut ext = path.clone();
                ext.push(v);
                total += qb(e) * cylinder_measure(&d, &mu, &ext).unwrap();
            }
            assert_eq!(total, cylinder_measure(&d, &mu, &path).unwrap());
        }
    }
}

#[test]
fn measures_survive_telescoping() {
    let d = Arc::new(catalog::pascal());
    let mu = TowerMeasure::pascal(q(1, 3)).unwrap();
    let levels = [0, 2, 3, 5, 8, 9];
    let t = d.telescope(&levels).unwrap();
    let q_t: Vec<Vec<Q>> = levels[1..].iter().map(|&n| mu.level(&d, n).unwrap()).collect();
    let check = check_invariance(&t, &TowerMeasure::explicit(q_t), levels.len() - 2).unwrap();
    assert!(check.holds, "{check:?}");

    let s = Arc::new(catalog::triangular_stationary());
    let r = stationary_measures(&s, 12, &default_width()).unwrap();
    let finite = r.measures.iter().find(|m| m.tower.is_some()).unwrap();
    let tower = finite.tower.as_ref().unwrap();
    let levels = [0, 1, 3, 4, 7, 10];
    let t = s.telescope(&levels).unwrap();
    let q_t: Vec<Vec<Q>> = levels[1..].iter().map(|&n| tower.level(&s, n).unwrap()).collect();
    assert!(check_invariance(&t, &TowerMeasure::explicit(q_t), levels.len() - 2).unwrap().holds);
}

#[test]
fn cluster_counts_survive_telescoping() {
    for d in [catalog::quadratic_two_vertex(), catalog::triangular_stationary(), catalog::two_vertex("n^3").unwrap()] {
        let d = Arc::new(d);
        let before = count_measures(&d, &CountOptions { base: Some(2), depth: 24, ..CountOptions::default() }).unwrap();
        let t = Arc::new(d.telescope(&[0, 2, 4, 5]).unwrap());
        let after = count_measures(&t, &CountOptions { base: Some(2), depth: 24, ..CountOptions::default() }).unwrap();
        assert_eq!(before.clusters.len(), after.clusters.len(), "{}", d.name());
    }
}
