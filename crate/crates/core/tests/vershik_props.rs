use std::collections::HashSet;

use bratteli::catalog;
use bratteli::matrix::IntMatrix;
use bratteli::measure::{cylinder_measure, TowerMeasure};
use bratteli::rational::{q, q_f64};
use bratteli::vershik::{cylinders, orbit_frequencies, EdgeSlot, OrderSpec, OrderedTruncation, PathPrefix};
use bratteli::BratteliDiagram;
use num_traits::ToPrimitive;
use proptest::prelude::*;

/// Position of an edge among the edges entering `v` at level n, by source then multiplicity.
fn consecutive_rank(d: &BratteliDiagram, n: usize, v: usize, e: EdgeSlot) -> usize {
    if n == 1 {
        return e.mult;
    }
    let m = d.matrix(n - 1).unwrap();
    (0..e.source).map(|w| m.get(v, w).to_usize().unwrap()).sum::<usize>() + e.mult
}

fn fan_in(d: &BratteliDiagram, n: usize, v: usize) -> usize {
    if n == 1 {
        return d.root_edges()[v].to_usize().unwrap();
    }
    d.matrix(n - 1).unwrap().row(v).iter().map(|x| x.to_usize().unwrap()).sum()
}

fn rank(d: &BratteliDiagram, order: &OrderSpec, n: usize, v: usize, e: EdgeSlot) -> usize {
    let r = consecutive_rank(d, n, v, e);
    match order {
        OrderSpec::Consecutive => r,
        OrderSpec::Reverse => fan_in(d, n, v) - 1 - r,
        OrderSpec::Explicit { levels } => {
            if n == 1 {
                return r;
            }
            let perm = &levels[(n - 2).min(levels.len() - 1)][v];
            perm.iter().position(|&i| i == r).unwrap()
        }
    }
}

/// p < q in the order on paths ending at the same vertex: compare the deepest differing edge.
fn less(d: &BratteliDiagram, order: &OrderSpec, p: &PathPrefix, q: &PathPrefix) -> bool {
    assert_eq!(p.vertices.last(), q.vertices.last());
    let k = (1..=p.depth()).rev().find(|&n| p.edges[n - 1] != q.edges[n - 1] || p.vertices[n - 1] != q.vertices[n - 1]).unwrap();
    let v = p.vertices[k - 1];
    assert_eq!(v, q.vertices[k - 1]);
    rank(d, order, k, v, p.edges[k - 1]) < rank(d, order, k, v, q.edges[k - 1])
}

fn enumerate_paths(d: &BratteliDiagram, order: &OrderSpec, depth: usize) {
    let t = OrderedTruncation::new(d, order, depth).unwrap();
    let h = d.heights(depth).unwrap();
    for v in 0..d.vertex_count(depth).unwrap() {
        let hv = h[v].to_usize().unwrap();
        assert!(hv <= 10_000);
        let mut p = t.min_path_into(depth, v);
        let mut seen = HashSet::new();
        seen.insert(p.clone());
        for _ in 1..hv {
            let next = t.successor(&p).expect("successor exists before the maximal path");
            assert!(less(d, order, &p, &next), "{p:?} !< {next:?}");
            assert!(seen.insert(next.clone()), "path visited twice");
            p = next;
        }
        assert!(t.is_maximal(&p));
        assert_eq!(p, t.max_path_into(depth, v));
        assert!(t.successor(&p).is_none());
    }
}

#[test]
fn successor_enumerates_catalog_paths() {
    for order in [OrderSpec::Consecutive, OrderSpec::Reverse] {
        enumerate_paths(&catalog::odometer(3).unwrap(), &order, 8);
        enumerate_paths(&catalog::linear_two_vertex(), &order, 6);
        enumerate_paths(&catalog::triangular_stationary(), &order, 6);
        enumerate_paths(&catalog::pascal(), &order, 12);
        enumerate_paths(&catalog::countable_chain("n^3").unwrap(), &order, 3);
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    for i in (1..n).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        v.swap(i, (s >> 33) as usize % (i + 1));
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn successor_enumerates_random_explicit_orders(
        m in prop::collection::vec(prop::collection::vec(1i64..=3, 2), 2),
        seeds in prop::collection::vec(any::<u64>(), 2),
    ) {
        let rows: Vec<&[i64]> = m.iter().map(|r| r.as_slice()).collect();
        let d = catalog::stationary(&IntMatrix::from_i64(&rows)).unwrap();
        let perms: Vec<Vec<usize>> =
            (0..2).map(|v| shuffled(m[v].iter().sum::<i64>() as usize, seeds[v])).collect();
        let order = OrderSpec::Explicit { levels: vec![perms] };
        enumerate_paths(&d, &order, 5);
    }
}

#[test]
fn truncated_orbit_is_one_cycle() {
    for (d, depth) in [
        (catalog::odometer(3).unwrap(), 6),
        (catalog::linear_two_vertex(), 5),
        (catalog::triangular_stationary(), 5),
        (catalog::pascal(), 8),
    ] {
        let t = OrderedTruncation::new(&d, &OrderSpec::Consecutive, depth).unwrap();
        let total: usize = d.heights(depth).unwrap().iter().map(|h| h.to_usize().unwrap()).sum();
        let start = t.min_path_into(depth, 0);
        let mut p = start.clone();
        let mut seen = HashSet::new();
        for _ in 0..total {
            assert!(seen.insert(p.clone()), "{}: cycle shorter than {total}", d.name());
            p = t.step(&p).0;
        }
        assert_eq!(p, start, "{}", d.name());
    }
}

#[test]
fn odometer_frequencies_are_exact() {
    let d = catalog::odometer(3).unwrap();
    let order = OrderSpec::Consecutive;
    let t = OrderedTruncation::new(&d, &order, 8).unwrap();
    let cyl = cylinders(&d, &order, 1).unwrap();
    let s = orbit_frequencies(&d, &order, &t.min_path_into(8, 0), 3usize.pow(8), &cyl).unwrap();
    assert_eq!(s.exact_frequencies, vec!["1/3"; 3]);
    assert_eq!(s.wraps, 1);
}

#[test]
fn frequencies_approach_cylinder_measures() {
    let d = catalog::linear_two_vertex();
    let order = OrderSpec::Consecutive;
    let depth = 12;
    let t = OrderedTruncation::new(&d, &order, depth).unwrap();
    let cyl = cylinders(&d, &order, 1).unwrap();
    // the unique invariant measure is symmetric, so each level-1 tower has mass 1/2
    let mu = TowerMeasure::explicit(vec![vec![q(1, 2), q(1, 2)]]);
    let exact: Vec<f64> = cyl.iter().map(|c| q_f64(&cylinder_measure(&d, &mu, &c.vertices).unwrap())).collect();
    let start = t.min_path_into(depth, 0);
    let err = |steps: usize| {
        let s = orbit_frequencies(&d, &order, &start, steps, &cyl).unwrap();
        s.frequencies.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let e = [err(1_000), err(10_000), err(100_000)];
    assert!(e[2] < 1e-2, "{e:?}");
    assert!(e[2] <= e[0], "{e:?}");
}
