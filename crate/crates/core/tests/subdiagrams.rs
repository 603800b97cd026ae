use std::sync::Arc;

use bratteli::catalog;
use bratteli::measure::{check_invariance, count_measures, CountOptions};
use bratteli::rational::q_f64;
use bratteli::subdiagram::{extend_measure, extension_test, restrict, thinness_test, SubdiagramSpec, VertexSelection};
use bratteli::{SymIdx, Status};

fn chain_odometer(i: usize) -> SubdiagramSpec {
    let prefix = (1..i).map(|k| vec![k]).collect();
    SubdiagramSpec::Vertex(VertexSelection { start: 1, prefix, tail: Some(vec![SymIdx::Index(i)]) })
}

#[test]
fn chain_odometers_extend_finitely() {
    let d = Arc::new(catalog::countable_chain("n^3").unwrap());
    for i in 0..3 {
        let s = chain_odometer(i);
        let sub = restrict(&d, &s).unwrap();
        for k in 1..10 {
            assert_eq!(sub.vertex_count(k).unwrap(), 1);
        }
        let r = extension_test(&d, &s, None, 20).unwrap();
        assert!(r.finite.is_proved(), "B{i}: {:?}", r.finite);
        assert_eq!(r.forms[0].partial_sums, r.forms[2].partial_sums);
        let m = extend_measure(&d, &s, None, 15, false).unwrap();
        assert!(check_invariance(&d, &m, 15).unwrap().holds);
    }
}

#[test]
fn odometer_mass_sits_on_its_vertex() {
    let d = Arc::new(catalog::countable_chain("n^3").unwrap());
    let m = extend_measure(&d, &chain_odometer(0), None, 15, false).unwrap();
    let q = m.level(&d, 10).unwrap();
    assert!(q_f64(&q[0]) > 0.9);
}

#[test]
fn quadratic_extension_matches_a_cluster() {
    let d = Arc::new(catalog::quadratic_two_vertex());
    let report = count_measures(&d, &CountOptions::default()).unwrap();
    assert_eq!(report.clusters.len(), 2);
    // anchor the extension at the top level of the slice
    let top = report.base + report.depth + 1;
    for v in 0..2 {
        let s = SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(v)]));
        let m = extend_measure(&d, &s, None, top, false).unwrap();
        let q: Vec<f64> = m.level(&d, report.base).unwrap().iter().map(q_f64).collect();
        let best = report
            .clusters
            .iter()
            .map(|c| c.representative_f64.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-6, "vertex {v}: distance {best}");
    }
}

#[test]
fn ratio_limit_for_quadratic_family() {
    let d = Arc::new(catalog::quadratic_two_vertex());
    let s = SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(0)]));
    let v = thinness_test(&d, &s, 40).unwrap();
    assert_eq!(v.status, Status::Refuted);
    // h̄/h = ∏_{k<n} k² / (k² + 1), which decreases to sinh(π)⁻¹ π
    let limit = std::f64::consts::PI / std::f64::consts::PI.sinh();
    let last = *v.trace.last().unwrap();
    assert!(last > limit && last < limit * 1.03);
    assert!(v.trace.windows(2).all(|w| w[1] <= w[0]));
}

fn catalog_cases() -> Vec<(Arc<bratteli::BratteliDiagram>, SubdiagramSpec)> {
    let one = |v: usize| SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(v)]));
    let two = SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(0), SymIdx::Index(1)]));
    vec![
        (Arc::new(catalog::linear_two_vertex()), one(0)),
        (Arc::new(catalog::quadratic_two_vertex()), one(1)),
        (Arc::new(catalog::two_vertex("n^3").unwrap()), one(0)),
        (Arc::new(catalog::ers("three", &[&["n", "1", "1"], &["1", "n", "1"], &["1", "1", "n"]]).unwrap()), one(2)),
        (Arc::new(catalog::ers("three-squared", &[&["n^2", "1", "1"], &["1", "n^2", "1"], &["1", "1", "n^2"]]).unwrap()), one(0)),
        (Arc::new(catalog::ers("three-squared", &[&["n^2", "1", "1"], &["1", "n^2", "1"], &["1", "1", "n^2"]]).unwrap()), two),
    ]
}

#[test]
fn restricted_heights_follow_restricted_matrices() {
    for (d, s) in catalog_cases() {
        let sub = restrict(&d, &s).unwrap();
        for n in 1..12 {
            let m = sub.matrix(n).unwrap();
            let h = sub.heights(n).unwrap();
            assert_eq!(*sub.heights(n + 1).unwrap(), m.mul_vec(&h), "{} level {n}", d.name());
        }
    }
}

#[test]
fn extension_series_agree_and_thin_excludes_finite() {
    for (d, s) in catalog_cases() {
        let thin = thinness_test(&d, &s, 30).unwrap();
        let Ok(r) = extension_test(&d, &s, None, 30) else { continue };
        assert_eq!(r.forms[0].partial_sums, r.forms[1].partial_sums, "{}", d.name());
        assert_eq!(r.forms[1].partial_sums, r.forms[2].partial_sums, "{}", d.name());
        let statuses: Vec<Status> = r.forms.iter().map(|f| f.verdict.status).collect();
        assert!(statuses.windows(2).all(|w| w[0] == w[1]), "{}: {statuses:?}", d.name());
        assert!(!(thin.is_proved() && r.finite.is_proved()), "{}", d.name());
        if thin.is_proved() {
            assert!(r.finite.is_refuted());
        }
    }
}

#[test]
fn restriction_nests() {
    let d = Arc::new(catalog::ers("three-squared", &[&["n^2", "1", "1"], &["1", "n^2", "1"], &["1", "1", "n^2"]]).unwrap());
    let outer = SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(0), SymIdx::Index(2)]));
    let inner = SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(1)]));
    let direct = SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(2)]));
    let o = Arc::new(restrict(&d, &outer).unwrap());
    let twice = restrict(&o, &inner).unwrap();
    let once = restrict(&d, &direct).unwrap();
    assert_eq!(twice.root_edges(), once.root_edges());
    for n in 1..10 {
        assert_eq!(*twice.matrix(n).unwrap(), *once.matrix(n).unwrap());
    }
}

#[test]
fn full_restriction_is_the_identity() {
    for d in [catalog::linear_two_vertex(), catalog::pascal()] {
        let d = Arc::new(d);
        let all = SubdiagramSpec::Vertex(VertexSelection::fixed(1, vec![SymIdx::Index(0), SymIdx::FromEnd(0)]));
        let full = if d.name() == "pascal" {
            SubdiagramSpec::Vertex(VertexSelection::explicit(1, (1..10).map(|n| (0..=n).collect()).collect()))
        } else {
            all
        };
        let sub = restrict(&d, &full).unwrap();
        assert_eq!(sub.root_edges(), d.root_edges());
        for n in 1..8 {
            assert_eq!(*sub.matrix(n).unwrap(), *d.matrix(n).unwrap(), "{} level {n}", d.name());
        }
    }
}
