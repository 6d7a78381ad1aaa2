use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use netembed::gluedmap::round_preserving_bound;
use netembed::harness::{Context, Scenario};
use netembed::manifold::{distance, ChartPoint, MetricField};
use netembed::netlattice::{gamma, Lattice};
use netembed::triangulation::{kuhn_simplices, locate};
use proptest::prelude::*;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn shear() -> &'static Context {
    static CTX: OnceLock<Context> = OnceLock::new();
    CTX.get_or_init(|| Scenario::load(&scenarios().join("shear2.cfg")).unwrap().build().unwrap())
}

fn sine() -> &'static Context {
    static CTX: OnceLock<Context> = OnceLock::new();
    CTX.get_or_init(|| Scenario::load(&scenarios().join("sine2.cfg")).unwrap().build().unwrap())
}

fn point2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0..8.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_distance_is_image_norm(x in point2(), y in point2()) {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let m = MetricField::linear_pullback(a.clone()).unwrap();
        let d = distance(&m, &ChartPoint::from_slice(&x).unwrap(), &ChartPoint::from_slice(&y).unwrap()).unwrap();
        let exact = (&a * (DVector::from_vec(x) - DVector::from_vec(y))).norm();
        prop_assert!((d - exact).abs() <= 1e-6 * exact.max(1.0));
    }

    #[test]
    fn sine_distance_matches_pullback(x in point2(), y in point2()) {
        let m = sine().net.metric();
        let d = distance(m, &ChartPoint::from_slice(&x).unwrap(), &ChartPoint::from_slice(&y).unwrap()).unwrap();
        let exact = (m.pullback(&x).unwrap() - m.pullback(&y).unwrap()).norm();
        prop_assert!((d - exact).abs() <= 1e-6 * exact.max(1.0));
        let back = distance(m, &ChartPoint::from_slice(&y).unwrap(), &ChartPoint::from_slice(&x).unwrap()).unwrap();
        prop_assert!((d - back).abs() <= 1e-8 * d.max(1.0));
    }

    #[test]
    fn locate_reconstructs_point(x in prop::collection::vec(-50.0..50.0f64, 1..=4), eps in 0.1..2.0f64) {
        let lattice = Lattice::new(eps).unwrap();
        let b = locate(&x, &lattice);
        prop_assert!(b.lambda.iter().all(|&l| l >= 0.0));
        prop_assert!((b.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = b.simplex.point_at(&lattice, &b.lambda);
        for (a, c) in p.iter().zip(&x) {
            prop_assert!((a - c).abs() < 1e-9 * eps.max(c.abs()));
        }
        prop_assert!(b.simplex.contains(&lattice, &x, 1e-9));
    }

    #[test]
    fn facet_neighbors_share_a_facet(anchor in prop::collection::vec(-5i64..5, 1..=4), pick in 0usize..24, k in 0usize..5) {
        let all = kuhn_simplices(&anchor);
        let s = &all[pick % all.len()];
        let k = k % (s.dim() + 1);
        let t = s.facet_neighbor(k);
        prop_assert_ne!(&t, s);
        let (vs, vt) = (s.vertices(), t.vertices());
        prop_assert_eq!(vs.iter().filter(|v| vt.contains(v)).count(), s.dim());
        prop_assert!(!vt.contains(&vs[k]));
        let opposite = (0..=t.dim()).find(|&j| !vs.contains(&vt[j])).unwrap();
        prop_assert_eq!(&t.facet_neighbor(opposite), s);
    }

    #[test]
    fn gamma_is_odd_and_close(x in prop::collection::vec(-1e3..1e3f64, 1..=4), eps in 0.05..3.0f64) {
        let lattice = Lattice::new(eps).unwrap();
        let k = gamma(&x, &lattice);
        let neg: Vec<f64> = x.iter().map(|c| -c).collect();
        prop_assert_eq!(gamma(&neg, &lattice), k.iter().map(|c| -c).collect::<Vec<_>>());
        let err = (lattice.point(&k) - DVector::from_column_slice(&x)).norm();
        prop_assert!(err <= eps * (x.len() as f64).sqrt() / 2.0 + 1e-12);
    }

    #[test]
    fn gamma_breaks_half_ties_toward_zero(k in prop::collection::vec(-100i64..100, 1..=3)) {
        let lattice = Lattice::new(1.0).unwrap();
        let x: Vec<f64> = k.iter().map(|&c| c as f64 + 0.5).collect();
        let expect: Vec<i64> = k.iter().map(|&c| if c >= 0 { c } else { c + 1 }).collect();
        prop_assert_eq!(gamma(&x, &lattice), expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shear_round_preserving(x in point2()) {
        let s = shear().glued.round_preserving(&x).unwrap();
        prop_assert!(s.slack >= -1e-7);
        prop_assert!(s.bound >= round_preserving_bound(2, 0.5, 0.0));
    }

    #[test]
    fn glued_faces_agree(x in point2(), k in 0usize..3) {
        for ctx in [shear(), sine()] {
            let lattice = ctx.evaluator.lattice();
            let s = locate(&x, lattice).simplex;
            let t = s.facet_neighbor(k);
            let r = ctx.evaluator.verify_face_consistency(&s, &t, 10).unwrap();
            prop_assert!(r.max_discrepancy < 1e-6);
        }
    }

    #[test]
    fn shear_phi_is_continuous(x in point2()) {
        let g = &shear().glued;
        let y = g.phi(&x).unwrap();
        let x2 = [x[0] + 1e-7, x[1] - 1e-7];
        let y2 = g.phi(&x2).unwrap();
        prop_assert!(y.chart_distance(&y2) < 1e-5);
    }
}

#[test]
fn shared_vertices_reuse_cached_images() {
    let ctx = shear();
    let lattice = ctx.evaluator.lattice();
    let s = locate(&[0.3, 0.1], lattice).simplex;
    for k in 0..=2 {
        let t = s.facet_neighbor(k);
        let vs = s.vertices();
        for v in t.vertices().iter().filter(|v| vs.contains(v)) {
            let a = ctx.evaluator.vertex(v).unwrap();
            let b = ctx.evaluator.vertex(v).unwrap();
            assert!(std::sync::Arc::ptr_eq(&a, &b));
        }
    }
}
