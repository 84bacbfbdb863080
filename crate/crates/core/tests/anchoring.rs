use rvfield::anchoring::{estimate_theta_anchored, palm_check, AnchorKind};
use rvfield::tailproc::quantile_level;
use rvfield::{ClusterShape, MaModel, MultiIndex};

fn mi(c: &[i64]) -> MultiIndex {
    MultiIndex::new(c.to_vec())
}

fn reference() -> MaModel {
    MaModel::new(1, vec![(mi(&[0]), 1.0), (mi(&[1]), 0.5)], 1.0, 0.5).unwrap()
}

#[test]
fn iid_extremal_index_is_one() {
    let model = MaModel::new(1, vec![(mi(&[0]), 1.0)], 1.0, 0.5).unwrap();
    let w = model.sample_window(&[1_000_000], 41).unwrap();
    let u = quantile_level(&w, 0.9999);
    for kind in AnchorKind::ALL {
        let e = estimate_theta_anchored(&w, u, 5, kind).unwrap();
        assert!(
            (e.theta - 1.0).abs() <= 2.0 * e.se,
            "{kind}: {} +- {}",
            e.theta,
            e.se
        );
    }
}

#[test]
fn moving_average_extremal_index_for_every_anchor() {
    let w = reference().sample_window(&[200_000], 42).unwrap();
    let u = quantile_level(&w, 0.999);
    for kind in AnchorKind::ALL {
        let e = estimate_theta_anchored(&w, u, 5, kind).unwrap();
        assert!(
            (e.theta - 2.0 / 3.0).abs() <= 2.0 * e.se,
            "{kind}: {} +- {}",
            e.theta,
            e.se
        );
        assert!((e.reciprocal - 1.0).abs() <= 3.0 * e.reciprocal_se);
    }
}

#[test]
fn palm_identity_against_exact_value() {
    let model = reference();
    let law = model.tail_law();
    let sampler = law.sampler();
    let ext = model.extremal_objects();
    let h = |x: &ClusterShape| f64::from(u8::from(x.norm() > 2.0));
    let r = palm_check(
        |r| ClusterShape::canonicalize(1, sampler.tail(r)).unwrap(),
        |r| ext.sample_z(r),
        ext.theta,
        h,
        40_000,
        43,
    );
    let comb = (r.lhs_se.powi(2) + r.rhs_se.powi(2)).sqrt();
    assert!((r.lhs - r.rhs).abs() <= 2.0 * comb, "{r:?}");
    assert!((r.lhs - 2.0 / 3.0).abs() <= 3.0 * r.lhs_se);
    assert!((r.rhs - 2.0 / 3.0).abs() <= 3.0 * r.rhs_se);
}

#[test]
fn palm_with_constant_test_function_gives_one() {
    let ext = reference().extremal_objects();
    let r = palm_check(
        |r| ext.sample_z(r),
        |r| ext.sample_z(r),
        ext.theta,
        |_| 1.0,
        20_000,
        44,
    );
    assert_eq!(r.lhs, 1.0);
    assert!((r.rhs - 1.0).abs() <= 3.0 * r.rhs_se);
}
