mod common;

use affine_core::automorphism::{self, frame_lift, ChartMap, Diffeo};
use affine_core::catalog::{self, sphere, AffineMap, SphereRotation};
use affine_core::flows::{IntegratorConfig, VectorFieldSpec};
use affine_core::frame_bundle::{Frame, FrameTangent};
use affine_core::{GeomError, Matrix, Point, Tangent};
use common::{c, embedded, near_identity, sphere_point, vec2};
use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

#[test]
fn exp_of_rotation_combination_is_a_rigid_rotation() {
    // exp(Σ a_i L_i) = Fl_{−1} rotates by |a| about a/|a|.
    let m = catalog::sphere();
    let conn = m.connection("round").unwrap();
    let a = [0.3, -0.7, 0.5];
    let terms: Vec<(f64, &VectorFieldSpec)> =
        ["L1", "L2", "L3"].iter().zip(a).map(|(n, k)| (k, m.field(n).unwrap())).collect();
    let field = VectorFieldSpec::linear_combination("combo", &terms);
    let samples: Vec<Point> = [(0.2, 0.3), (0.6, 0.9), (0.97, 0.1)].iter().map(|&(s, t)| sphere::point_at(&m.atlas, &sphere_point(s, t))).collect();
    let f = automorphism::exp_aut(conn, &field, &samples, automorphism::TOL_KILL, &cfg()).unwrap();
    let axis = Vector3::new(a[0], a[1], a[2]);
    let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), axis.norm());
    for p in &samples {
        let got = f.apply(p, &cfg()).unwrap();
        assert!((embedded(&got) - r * embedded(p)).norm() < 1e-10);
    }
}

#[test]
fn closed_form_rotation_is_affine_and_inverts() {
    let m = catalog::sphere();
    let conn = m.connection("round").unwrap();
    let rot = SphereRotation::about(m.atlas.clone(), Vector3::new(1.0, 2.0, -0.5), 2.2);
    let inv = rot.inverse().unwrap();
    let f = Diffeo::closed_form(rot);
    let back = Diffeo::ClosedForm(inv);
    for (s, t) in [(0.1, 0.1), (0.5, 0.5), (0.8, 0.25)] {
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        assert!(automorphism::affine_residual_max(&f, conn, conn, &p, &cfg()).unwrap() < 1e-9);
        let q = back.apply(&f.apply(&p, &cfg()).unwrap(), &cfg()).unwrap();
        assert!(m.atlas.distance(&p, &q).unwrap() < 1e-12);
    }
}

#[test]
fn affine_map_in_polar_coordinates() {
    // A linear map of the plane seen from the polar chart is still affine
    // for the flat connection, with a chart-dependent Hessian.
    let m = catalog::flat_polar();
    let conn = &m.connections[0];
    let cart = m.atlas.chart_id("cartesian").unwrap();
    let pol = m.atlas.chart_id("polar").unwrap();
    let map = AffineMap::new(m.atlas.clone(), cart, Matrix::from_row_slice(2, 2, &[1.1, 0.3, -0.2, 0.9]), c(&[0.4, 0.1]));
    let f = Diffeo::closed_form(map);
    let p = Point::new(pol, c(&[1.3, 0.6]));
    assert!(automorphism::affine_residual_max(&f, conn, conn, &p, &cfg()).unwrap() < 1e-8);
    let v = Tangent::new(p, c(&[0.2, -0.3]));
    assert!(automorphism::exp_commutes_defect(conn, &f, &v, &cfg()).unwrap() < 1e-9);
}

#[test]
fn non_affine_diffeo_has_a_residual() {
    // The flow of (x₁², 0) is x₁ ↦ x₁ / (1 − t x₁), not affine.
    let m = catalog::flat_plane();
    let conn = m.connection("flat").unwrap();
    let f = Diffeo::FlowWord(vec![(m.field("quadratic").unwrap().clone(), 0.5)]);
    let p = Point::new(m.atlas.chart_id("cartesian").unwrap(), c(&[0.5, 0.0]));
    // d²/dx² of x / (1 − x/2) at x = 1/2 is 1 / (1 − 1/4)³.
    let r = automorphism::affine_residual_max(&f, conn, conn, &p, &cfg()).unwrap();
    assert!((r - 1.0 / 0.75f64.powi(3)).abs() < 1e-5, "{r}");
    assert!(matches!(
        automorphism::exp_aut(conn, m.field("quadratic").unwrap(), &[p], automorphism::TOL_KILL, &cfg()),
        Err(GeomError::NotKilling { .. })
    ));
}

#[test]
fn unsatisfiable_tolerance_refuses_so3_fields() {
    // Rounding leaves residuals of order 1e−16 at generic points.
    let m = catalog::sphere();
    let conn = m.connection("round").unwrap();
    let samples: Vec<Point> = (1..10).map(|k| sphere::point_at(&m.atlas, &sphere_point(k as f64 / 10.0, k as f64 / 7.0 % 1.0))).collect();
    let got = automorphism::exp_aut(conn, m.field("L1").unwrap(), &samples, 1e-20, &cfg());
    assert!(matches!(got, Err(GeomError::NotKilling { .. })), "{got:?}");
    let d = m.field("dilation").unwrap();
    let q = Point::new(sphere::NORTH, c(&[0.4, 0.4]));
    assert!(matches!(automorphism::exp_aut(conn, d, &[q], automorphism::TOL_KILL, &cfg()), Err(GeomError::NotKilling { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn closed_form_and_flow_word_frame_lifts_agree(s in 0.1..0.9f64, t in 0.0..1.0f64, angle in -2.0..2.0f64, g in near_identity(), v in vec2(1.0)) {
        let m = catalog::sphere();
        let l3 = m.field("L3").unwrap();
        // Fl^{L3}_{−angle} is the rotation by +angle about e_3.
        let word = Diffeo::FlowWord(vec![(l3.clone(), -angle)]);
        let closed = Diffeo::closed_form(SphereRotation::about(m.atlas.clone(), Vector3::z(), angle));
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        let frame = Frame::new(p.chart, p.coords.clone(), g).unwrap();
        let ft = FrameTangent::new(v.clone(), Matrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.5]));
        let (fa, ta) = frame_lift(&word).tangent(&frame, &ft, &cfg()).unwrap();
        let (fb, tb) = frame_lift(&closed).tangent(&frame, &ft, &cfg()).unwrap();
        prop_assert!(automorphism::frame_distance(&m.atlas, &fa, &fb).unwrap() < 1e-9);
        // Compare the pushed tangents in a common chart.
        let tb = if fb.chart == fa.chart { tb } else {
            let q = fb.base();
            let dh = m.atlas.d_transition(&q, fa.chart).unwrap();
            let d2h = m.atlas.d2_transition(&q, fa.chart).unwrap();
            FrameTangent::new(&dh * &tb.v, d2h.with_first(&tb.v) * &fb.g + &dh * &tb.w)
        };
        prop_assert!((ta.v - tb.v).norm() < 1e-8 && (ta.w - tb.w).norm() < 1e-7);
    }

    #[test]
    fn composition_and_inverse(s in 0.1..0.9f64, t in 0.0..1.0f64) {
        let m = catalog::sphere();
        let f = Diffeo::FlowWord(vec![(m.field("L1").unwrap().clone(), 0.7), (m.field("L2").unwrap().clone(), -0.4)]);
        let g = Diffeo::closed_form(SphereRotation::about(m.atlas.clone(), Vector3::new(0.0, 1.0, 1.0), 0.9));
        let h = f.compose(&g);
        let id = h.inverse().unwrap().compose(&h);
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        prop_assert!(m.atlas.distance(&p, &id.apply(&p, &cfg()).unwrap()).unwrap() < 1e-10);
        let (q, j) = id.jacobian(&p, &cfg()).unwrap();
        let j = if q.chart == p.chart { j } else { m.atlas.d_transition(&q, p.chart).unwrap() * j };
        prop_assert!((j - Matrix::identity(2, 2)).norm() < 1e-9);
    }
}
