mod common;

use affine_core::catalog::{self, sphere};
use affine_core::flows::{IntegratorConfig, VectorField, VectorFieldSpec};
use affine_core::frame_bundle::{self, Frame, FrameTangent, KappaValue, StandardHorizontal};
use affine_core::killing::{self, HorizontalPath, KillingSeed, NaturalLift};
use affine_core::{GeomError, Matrix, Point};
use common::{c, near_identity, sphere_point, vec2};
use proptest::prelude::*;

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

fn matrix2() -> impl Strategy<Value = Matrix> {
    prop::array::uniform4(-1.0..1.0f64).prop_map(|e| Matrix::from_row_slice(2, 2, &e))
}

#[test]
fn kappa_of_horizontal_field_on_hyperbolic_plane() {
    let m = catalog::hyperbolic_half_plane();
    let conn = m.connection("hyperbolic").unwrap();
    let frame = Frame::new(m.atlas.chart_id("upper").unwrap(), c(&[0.3, 1.7]), Matrix::from_row_slice(2, 2, &[1.0, 0.2, -0.1, 0.8])).unwrap();
    let lambda = c(&[0.4, -1.1]);
    let h = StandardHorizontal::new(conn, lambda.clone());
    let value = h.eval(frame.chart, &frame.to_state().state).unwrap();
    let k = frame_bundle::kappa(conn, &frame, &FrameTangent::from_vector(&value, 2)).unwrap();
    assert!((k.theta - lambda).norm() < 1e-14);
    assert!(k.omega.norm() < 1e-14);
}

#[test]
fn hyperbolic_isometries_pass_and_shear_fails() {
    let m = catalog::hyperbolic_half_plane();
    let conn = m.connection("hyperbolic").unwrap();
    let chart = m.atlas.chart_id("upper").unwrap();
    for (x, y) in [(0.0, 1.0), (-1.2, 0.4), (2.0, 3.0)] {
        let p = Point::new(chart, c(&[x, y]));
        for name in ["h-translation", "h-dilation", "h-special"] {
            assert!(killing::killing_residual_max(conn, m.field(name).unwrap(), &p).unwrap() < 1e-12, "{name}");
        }
        assert!(killing::killing_residual_max(conn, m.field("h-shear").unwrap(), &p).unwrap() > 0.1);
    }
}

#[test]
fn dilation_residual_on_the_sphere_matches_hand_value() {
    // ξ = u vanishes at the pole together with B, so the residual does too.
    let m = catalog::sphere();
    let conn = m.connection("round").unwrap();
    let d = m.field("dilation").unwrap();
    let pole = Point::new(sphere::NORTH, c(&[0.0, 0.0]));
    assert!(killing::killing_residual_max(conn, d, &pole).unwrap() < 1e-14);
    assert!(killing::killing_residual_max(conn, d, &Point::new(sphere::NORTH, c(&[0.5, 0.0]))).unwrap() > 0.1);
}

#[test]
fn so3_seed_rank_and_extension_of_zero() {
    let m = catalog::sphere();
    let conn = m.connection("round").unwrap();
    let p = Point::new(sphere::NORTH, c(&[0.3, 0.1]));
    let seeds: Vec<KillingSeed> = ["L1", "L2", "L3", "dilation"]
        .iter()
        .map(|n| killing::ev_embedding(conn, m.field(n).unwrap(), &p).unwrap())
        .collect();
    assert_eq!(killing::gram_rank(&seeds[..3]).unwrap(), 3);
    assert_eq!(killing::gram_rank(&seeds).unwrap(), 4);
    let combo = seeds[0].combine(2.0, &seeds[1]);
    assert_eq!(killing::gram_rank(&[seeds[0].clone(), seeds[1].clone(), combo]).unwrap(), 2);
    let path = HorizontalPath::starting_at(p.clone()).flow(c(&[0.5, 0.2]), 1.0);
    let zero = killing::extend_killing(conn, &KillingSeed::zero(p.clone()), &path, &cfg()).unwrap();
    assert!(zero.vec.norm() < 1e-15);
    let elsewhere = HorizontalPath::starting_at(Point::new(sphere::NORTH, c(&[0.0, 0.0])));
    assert_eq!(killing::extend_killing(conn, &seeds[0], &elsewhere, &cfg()), Err(GeomError::BasePointMismatch));
}

#[test]
fn extension_along_a_broken_path_with_a_group_action() {
    let m = catalog::sphere();
    let conn = m.connection("round").unwrap();
    let p = Point::new(sphere::NORTH, c(&[-0.2, 0.4]));
    let l2 = m.field("L2").unwrap();
    let seed = killing::ev_embedding(conn, l2, &p).unwrap();
    let rot = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let path = HorizontalPath::starting_at(p.clone())
        .flow(c(&[0.6, 0.0]), 1.0)
        .act(rot.clone())
        .flow(c(&[0.5, 0.3]), 1.5)
        .act(rot * 2.0)
        .flow(c(&[-0.4, 0.2]), 1.0);
    let got = killing::extend_killing(conn, &seed, &path, &cfg()).unwrap();
    let want = l2.at(&got.base).unwrap();
    assert!((got.vec - want.vec).norm() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kappa_round_trips(x in vec2(1.5), g in near_identity(), v in vec2(1.0), w in matrix2()) {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let frame = Frame::new(sphere::NORTH, x, g).unwrap();
        let ft = FrameTangent::new(v, w);
        let k = frame_bundle::kappa(conn, &frame, &ft).unwrap();
        let back = frame_bundle::kappa_inverse(conn, &frame, &k).unwrap();
        prop_assert!((back.v - &ft.v).norm() < 1e-12 && (back.w - &ft.w).norm() < 1e-12);
        let kv = KappaValue::new(k.theta.clone(), k.omega.clone());
        prop_assert!(kv.distance(&k) == 0.0);
    }

    #[test]
    fn kappa_is_right_equivariant(x in vec2(1.5), g in near_identity(), g2 in near_identity(), v in vec2(1.0), w in matrix2()) {
        // κ_{p·a}(v, w a) = (a⁻¹ θ, a⁻¹ ω a).
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let frame = Frame::new(sphere::NORTH, x, g).unwrap();
        let moved = frame_bundle::rho(&frame, &g2).unwrap();
        let k = frame_bundle::kappa(conn, &frame, &FrameTangent::new(v.clone(), w.clone())).unwrap();
        let km = frame_bundle::kappa(conn, &moved, &FrameTangent::new(v, w * &g2)).unwrap();
        let ai = g2.clone().try_inverse().unwrap();
        prop_assert!((km.theta - &ai * &k.theta).norm() < 1e-10);
        prop_assert!((km.omega - &ai * &k.omega * &g2).norm() < 1e-10);
    }

    #[test]
    fn kappa_is_chart_independent(s in 0.2..0.8f64, t in 0.0..1.0f64, g in near_identity(), v in vec2(1.0), w in matrix2()) {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        let other = if p.chart == sphere::NORTH { sphere::SOUTH } else { sphere::NORTH };
        let frame = Frame::new(p.chart, p.coords.clone(), g).unwrap();
        let there = frame.recharted(&m.atlas, other).unwrap();
        // Tangent map of the bundle chart change: (v, w) ↦ (dh v, d²h(v, g·) + dh w).
        let dh = m.atlas.d_transition(&p, other).unwrap();
        let d2h = m.atlas.d2_transition(&p, other).unwrap();
        let ft = FrameTangent::new(v.clone(), w.clone());
        let ft2 = FrameTangent::new(&dh * &v, d2h.with_first(&v) * &frame.g + &dh * w);
        let a = frame_bundle::kappa(conn, &frame, &ft).unwrap();
        let b = frame_bundle::kappa(conn, &there, &ft2).unwrap();
        prop_assert!(a.distance(&b) < 1e-9);
    }

    #[test]
    fn killing_residual_is_linear_in_the_field(a in -2.0..2.0f64, b in -2.0..2.0f64, s in 0.1..0.9f64, t in 0.0..1.0f64) {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        let l1 = m.field("L1").unwrap();
        let d = m.field("dilation").unwrap();
        let combo = VectorFieldSpec::linear_combination("combo", &[(a, l1), (b, d)]);
        let r = killing::residual_form(conn, &combo, &p).unwrap();
        let rd = killing::residual_form(conn, d, &p).unwrap();
        let diff = (0..8).map(|i| (r.get(i / 4, (i / 2) % 2, i % 2) - b * rd.get(i / 4, (i / 2) % 2, i % 2)).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-8);
    }

    #[test]
    fn bracket_is_antisymmetric_and_satisfies_jacobi(s in 0.1..0.9f64, t in 0.0..1.0f64) {
        let m = catalog::sphere();
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        let (x, y, z) = (m.field("L1").unwrap(), m.field("dilation").unwrap(), m.field("L3").unwrap());
        let xy = killing::bracket(x, y).value(p.chart, &p.coords).unwrap();
        let yx = killing::bracket(y, x).value(p.chart, &p.coords).unwrap();
        prop_assert!((xy + yx).norm() < 1e-10);
        let j = killing::bracket(x, &killing::bracket(y, z)).value(p.chart, &p.coords).unwrap()
            + killing::bracket(y, &killing::bracket(z, x)).value(p.chart, &p.coords).unwrap()
            + killing::bracket(z, &killing::bracket(x, y)).value(p.chart, &p.coords).unwrap();
        prop_assert!(j.norm() < 1e-5);
    }

    #[test]
    fn killing_lifts_commute_with_horizontal_flows(s in 0.1..0.9f64, t in 0.0..1.0f64, lambda in vec2(1.0), g in near_identity()) {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        let frame = Frame::new(p.chart, p.coords.clone(), g).unwrap();
        let d = killing::lift_commutation_defect(conn, m.field("L2").unwrap(), &lambda, &frame, 0.4, 0.7, &cfg()).unwrap();
        prop_assert!(d < 1e-9);
        let lift = killing::lift_at(m.field("L2").unwrap(), &frame).unwrap();
        let direct = NaturalLift::new(m.field("L2").unwrap()).eval(frame.chart, &frame.to_state().state).unwrap();
        prop_assert!((lift.to_vector() - direct).norm() == 0.0);
    }
}
