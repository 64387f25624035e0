mod common;

use affine_core::catalog::{self, sphere};
use affine_core::connection::SecondOrderTangent;
use affine_core::{GeomError, Point, Tangent};
use common::{c, embedded, sphere_point, vec2};
use proptest::prelude::*;

#[test]
fn stereographic_transition_is_inversion() {
    let atlas = sphere::sphere_atlas();
    let p = Point::new(sphere::NORTH, c(&[0.6, -0.8]));
    // |u| = 1 maps to itself, other radii to their reciprocal.
    let q = atlas.transition(&p, sphere::SOUTH).unwrap();
    assert!((q.coords - c(&[0.6, -0.8])).norm() < 1e-15);
    let p = Point::new(sphere::NORTH, c(&[2.0, 0.0]));
    let q = atlas.transition(&p, sphere::SOUTH).unwrap();
    assert!((q.coords - c(&[0.5, 0.0])).norm() < 1e-15);
}

#[test]
fn polar_transition_of_unit_y() {
    let m = catalog::flat_polar();
    let cart = m.atlas.chart_id("cartesian").unwrap();
    let pol = m.atlas.chart_id("polar").unwrap();
    let q = m.atlas.transition(&Point::new(cart, c(&[0.0, 2.0])), pol).unwrap();
    assert!((q.coords - c(&[2.0, std::f64::consts::FRAC_PI_2])).norm() < 1e-15);
    assert_eq!(
        m.atlas.transition(&Point::new(cart, c(&[-1.0, 0.0])), pol),
        Err(GeomError::NotInOverlap { from: cart, to: pol })
    );
}

#[test]
fn round_connection_values_at_the_pole() {
    // B vanishes where the conformal factor is stationary.
    let m = catalog::sphere();
    let conn = m.connection("round").unwrap();
    let b = conn.bilinear(sphere::NORTH, &c(&[0.0, 0.0])).unwrap();
    assert!(b.max_abs() < 1e-15);
}

#[test]
fn connector_of_second_order_tangent() {
    let m = catalog::flat_polar();
    let conn = &m.connections[0];
    let pol = m.atlas.chart_id("polar").unwrap();
    // B = −Γ with Γ^r_θθ = −r: B^r(e_θ, e_θ) = r = 2.
    let sot = SecondOrderTangent { chart: pol, x: c(&[2.0, 0.3]), v: c(&[0.0, 1.0]), w: c(&[0.0, 1.0]), z: c(&[5.0, 0.0]) };
    let k = conn.connector_apply(&sot).unwrap();
    assert!((k.vec - c(&[3.0, 0.0])).norm() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_transitions_round_trip(s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let atlas = sphere::sphere_atlas();
        let x = sphere_point(s, t);
        let p = sphere::point_at(&atlas, &x);
        prop_assert!((embedded(&p) - x).norm() < 1e-12);
        for target in [sphere::NORTH, sphere::SOUTH] {
            if let Ok(q) = atlas.transition(&p, target) {
                let back = atlas.transition(&q, p.chart).unwrap();
                prop_assert!((back.coords - &p.coords).norm() < 1e-10 * (1.0 + p.coords.norm()));
                prop_assert!((embedded(&q) - x).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_change_of_variable_holds(s in 0.05..0.95f64, t in 0.0..1.0f64, v in vec2(1.0), w in vec2(1.0)) {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        let other = if p.chart == sphere::NORTH { sphere::SOUTH } else { sphere::NORTH };
        if m.atlas.transition(&p, other).is_ok() {
            prop_assert!(conn.change_of_variable_residual(&p, &v, &w, other).unwrap() < 1e-9);
        }
    }

    #[test]
    fn covariant_derivative_is_chart_independent(s in 0.2..0.8f64, t in 0.0..1.0f64, v in vec2(1.0)) {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let p = sphere::point_at(&m.atlas, &sphere_point(s, t));
        let other = if p.chart == sphere::NORTH { sphere::SOUTH } else { sphere::NORTH };
        let dh = m.atlas.d_transition(&p, other).unwrap();
        let q = m.atlas.transition(&p, other).unwrap();
        for name in ["L1", "L2", "dilation"] {
            let eta = m.field(name).unwrap();
            let here = conn.covariant_derivative(eta, &Tangent::new(p.clone(), v.clone())).unwrap();
            let there = conn.covariant_derivative(eta, &Tangent::new(q.clone(), &dh * &v)).unwrap();
            prop_assert!((&dh * here.vec - there.vec).norm() < 1e-9);
        }
    }

    #[test]
    fn polar_cartesian_change_of_variable_holds(r in 0.2..3.0f64, a in -3.0..3.0f64, v in vec2(1.0), w in vec2(1.0)) {
        let m = catalog::flat_polar();
        let conn = &m.connections[0];
        let pol = m.atlas.chart_id("polar").unwrap();
        let cart = m.atlas.chart_id("cartesian").unwrap();
        let p = Point::new(pol, c(&[r, a]));
        prop_assert!(conn.change_of_variable_residual(&p, &v, &w, cart).unwrap() < 1e-9);
    }
}
