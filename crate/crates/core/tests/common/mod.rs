#![allow(dead_code)]

use affine_core::catalog::sphere;
use affine_core::{Coords, Matrix, Point};
use nalgebra::Vector3;
use proptest::prelude::*;

pub fn c(xs: &[f64]) -> Coords {
    Coords::from_row_slice(xs)
}

/// Jacobian of the stereographic embedding at `p`, by central differences.
pub fn embed_jacobian(p: &Point) -> Matrix {
    let h = 1e-6;
    Matrix::from_fn(3, 2, |i, k| {
        let e = Coords::from_fn(2, |l, _| if l == k { h } else { 0.0 });
        (sphere::embed(p.chart, &(&p.coords + &e))[i] - sphere::embed(p.chart, &(&p.coords - &e))[i]) / (2.0 * h)
    })
}

pub fn embedded(p: &Point) -> Vector3<f64> {
    sphere::embed(p.chart, &p.coords)
}

/// Round-metric inner product of two chart vectors at `p`.
pub fn sphere_inner(p: &Point, a: &Coords, b: &Coords) -> f64 {
    let j = embed_jacobian(p);
    (&j * a).dot(&(&j * b))
}

/// Uniform point on the unit sphere from two numbers in `[0, 1)`.
pub fn sphere_point(s: f64, t: f64) -> Vector3<f64> {
    let z = 2.0 * s - 1.0;
    let a = std::f64::consts::TAU * t;
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * a.cos(), r * a.sin(), z)
}

pub fn vec2(scale: f64) -> impl Strategy<Value = Coords> {
    (-scale..scale, -scale..scale).prop_map(|(a, b)| c(&[a, b]))
}

/// Invertible 2×2 matrices near the identity.
pub fn near_identity() -> impl Strategy<Value = Matrix> {
    prop::array::uniform4(-0.4..0.4f64).prop_map(|e| Matrix::identity(2, 2) + Matrix::from_row_slice(2, 2, &e))
}
