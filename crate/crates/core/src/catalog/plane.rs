use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use super::{ManifoldEntry, Sampler};
use crate::atlas::{Atlas, ChartId, Domain, Point, Transition};
use crate::automorphism::ChartMap;
use crate::connection::ConnectionField;
use crate::error::Result;
use crate::flows::{ChartField, VectorFieldSpec};
use crate::linalg::{Bilinear, Coords, Matrix};

fn c2(a: f64, b: f64) -> Coords {
    Coords::from_row_slice(&[a, b])
}

fn unit(n: usize, i: usize) -> Coords {
    Coords::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })
}

fn translation(name: &str, atlas: &Arc<Atlas>, dir: Coords) -> VectorFieldSpec {
    let n = dir.len();
    VectorFieldSpec::uniform(name, atlas.clone(), ChartField::affine(Matrix::zeros(n, n), dir))
}

/// Generator of rotation in the `(i, j)` coordinate plane, `e_i ↦ e_j`.
fn rotation_generator(n: usize, i: usize, j: usize) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    a[(j, i)] = 1.0;
    a[(i, j)] = -1.0;
    a
}

fn box_sampler(chart: ChartId, lo: f64, hi: f64, n: usize) -> Sampler {
    Arc::new(move |rng| Point::new(chart, Coords::from_fn(n, |_, _| rng.random_range(lo..hi))))
}

fn flat_euclidean(name: &str, n: usize) -> (Arc<Atlas>, ChartId) {
    let mut b = Atlas::builder(name, n);
    let c = b.chart("cartesian", 0, Domain::Whole);
    (b.build(), c)
}

/// `R²` with one identity chart.
pub fn flat_plane() -> ManifoldEntry {
    let (atlas, c) = flat_euclidean("flat-plane", 2);
    let quadratic = ChartField::new(|x| c2(x[0] * x[0], 0.0))
        .with_jacobian(|x| Matrix::from_row_slice(2, 2, &[2.0 * x[0], 0.0, 0.0, 0.0]))
        .with_hessian(|_| Bilinear::from_fn(2, |k, i, j| if (k, i, j) == (0, 0, 0) { 2.0 } else { 0.0 }));
    let fields = vec![
        translation("translation-x", &atlas, c2(1.0, 0.0)),
        translation("translation-y", &atlas, c2(0.0, 1.0)),
        VectorFieldSpec::uniform("rotation", atlas.clone(), ChartField::affine(rotation_generator(2, 0, 1), c2(0.0, 0.0))),
        VectorFieldSpec::uniform(
            "affine",
            atlas.clone(),
            ChartField::affine(Matrix::from_row_slice(2, 2, &[0.3, -1.0, 0.5, 0.2]), c2(0.1, -0.4)),
        ),
        VectorFieldSpec::uniform("quadratic", atlas.clone(), quadratic),
    ];
    ManifoldEntry::new("flat-plane", atlas.clone(), vec![ConnectionField::flat(atlas)], fields, box_sampler(c, -2.0, 2.0, 2))
}

/// `R³` with one identity chart.
pub fn flat_space_3() -> ManifoldEntry {
    let (atlas, c) = flat_euclidean("flat-space-3", 3);
    let fields = vec![
        translation("translation-x", &atlas, unit(3, 0)),
        translation("translation-y", &atlas, unit(3, 1)),
        translation("translation-z", &atlas, unit(3, 2)),
        VectorFieldSpec::uniform("rotation-z", atlas.clone(), ChartField::affine(rotation_generator(3, 0, 1), Coords::zeros(3))),
    ];
    ManifoldEntry::new("flat-space-3", atlas.clone(), vec![ConnectionField::flat(atlas)], fields, box_sampler(c, -2.0, 2.0, 3))
}

/// The plane with a Cartesian chart and a polar chart `(r, θ) ∈ (0, ∞) × (−π, π)`.
pub fn flat_polar() -> ManifoldEntry {
    let mut b = Atlas::builder("flat-polar", 2);
    let cart = b.chart("cartesian", 0, Domain::Whole);
    let pol = b.chart("polar", 1, Domain::Box { lo: vec![0.0, -PI], hi: vec![f64::INFINITY, PI] });
    b.transition(
        cart,
        pol,
        Transition::new(|x| c2(x[0].hypot(x[1]), x[1].atan2(x[0]))).with_jacobian(|x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let r = r2.sqrt();
            Matrix::from_row_slice(2, 2, &[x[0] / r, x[1] / r, -x[1] / r2, x[0] / r2])
        }),
    );
    b.transition(
        pol,
        cart,
        Transition::new(|p| c2(p[0] * p[1].cos(), p[0] * p[1].sin()))
            .with_jacobian(|p| {
                let (s, c) = p[1].sin_cos();
                Matrix::from_row_slice(2, 2, &[c, -p[0] * s, s, p[0] * c])
            })
            .with_hessian(|p| {
                let (s, c) = p[1].sin_cos();
                let mut h = Bilinear::zeros(2);
                h.set(0, 0, 1, -s);
                h.set(0, 1, 0, -s);
                h.set(0, 1, 1, -p[0] * c);
                h.set(1, 0, 1, c);
                h.set(1, 1, 0, c);
                h.set(1, 1, 1, -p[0] * s);
                h
            }),
    );
    let atlas = b.build();

    let zero: Arc<dyn Fn(&Coords) -> Bilinear + Send + Sync> = Arc::new(|_| Bilinear::zeros(2));
    // Γ^r_θθ = −r, Γ^θ_rθ = Γ^θ_θr = 1/r
    let polar_gamma: Arc<dyn Fn(&Coords) -> Bilinear + Send + Sync> = Arc::new(|p| {
        let mut g = Bilinear::zeros(2);
        g.set(0, 1, 1, -p[0]);
        g.set(1, 0, 1, 1.0 / p[0]);
        g.set(1, 1, 0, 1.0 / p[0]);
        g
    });
    let conn = ConnectionField::from_christoffel("flat", atlas.clone(), vec![(cart, zero), (pol, polar_gamma)]);

    let rotation = VectorFieldSpec::new("rotation", atlas.clone())
        .with_chart(cart, ChartField::affine(rotation_generator(2, 0, 1), c2(0.0, 0.0)))
        .with_chart(pol, ChartField::affine(Matrix::zeros(2, 2), c2(0.0, 1.0)));
    let tx = VectorFieldSpec::new("translation-x", atlas.clone())
        .with_chart(cart, ChartField::affine(Matrix::zeros(2, 2), c2(1.0, 0.0)))
        .with_chart(
            pol,
            ChartField::new(|p| c2(p[1].cos(), -p[1].sin() / p[0])).with_jacobian(|p| {
                let (s, c) = p[1].sin_cos();
                Matrix::from_row_slice(2, 2, &[0.0, -s, s / (p[0] * p[0]), -c / p[0]])
            }),
        );
    ManifoldEntry::new("flat-polar", atlas, vec![conn], vec![rotation, tx], box_sampler(cart, -2.0, 2.0, 2))
}

fn disk_sampler(chart: ChartId, inner: f64, outer: f64) -> Sampler {
    Arc::new(move |rng| {
        let r = rng.random_range(inner..outer);
        let a = rng.random_range(-PI..PI);
        Point::new(chart, c2(r * a.cos(), r * a.sin()))
    })
}

fn disk_fields(atlas: &Arc<Atlas>) -> Vec<VectorFieldSpec> {
    vec![
        translation("translation-x", atlas, c2(1.0, 0.0)),
        VectorFieldSpec::uniform("rotation", atlas.clone(), ChartField::affine(rotation_generator(2, 0, 1), c2(0.0, 0.0))),
    ]
}

/// The open unit disk with the flat connection (incomplete).
pub fn unit_disk() -> ManifoldEntry {
    let mut b = Atlas::builder("unit-disk", 2);
    let c = b.chart("disk", 0, Domain::Ball { center: c2(0.0, 0.0), radius: 1.0 });
    let atlas = b.build();
    let fields = disk_fields(&atlas);
    ManifoldEntry::new("unit-disk", atlas.clone(), vec![ConnectionField::flat(atlas)], fields, disk_sampler(c, 0.0, 0.85))
}

/// The punctured open unit disk with the flat connection (incomplete).
pub fn punctured_disk() -> ManifoldEntry {
    let mut b = Atlas::builder("punctured-disk", 2);
    let c = b.chart("punctured", 0, Domain::Annulus { center: c2(0.0, 0.0), inner: 0.0, outer: 1.0 });
    let atlas = b.build();
    let fields = disk_fields(&atlas);
    ManifoldEntry::new(
        "punctured-disk",
        atlas.clone(),
        vec![ConnectionField::flat(atlas)],
        fields,
        disk_sampler(c, 0.05, 0.85),
    )
}

/// `x ↦ Q x + c` written in chart `base` and carried to other charts by
/// the atlas transitions.
pub struct AffineMap {
    name: String,
    atlas: Arc<Atlas>,
    base: ChartId,
    q: Matrix,
    c: Coords,
}

impl AffineMap {
    pub fn new(atlas: Arc<Atlas>, base: ChartId, q: Matrix, c: Coords) -> Self {
        Self { name: "affine-map".into(), atlas, base, q, c }
    }

    pub fn linear_part(&self) -> &Matrix {
        &self.q
    }

    pub fn offset(&self) -> &Coords {
        &self.c
    }
}

impl ChartMap for AffineMap {
    fn name(&self) -> &str {
        &self.name
    }

    fn atlas(&self) -> &Arc<Atlas> {
        &self.atlas
    }

    fn map(&self, from: ChartId, to: ChartId, x: &Coords) -> Result<Coords> {
        let xb = self.atlas.map_coords(from, self.base, x)?;
        self.atlas.map_coords(self.base, to, &(&self.q * xb + &self.c))
    }

    fn jacobian(&self, from: ChartId, to: ChartId, x: &Coords) -> Option<Result<Matrix>> {
        Some((|| {
            let xb = self.atlas.map_coords(from, self.base, x)?;
            let yb = &self.q * &xb + &self.c;
            let d_in = self.atlas.jacobian_coords(from, self.base, x)?;
            let d_out = self.atlas.jacobian_coords(self.base, to, &yb)?;
            Ok(d_out * &self.q * d_in)
        })())
    }

    fn hessian(&self, from: ChartId, to: ChartId, x: &Coords) -> Option<Result<Bilinear>> {
        Some((|| {
            let xb = self.atlas.map_coords(from, self.base, x)?;
            let yb = &self.q * &xb + &self.c;
            let d_in = self.atlas.jacobian_coords(from, self.base, x)?;
            let h_in = self.atlas.hessian_coords(from, self.base, x)?;
            let d_out = self.atlas.jacobian_coords(self.base, to, &yb)?;
            let h_out = self.atlas.hessian_coords(self.base, to, &yb)?;
            let qd = &self.q * d_in;
            Ok(h_out.pulled(&qd, &qd) + h_in.pushed(&(d_out * &self.q)))
        })())
    }

    fn inverse(&self) -> Option<Arc<dyn ChartMap>> {
        let qi = self.q.clone().try_inverse()?;
        let c = -(&qi * &self.c);
        Some(Arc::new(AffineMap { name: format!("{}-inverse", self.name), atlas: self.atlas.clone(), base: self.base, q: qi, c }))
    }
}

