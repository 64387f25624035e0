//! The round 2-sphere: two stereographic charts, and a colatitude chart.
//!
//! Chart `north` is `u = (X, Y) / (1 + Z)` (north pole at the origin),
//! chart `south` is `u = (X, Y) / (1 − Z)`. The transition between them is
//! inversion in the unit circle, `u ↦ u / |u|²`, in both directions.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;

use super::ManifoldEntry;
use crate::atlas::{Atlas, ChartId, Domain, Point, Transition};
use crate::automorphism::ChartMap;
use crate::connection::{ChartConnection, ConnectionField};
use crate::error::{GeomError, Result};
use crate::flows::{ChartField, VectorFieldSpec};
use crate::linalg::{Bilinear, Coords, Matrix};

pub const NORTH: ChartId = ChartId(0);
pub const SOUTH: ChartId = ChartId(1);
/// Radius of both stereographic chart domains.
pub const CHART_RADIUS: f64 = 3.0;

fn c2(a: f64, b: f64) -> Coords {
    Coords::from_row_slice(&[a, b])
}

fn sign(chart: ChartId) -> f64 {
    if chart == NORTH {
        1.0
    } else {
        -1.0
    }
}

fn inversion(u: &Coords) -> Coords {
    u / u.norm_squared()
}

fn inversion_jacobian(u: &Coords) -> Matrix {
    let s = u.norm_squared();
    (Matrix::identity(2, 2) * s - u * u.transpose() * 2.0) / (s * s)
}

/// `∂_i ∂_j h_k` for `h(u) = u / |u|²`.
fn inversion_hessian(u: &Coords) -> Bilinear {
    let s = u.norm_squared();
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Bilinear::from_fn(2, |k, i, j| {
        (-2.0 * d(j, k) * u[i] - 2.0 * (d(i, k) * u[j] + u[k] * d(i, j))) / (s * s)
            + 8.0 * u[k] * u[j] * u[i] / (s * s * s)
    })
}

/// Inverse chart map into `R³`.
pub fn embed(chart: ChartId, u: &Coords) -> Vector3<f64> {
    let s = u.norm_squared();
    Vector3::new(2.0 * u[0], 2.0 * u[1], sign(chart) * (1.0 - s)) / (1.0 + s)
}

/// Chart map from the unit sphere; `None` at the chart's excluded pole.
pub fn project(chart: ChartId, x: &Vector3<f64>) -> Option<Coords> {
    let d = 1.0 + sign(chart) * x[2];
    (d > 1e-300).then(|| c2(x[0] / d, x[1] / d))
}

fn embed_jacobian(chart: ChartId, u: &Coords) -> Matrix {
    let q = 1.0 / (1.0 + u.norm_squared());
    let dq = |i: usize| -2.0 * u[i] * q * q;
    Matrix::from_fn(3, 2, |r, i| match r {
        0 | 1 => 2.0 * if r == i { q } else { 0.0 } + 2.0 * u[r] * dq(i),
        _ => sign(chart) * 2.0 * dq(i),
    })
}

/// `∂_i ∂_j ψ_r` for the inverse chart map `ψ`.
fn embed_hessian(chart: ChartId, u: &Coords) -> [Matrix; 3] {
    let q = 1.0 / (1.0 + u.norm_squared());
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let dq = |i: usize| -2.0 * u[i] * q * q;
    let ddq = |i: usize, j: usize| -2.0 * d(i, j) * q * q + 8.0 * u[i] * u[j] * q * q * q;
    let planar = |r: usize| {
        Matrix::from_fn(2, 2, |i, j| 2.0 * d(r, i) * dq(j) + 2.0 * d(r, j) * dq(i) + 2.0 * u[r] * ddq(i, j))
    };
    [planar(0), planar(1), Matrix::from_fn(2, 2, |i, j| sign(chart) * 2.0 * ddq(i, j))]
}

fn project_jacobian(chart: ChartId, x: &Vector3<f64>) -> Matrix {
    let sg = sign(chart);
    let d = 1.0 + sg * x[2];
    Matrix::from_fn(2, 3, |k, l| if l == 2 { -sg * x[k] / (d * d) } else if k == l { 1.0 / d } else { 0.0 })
}

/// `∂_l ∂_m φ_k` for the chart map `φ` on `R³`.
fn project_hessian(chart: ChartId, x: &Vector3<f64>) -> [Matrix; 2] {
    let sg = sign(chart);
    let d = 1.0 + sg * x[2];
    let comp = |k: usize| {
        Matrix::from_fn(3, 3, |l, m| match (l, m) {
            (2, 2) => 2.0 * x[k] / (d * d * d),
            (2, o) | (o, 2) => {
                if o == k {
                    -sg / (d * d)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        })
    };
    [comp(0), comp(1)]
}

/// `B = −Γ` for the metric `4 |du|² / (1 + |u|²)²`, identical in both charts:
/// `Γ(a, b) = (a·g) b + (b·g) a − (a·b) g` with `g = −2u / (1 + |u|²)`.
fn round_b(u: &Coords) -> Bilinear {
    let g = u * (-2.0 / (1.0 + u.norm_squared()));
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Bilinear::from_fn(2, |k, i, j| -(g[i] * d(k, j) + g[j] * d(k, i) - d(i, j) * g[k]))
}

fn round_db(u: &Coords) -> Vec<Bilinear> {
    let s1 = 1.0 + u.norm_squared();
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    // dg[i][l] = ∂_l g_i
    let dg = |i: usize, l: usize| -2.0 * d(i, l) / s1 + 4.0 * u[i] * u[l] / (s1 * s1);
    (0..2)
        .map(|l| Bilinear::from_fn(2, |k, i, j| -(dg(i, l) * d(k, j) + dg(j, l) * d(k, i) - d(i, j) * dg(k, l))))
        .collect()
}

fn hess(h0: [f64; 4], h1: [f64; 4]) -> Bilinear {
    Bilinear::from_fn(2, |k, i, j| if k == 0 { h0[2 * i + j] } else { h1[2 * i + j] })
}

/// The rotation generators `L_a(X) = X × e_a`, so that `[L_1, L_2] = L_3`.
fn rotation_fields(atlas: &Arc<Atlas>) -> Vec<VectorFieldSpec> {
    let l1 = VectorFieldSpec::new("L1", atlas.clone())
        .with_chart(
            NORTH,
            ChartField::new(|u| c2(u[0] * u[1], (1.0 + u[1] * u[1] - u[0] * u[0]) / 2.0))
                .with_jacobian(|u| Matrix::from_row_slice(2, 2, &[u[1], u[0], -u[0], u[1]]))
                .with_hessian(|_| hess([0.0, 1.0, 1.0, 0.0], [-1.0, 0.0, 0.0, 1.0])),
        )
        .with_chart(
            SOUTH,
            ChartField::new(|u| c2(-u[0] * u[1], (u[0] * u[0] - u[1] * u[1] - 1.0) / 2.0))
                .with_jacobian(|u| Matrix::from_row_slice(2, 2, &[-u[1], -u[0], u[0], -u[1]]))
                .with_hessian(|_| hess([0.0, -1.0, -1.0, 0.0], [1.0, 0.0, 0.0, -1.0])),
        );
    let l2 = VectorFieldSpec::new("L2", atlas.clone())
        .with_chart(
            NORTH,
            ChartField::new(|u| c2(-(1.0 + u[0] * u[0] - u[1] * u[1]) / 2.0, -u[0] * u[1]))
                .with_jacobian(|u| Matrix::from_row_slice(2, 2, &[-u[0], u[1], -u[1], -u[0]]))
                .with_hessian(|_| hess([-1.0, 0.0, 0.0, 1.0], [0.0, -1.0, -1.0, 0.0])),
        )
        .with_chart(
            SOUTH,
            ChartField::new(|u| c2((1.0 + u[0] * u[0] - u[1] * u[1]) / 2.0, u[0] * u[1]))
                .with_jacobian(|u| Matrix::from_row_slice(2, 2, &[u[0], -u[1], u[1], u[0]]))
                .with_hessian(|_| hess([1.0, 0.0, 0.0, -1.0], [0.0, 1.0, 1.0, 0.0])),
        );
    let rot3 = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let l3 = VectorFieldSpec::uniform("L3", atlas.clone(), ChartField::affine(rot3, c2(0.0, 0.0)));
    // Conformal but not affine: u in the north chart, −u in the south chart.
    let dilation = VectorFieldSpec::new("dilation", atlas.clone())
        .with_chart(NORTH, ChartField::affine(Matrix::identity(2, 2), c2(0.0, 0.0)))
        .with_chart(SOUTH, ChartField::affine(-Matrix::identity(2, 2), c2(0.0, 0.0)));
    vec![l1, l2, l3, dilation]
}

pub fn sphere_atlas() -> Arc<Atlas> {
    let mut b = Atlas::builder("sphere", 2);
    let ball = Domain::Ball { center: c2(0.0, 0.0), radius: CHART_RADIUS };
    let n = b.chart("north", 0, ball.clone());
    let s = b.chart("south", 1, ball);
    let inv = || Transition::new(inversion).with_jacobian(inversion_jacobian).with_hessian(inversion_hessian);
    b.transition(n, s, inv());
    b.transition(s, n, inv());
    b.build()
}

/// Uniform point on the unit sphere.
pub fn random_point(rng: &mut dyn rand::RngCore) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..1.0);
    let a: f64 = rng.random_range(-PI..PI);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * a.cos(), r * a.sin(), z)
}

/// The point of the atlas over `x`, in its preferred chart.
pub fn point_at(atlas: &Atlas, x: &Vector3<f64>) -> Point {
    let chart = if x[2] > -0.6 { NORTH } else { SOUTH };
    let p = Point::new(chart, project(chart, x).expect("chart covers the point"));
    atlas.preferred_chart(&p, crate::atlas::DEFAULT_MARGIN).unwrap_or(p)
}

/// Round sphere with stereographic charts, the Levi-Civita connection
/// `round`, the rotation generators `L1`, `L2`, `L3` and the non-affine
/// field `dilation`.
pub fn sphere() -> ManifoldEntry {
    let atlas = sphere_atlas();
    let chart_conn = || ChartConnection::new(round_b).with_derivative(round_db);
    let conn = ConnectionField::new("round", atlas.clone()).with_chart(NORTH, chart_conn()).with_chart(SOUTH, chart_conn());
    let fields = rotation_fields(&atlas);
    let a2 = atlas.clone();
    ManifoldEntry::new("sphere", atlas, vec![conn], fields, Arc::new(move |rng| point_at(&a2, &random_point(rng))))
}

/// Round sphere in one colatitude/longitude chart `(θ, φ) ∈ (0, π) × (−π, π)`.
pub fn sphere_colatitude() -> ManifoldEntry {
    let mut b = Atlas::builder("sphere-colatitude", 2);
    let c = b.chart("colatitude", 0, Domain::Box { lo: vec![0.0, -PI], hi: vec![PI, PI] });
    let atlas = b.build();
    // Γ^θ_φφ = −sin θ cos θ, Γ^φ_θφ = Γ^φ_φθ = cot θ
    let gamma: Arc<dyn Fn(&Coords) -> Bilinear + Send + Sync> = Arc::new(|x| {
        let (s, co) = x[0].sin_cos();
        let mut g = Bilinear::zeros(2);
        g.set(0, 1, 1, -s * co);
        g.set(1, 0, 1, co / s);
        g.set(1, 1, 0, co / s);
        g
    });
    let conn = ConnectionField::from_christoffel("round", atlas.clone(), vec![(c, gamma)]);
    let rz = VectorFieldSpec::uniform("rotation-z", atlas.clone(), ChartField::affine(Matrix::zeros(2, 2), c2(0.0, -1.0)));
    ManifoldEntry::new(
        "sphere-colatitude",
        atlas,
        vec![conn],
        vec![rz],
        Arc::new(move |rng| Point::new(c, c2(rng.random_range(0.4..PI - 0.4), rng.random_range(-2.8..2.8)))),
    )
}

/// A rigid rotation `X ↦ R X` of the sphere written through the
/// stereographic charts, with derivatives by the chain rule.
pub struct SphereRotation {
    name: String,
    atlas: Arc<Atlas>,
    r: Matrix3<f64>,
}

impl SphereRotation {
    pub fn new(atlas: Arc<Atlas>, r: Matrix3<f64>) -> Self {
        Self { name: "rotation".into(), atlas, r }
    }

    /// Rotation by `angle` about `axis` (right-handed).
    pub fn about(atlas: Arc<Atlas>, axis: Vector3<f64>, angle: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self::new(atlas, *r.matrix())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.r
    }

    fn r_dyn(&self) -> Matrix {
        Matrix::from_fn(3, 3, |i, j| self.r[(i, j)])
    }
}

impl ChartMap for SphereRotation {
    fn name(&self) -> &str {
        &self.name
    }

    fn atlas(&self) -> &Arc<Atlas> {
        &self.atlas
    }

    fn map(&self, from: ChartId, to: ChartId, x: &Coords) -> Result<Coords> {
        if !self.atlas.contains(from, x, 0.0) {
            return Err(GeomError::OutsideChart(from));
        }
        let y = project(to, &(self.r * embed(from, x))).ok_or(GeomError::OutsideChart(to))?;
        if !self.atlas.contains(to, &y, 0.0) {
            return Err(GeomError::OutsideChart(to));
        }
        Ok(y)
    }

    fn jacobian(&self, from: ChartId, to: ChartId, x: &Coords) -> Option<Result<Matrix>> {
        Some(self.map(from, to, x).map(|_| {
            let y = self.r * embed(from, x);
            project_jacobian(to, &y) * self.r_dyn() * embed_jacobian(from, x)
        }))
    }

    fn hessian(&self, from: ChartId, to: ChartId, x: &Coords) -> Option<Result<Bilinear>> {
        Some(self.map(from, to, x).map(|_| {
            let y = self.r * embed(from, x);
            let rd = self.r_dyn() * embed_jacobian(from, x);
            let pr = project_jacobian(to, &y) * self.r_dyn();
            let hp = project_hessian(to, &y);
            let he = embed_hessian(from, x);
            Bilinear::from_fn(2, |k, i, j| {
                let outer = (rd.column(i).transpose() * &hp[k] * rd.column(j))[(0, 0)];
                let inner: f64 = (0..3).map(|l| pr[(k, l)] * he[l][(i, j)]).sum();
                outer + inner
            })
        }))
    }

    fn inverse(&self) -> Option<Arc<dyn ChartMap>> {
        Some(Arc::new(SphereRotation {
            name: format!("{}-inverse", self.name),
            atlas: self.atlas.clone(),
            r: self.r.transpose(),
        }))
    }
}
