//! The frame bundle in bundle charts `(x, g)`: the right action, the
//! soldering and connection forms, `κ = (θ, ω)` and its inverse, and the
//! standard horizontal fields `H_λ`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::atlas::{Atlas, ChartId, Point};
use crate::connection::ConnectionField;
use crate::error::{GeomError, Result};
use crate::flows::{self, ChartState, IntegratorConfig, Layout, ParameterFamily, VectorField};
use crate::geodesics::GeodesicSpray;
use crate::linalg::{self, Coords, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub chart: ChartId,
    pub x: Coords,
    pub g: Matrix,
}

impl Frame {
    pub fn new(chart: ChartId, x: Coords, g: Matrix) -> Result<Self> {
        if g.nrows() != x.len() || g.ncols() != x.len() {
            return Err(GeomError::DimensionMismatch { expected: x.len(), got: g.nrows() });
        }
        if g.determinant().abs() <= linalg::SINGULAR_DET {
            return Err(GeomError::SingularFrame);
        }
        Ok(Self { chart, x, g })
    }

    /// The coordinate frame `(x, id)` at a point.
    pub fn identity_at(p: &Point) -> Self {
        let n = p.coords.len();
        Self { chart: p.chart, x: p.coords.clone(), g: Matrix::identity(n, n) }
    }

    pub fn base(&self) -> Point {
        Point::new(self.chart, self.x.clone())
    }

    pub fn layout(&self) -> Layout {
        Layout::frame(self.x.len())
    }

    pub fn to_state(&self) -> ChartState {
        ChartState::new(self.chart, self.layout().pack(&self.x, &self.g))
    }

    pub fn from_state(s: &ChartState, n: usize) -> Self {
        let l = Layout::frame(n);
        Self { chart: s.chart, x: l.position(&s.state), g: l.fiber(&s.state) }
    }

    /// The same frame in another bundle chart, `g ↦ dh(x) g`.
    pub fn recharted(&self, atlas: &Atlas, target: ChartId) -> Result<Self> {
        let s = flows::rechart_state(atlas, self.layout(), self.chart, target, &self.to_state().state)?;
        Ok(Self::from_state(&ChartState::new(target, s), self.x.len()))
    }

    fn inverse_g(&self) -> Result<Matrix> {
        linalg::guarded_inverse(&self.g).ok_or(GeomError::SingularFrame)
    }
}

/// Chart form `(v, w) ∈ E × gl(E)` of a tangent vector to `Fr(M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTangent {
    pub v: Coords,
    pub w: Matrix,
}

impl FrameTangent {
    pub fn new(v: Coords, w: Matrix) -> Self {
        Self { v, w }
    }

    pub fn zero(n: usize) -> Self {
        Self { v: Coords::zeros(n), w: Matrix::zeros(n, n) }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        Layout::frame(self.v.len()).pack(&self.v, &self.w)
    }

    pub fn from_vector(s: &DVector<f64>, n: usize) -> Self {
        let l = Layout::frame(n);
        Self { v: l.position(s), w: l.fiber(s) }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { v: &self.v * k, w: &self.w * k }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { v: &self.v + &other.v, w: &self.w + &other.w }
    }
}

/// Value of `κ = (θ, ω)` on a frame tangent.
#[derive(Clone, Debug, PartialEq)]
pub struct KappaValue {
    pub theta: Coords,
    pub omega: Matrix,
}

impl KappaValue {
    pub fn new(theta: Coords, omega: Matrix) -> Self {
        Self { theta, omega }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        Layout::frame(self.theta.len()).pack(&self.theta, &self.omega)
    }

    pub fn from_vector(s: &DVector<f64>, n: usize) -> Self {
        let l = Layout::frame(n);
        Self { theta: l.position(s), omega: l.fiber(s) }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (&self.theta - &other.theta).norm() + (&self.omega - &other.omega).norm()
    }
}

/// Right action `(x, g) · g₂ = (x, g g₂)`.
pub fn rho(frame: &Frame, g2: &Matrix) -> Result<Frame> {
    if g2.shape() != frame.g.shape() || g2.determinant().abs() <= linalg::SINGULAR_DET {
        return Err(GeomError::SingularGroupElement);
    }
    Ok(Frame { chart: frame.chart, x: frame.x.clone(), g: &frame.g * g2 })
}

/// `θ(v, w) = g⁻¹ v`.
pub fn soldering(frame: &Frame, ft: &FrameTangent) -> Result<Coords> {
    Ok(frame.inverse_g()? * &ft.v)
}

/// `ω(v, w) = e ↦ g⁻¹ (w e − B_x(g e, v))`.
pub fn connection_form(conn: &ConnectionField, frame: &Frame, ft: &FrameTangent) -> Result<Matrix> {
    let gi = frame.inverse_g()?;
    let b = conn.bilinear(frame.chart, &frame.x)?;
    Ok(gi * (&ft.w - b.with_second(&ft.v) * &frame.g))
}

pub fn kappa(conn: &ConnectionField, frame: &Frame, ft: &FrameTangent) -> Result<KappaValue> {
    Ok(KappaValue { theta: soldering(frame, ft)?, omega: connection_form(conn, frame, ft)? })
}

/// `κ⁻¹(λ, A) = (g λ, e ↦ g A e + B_x(g e, g λ))`.
pub fn kappa_inverse(conn: &ConnectionField, frame: &Frame, kv: &KappaValue) -> Result<FrameTangent> {
    frame.inverse_g()?;
    let b = conn.bilinear(frame.chart, &frame.x)?;
    let v = &frame.g * &kv.theta;
    let w = &frame.g * &kv.omega + b.with_second(&v) * &frame.g;
    Ok(FrameTangent { v, w })
}

/// Matrix of `κ_p` on `E × gl(E)` (packed as `v` then `w` column-major).
pub fn kappa_matrix(conn: &ConnectionField, frame: &Frame) -> Result<Matrix> {
    let n = frame.x.len();
    let d = n + n * n;
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        let e = DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 });
        let k = kappa(conn, frame, &FrameTangent::from_vector(&e, n))?;
        m.set_column(i, &k.to_vector());
    }
    Ok(m)
}

/// Builds a Jacobian column by column from its action on basis vectors.
pub(crate) fn jacobian_from_action(d: usize, mut f: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>) -> Result<Matrix> {
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        let e = DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 });
        m.set_column(i, &f(&e)?);
    }
    Ok(m)
}

/// `H_λ(x, g) = (g λ, e ↦ B_x(g e, g λ))`.
pub struct StandardHorizontal<'a> {
    conn: &'a ConnectionField,
    lambda: Coords,
}

impl<'a> StandardHorizontal<'a> {
    pub fn new(conn: &'a ConnectionField, lambda: Coords) -> Self {
        Self { conn, lambda }
    }

    pub fn lambda(&self) -> &Coords {
        &self.lambda
    }
}

impl VectorField for StandardHorizontal<'_> {
    fn name(&self) -> &str {
        "standard-horizontal"
    }

    fn atlas(&self) -> &Arc<Atlas> {
        self.conn.atlas()
    }

    fn layout(&self) -> Layout {
        Layout::frame(self.conn.atlas().dim())
    }

    fn eval(&self, chart: ChartId, state: &DVector<f64>) -> Result<DVector<f64>> {
        let l = self.layout();
        let (x, g) = (l.position(state), l.fiber(state));
        let u = &g * &self.lambda;
        let w = self.conn.bilinear(chart, &x)?.with_second(&u) * &g;
        Ok(l.pack(&u, &w))
    }

    fn jacobian(&self, chart: ChartId, state: &DVector<f64>) -> Result<Matrix> {
        let l = self.layout();
        let (x, g) = (l.position(state), l.fiber(state));
        let u = &g * &self.lambda;
        let b = self.conn.bilinear(chart, &x)?;
        let db = self.conn.derivative(chart, &x)?;
        jacobian_from_action(l.dim(), |e| {
            let (dx, dg) = (l.position(e), l.fiber(e));
            let du = &dg * &self.lambda;
            let dw = linalg::Bilinear::contract(&db, &dx).with_second(&u) * &g
                + b.with_second(&u) * &dg
                + b.with_second(&du) * &g;
            Ok(l.pack(&du, &dw))
        })
    }
}

/// The field `η_{(λ, A)}(p) = κ_p⁻¹(λ, A)`.
pub struct KappaInverseField<'a> {
    conn: &'a ConnectionField,
    value: KappaValue,
}

impl<'a> KappaInverseField<'a> {
    pub fn new(conn: &'a ConnectionField, value: KappaValue) -> Self {
        Self { conn, value }
    }
}

impl VectorField for KappaInverseField<'_> {
    fn name(&self) -> &str {
        "kappa-inverse"
    }

    fn atlas(&self) -> &Arc<Atlas> {
        self.conn.atlas()
    }

    fn layout(&self) -> Layout {
        Layout::frame(self.conn.atlas().dim())
    }

    fn eval(&self, chart: ChartId, state: &DVector<f64>) -> Result<DVector<f64>> {
        let l = self.layout();
        let frame = Frame { chart, x: l.position(state), g: l.fiber(state) };
        Ok(kappa_inverse(self.conn, &frame, &self.value)?.to_vector())
    }
}

/// `v ↦ η_v` with `v = (λ, A)` packed as in [`KappaValue::to_vector`].
pub struct KappaFamily<'a> {
    conn: &'a ConnectionField,
}

impl<'a> KappaFamily<'a> {
    pub fn new(conn: &'a ConnectionField) -> Self {
        Self { conn }
    }
}

impl ParameterFamily for KappaFamily<'_> {
    fn params(&self) -> usize {
        let n = self.conn.atlas().dim();
        n + n * n
    }

    fn field(&self, v: &DVector<f64>) -> Box<dyn VectorField + '_> {
        let n = self.conn.atlas().dim();
        Box::new(KappaInverseField::new(self.conn, KappaValue::from_vector(v, n)))
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ProjectionDefect {
    /// `max ‖(q∘γ)'(t) − γ(t) λ‖` with `(q∘γ)'` by central differences.
    pub velocity: f64,
    /// `max` distance between `q∘γ` and the geodesic through `(q(p), p λ)`.
    pub geodesic: f64,
}

/// Compares the projected integral curve of `H_λ` with its predicted
/// velocity and with the geodesic it should trace. `t_span = (t0, t1)`
/// with `t0 ≤ 0 ≤ t1`.
pub fn horizontal_projection_defect(
    conn: &ConnectionField,
    lambda: &Coords,
    frame: &Frame,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<ProjectionDefect> {
    let atlas = conn.atlas();
    let n = atlas.dim();
    let h = StandardHorizontal::new(conn, lambda.clone());
    let spray = GeodesicSpray::new(conn);
    let start = frame.to_state();
    let u0 = &frame.g * lambda;
    let gstart = ChartState::new(frame.chart, Layout::tangent(n).pack(&frame.x, &Matrix::from_column_slice(n, 1, u0.as_slice())));

    let mut frames: Vec<(f64, ChartState)> = Vec::new();
    let mut geos: Vec<(f64, ChartState)> = Vec::new();
    for (t, forward) in [(t_span.0, false), (t_span.1, true)] {
        if t == 0.0 {
            continue;
        }
        let mut a = flows::trajectory(&h, &start, t, cfg)?;
        let mut b = flows::trajectory(&spray, &gstart, t, cfg)?;
        if !forward {
            a.reverse();
            b.reverse();
            a.pop();
            b.pop();
        } else if !frames.is_empty() {
            a.remove(0);
            b.remove(0);
        }
        frames.extend(a);
        geos.extend(b);
    }
    if frames.is_empty() {
        return Ok(ProjectionDefect { velocity: 0.0, geodesic: 0.0 });
    }

    let mut velocity: f64 = 0.0;
    for i in 1..frames.len().saturating_sub(1) {
        let f = Frame::from_state(&frames[i].1, n);
        let nb = |j: usize| atlas.map_coords(frames[j].1.chart, f.chart, &frames[j].1.state.rows(0, n).into_owned());
        let dx = (nb(i + 1)? - nb(i - 1)?) / (frames[i + 1].0 - frames[i - 1].0);
        velocity = velocity.max((dx - &f.g * lambda).norm());
    }
    let mut geodesic: f64 = 0.0;
    for ((_, a), (_, b)) in frames.iter().zip(&geos) {
        let pa = Point::new(a.chart, a.state.rows(0, n).into_owned());
        let pb = Point::new(b.chart, b.state.rows(0, n).into_owned());
        geodesic = geodesic.max(atlas.distance(&pa, &pb)?);
    }
    Ok(ProjectionDefect { velocity, geodesic })
}

/// Base point of the time-`t` flow of `H_λ`, for comparison with
/// [`crate::geodesics::exp_scaled`].
pub fn horizontal_flow(conn: &ConnectionField, lambda: &Coords, frame: &Frame, t: f64, cfg: &IntegratorConfig) -> Result<Frame> {
    let end = flows::flow(&StandardHorizontal::new(conn, lambda.clone()), &frame.to_state(), t, cfg)?;
    Ok(Frame::from_state(&end, frame.x.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn v(xs: &[f64]) -> Coords {
        Coords::from_row_slice(xs)
    }

    fn frame(x: &[f64], g: &[f64]) -> Frame {
        Frame::new(ChartId(0), v(x), Matrix::from_row_slice(2, 2, g)).unwrap()
    }

    #[test]
    fn soldering_examples() {
        let f = frame(&[0.0, 0.0], &[2.0, 0.0, 0.0, 2.0]);
        let ft = FrameTangent::new(v(&[2.0, 0.0]), Matrix::zeros(2, 2));
        assert_eq!(soldering(&f, &ft).unwrap(), v(&[1.0, 0.0]));
        let vertical = FrameTangent::new(v(&[0.0, 0.0]), Matrix::identity(2, 2));
        assert_eq!(soldering(&f, &vertical).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn rho_is_associative_and_rejects_singular() {
        let f = frame(&[0.1, 0.2], &[1.0, 2.0, 0.0, 1.0]);
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.5]);
        let b = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        assert_eq!(rho(&rho(&f, &a).unwrap(), &b).unwrap(), rho(&f, &(&a * &b)).unwrap());
        assert_eq!(rho(&f, &Matrix::zeros(2, 2)).unwrap_err(), GeomError::SingularGroupElement);
    }

    #[test]
    fn singular_frames_are_rejected() {
        assert_eq!(Frame::new(ChartId(0), v(&[0.0, 0.0]), Matrix::zeros(2, 2)).unwrap_err(), GeomError::SingularFrame);
    }

    #[test]
    fn kappa_round_trip_on_sphere() {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let f = frame(&[0.4, -0.3], &[1.0, 0.3, -0.2, 0.8]);
        let ft = FrameTangent::new(v(&[0.7, -1.1]), Matrix::from_row_slice(2, 2, &[0.2, 0.5, -0.4, 1.3]));
        let back = kappa_inverse(conn, &f, &kappa(conn, &f, &ft).unwrap()).unwrap();
        assert!((back.to_vector() - ft.to_vector()).norm() < 1e-12);
    }

    #[test]
    fn horizontal_field_is_kappa_constant() {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let f = frame(&[0.4, -0.3], &[1.0, 0.3, -0.2, 0.8]);
        let lambda = v(&[0.6, -0.2]);
        let h = StandardHorizontal::new(conn, lambda.clone());
        let ft = FrameTangent::from_vector(&h.eval(f.chart, &f.to_state().state).unwrap(), 2);
        let k = kappa(conn, &f, &ft).unwrap();
        assert!((k.theta - lambda).norm() < 1e-12);
        assert!(k.omega.norm() < 1e-12);
    }

    #[test]
    fn horizontal_jacobian_matches_differences() {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let f = frame(&[0.4, -0.3], &[1.0, 0.3, -0.2, 0.8]);
        let h = StandardHorizontal::new(conn, v(&[0.6, -0.2]));
        let s = f.to_state().state;
        let fd = linalg::fd_jacobian(&s, 1e-6, |y| h.eval(f.chart, y)).unwrap();
        assert!((h.jacobian(f.chart, &s).unwrap() - fd).norm() < 1e-7);
    }
}
