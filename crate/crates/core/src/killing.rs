//! Natural lifts to the frame bundle, the affine-Killing residual, Lie
//! brackets, the evaluation embedding `ξ ↦ (ξ(x), ∇ξ(x))` and extension
//! of Killing data along horizontal paths.

use std::sync::Arc;

use nalgebra::DVector;

use crate::atlas::{Atlas, ChartId, Point, Tangent};
use crate::connection::ConnectionField;
use crate::error::{GeomError, Result};
use crate::flows::{self, ChartField, IntegratorConfig, Layout, VectorField, VectorFieldSpec};
use crate::frame_bundle::{jacobian_from_action, rho, Frame, FrameTangent, StandardHorizontal};
use crate::geodesics;
use crate::linalg::{Bilinear, Coords, Matrix};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// `ξ̄(x, g) = (ξ(x), dξ(x) g)`.
pub struct NaturalLift<'a> {
    field: &'a VectorFieldSpec,
}

impl<'a> NaturalLift<'a> {
    pub fn new(field: &'a VectorFieldSpec) -> Self {
        Self { field }
    }
}

impl VectorField for NaturalLift<'_> {
    fn name(&self) -> &str {
        self.field.name()
    }

    fn atlas(&self) -> &Arc<Atlas> {
        self.field.atlas()
    }

    fn layout(&self) -> Layout {
        Layout::frame(self.field.atlas().dim())
    }

    fn eval(&self, chart: ChartId, state: &DVector<f64>) -> Result<DVector<f64>> {
        let l = self.layout();
        let (x, g) = (l.position(state), l.fiber(state));
        Ok(l.pack(&self.field.value(chart, &x)?, &(self.field.jacobian_at(chart, &x)? * g)))
    }

    /// `(δx, δG) ↦ (dξ δx, d²ξ(δx, G·) + dξ δG)`.
    fn jacobian(&self, chart: ChartId, state: &DVector<f64>) -> Result<Matrix> {
        let l = self.layout();
        let (x, g) = (l.position(state), l.fiber(state));
        let j = self.field.jacobian_at(chart, &x)?;
        let h = self.field.hessian_at(chart, &x)?;
        jacobian_from_action(l.dim(), |e| {
            let (dx, dg) = (l.position(e), l.fiber(e));
            Ok(l.pack(&(&j * &dx), &(h.with_first(&dx) * &g + &j * dg)))
        })
    }
}

/// `R(x; v, w) = d²ξ(v, w) + dξ B(v, w) − dB(ξ)(v, w) − B(dξ v, w) − B(v, dξ w)`.
pub fn killing_residual(conn: &ConnectionField, field: &VectorFieldSpec, point: &Point, v: &Coords, w: &Coords) -> Result<Coords> {
    Ok(residual_form(conn, field, point)?.apply(v, w))
}

/// The residual as a bilinear map at `point`.
pub fn residual_form(conn: &ConnectionField, field: &VectorFieldSpec, point: &Point) -> Result<Bilinear> {
    let (c, x) = (point.chart, &point.coords);
    let xi = field.value(c, x)?;
    let j = field.jacobian_at(c, x)?;
    let h = field.hessian_at(c, x)?;
    let b = conn.bilinear(c, x)?;
    let db = conn.derivative_along(c, x, &xi)?;
    let n = x.len();
    Ok(h + b.pushed(&j) - db - b.pulled(&j, &Matrix::identity(n, n)) - b.pulled(&Matrix::identity(n, n), &j))
}

/// Largest residual norm over pairs of coordinate basis vectors.
pub fn killing_residual_max(conn: &ConnectionField, field: &VectorFieldSpec, point: &Point) -> Result<f64> {
    let r = residual_form(conn, field, point)?;
    let n = point.coords.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let col = Coords::from_fn(n, |k, _| r.get(k, i, j));
            worst = worst.max(col.norm());
        }
    }
    Ok(worst)
}

/// `[ξ₁, ξ₂] = dξ₂(ξ₁) − dξ₁(ξ₂)` chart by chart, with its Jacobian
/// `z ↦ d²ξ₂(z, ξ₁) + dξ₂ dξ₁ z − d²ξ₁(z, ξ₂) − dξ₁ dξ₂ z`.
pub fn bracket(f1: &VectorFieldSpec, f2: &VectorFieldSpec) -> VectorFieldSpec {
    let atlas = f1.atlas().clone();
    let mut out = VectorFieldSpec::new(&format!("[{},{}]", f1.name(), f2.name()), atlas.clone());
    for c in atlas.chart_ids() {
        if f1.chart_field(c).is_err() || f2.chart_field(c).is_err() {
            continue;
        }
        let (a, b) = (f1.clone(), f2.clone());
        let (a2, b2) = (f1.clone(), f2.clone());
        let value = move |x: &Coords| -> Result<Coords> {
            Ok(b.jacobian_at(c, x)? * a.value(c, x)? - a.jacobian_at(c, x)? * b.value(c, x)?)
        };
        let jac = move |x: &Coords| -> Result<Matrix> {
            let (j1, j2) = (a2.jacobian_at(c, x)?, b2.jacobian_at(c, x)?);
            let (h1, h2) = (a2.hessian_at(c, x)?, b2.hessian_at(c, x)?);
            Ok(h2.with_second(&a2.value(c, x)?) + &j2 * &j1 - h1.with_second(&b2.value(c, x)?) - &j1 * &j2)
        };
        let n = atlas.dim();
        let cf = ChartField::new(move |x| value(x).unwrap_or_else(|_| Coords::from_element(n, f64::NAN)))
            .with_jacobian(move |x| jac(x).unwrap_or_else(|_| Matrix::from_element(n, n, f64::NAN)));
        out = out.with_chart(c, cf);
    }
    out
}

/// `[X, Y] = dY(X) − dX(Y)` for fields on any layout, at one state.
pub fn lie_bracket_state(x: &dyn VectorField, y: &dyn VectorField, chart: ChartId, state: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(y.jacobian(chart, state)? * x.eval(chart, state)? - x.jacobian(chart, state)? * y.eval(chart, state)?)
}

/// Commutation defect between the flows of `ξ̄` and `H_λ` from `frame`.
pub fn lift_commutation_defect(
    conn: &ConnectionField,
    field: &VectorFieldSpec,
    lambda: &Coords,
    frame: &Frame,
    s: f64,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let lift = NaturalLift::new(field);
    let h = StandardHorizontal::new(conn, lambda.clone());
    flows::commutation_defect(&lift, &h, &frame.to_state(), s, t, cfg)
}

/// `(ξ(x), v ↦ ∇_v ξ)` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct KillingSeed {
    pub at: Point,
    pub value: Coords,
    pub nabla: Matrix,
}

impl KillingSeed {
    pub fn zero(at: Point) -> Self {
        let n = at.coords.len();
        Self { at, value: Coords::zeros(n), nabla: Matrix::zeros(n, n) }
    }

    /// `a · self + other` (same base point assumed).
    pub fn combine(&self, a: f64, other: &Self) -> Self {
        Self { at: self.at.clone(), value: &self.value * a + &other.value, nabla: &self.nabla * a + &other.nabla }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        Layout::frame(self.value.len()).pack(&self.value, &self.nabla)
    }
}

/// Column `j` of `nabla` is `dξ e_j − B(ξ, e_j)`.
pub fn ev_embedding(conn: &ConnectionField, field: &VectorFieldSpec, at: &Point) -> Result<KillingSeed> {
    let (c, x) = (at.chart, &at.coords);
    let value = field.value(c, x)?;
    let nabla = field.jacobian_at(c, x)? - conn.bilinear(c, x)?.with_first(&value);
    Ok(KillingSeed { at: at.clone(), value, nabla })
}

#[derive(Clone, Debug, PartialEq)]
pub enum PathStep {
    /// Flow of `H_λ` for `duration`.
    Flow { lambda: Coords, duration: f64 },
    /// Right action by a group element.
    Act(Matrix),
}

/// A composition of standard horizontal flows and right actions, started
/// from a frame.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HorizontalPath {
    pub start: Option<Point>,
    pub steps: Vec<PathStep>,
}

impl HorizontalPath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(p: Point) -> Self {
        Self { start: Some(p), steps: Vec::new() }
    }

    pub fn flow(mut self, lambda: Coords, duration: f64) -> Self {
        self.steps.push(PathStep::Flow { lambda, duration });
        self
    }

    pub fn act(mut self, g: Matrix) -> Self {
        self.steps.push(PathStep::Act(g));
        self
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &HorizontalPath) -> Self {
        Self { start: self.start.clone(), steps: self.steps.iter().chain(&other.steps).cloned().collect() }
    }

    /// A one-segment path from `frame` whose projection is the geodesic to
    /// `target`: `λ = g⁻¹ exp_x⁻¹(target)`, duration 1.
    pub fn toward(conn: &ConnectionField, frame: &Frame, target: &Point, cfg: &IntegratorConfig) -> Result<Self> {
        let shot = geodesics::exp_inverse(conn, &frame.base(), target, cfg)?;
        let gi = frame.g.clone().try_inverse().ok_or(GeomError::SingularFrame)?;
        Ok(Self::starting_at(frame.base()).flow(gi * shot.tangent.vec, 1.0))
    }

    /// The end frame of the path.
    pub fn run(&self, conn: &ConnectionField, frame: &Frame, cfg: &IntegratorConfig) -> Result<Frame> {
        Ok(transport_lift(conn, frame, &FrameTangent::zero(frame.x.len()), self, cfg)?.0)
    }
}

/// The frame `(x, id)` and the lift `(ξ, dξ) = (value, nabla + B(value, ·))`
/// of a seed.
pub fn seed_to_lift(conn: &ConnectionField, seed: &KillingSeed) -> Result<(Frame, FrameTangent)> {
    let (c, x) = (seed.at.chart, &seed.at.coords);
    let w = &seed.nabla + conn.bilinear(c, x)?.with_first(&seed.value);
    Ok((Frame::identity_at(&seed.at), FrameTangent::new(seed.value.clone(), w)))
}

/// Pushes a frame tangent through the tangent map of the path.
pub fn transport_lift(
    conn: &ConnectionField,
    frame: &Frame,
    ft: &FrameTangent,
    path: &HorizontalPath,
    cfg: &IntegratorConfig,
) -> Result<(Frame, FrameTangent)> {
    let n = frame.x.len();
    let mut frame = frame.clone();
    let mut ft = ft.clone();
    for step in &path.steps {
        match step {
            PathStep::Flow { lambda, duration } => {
                let h = StandardHorizontal::new(conn, lambda.clone());
                let block = Matrix::from_column_slice(n + n * n, 1, ft.to_vector().as_slice());
                let (s, w) = flows::variational_flow_state(&h, &frame.to_state(), &block, *duration, cfg)?;
                frame = Frame::from_state(&s, n);
                ft = FrameTangent::from_vector(&w.column(0).into_owned(), n);
            }
            PathStep::Act(g) => {
                frame = rho(&frame, g)?;
                ft = FrameTangent::new(ft.v, ft.w * g);
            }
        }
    }
    Ok((frame, ft))
}

/// Value at the end of `path` of the Killing field determined by `seed`.
pub fn extend_killing(conn: &ConnectionField, seed: &KillingSeed, path: &HorizontalPath, cfg: &IntegratorConfig) -> Result<Tangent> {
    if let Some(start) = &path.start {
        if start.chart != seed.at.chart {
            return Err(GeomError::SeedChartMismatch { seed: seed.at.chart, path: start.chart });
        }
        if (&start.coords - &seed.at.coords).norm() > 1e-12 {
            return Err(GeomError::BasePointMismatch);
        }
    }
    let (frame, ft) = seed_to_lift(conn, seed)?;
    let (end, lifted) = transport_lift(conn, &frame, &ft, path, cfg)?;
    Ok(Tangent::new(end.base(), lifted.v))
}

/// Numerical rank of seeds flattened into `E × gl(E)`.
pub fn gram_rank(seeds: &[KillingSeed]) -> Result<usize> {
    let Some(first) = seeds.first() else { return Ok(0) };
    if seeds.iter().any(|s| s.at.chart != first.at.chart || (&s.at.coords - &first.at.coords).norm() > 1e-12) {
        return Err(GeomError::BasePointMismatch);
    }
    let cols: Vec<DVector<f64>> = seeds.iter().map(KillingSeed::to_vector).collect();
    let sv = Matrix::from_columns(&cols).svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count())
}

/// Natural lift of a field evaluated at a frame, as a state vector.
pub fn lift_at(field: &VectorFieldSpec, frame: &Frame) -> Result<FrameTangent> {
    let v = NaturalLift::new(field).eval(frame.chart, &frame.to_state().state)?;
    Ok(FrameTangent::from_vector(&v, frame.x.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn v(xs: &[f64]) -> Coords {
        Coords::from_row_slice(xs)
    }

    #[test]
    fn quadratic_residual_by_hand() {
        let m = catalog::flat_plane();
        let conn = m.connection("flat").unwrap();
        let q = m.field("quadratic").unwrap();
        let p = Point::new(ChartId(0), v(&[0.3, -0.1]));
        let r = killing_residual(conn, q, &p, &v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((r - v(&[2.0, 0.0])).norm() < 1e-12);
        let a = m.field("affine").unwrap();
        assert!(killing_residual_max(conn, a, &p).unwrap() < 1e-12);
    }

    #[test]
    fn affine_seed_on_flat_plane() {
        let m = catalog::flat_plane();
        let conn = m.connection("flat").unwrap();
        let a = m.field("affine").unwrap();
        let origin = Point::new(ChartId(0), v(&[0.0, 0.0]));
        let seed = ev_embedding(conn, a, &origin).unwrap();
        assert_eq!(seed.value, v(&[0.1, -0.4]));
        assert_eq!(seed.nabla, Matrix::from_row_slice(2, 2, &[0.3, -1.0, 0.5, 0.2]));
    }

    #[test]
    fn flat_extension_matches_affine_field() {
        let m = catalog::flat_plane();
        let conn = m.connection("flat").unwrap();
        let a = m.field("affine").unwrap();
        let origin = Point::new(ChartId(0), v(&[0.0, 0.0]));
        let seed = ev_embedding(conn, a, &origin).unwrap();
        let lambda = v(&[0.7, -0.4]);
        let path = HorizontalPath::starting_at(origin).flow(lambda.clone(), 1.5);
        let out = extend_killing(conn, &seed, &path, &IntegratorConfig::default()).unwrap();
        let end = &lambda * 1.5;
        assert!((out.base.coords - &end).norm() < 1e-12);
        assert!((out.vec - a.value(ChartId(0), &end).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn seed_chart_must_match_path() {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let seed = KillingSeed::zero(Point::new(ChartId(0), v(&[1.0, 0.0])));
        let path = HorizontalPath::starting_at(Point::new(ChartId(1), v(&[1.0, 0.0])));
        assert_eq!(
            extend_killing(conn, &seed, &path, &IntegratorConfig::default()).unwrap_err(),
            GeomError::SeedChartMismatch { seed: ChartId(0), path: ChartId(1) }
        );
    }

    #[test]
    fn rank_of_single_and_duplicated_seeds() {
        let p = Point::new(ChartId(0), v(&[0.0, 0.0]));
        let mut s = KillingSeed::zero(p.clone());
        s.value = v(&[1.0, 0.0]);
        assert_eq!(gram_rank(&[s.clone()]).unwrap(), 1);
        assert_eq!(gram_rank(&[s.clone(), s.clone()]).unwrap(), 1);
        let other = KillingSeed::zero(Point::new(ChartId(0), v(&[1.0, 0.0])));
        assert_eq!(gram_rank(&[s, other]).unwrap_err(), GeomError::BasePointMismatch);
    }
}
