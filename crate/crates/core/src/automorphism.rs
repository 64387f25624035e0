//! Represented diffeomorphisms (closed-form chart maps and words of flow
//! segments), their frame lifts, and the checks that make them affine
//! automorphisms: the affine-map equation, `κ`-pullback, and `f ∘ exp = exp ∘ Tf`.

use std::sync::Arc;

use crate::atlas::{Atlas, ChartId, Point, Tangent, DEFAULT_MARGIN};
use crate::connection::ConnectionField;
use crate::error::{GeomError, Result};
use crate::flows::{self, ChartState, IntegratorConfig, VectorFieldSpec};
use crate::frame_bundle::{kappa, Frame, FrameTangent};
use crate::geodesics;
use crate::killing::{self, NaturalLift};
use crate::linalg::{self, Bilinear, Coords, Matrix};

/// A map written chart to chart.
pub trait ChartMap: Send + Sync {
    fn name(&self) -> &str;

    fn atlas(&self) -> &Arc<Atlas>;

    /// Image of `x ∈ chart from`, expressed in chart `to`.
    fn map(&self, from: ChartId, to: ChartId, x: &Coords) -> Result<Coords>;

    fn jacobian(&self, _from: ChartId, _to: ChartId, _x: &Coords) -> Option<Result<Matrix>> {
        None
    }

    fn hessian(&self, _from: ChartId, _to: ChartId, _x: &Coords) -> Option<Result<Bilinear>> {
        None
    }

    fn inverse(&self) -> Option<Arc<dyn ChartMap>> {
        None
    }
}

/// A (local) diffeomorphism of the manifold.
#[derive(Clone)]
pub enum Diffeo {
    ClosedForm(Arc<dyn ChartMap>),
    /// Flow segments applied in list order: `[(ξ, s), (η, t)]` is
    /// `Fl^η_t ∘ Fl^ξ_s`.
    FlowWord(Vec<(VectorFieldSpec, f64)>),
    /// Maps applied in list order.
    Composite(Vec<Diffeo>),
}

impl std::fmt::Debug for Diffeo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diffeo::ClosedForm(m) => write!(f, "ClosedForm({})", m.name()),
            Diffeo::FlowWord(w) => {
                f.debug_list().entries(w.iter().map(|(field, t)| format!("{}:{t}", field.name()))).finish()
            }
            Diffeo::Composite(parts) => f.debug_tuple("Composite").field(parts).finish(),
        }
    }
}

impl Diffeo {
    pub fn identity() -> Self {
        Diffeo::FlowWord(Vec::new())
    }

    pub fn closed_form(map: impl ChartMap + 'static) -> Self {
        Diffeo::ClosedForm(Arc::new(map))
    }

    /// `self ∘ other`: `other` is applied first.
    pub fn compose(&self, other: &Diffeo) -> Diffeo {
        Diffeo::Composite(vec![other.clone(), self.clone()])
    }

    pub fn inverse(&self) -> Result<Diffeo> {
        match self {
            Diffeo::ClosedForm(m) => m.inverse().map(Diffeo::ClosedForm).ok_or(GeomError::NoInverse),
            Diffeo::FlowWord(w) => Ok(Diffeo::FlowWord(w.iter().rev().map(|(f, t)| (f.clone(), -t)).collect())),
            Diffeo::Composite(parts) => Ok(Diffeo::Composite(parts.iter().rev().map(Diffeo::inverse).collect::<Result<_>>()?)),
        }
    }

    /// `f(p)`; closed-form images stay in `p`'s chart when they fit inside
    /// its safety margin, else go to the highest-priority chart that holds them.
    pub fn apply(&self, p: &Point, cfg: &IntegratorConfig) -> Result<Point> {
        match self {
            Diffeo::ClosedForm(m) => {
                let to = closed_form_target(m.as_ref(), p)?;
                Ok(Point::new(to, m.map(p.chart, to, &p.coords)?))
            }
            Diffeo::FlowWord(w) => {
                let mut q = p.clone();
                for (field, t) in w {
                    q = flows::integrate(field, &q, *t, cfg)?;
                }
                Ok(q)
            }
            Diffeo::Composite(parts) => {
                let mut q = p.clone();
                for d in parts {
                    q = d.apply(&q, cfg)?;
                }
                Ok(q)
            }
        }
    }

    /// `(f(p), df(p))`, the Jacobian taken from `p`'s chart into the image chart.
    pub fn jacobian(&self, p: &Point, cfg: &IntegratorConfig) -> Result<(Point, Matrix)> {
        let n = p.coords.len();
        match self {
            Diffeo::ClosedForm(m) => {
                let to = closed_form_target(m.as_ref(), p)?;
                let y = m.map(p.chart, to, &p.coords)?;
                let j = match m.jacobian(p.chart, to, &p.coords) {
                    Some(j) => j?,
                    None => linalg::fd_jacobian(&p.coords, linalg::first_step(&p.coords), |x| {
                        stencil_guard(m.atlas(), p.chart, x)?;
                        m.map(p.chart, to, x)
                    })?,
                };
                Ok((Point::new(to, y), j))
            }
            Diffeo::FlowWord(w) => {
                let mut s = ChartState::from_point(p);
                let mut j = Matrix::identity(n, n);
                for (field, t) in w {
                    (s, j) = flows::variational_flow_state(field, &s, &j, *t, cfg)?;
                }
                Ok((Point::new(s.chart, s.state), j))
            }
            Diffeo::Composite(parts) => {
                let mut q = p.clone();
                let mut j = Matrix::identity(n, n);
                for d in parts {
                    let (q2, j2) = d.jacobian(&q, cfg)?;
                    q = q2;
                    j = j2 * j;
                }
                Ok((q, j))
            }
        }
    }

    /// `df(p)` from chart `from` into chart `to`.
    fn jacobian_between(&self, from: ChartId, to: ChartId, x: &Coords, cfg: &IntegratorConfig) -> Result<Matrix> {
        let (img, j) = self.jacobian(&Point::new(from, x.clone()), cfg)?;
        if img.chart == to {
            return Ok(j);
        }
        Ok(atlas_of(self)?.jacobian_coords(img.chart, to, &img.coords)? * j)
    }

    /// `(f(p), df(p), d²f(p))` into the image chart. Closed forms use their
    /// analytic second derivative when present; otherwise the Jacobian is
    /// differentiated by central differences.
    pub fn hessian(&self, p: &Point, cfg: &IntegratorConfig) -> Result<(Point, Matrix, Bilinear)> {
        let (img, j) = self.jacobian(p, cfg)?;
        if matches!(self, Diffeo::FlowWord(w) if w.is_empty()) {
            return Ok((img, j, Bilinear::zeros(p.coords.len())));
        }
        if let Diffeo::ClosedForm(m) = self {
            if let Some(h) = m.hessian(p.chart, img.chart, &p.coords) {
                return Ok((img, j, h?));
            }
        }
        let atlas = atlas_of(self)?;
        let h = linalg::fd_hessian_from_jacobian(&p.coords, linalg::first_step(&p.coords), |x| {
            stencil_guard(&atlas, p.chart, x)?;
            self.jacobian_between(p.chart, img.chart, x, cfg)
        })?;
        Ok((img, j, h))
    }

    pub fn tangent_map(&self, t: &Tangent, cfg: &IntegratorConfig) -> Result<Tangent> {
        let (img, j) = self.jacobian(&t.base, cfg)?;
        Ok(Tangent::new(img, j * &t.vec))
    }
}

fn atlas_of(d: &Diffeo) -> Result<Arc<Atlas>> {
    match d {
        Diffeo::ClosedForm(m) => Ok(m.atlas().clone()),
        Diffeo::FlowWord(w) => w.first().map(|(f, _)| f.atlas().clone()).ok_or(GeomError::NoCommonChart),
        Diffeo::Composite(parts) => parts.iter().find_map(|p| atlas_of(p).ok()).ok_or(GeomError::NoCommonChart),
    }
}

fn stencil_guard(atlas: &Atlas, chart: ChartId, x: &Coords) -> Result<()> {
    if atlas.contains(chart, x, 0.0) {
        Ok(())
    } else {
        Err(GeomError::StencilLeavesDomain(chart))
    }
}

fn closed_form_target(m: &dyn ChartMap, p: &Point) -> Result<ChartId> {
    let atlas = m.atlas();
    let fits = |c: ChartId, margin: f64| m.map(p.chart, c, &p.coords).is_ok_and(|y| atlas.contains(c, &y, margin));
    if fits(p.chart, DEFAULT_MARGIN) {
        return Ok(p.chart);
    }
    let mut order: Vec<ChartId> = atlas.chart_ids().collect();
    order.sort_by_key(|c| (atlas.charts()[c.0].priority, c.0));
    for margin in [DEFAULT_MARGIN, 0.0] {
        if let Some(&c) = order.iter().find(|&&c| fits(c, margin)) {
            return Ok(c);
        }
    }
    Err(GeomError::OutsideChart(p.chart))
}

/// `Fr(f)(x, g) = (f(x), df(x) g)`.
#[derive(Clone, Debug)]
pub struct FrameDiffeo {
    pub base: Diffeo,
}

pub fn frame_lift(f: &Diffeo) -> FrameDiffeo {
    FrameDiffeo { base: f.clone() }
}

impl FrameDiffeo {
    pub fn apply(&self, frame: &Frame, cfg: &IntegratorConfig) -> Result<Frame> {
        Ok(self.tangent(frame, &FrameTangent::zero(frame.x.len()), cfg)?.0)
    }

    /// `(Fr(f)(p), T Fr(f)(v, w))`. Flow words push the tangent through the
    /// variational flow of the natural lifts; closed forms use
    /// `(v, w) ↦ (df v, d²f(v, g·) + df w)`.
    pub fn tangent(&self, frame: &Frame, ft: &FrameTangent, cfg: &IntegratorConfig) -> Result<(Frame, FrameTangent)> {
        let n = frame.x.len();
        match &self.base {
            Diffeo::ClosedForm(_) => {
                let (img, j, h) = self.base.hessian(&frame.base(), cfg)?;
                let out = Frame::new(img.chart, img.coords, &j * &frame.g)?;
                let w = h.with_first(&ft.v) * &frame.g + &j * &ft.w;
                Ok((out, FrameTangent::new(&j * &ft.v, w)))
            }
            Diffeo::FlowWord(word) => {
                let mut s = frame.to_state();
                let mut block = Matrix::from_column_slice(n + n * n, 1, ft.to_vector().as_slice());
                for (field, t) in word {
                    (s, block) = flows::variational_flow_state(&NaturalLift::new(field), &s, &block, *t, cfg)?;
                }
                Ok((Frame::from_state(&s, n), FrameTangent::from_vector(&block.column(0).into_owned(), n)))
            }
            Diffeo::Composite(parts) => {
                let mut cur = (frame.clone(), ft.clone());
                for d in parts {
                    cur = frame_lift(d).tangent(&cur.0, &cur.1, cfg)?;
                }
                Ok(cur)
            }
        }
    }
}

/// `d²f(v, w) + df B¹_x(v, w) − B²_{f(x)}(df v, df w)`.
pub fn affine_residual(
    f: &Diffeo,
    conn1: &ConnectionField,
    conn2: &ConnectionField,
    point: &Point,
    v: &Coords,
    w: &Coords,
    cfg: &IntegratorConfig,
) -> Result<Coords> {
    let (img, j, h) = f.hessian(point, cfg)?;
    let lhs = h.apply(v, w) + &j * conn1.bilinear(point.chart, &point.coords)?.apply(v, w);
    let rhs = conn2.bilinear(img.chart, &img.coords)?.apply(&(&j * v), &(&j * w));
    Ok(lhs - rhs)
}

/// Largest affine residual over coordinate basis pairs.
pub fn affine_residual_max(
    f: &Diffeo,
    conn1: &ConnectionField,
    conn2: &ConnectionField,
    point: &Point,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let (img, j, h) = f.hessian(point, cfg)?;
    let b1 = conn1.bilinear(point.chart, &point.coords)?;
    let b2 = conn2.bilinear(img.chart, &img.coords)?;
    let r = h + b1.pushed(&j) - b2.pulled(&j, &j);
    let n = point.coords.len();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            worst = worst.max(Coords::from_fn(n, |k, _| r.get(k, a, b)).norm());
        }
    }
    Ok(worst)
}

/// Default tolerance on the Killing residual accepted by [`exp_aut`].
pub const TOL_KILL: f64 = 1e-6;

/// `exp(ξ) = Fl^ξ_{−1}`, after checking that `ξ` is an infinitesimal affine
/// automorphism at every sample and that the flow reaches time 1 from each.
pub fn exp_aut(
    conn: &ConnectionField,
    field: &VectorFieldSpec,
    samples: &[Point],
    tol_kill: f64,
    cfg: &IntegratorConfig,
) -> Result<Diffeo> {
    let mut worst: f64 = 0.0;
    for p in samples {
        worst = worst.max(killing::killing_residual_max(conn, field, p)?);
    }
    if !(worst <= tol_kill) {
        return Err(GeomError::NotKilling { residual: worst });
    }
    for p in samples {
        flows::integrate(field, p, -1.0, cfg)?;
    }
    Ok(Diffeo::FlowWord(vec![(field.clone(), -1.0)]))
}

/// `Fr(f)(p)`.
pub fn orbit_point(fd: &FrameDiffeo, p: &Frame, cfg: &IntegratorConfig) -> Result<Frame> {
    fd.apply(p, cfg)
}

/// Distance between two frames after moving the second into the first's chart.
pub fn frame_distance(atlas: &Atlas, a: &Frame, b: &Frame) -> Result<f64> {
    flows::state_distance(atlas, a.layout(), &a.to_state(), &b.to_state())
}

/// `‖θ_{F(p)}(TF ft) − θ_p(ft)‖ + ‖ω_{F(p)}(TF ft) − ω_p(ft)‖`.
pub fn kappa_pullback_defect(
    conn: &ConnectionField,
    fd: &FrameDiffeo,
    frame: &Frame,
    ft: &FrameTangent,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let (img, tft) = fd.tangent(frame, ft, cfg)?;
    Ok(kappa(conn, &img, &tft)?.distance(&kappa(conn, frame, ft)?))
}

/// Distance between `f(exp v)` and `exp(Tf v)`.
pub fn exp_commutes_defect(conn: &ConnectionField, f: &Diffeo, v: &Tangent, cfg: &IntegratorConfig) -> Result<f64> {
    let lhs = f.apply(&geodesics::exp_map(conn, v, cfg)?, cfg)?;
    let rhs = geodesics::exp_map(conn, &f.tangent_map(v, cfg)?, cfg)?;
    conn.atlas().distance(&lhs, &rhs)
}
