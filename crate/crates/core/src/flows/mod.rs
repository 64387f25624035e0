//! Flows of chart-expressed vector fields: fixed-step RK4 with chart
//! hand-off, variational (tangent) flows, and the defects used to test
//! commutation, Lie derivatives and parameter-dependent flows.

mod field;
mod integrator;

use nalgebra::DVector;

pub use field::{
    rechart_state, rechart_state_tangents, ChartField, ChartState, FieldFn, FieldHessianFn, FieldJacobianFn, Layout,
    VectorField, VectorFieldSpec,
};
pub use integrator::IntegratorConfig;
pub(crate) use integrator::drive;

use crate::atlas::{Atlas, Point};
use crate::error::{GeomError, Result};
use crate::linalg::{self, Coords, Matrix};

/// `Fl^ξ_t(start)` for any layout field.
pub fn flow(field: &dyn VectorField, start: &ChartState, t: f64, cfg: &IntegratorConfig) -> Result<ChartState> {
    drive(field, start, None, t, cfg, &mut |_, _, _| true).into_result().map(|(s, _)| s)
}

/// `Fl^ξ_t(start)` for a field on the manifold.
pub fn integrate(field: &VectorFieldSpec, start: &Point, t: f64, cfg: &IntegratorConfig) -> Result<Point> {
    field.atlas().point(start.chart, start.coords.clone())?;
    let end = flow(field, &ChartState::from_point(start), t, cfg)?;
    Ok(Point::new(end.chart, end.state))
}

/// Every RK4 node of `Fl^ξ_s(start)` for `s` between 0 and `t`.
pub fn trajectory(
    field: &dyn VectorField,
    start: &ChartState,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, ChartState)>> {
    let mut out = Vec::new();
    let outcome = drive(field, start, None, t, cfg, &mut |s, st, _| {
        out.push((s, st.clone()));
        true
    });
    outcome.into_result()?;
    Ok(out)
}

/// Joint flow of a state and a block of tangent vectors (one per column).
/// Tangents are re-charted with the derivative of the state transition.
pub fn variational_flow_state(
    field: &dyn VectorField,
    start: &ChartState,
    tangents: &Matrix,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(ChartState, Matrix)> {
    let (s, w) = drive(field, start, Some(tangents), t, cfg, &mut |_, _, _| true).into_result()?;
    Ok((s, w.expect("tangents were requested")))
}

/// `(Fl^ξ_t(start), T Fl^ξ_t(w0))` in end-chart coordinates.
pub fn variational_flow(
    field: &VectorFieldSpec,
    start: &Point,
    w0: &Coords,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(Point, Coords)> {
    field.atlas().check_dim(w0.len())?;
    let block = Matrix::from_column_slice(w0.len(), 1, w0.as_slice());
    let (s, w) = variational_flow_state(field, &ChartState::from_point(start), &block, t, cfg)?;
    Ok((Point::new(s.chart, s.state), w.column(0).into_owned()))
}

/// Distance between two layout states after moving `b` into `a`'s chart
/// (or the other way round).
pub fn state_distance(atlas: &Atlas, layout: Layout, a: &ChartState, b: &ChartState) -> Result<f64> {
    if let Ok(bb) = rechart_state(atlas, layout, b.chart, a.chart, &b.state) {
        return Ok((&a.state - bb).norm());
    }
    if let Ok(aa) = rechart_state(atlas, layout, a.chart, b.chart, &a.state) {
        return Ok((aa - &b.state).norm());
    }
    Err(GeomError::NoCommonChart)
}

/// Distance in a common chart between `Fl^ξ_s(Fl^η_t(x))` and
/// `Fl^η_t(Fl^ξ_s(x))`.
pub fn commutation_defect(
    xi: &dyn VectorField,
    eta: &dyn VectorField,
    start: &ChartState,
    s: f64,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let a = flow(xi, &flow(eta, start, t, cfg)?, s, cfg)?;
    let b = flow(eta, &flow(xi, start, s, cfg)?, t, cfg)?;
    state_distance(xi.atlas(), xi.layout(), &a, &b)
}

/// Default time for the Lie-derivative difference quotient.
pub const LIE_DERIVATIVE_T: f64 = 1e-4;

/// `(η(x) − (Fl^ξ_t)_*η(x)) / t`, which tends to `[ξ, η](x)` as `t → 0`.
/// Returned in the chart of `at`.
pub fn lie_derivative(
    field: &dyn VectorField,
    other: &dyn VectorField,
    at: &ChartState,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<DVector<f64>> {
    let atlas = field.atlas();
    let layout = field.layout();
    let back = flow(field, at, -t, cfg)?;
    let w0 = other.eval(back.chart, &back.state)?;
    let block = Matrix::from_column_slice(w0.len(), 1, w0.as_slice());
    let (end, pushed) = variational_flow_state(field, &back, &block, t, cfg)?;
    let pushed = rechart_state_tangents(atlas, layout, end.chart, at.chart, &end.state, &pushed)?;
    Ok((other.eval(at.chart, &at.state)? - pushed.column(0)) / t)
}

/// `‖(Fl^ξ_t)_*η − η‖(x) / t` at `t = LIE_DERIVATIVE_T`.
pub fn lie_derivative_defect(
    field: &dyn VectorField,
    other: &dyn VectorField,
    at: &ChartState,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    Ok(lie_derivative(field, other, at, LIE_DERIVATIVE_T, cfg)?.norm())
}

/// A family of fields `v ↦ η_v`, linear in `v ∈ R^k`.
pub trait ParameterFamily: Send + Sync {
    fn params(&self) -> usize;

    fn field(&self, v: &DVector<f64>) -> Box<dyn VectorField + '_>;

    /// Columns `η_{e_i}(p)`.
    fn values(&self, p: &ChartState) -> Result<Matrix> {
        let k = self.params();
        let mut cols = Vec::with_capacity(k);
        for i in 0..k {
            let e = DVector::from_fn(k, |j, _| if i == j { 1.0 } else { 0.0 });
            cols.push(self.field(&e).eval(p.chart, &p.state)?);
        }
        Ok(Matrix::from_columns(&cols))
    }
}

/// Operator 2-norm between the central-difference Jacobian of
/// `v ↦ Fl^{η_v}_1(p)` at `v = 0` and `v ↦ η_v(p)`.
pub fn parameter_flow_derivative_defect(
    family: &dyn ParameterFamily,
    p: &ChartState,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let k = family.params();
    let zero = DVector::zeros(k);
    let h = linalg::first_step(&zero);
    let probe = family.field(&zero);
    let atlas = probe.atlas().clone();
    let layout = probe.layout();
    drop(probe);
    let jac = linalg::fd_jacobian(&zero, h, |v| {
        let end = flow(family.field(v).as_ref(), p, 1.0, cfg)?;
        rechart_state(&atlas, layout, end.chart, p.chart, &end.state)
    })?;
    let diff = jac - family.values(p)?;
    Ok(diff.svd(false, false).singular_values.max())
}
