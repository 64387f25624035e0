use std::sync::Arc;

use nalgebra::DVector;

use crate::atlas::{Atlas, ChartId, Point, Tangent};
use crate::error::{GeomError, Result};
use crate::linalg::{self, Bilinear, Coords, Matrix};

/// Shape of a state living over a chart: base coordinates `x ∈ R^n`
/// followed by an `n × cols` matrix `G` stored column-major.
///
/// `cols = 0` is the manifold itself, `cols = 1` its tangent bundle and
/// `cols = n` the frame bundle. Under a transition `h` the state maps to
/// `(h(x), dh(x)·G)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub cols: usize,
}

impl Layout {
    pub fn base(n: usize) -> Self {
        Self { n, cols: 0 }
    }

    pub fn tangent(n: usize) -> Self {
        Self { n, cols: 1 }
    }

    pub fn frame(n: usize) -> Self {
        Self { n, cols: n }
    }

    pub fn dim(&self) -> usize {
        self.n * (1 + self.cols)
    }

    pub fn position(&self, state: &DVector<f64>) -> Coords {
        state.rows(0, self.n).into_owned()
    }

    pub fn fiber(&self, state: &DVector<f64>) -> Matrix {
        Matrix::from_column_slice(self.n, self.cols, &state.as_slice()[self.n..])
    }

    pub fn pack(&self, x: &Coords, g: &Matrix) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        out.rows_mut(0, self.n).copy_from(x);
        out.as_mut_slice()[self.n..].copy_from_slice(g.as_slice());
        out
    }
}

/// A state of some [`Layout`] expressed in one chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartState {
    pub chart: ChartId,
    pub state: DVector<f64>,
}

impl ChartState {
    pub fn new(chart: ChartId, state: DVector<f64>) -> Self {
        Self { chart, state }
    }

    pub fn from_point(p: &Point) -> Self {
        Self::new(p.chart, p.coords.clone())
    }

    pub fn from_tangent(t: &Tangent) -> Self {
        let layout = Layout::tangent(t.vec.len());
        Self::new(t.base.chart, layout.pack(&t.base.coords, &Matrix::from_column_slice(t.vec.len(), 1, t.vec.as_slice())))
    }

    pub fn point(&self, n: usize) -> Point {
        Point::new(self.chart, self.state.rows(0, n).into_owned())
    }
}

/// Re-expresses a layout state in another chart.
pub fn rechart_state(
    atlas: &Atlas,
    layout: Layout,
    from: ChartId,
    to: ChartId,
    state: &DVector<f64>,
) -> Result<DVector<f64>> {
    let x = layout.position(state);
    let y = atlas.map_coords(from, to, &x)?;
    if layout.cols == 0 {
        return Ok(y);
    }
    let dh = atlas.jacobian_coords(from, to, &x)?;
    Ok(layout.pack(&y, &(dh * layout.fiber(state))))
}

/// Pushes a tangent vector at a layout state through the derivative of the
/// state transition: `(δx, δG) ↦ (dh δx, d²h(δx, G·) + dh δG)`.
pub fn rechart_state_tangents(
    atlas: &Atlas,
    layout: Layout,
    from: ChartId,
    to: ChartId,
    state: &DVector<f64>,
    tangents: &Matrix,
) -> Result<Matrix> {
    if from == to {
        return Ok(tangents.clone());
    }
    let x = layout.position(state);
    let dh = atlas.jacobian_coords(from, to, &x)?;
    let d2h = if layout.cols > 0 { Some(atlas.hessian_coords(from, to, &x)?) } else { None };
    let g = layout.fiber(state);
    let mut out = Matrix::zeros(tangents.nrows(), tangents.ncols());
    for c in 0..tangents.ncols() {
        let col = tangents.column(c).into_owned();
        let dx = layout.position(&col);
        let mut top = out.column_mut(c);
        top.rows_mut(0, layout.n).copy_from(&(&dh * &dx));
        if let Some(d2h) = &d2h {
            let dg = layout.fiber(&col);
            let moved = d2h.with_first(&dx) * &g + &dh * dg;
            top.rows_mut(layout.n, layout.n * layout.cols).copy_from_slice(moved.as_slice());
        }
    }
    Ok(out)
}

/// A vector field on some layout space, evaluated chart by chart.
pub trait VectorField: Send + Sync {
    fn name(&self) -> &str;

    fn atlas(&self) -> &Arc<Atlas>;

    fn layout(&self) -> Layout;

    fn eval(&self, chart: ChartId, state: &DVector<f64>) -> Result<DVector<f64>>;

    /// Derivative of the chart representation; central differences unless
    /// the field overrides it.
    fn jacobian(&self, chart: ChartId, state: &DVector<f64>) -> Result<Matrix> {
        let layout = self.layout();
        let atlas = self.atlas();
        let h = linalg::first_step(&layout.position(state));
        linalg::fd_jacobian(state, h, |s| {
            if !atlas.contains(chart, &layout.position(s), 0.0) {
                return Err(GeomError::StencilLeavesDomain(chart));
            }
            self.eval(chart, s)
        })
    }
}

pub type FieldFn = Arc<dyn Fn(&Coords) -> Coords + Send + Sync>;
pub type FieldJacobianFn = Arc<dyn Fn(&Coords) -> Matrix + Send + Sync>;
pub type FieldHessianFn = Arc<dyn Fn(&Coords) -> Bilinear + Send + Sync>;

/// Chart representation `ξ^φ` of a vector field with optional analytic
/// first and second derivatives.
#[derive(Clone)]
pub struct ChartField {
    value: FieldFn,
    jacobian: Option<FieldJacobianFn>,
    hessian: Option<FieldHessianFn>,
}

impl ChartField {
    pub fn new(value: impl Fn(&Coords) -> Coords + Send + Sync + 'static) -> Self {
        Self { value: Arc::new(value), jacobian: None, hessian: None }
    }

    pub fn with_jacobian(mut self, f: impl Fn(&Coords) -> Matrix + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(f));
        self
    }

    pub fn with_hessian(mut self, f: impl Fn(&Coords) -> Bilinear + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(f));
        self
    }

    pub fn without_derivatives(mut self) -> Self {
        self.jacobian = None;
        self.hessian = None;
        self
    }

    /// `ξ(x) = A x + b`, exact derivatives included.
    pub fn affine(a: Matrix, b: Coords) -> Self {
        let n = b.len();
        let a2 = a.clone();
        Self::new(move |x| &a * x + &b)
            .with_jacobian(move |_| a2.clone())
            .with_hessian(move |_| Bilinear::zeros(n))
    }
}

/// A vector field on the manifold given chart by chart.
#[derive(Clone)]
pub struct VectorFieldSpec {
    name: String,
    atlas: Arc<Atlas>,
    charts: Vec<Option<ChartField>>,
}

impl std::fmt::Debug for VectorFieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorFieldSpec").field("name", &self.name).finish_non_exhaustive()
    }
}

impl VectorFieldSpec {
    pub fn new(name: &str, atlas: Arc<Atlas>) -> Self {
        let charts = vec![None; atlas.charts().len()];
        Self { name: name.to_string(), atlas, charts }
    }

    pub fn with_chart(mut self, chart: ChartId, field: ChartField) -> Self {
        self.charts[chart.0] = Some(field);
        self
    }

    /// The same field on every chart (meaningful when all transitions are
    /// translations, or for the zero field).
    pub fn uniform(name: &str, atlas: Arc<Atlas>, field: ChartField) -> Self {
        let charts = vec![Some(field); atlas.charts().len()];
        Self { name: name.to_string(), atlas, charts }
    }

    pub fn zero(atlas: Arc<Atlas>) -> Self {
        let n = atlas.dim();
        Self::uniform("zero", atlas, ChartField::affine(Matrix::zeros(n, n), Coords::zeros(n)))
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn atlas(&self) -> &Arc<Atlas> {
        &self.atlas
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart_field(&self, chart: ChartId) -> Result<&ChartField> {
        self.charts.get(chart.0).and_then(|c| c.as_ref()).ok_or(GeomError::ChartMissing(chart))
    }

    pub fn has_analytic_hessian(&self, chart: ChartId) -> bool {
        self.chart_field(chart).is_ok_and(|c| c.hessian.is_some())
    }

    pub fn value(&self, chart: ChartId, x: &Coords) -> Result<Coords> {
        Ok((self.chart_field(chart)?.value)(x))
    }

    pub fn at(&self, p: &Point) -> Result<Tangent> {
        Ok(Tangent::new(p.clone(), self.value(p.chart, &p.coords)?))
    }

    fn guarded_value(&self, chart: ChartId, y: &Coords) -> Result<Coords> {
        if !self.atlas.contains(chart, y, 0.0) {
            return Err(GeomError::StencilLeavesDomain(chart));
        }
        self.value(chart, y)
    }

    pub fn jacobian_at(&self, chart: ChartId, x: &Coords) -> Result<Matrix> {
        let cf = self.chart_field(chart)?;
        if let Some(j) = &cf.jacobian {
            return Ok(j(x));
        }
        linalg::fd_jacobian(x, linalg::first_step(x), |y| self.guarded_value(chart, y))
    }

    /// `d²ξ^φ(x)`: analytic, else central differences of the analytic
    /// Jacobian, else nested central differences with the second-order step.
    pub fn hessian_at(&self, chart: ChartId, x: &Coords) -> Result<Bilinear> {
        let cf = self.chart_field(chart)?;
        if let Some(h) = &cf.hessian {
            return Ok(h(x));
        }
        if let Some(j) = &cf.jacobian {
            return linalg::fd_hessian_from_jacobian(x, linalg::first_step(x), |y| {
                if !self.atlas.contains(chart, y, 0.0) {
                    return Err(GeomError::StencilLeavesDomain(chart));
                }
                Ok(j(y))
            });
        }
        linalg::fd_hessian(x, linalg::second_step(x), |y| self.guarded_value(chart, y))
    }

    /// `Σ cᵢ ξᵢ`; analytic derivatives survive when every term has them.
    pub fn linear_combination(name: &str, terms: &[(f64, &VectorFieldSpec)]) -> Self {
        let atlas = terms.first().expect("at least one term").1.atlas.clone();
        let mut out = Self::new(name, atlas.clone());
        for c in atlas.chart_ids() {
            let parts: Option<Vec<(f64, ChartField)>> =
                terms.iter().map(|(k, f)| f.chart_field(c).ok().map(|cf| (*k, cf.clone()))).collect();
            let Some(parts) = parts else { continue };
            let parts = Arc::new(parts);
            let p = parts.clone();
            let mut cf = ChartField::new(move |x| {
                p.iter().fold(Coords::zeros(x.len()), |acc, (k, f)| acc + (f.value)(x) * *k)
            });
            if parts.iter().all(|(_, f)| f.jacobian.is_some()) {
                let p = parts.clone();
                cf = cf.with_jacobian(move |x| {
                    p.iter().fold(Matrix::zeros(x.len(), x.len()), |acc, (k, f)| {
                        acc + (f.jacobian.as_ref().unwrap())(x) * *k
                    })
                });
            }
            if parts.iter().all(|(_, f)| f.hessian.is_some()) {
                let p = parts.clone();
                cf = cf.with_hessian(move |x| {
                    p.iter().fold(Bilinear::zeros(x.len()), |acc, (k, f)| {
                        acc + (f.hessian.as_ref().unwrap())(x) * *k
                    })
                });
            }
            out = out.with_chart(c, cf);
        }
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::linear_combination(&self.name, &[(k, self)])
    }

    /// Copy that ignores analytic derivatives, for cross-checking finite
    /// differences against closed forms.
    pub fn without_derivatives(&self) -> Self {
        let mut out = self.clone();
        out.charts = out.charts.into_iter().map(|c| c.map(ChartField::without_derivatives)).collect();
        out
    }

    /// `‖dh(x) ξ^{φ₁}(x) − ξ^{φ₂}(h(x))‖` at an overlap point.
    pub fn well_definedness_residual(&self, p: &Point, target: ChartId) -> Result<f64> {
        let pushed = self.atlas.recharter_tangent(&self.at(p)?, target)?;
        Ok((pushed.vec - self.value(target, &pushed.base.coords)?).norm())
    }
}

impl VectorField for VectorFieldSpec {
    fn name(&self) -> &str {
        &self.name
    }

    fn atlas(&self) -> &Arc<Atlas> {
        &self.atlas
    }

    fn layout(&self) -> Layout {
        Layout::base(self.atlas.dim())
    }

    fn eval(&self, chart: ChartId, state: &DVector<f64>) -> Result<DVector<f64>> {
        self.value(chart, state)
    }

    fn jacobian(&self, chart: ChartId, state: &DVector<f64>) -> Result<Matrix> {
        self.jacobian_at(chart, state)
    }
}
