//! Affine connections as per-chart bilinear fields `x ↦ B_x`, with the
//! covariant derivative, the connector and the change-of-variable check.

use std::sync::Arc;

use crate::atlas::{Atlas, ChartId, Point, Tangent};
use crate::error::{GeomError, Result};
use crate::flows::VectorFieldSpec;
use crate::linalg::{self, Bilinear, Coords};

pub type BilinearFn = Arc<dyn Fn(&Coords) -> Bilinear + Send + Sync>;
/// Partial derivatives `[∂_1 B, …, ∂_n B]` at a point.
pub type BilinearDerivativeFn = Arc<dyn Fn(&Coords) -> Vec<Bilinear> + Send + Sync>;

#[derive(Clone)]
pub struct ChartConnection {
    b: BilinearFn,
    db: Option<BilinearDerivativeFn>,
}

impl ChartConnection {
    pub fn new(b: impl Fn(&Coords) -> Bilinear + Send + Sync + 'static) -> Self {
        Self { b: Arc::new(b), db: None }
    }

    pub fn with_derivative(mut self, db: impl Fn(&Coords) -> Vec<Bilinear> + Send + Sync + 'static) -> Self {
        self.db = Some(Arc::new(db));
        self
    }

    pub fn zero(n: usize) -> Self {
        Self::new(move |_| Bilinear::zeros(n)).with_derivative(move |_| vec![Bilinear::zeros(n); n])
    }
}

#[derive(Clone)]
pub struct ConnectionField {
    name: String,
    atlas: Arc<Atlas>,
    charts: Vec<Option<ChartConnection>>,
    torsion_free: bool,
}

impl std::fmt::Debug for ConnectionField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConnectionField").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Chart form `(x, v, w, z)` of a point of `TTM`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderTangent {
    pub chart: ChartId,
    pub x: Coords,
    pub v: Coords,
    pub w: Coords,
    pub z: Coords,
}

impl ConnectionField {
    pub fn new(name: &str, atlas: Arc<Atlas>) -> Self {
        let charts = vec![None; atlas.charts().len()];
        Self { name: name.to_string(), atlas, charts, torsion_free: true }
    }

    /// `B ≡ 0` on every chart.
    pub fn flat(atlas: Arc<Atlas>) -> Self {
        let n = atlas.dim();
        let mut out = Self::new("flat", atlas);
        out.charts.iter_mut().for_each(|c| *c = Some(ChartConnection::zero(n)));
        out
    }

    pub fn with_chart(mut self, chart: ChartId, c: ChartConnection) -> Self {
        self.charts[chart.0] = Some(c);
        self
    }

    pub fn with_torsion_flag(mut self, torsion_free: bool) -> Self {
        self.torsion_free = torsion_free;
        self
    }

    /// Builds `B` from Christoffel symbols via `B_x(v, w) = −Γ_x(w, v)`,
    /// where `Γ(a, b)^k = Γ^k_ij a^i b^j`.
    pub fn from_christoffel(
        name: &str,
        atlas: Arc<Atlas>,
        gammas: Vec<(ChartId, Arc<dyn Fn(&Coords) -> Bilinear + Send + Sync>)>,
    ) -> Self {
        let mut out = Self::new(name, atlas);
        for (chart, gamma) in gammas {
            out.charts[chart.0] = Some(ChartConnection::new(move |x| gamma(x).swapped() * -1.0));
        }
        out
    }

    /// Copy whose derivative falls back to finite differences.
    pub fn without_derivatives(&self) -> Self {
        let mut out = self.clone();
        out.charts.iter_mut().flatten().for_each(|c| c.db = None);
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn atlas(&self) -> &Arc<Atlas> {
        &self.atlas
    }

    pub fn torsion_free(&self) -> bool {
        self.torsion_free
    }

    fn chart_data(&self, chart: ChartId) -> Result<&ChartConnection> {
        self.charts.get(chart.0).and_then(|c| c.as_ref()).ok_or(GeomError::ChartMissing(chart))
    }

    pub fn has_chart(&self, chart: ChartId) -> bool {
        self.chart_data(chart).is_ok()
    }

    /// `B^φ_x` as a bilinear map.
    pub fn bilinear(&self, chart: ChartId, x: &Coords) -> Result<Bilinear> {
        Ok((self.chart_data(chart)?.b)(x))
    }

    /// Partial derivatives `∂_i B^φ` at `x`; central differences with step
    /// `h₁` unless supplied analytically.
    pub fn derivative(&self, chart: ChartId, x: &Coords) -> Result<Vec<Bilinear>> {
        let data = self.chart_data(chart)?;
        if let Some(db) = &data.db {
            return Ok(db(x));
        }
        let h = linalg::first_step(x);
        (0..x.len())
            .map(|i| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                if !self.atlas.contains(chart, &xp, 0.0) || !self.atlas.contains(chart, &xm, 0.0) {
                    return Err(GeomError::StencilLeavesDomain(chart));
                }
                Ok(((data.b)(&xp) - (data.b)(&xm)) * (0.5 / h))
            })
            .collect()
    }

    /// `dB^φ(x)(z)`, the derivative of `x ↦ B_x` in direction `z`.
    pub fn derivative_along(&self, chart: ChartId, x: &Coords, z: &Coords) -> Result<Bilinear> {
        Ok(Bilinear::contract(&self.derivative(chart, x)?, z))
    }

    pub fn eval_b(&self, point: &Point, v: &Coords, w: &Coords) -> Result<Coords> {
        self.atlas.check_dim(v.len())?;
        self.atlas.check_dim(w.len())?;
        Ok(self.bilinear(point.chart, &point.coords)?.apply(v, w))
    }

    /// `∇_v η = dη(x) v − B_x(η(x), v)`.
    pub fn covariant_derivative(&self, eta: &VectorFieldSpec, at: &Tangent) -> Result<Tangent> {
        let (c, x) = (at.base.chart, &at.base.coords);
        let d_eta = eta.jacobian_at(c, x)? * &at.vec;
        let b = self.bilinear(c, x)?.apply(&eta.value(c, x)?, &at.vec);
        Ok(Tangent::new(at.base.clone(), d_eta - b))
    }

    /// The connector `(x, v, w, z) ↦ (x, z − B_x(v, w))`.
    pub fn connector_apply(&self, sot: &SecondOrderTangent) -> Result<Tangent> {
        let b = self.bilinear(sot.chart, &sot.x)?.apply(&sot.v, &sot.w);
        Ok(Tangent::new(Point::new(sot.chart, sot.x.clone()), &sot.z - b))
    }

    /// `‖B²_{h(x)}(dh v, dh w) − d²h(v, w) − dh B¹_x(v, w)‖` for the
    /// transition from the point's chart into `target`.
    pub fn change_of_variable_residual(&self, point: &Point, v: &Coords, w: &Coords, target: ChartId) -> Result<f64> {
        let y = self.atlas.transition(point, target)?;
        let dh = self.atlas.d_transition(point, target)?;
        let d2h = self.atlas.d2_transition(point, target)?;
        let lhs = self.bilinear(target, &y.coords)?.apply(&(&dh * v), &(&dh * w));
        let rhs = d2h.apply(v, w) + &dh * self.bilinear(point.chart, &point.coords)?.apply(v, w);
        Ok((lhs - rhs).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::flows::ChartField;
    use crate::linalg::Matrix;

    fn v(xs: &[f64]) -> Coords {
        Coords::from_row_slice(xs)
    }

    #[test]
    fn flat_b_vanishes() {
        let m = catalog::flat_plane();
        let conn = m.connection("flat").unwrap();
        let p = Point::new(ChartId(0), v(&[0.3, 0.1]));
        assert_eq!(conn.eval_b(&p, &v(&[1.0, 2.0]), &v(&[-3.0, 0.5])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn covariant_derivative_on_flat_plane() {
        let m = catalog::flat_plane();
        let conn = m.connection("flat").unwrap();
        let c = ChartId(0);
        let id = VectorFieldSpec::uniform("id", m.atlas.clone(), ChartField::affine(Matrix::identity(2, 2), v(&[0.0, 0.0])));
        let at = Tangent::new(Point::new(c, v(&[0.5, 0.5])), v(&[1.0, 0.0]));
        assert!((conn.covariant_derivative(&id, &at).unwrap().vec - v(&[1.0, 0.0])).norm() < 1e-15);
        let tx = m.field("translation-x").unwrap();
        assert_eq!(conn.covariant_derivative(tx, &at).unwrap().vec.norm(), 0.0);
    }

    #[test]
    fn connector_kills_horizontal_vectors() {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let c = ChartId(0);
        let x = v(&[0.2, -0.4]);
        let (a, b) = (v(&[1.0, 0.3]), v(&[-0.2, 0.8]));
        let z = conn.bilinear(c, &x).unwrap().apply(&a, &b);
        let sot = SecondOrderTangent { chart: c, x, v: a, w: b, z };
        assert!(conn.connector_apply(&sot).unwrap().vec.norm() < 1e-15);
    }

    #[test]
    fn christoffel_swap_convention() {
        // Γ^0_{01} = 1 only: B(v, w) = −Γ(w, v) has B^0(e_1, e_0) = −1.
        let m = catalog::flat_plane();
        let gamma: Arc<dyn Fn(&Coords) -> Bilinear + Send + Sync> =
            Arc::new(|_| Bilinear::from_fn(2, |k, i, j| if (k, i, j) == (0, 0, 1) { 1.0 } else { 0.0 }));
        let conn = ConnectionField::from_christoffel("twisted", m.atlas.clone(), vec![(ChartId(0), gamma)]);
        let p = Point::new(ChartId(0), v(&[0.0, 0.0]));
        assert_eq!(conn.eval_b(&p, &v(&[0.0, 1.0]), &v(&[1.0, 0.0])).unwrap(), v(&[-1.0, 0.0]));
        assert_eq!(conn.eval_b(&p, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn analytic_and_fd_derivatives_agree_on_sphere() {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let fd = conn.without_derivatives();
        let x = v(&[0.7, -0.2]);
        for (a, b) in conn.derivative(ChartId(0), &x).unwrap().into_iter().zip(fd.derivative(ChartId(0), &x).unwrap()) {
            assert!((a - b).max_abs() < 1e-8);
        }
    }
}
