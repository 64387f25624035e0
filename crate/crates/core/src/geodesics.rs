//! Geodesics `α'' = B_α(α', α')`, the exponential map and its Newton
//! inverse, parallel transport `γ' = B_α(γ, α')` along sampled curves,
//! and a completeness probe.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::atlas::{Atlas, ChartId, Point, Tangent};
use crate::connection::ConnectionField;
use crate::error::{GeomError, Result};
use crate::flows::{self, drive, ChartState, IntegratorConfig, Layout, VectorField};
use crate::linalg::{self, Coords, Matrix};

/// Velocity threshold above which a probe trajectory counts as diverged.
pub const DIVERGENCE_SPEED: f64 = 1e8;
pub const NEWTON_MAX_ITERATIONS: usize = 50;
pub const NEWTON_TOLERANCE: f64 = 1e-10;

/// The geodesic spray `(x, v) ↦ (v, B_x(v, v))` on the tangent bundle.
pub struct GeodesicSpray<'a> {
    conn: &'a ConnectionField,
}

impl<'a> GeodesicSpray<'a> {
    pub fn new(conn: &'a ConnectionField) -> Self {
        Self { conn }
    }
}

impl VectorField for GeodesicSpray<'_> {
    fn name(&self) -> &str {
        "geodesic-spray"
    }

    fn atlas(&self) -> &Arc<Atlas> {
        self.conn.atlas()
    }

    fn layout(&self) -> Layout {
        Layout::tangent(self.conn.atlas().dim())
    }

    fn eval(&self, chart: ChartId, state: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.conn.atlas().dim();
        let x = state.rows(0, n).into_owned();
        let v = state.rows(n, n).into_owned();
        let a = self.conn.bilinear(chart, &x)?.apply(&v, &v);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n).copy_from(&a);
        Ok(out)
    }

    fn jacobian(&self, chart: ChartId, state: &DVector<f64>) -> Result<Matrix> {
        let n = self.conn.atlas().dim();
        let x = state.rows(0, n).into_owned();
        let v = state.rows(n, n).into_owned();
        let b = self.conn.bilinear(chart, &x)?;
        let db = self.conn.derivative(chart, &x)?;
        let mut j = Matrix::zeros(2 * n, 2 * n);
        j.view_mut((0, n), (n, n)).copy_from(&Matrix::identity(n, n));
        for (i, d) in db.iter().enumerate() {
            j.view_mut((n, i), (n, 1)).copy_from(&d.apply(&v, &v));
        }
        j.view_mut((n, n), (n, n)).copy_from(&(b.with_second(&v) + b.with_first(&v)));
        Ok(j)
    }
}

fn tangent_state(t: &Tangent) -> ChartState {
    ChartState::from_tangent(t)
}

fn state_tangent(s: &ChartState, n: usize) -> Tangent {
    Tangent::new(Point::new(s.chart, s.state.rows(0, n).into_owned()), s.state.rows(n, n).into_owned())
}

/// A point of a sampled curve with its velocity, both in `point.chart`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub point: Point,
    pub velocity: Coords,
}

/// A curve given by dense samples and interpolated by cubic Hermite
/// pieces. Each piece `[t_i, t_{i+1}]` lives in the chart of sample `i`.
#[derive(Clone, Debug)]
pub struct CurveSpec {
    atlas: Arc<Atlas>,
    samples: Vec<CurveSample>,
    /// Right end of each piece re-expressed in the chart of its left end.
    ends: Vec<(Coords, Coords)>,
}

impl CurveSpec {
    pub fn new(atlas: Arc<Atlas>, samples: Vec<CurveSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(GeomError::InvalidCurve("need at least two samples"));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(GeomError::InvalidCurve("sample times must be strictly increasing"));
        }
        let mut ends = Vec::with_capacity(samples.len() - 1);
        for w in samples.windows(2) {
            let t = Tangent::new(w[1].point.clone(), w[1].velocity.clone());
            let moved = atlas
                .recharter_tangent(&t, w[0].point.chart)
                .map_err(|_| GeomError::InvalidCurve("consecutive samples share no chart"))?;
            ends.push((moved.base.coords, moved.vec));
        }
        Ok(Self { atlas, samples, ends })
    }

    pub fn atlas(&self) -> &Arc<Atlas> {
        &self.atlas
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    fn piece(&self, t: f64) -> usize {
        let i = self.samples.partition_point(|s| s.t <= t);
        i.saturating_sub(1).min(self.samples.len() - 2)
    }

    /// Position and velocity of piece `i` at time `t`, in that piece's chart.
    fn eval_piece(&self, i: usize, t: f64) -> (Coords, Coords) {
        let a = &self.samples[i];
        let (x1, v1) = &self.ends[i];
        let dt = self.samples[i + 1].t - a.t;
        let s = (t - a.t) / dt;
        let (s2, s3) = (s * s, s * s * s);
        let (h00, h10, h01, h11) = (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2);
        let (d00, d10, d01, d11) = (6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s);
        let x0 = &a.point.coords;
        let v0 = &a.velocity;
        let x = x0 * h00 + v0 * (h10 * dt) + x1 * h01 + v1 * (h11 * dt);
        let v = x0 * (d00 / dt) + v0 * d10 + x1 * (d01 / dt) + v1 * d11;
        (x, v)
    }

    /// Interpolated point and velocity at `t`.
    pub fn at(&self, t: f64) -> Result<Tangent> {
        if t < self.t_start() || t > self.t_end() {
            return Err(GeomError::InvalidCurve("time outside the sampled range"));
        }
        let i = self.piece(t);
        let (x, v) = self.eval_piece(i, t);
        Ok(Tangent::new(Point::new(self.samples[i].point.chart, x), v))
    }
}

fn samples_from_states(states: Vec<(f64, ChartState)>, n: usize) -> Vec<CurveSample> {
    states
        .into_iter()
        .map(|(t, s)| {
            let tan = state_tangent(&s, n);
            CurveSample { t, point: tan.base, velocity: tan.vec }
        })
        .collect()
}

/// The geodesic with `α(0) = v0.base`, `α'(0) = v0.vec`, sampled at every
/// integrator node over `t_span = (t0, t1)` with `t0 ≤ 0 ≤ t1`.
pub fn geodesic(conn: &ConnectionField, v0: &Tangent, t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<CurveSpec> {
    let (t0, t1) = t_span;
    if !(t0 <= 0.0 && 0.0 <= t1 && t0 < t1) {
        return Err(GeomError::InvalidCurve("t_span must satisfy t0 ≤ 0 ≤ t1 and t0 < t1"));
    }
    let atlas = conn.atlas();
    atlas.point(v0.base.chart, v0.base.coords.clone())?;
    atlas.check_dim(v0.vec.len())?;
    let n = atlas.dim();
    let spray = GeodesicSpray::new(conn);
    let start = tangent_state(v0);
    let mut samples = Vec::new();
    if t0 < 0.0 {
        let back = flows::trajectory(&spray, &start, t0, cfg)?;
        samples.extend(samples_from_states(back.into_iter().skip(1).rev().collect(), n));
    }
    if t1 > 0.0 {
        samples.extend(samples_from_states(flows::trajectory(&spray, &start, t1, cfg)?, n));
    } else {
        samples.extend(samples_from_states(vec![(0.0, start)], n));
    }
    CurveSpec::new(atlas.clone(), samples)
}

/// `(α_v(t), α_v'(t))`.
pub fn geodesic_flow(conn: &ConnectionField, v: &Tangent, t: f64, cfg: &IntegratorConfig) -> Result<Tangent> {
    conn.atlas().check_dim(v.vec.len())?;
    let end = flows::flow(&GeodesicSpray::new(conn), &tangent_state(v), t, cfg)?;
    Ok(state_tangent(&end, conn.atlas().dim()))
}

/// `exp(v) = α_v(1)`.
pub fn exp_map(conn: &ConnectionField, v: &Tangent, cfg: &IntegratorConfig) -> Result<Point> {
    exp_scaled(conn, v, 1.0, cfg)
}

/// `exp(t v) = α_v(t)`.
pub fn exp_scaled(conn: &ConnectionField, v: &Tangent, t: f64, cfg: &IntegratorConfig) -> Result<Point> {
    Ok(geodesic_flow(conn, v, t, cfg)?.base)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shooting {
    pub tangent: Tangent,
    /// Residual evaluations performed, including the accepted one.
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `exp_x(v) = y` by Newton's method with a finite-difference
/// Jacobian, starting from the chart difference `y − x`. The residual is
/// measured in the chart of `x`.
pub fn exp_inverse(conn: &ConnectionField, x: &Point, y: &Point, cfg: &IntegratorConfig) -> Result<Shooting> {
    let atlas = conn.atlas();
    let target = atlas.map_coords(y.chart, x.chart, &y.coords).map_err(|_| GeomError::NoCommonChart)?;
    let residual = |v: &Coords| -> Result<Coords> {
        let end = exp_map(conn, &Tangent::new(x.clone(), v.clone()), cfg)?;
        Ok(atlas.map_coords(end.chart, x.chart, &end.coords)? - &target)
    };
    let mut v = &target - &x.coords;
    let mut last = f64::INFINITY;
    for k in 1..=NEWTON_MAX_ITERATIONS {
        let r = residual(&v)?;
        last = r.norm();
        if last <= NEWTON_TOLERANCE {
            return Ok(Shooting { tangent: Tangent::new(x.clone(), v), iterations: k, residual: last });
        }
        let j = linalg::fd_jacobian(&v, linalg::first_step(&v), &residual)?;
        let step = j.lu().solve(&r).ok_or(GeomError::NoConvergence { iterations: k, residual: last })?;
        v -= step;
    }
    Err(GeomError::NoConvergence { iterations: NEWTON_MAX_ITERATIONS, residual: last })
}

fn transport_rhs(conn: &ConnectionField, chart: ChartId, x: &Coords, xdot: &Coords, g: &Matrix) -> Result<Matrix> {
    Ok(conn.bilinear(chart, x)?.with_second(xdot) * g)
}

/// Transports the columns of `block` from `t0` to `t1` along `curve`
/// (either direction). The result is in the chart of the piece holding `t1`.
pub fn transport_block(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t0: f64,
    t1: f64,
    block: &Matrix,
    cfg: &IntegratorConfig,
) -> Result<Matrix> {
    for t in [t0, t1] {
        if t < curve.t_start() || t > curve.t_end() {
            return Err(GeomError::InvalidCurve("transport times outside the sampled range"));
        }
    }
    let atlas = curve.atlas();
    let mut g = block.clone();
    let mut piece = curve.piece(t0);
    let mut chart = curve.samples[piece].point.chart;
    if t0 == t1 {
        return Ok(g);
    }
    let forward = t1 > t0;
    let mut t = t0;
    loop {
        let (lo, hi) = (curve.samples[piece].t, curve.samples[piece + 1].t);
        let stop = if forward { hi.min(t1) } else { lo.max(t1) };
        let span = stop - t;
        if span != 0.0 {
            let steps = (span.abs() / cfg.step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let f = |s: f64, g: &Matrix| -> Result<Matrix> {
                let (x, xdot) = curve.eval_piece(piece, s);
                transport_rhs(conn, chart, &x, &xdot, g)
            };
            for k in 0..steps {
                let s = t + k as f64 * h;
                let k1 = f(s, &g)?;
                let k2 = f(s + h / 2.0, &(&g + &k1 * (h / 2.0)))?;
                let k3 = f(s + h / 2.0, &(&g + &k2 * (h / 2.0)))?;
                let k4 = f(s + h, &(&g + &k3 * h))?;
                g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            if !g.iter().all(|v| v.is_finite()) {
                return Err(GeomError::Diverged { t: stop });
            }
        }
        t = stop;
        if t == t1 {
            return Ok(g);
        }
        let next = if forward { piece + 1 } else { piece - 1 };
        let next_chart = curve.samples[next].point.chart;
        if next_chart != chart {
            let (x, _) = curve.eval_piece(piece, t);
            let dh = atlas.jacobian_coords(chart, next_chart, &x).map_err(|_| GeomError::LeftAtlas { t })?;
            g = dh * g;
            chart = next_chart;
        }
        piece = next;
    }
}

/// `P^{t1}_{t0}(α)(v)`.
pub fn parallel_transport(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t0: f64,
    t1: f64,
    v: &Coords,
    cfg: &IntegratorConfig,
) -> Result<Coords> {
    curve.atlas().check_dim(v.len())?;
    let block = Matrix::from_column_slice(v.len(), 1, v.as_slice());
    Ok(transport_block(conn, curve, t0, t1, &block, cfg)?.column(0).into_owned())
}

/// Matrix of `P^{t1}_{t0}(α)` assembled from transported basis vectors.
pub fn transport_matrix(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Matrix> {
    let n = curve.atlas().dim();
    transport_block(conn, curve, t0, t1, &Matrix::identity(n, n), cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: Tangent,
    pub reached: f64,
    pub failure: Option<GeomError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub horizon: f64,
    pub seeds: Vec<SeedOutcome>,
    pub complete_up_to_horizon: bool,
}

/// Integrates each seed's geodesic toward `horizon`, recording how far it
/// got before leaving the atlas, exceeding the hop limit or diverging.
pub fn completeness_probe(conn: &ConnectionField, seeds: &[Tangent], horizon: f64, cfg: &IntegratorConfig) -> ProbeReport {
    let n = conn.atlas().dim();
    let outcomes: Vec<SeedOutcome> = seeds
        .par_iter()
        .map(|seed| {
            let spray = GeodesicSpray::new(conn);
            let outcome = drive(&spray, &tangent_state(seed), None, horizon, cfg, &mut |_, s, _| {
                s.state.rows(n, n).norm() <= DIVERGENCE_SPEED
            });
            SeedOutcome { seed: seed.clone(), reached: outcome.t.abs(), failure: outcome.failure }
        })
        .collect();
    let complete = outcomes.iter().all(|o| o.failure.is_none());
    ProbeReport { horizon, seeds: outcomes, complete_up_to_horizon: complete }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn v(xs: &[f64]) -> Coords {
        Coords::from_row_slice(xs)
    }

    #[test]
    fn flat_geodesic_is_a_line() {
        let m = catalog::flat_plane();
        let conn = m.connection("flat").unwrap();
        let p = Point::new(ChartId(0), v(&[1.0, -1.0]));
        let end = exp_scaled(conn, &Tangent::new(p, v(&[0.5, 2.0])), 3.0, &IntegratorConfig::default()).unwrap();
        assert!((end.coords - v(&[2.5, 5.0])).norm() < 1e-12);
    }

    #[test]
    fn exp_of_zero_is_the_base_point() {
        let m = catalog::sphere();
        let conn = m.connection("round").unwrap();
        let p = Point::new(ChartId(0), v(&[0.3, 0.2]));
        let end = exp_map(conn, &Tangent::new(p.clone(), v(&[0.0, 0.0])), &IntegratorConfig::default()).unwrap();
        assert_eq!(end, p);
    }

    #[test]
    fn flat_shooting_converges_immediately() {
        let m = catalog::flat_plane();
        let conn = m.connection("flat").unwrap();
        let x = Point::new(ChartId(0), v(&[0.0, 1.0]));
        let y = Point::new(ChartId(0), v(&[2.0, -1.0]));
        let s = exp_inverse(conn, &x, &y, &IntegratorConfig::default()).unwrap();
        assert_eq!(s.iterations, 1);
        assert!((s.tangent.vec - v(&[2.0, -2.0])).norm() < 1e-12);
    }

    #[test]
    fn hermite_interpolant_reproduces_cubics() {
        let m = catalog::flat_plane();
        let c = ChartId(0);
        let f = |t: f64| (v(&[t * t * t, 1.0 - t]), v(&[3.0 * t * t, -1.0]));
        let samples = [0.0, 0.5, 1.25]
            .iter()
            .map(|&t| {
                let (x, xd) = f(t);
                CurveSample { t, point: Point::new(c, x), velocity: xd }
            })
            .collect();
        let curve = CurveSpec::new(m.atlas.clone(), samples).unwrap();
        let at = curve.at(0.8).unwrap();
        let (x, xd) = f(0.8);
        assert!((at.base.coords - x).norm() < 1e-13);
        assert!((at.vec - xd).norm() < 1e-13);
    }

    #[test]
    fn curve_rejects_unordered_samples() {
        let m = catalog::flat_plane();
        let s = |t| CurveSample { t, point: Point::new(ChartId(0), v(&[0.0, 0.0])), velocity: v(&[0.0, 0.0]) };
        assert!(matches!(CurveSpec::new(m.atlas.clone(), vec![s(1.0), s(0.5)]), Err(GeomError::InvalidCurve(_))));
    }
}
