//! Finite atlases over `R^n`: charts, transition maps and their
//! derivatives, and re-charting of points and tangent vectors.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::linalg::{self, Bilinear, Coords, Matrix};

/// Fraction of a chart domain reserved as a safety band for integration
/// hand-off and finite-difference stencils.
pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChartId(pub usize);

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Chart image `V ⊆ R^n`.
///
/// `contains(x, margin)` tests membership in the domain shrunk by `margin`:
/// finite extents shrink by `margin` times their half-width, half-infinite
/// intervals move their finite end inward by `margin`.
#[derive(Clone, Debug)]
pub enum Domain {
    Whole,
    Ball { center: Coords, radius: f64 },
    /// `inner < |x - center| < outer`; `inner = 0` is a punctured ball.
    Annulus { center: Coords, inner: f64, outer: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn contains(&self, x: &Coords, margin: f64) -> bool {
        if !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        match self {
            Domain::Whole => true,
            Domain::Ball { center, radius } => (x - center).norm() < radius * (1.0 - margin),
            Domain::Annulus { center, inner, outer } => {
                let r = (x - center).norm();
                let inset = margin * (outer - inner) / 2.0;
                let lo = if *inner > 0.0 { inner + inset } else { 0.0 };
                r > lo && r < outer - inset
            }
            Domain::Box { lo, hi } => lo.iter().zip(hi).enumerate().all(|(i, (&a, &b))| {
                let (a, b) = match (a.is_finite(), b.is_finite()) {
                    (true, true) => {
                        let inset = margin * (b - a) / 2.0;
                        (a + inset, b - inset)
                    }
                    (true, false) => (a + margin, b),
                    (false, true) => (a, b - margin),
                    (false, false) => (a, b),
                };
                x[i] > a && x[i] < b
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub name: String,
    /// Lower values win when several charts contain a point.
    pub priority: u32,
    pub domain: Domain,
}

pub type MapFn = Arc<dyn Fn(&Coords) -> Coords + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&Coords) -> Matrix + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&Coords) -> Bilinear + Send + Sync>;

/// Transition map `h = φ_to ∘ φ_from⁻¹` with optional analytic derivatives.
#[derive(Clone)]
pub struct Transition {
    map: MapFn,
    jacobian: Option<JacobianFn>,
    hessian: Option<HessianFn>,
}

impl Transition {
    pub fn new(map: impl Fn(&Coords) -> Coords + Send + Sync + 'static) -> Self {
        Self { map: Arc::new(map), jacobian: None, hessian: None }
    }

    pub fn with_jacobian(mut self, f: impl Fn(&Coords) -> Matrix + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(f));
        self
    }

    pub fn with_hessian(mut self, f: impl Fn(&Coords) -> Bilinear + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(f));
        self
    }

    /// Drops the analytic derivatives, forcing finite differences.
    pub fn without_derivatives(mut self) -> Self {
        self.jacobian = None;
        self.hessian = None;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub chart: ChartId,
    pub coords: Coords,
}

impl Point {
    pub fn new(chart: ChartId, coords: Coords) -> Self {
        Self { chart, coords }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub vec: Coords,
}

impl Tangent {
    pub fn new(base: Point, vec: Coords) -> Self {
        Self { base, vec }
    }
}

pub struct Atlas {
    name: String,
    dim: usize,
    charts: Vec<Chart>,
    order: Vec<ChartId>,
    transitions: HashMap<(ChartId, ChartId), Transition>,
}

impl fmt::Debug for Atlas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Atlas")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("charts", &self.charts)
            .finish_non_exhaustive()
    }
}

pub struct AtlasBuilder {
    name: String,
    dim: usize,
    charts: Vec<Chart>,
    transitions: HashMap<(ChartId, ChartId), Transition>,
}

impl AtlasBuilder {
    pub fn chart(&mut self, name: &str, priority: u32, domain: Domain) -> ChartId {
        self.charts.push(Chart { name: name.to_string(), priority, domain });
        ChartId(self.charts.len() - 1)
    }

    pub fn transition(&mut self, from: ChartId, to: ChartId, t: Transition) -> &mut Self {
        self.transitions.insert((from, to), t);
        self
    }

    pub fn build(self) -> Arc<Atlas> {
        let mut order: Vec<ChartId> = (0..self.charts.len()).map(ChartId).collect();
        order.sort_by_key(|c| (self.charts[c.0].priority, c.0));
        Arc::new(Atlas {
            name: self.name,
            dim: self.dim,
            charts: self.charts,
            order,
            transitions: self.transitions,
        })
    }
}

impl Atlas {
    pub fn builder(name: &str, dim: usize) -> AtlasBuilder {
        assert!(dim >= 1, "model dimension must be positive");
        AtlasBuilder { name: name.to_string(), dim, charts: Vec::new(), transitions: HashMap::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart_ids(&self) -> impl Iterator<Item = ChartId> + '_ {
        (0..self.charts.len()).map(ChartId)
    }

    pub fn chart(&self, id: ChartId) -> Result<&Chart> {
        self.charts.get(id.0).ok_or_else(|| GeomError::UnknownChart(id.to_string()))
    }

    pub fn chart_id(&self, name: &str) -> Result<ChartId> {
        self.charts
            .iter()
            .position(|c| c.name == name)
            .map(ChartId)
            .ok_or_else(|| GeomError::UnknownChart(name.to_string()))
    }

    pub fn chart_name(&self, id: ChartId) -> &str {
        self.charts.get(id.0).map_or("?", |c| c.name.as_str())
    }

    pub fn contains(&self, chart: ChartId, x: &Coords, margin: f64) -> bool {
        x.len() == self.dim && self.charts.get(chart.0).is_some_and(|c| c.domain.contains(x, margin))
    }

    /// A validated point.
    pub fn point(&self, chart: ChartId, coords: Coords) -> Result<Point> {
        self.check_dim(coords.len())?;
        if !self.contains(chart, &coords, 0.0) {
            return Err(GeomError::OutsideChart(chart));
        }
        Ok(Point::new(chart, coords))
    }

    pub fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(GeomError::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }

    fn edge(&self, from: ChartId, to: ChartId) -> Result<&Transition> {
        self.transitions.get(&(from, to)).ok_or(GeomError::NotInOverlap { from, to })
    }

    /// Maps coordinates between charts, requiring the point to lie in both
    /// (unshrunk) domains.
    pub fn map_coords(&self, from: ChartId, to: ChartId, x: &Coords) -> Result<Coords> {
        if !self.contains(from, x, 0.0) {
            return Err(GeomError::NotInOverlap { from, to });
        }
        if from == to {
            return Ok(x.clone());
        }
        let y = (self.edge(from, to)?.map)(x);
        if !self.contains(to, &y, 0.0) {
            return Err(GeomError::NotInOverlap { from, to });
        }
        Ok(y)
    }

    pub fn transition(&self, point: &Point, target: ChartId) -> Result<Point> {
        Ok(Point::new(target, self.map_coords(point.chart, target, &point.coords)?))
    }

    /// Jacobian `dh(x)` of the transition into `target`.
    pub fn d_transition(&self, point: &Point, target: ChartId) -> Result<Matrix> {
        self.jacobian_coords(point.chart, target, &point.coords)
    }

    pub(crate) fn jacobian_coords(&self, from: ChartId, to: ChartId, x: &Coords) -> Result<Matrix> {
        self.map_coords(from, to, x)?;
        if from == to {
            return Ok(Matrix::identity(self.dim, self.dim));
        }
        let edge = self.edge(from, to)?;
        if let Some(j) = &edge.jacobian {
            return Ok(j(x));
        }
        linalg::fd_jacobian(x, linalg::first_step(x), |y| self.stencil_map(edge, from, y))
    }

    /// Second derivative `d²h(x)` of the transition into `target`.
    pub fn d2_transition(&self, point: &Point, target: ChartId) -> Result<Bilinear> {
        self.hessian_coords(point.chart, target, &point.coords)
    }

    pub(crate) fn hessian_coords(&self, from: ChartId, to: ChartId, x: &Coords) -> Result<Bilinear> {
        self.map_coords(from, to, x)?;
        if from == to {
            return Ok(Bilinear::zeros(self.dim));
        }
        let edge = self.edge(from, to)?;
        if let Some(h) = &edge.hessian {
            return Ok(h(x));
        }
        if let Some(j) = &edge.jacobian {
            return linalg::fd_hessian_from_jacobian(x, linalg::first_step(x), |y| {
                if !self.contains(from, y, 0.0) {
                    return Err(GeomError::StencilLeavesDomain(from));
                }
                Ok(j(y))
            });
        }
        linalg::fd_hessian(x, linalg::second_step(x), |y| self.stencil_map(edge, from, y))
    }

    fn stencil_map(&self, edge: &Transition, from: ChartId, y: &Coords) -> Result<Coords> {
        if !self.contains(from, y, 0.0) {
            return Err(GeomError::StencilLeavesDomain(from));
        }
        Ok((edge.map)(y))
    }

    /// Pushes a tangent vector through the transition Jacobian.
    pub fn recharter_tangent(&self, t: &Tangent, target: ChartId) -> Result<Tangent> {
        let base = self.transition(&t.base, target)?;
        let vec = self.d_transition(&t.base, target)? * &t.vec;
        Ok(Tangent::new(base, vec))
    }

    /// Highest-priority chart whose `margin`-shrunk domain contains the
    /// point, ties broken by chart id.
    pub fn preferred_chart(&self, point: &Point, margin: f64) -> Option<Point> {
        if !self.contains(point.chart, &point.coords, 0.0) {
            return None;
        }
        self.order.iter().find_map(|&c| {
            let y = if c == point.chart {
                point.coords.clone()
            } else {
                let edge = self.transitions.get(&(point.chart, c))?;
                (edge.map)(&point.coords)
            };
            self.contains(c, &y, margin).then(|| Point::new(c, y))
        })
    }

    /// Expresses two points in one chart: `b` in `a`'s chart if possible,
    /// otherwise `a` in `b`'s chart, otherwise any chart holding both.
    pub fn common_chart(&self, a: &Point, b: &Point) -> Result<(ChartId, Coords, Coords)> {
        if let Ok(bb) = self.map_coords(b.chart, a.chart, &b.coords) {
            return Ok((a.chart, a.coords.clone(), bb));
        }
        if let Ok(aa) = self.map_coords(a.chart, b.chart, &a.coords) {
            return Ok((b.chart, aa, b.coords.clone()));
        }
        for &c in &self.order {
            if let (Ok(aa), Ok(bb)) =
                (self.map_coords(a.chart, c, &a.coords), self.map_coords(b.chart, c, &b.coords))
            {
                return Ok((c, aa, bb));
            }
        }
        Err(GeomError::NoCommonChart)
    }

    /// Coordinate distance between two points measured in a common chart.
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        let (_, x, y) = self.common_chart(a, b)?;
        Ok((x - y).norm())
    }
}
