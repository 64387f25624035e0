use nalgebra::DVector;

use super::field::{rechart_state, rechart_state_tangents, ChartState, VectorField};
use crate::atlas::{Point, DEFAULT_MARGIN};
use crate::error::{GeomError, Result};
use crate::linalg::Matrix;

/// Fixed-step classical RK4 with chart hand-off.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub max_hops: usize,
    /// Fraction of the chart domain kept as hand-off band.
    pub rechart_margin: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { step: 1e-3, max_hops: 10_000, rechart_margin: DEFAULT_MARGIN }
    }
}

impl IntegratorConfig {
    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

/// Result of a driven integration: where it got to, and why it stopped
/// early if it did.
pub(crate) struct Outcome {
    pub state: ChartState,
    pub tangents: Option<Matrix>,
    pub t: f64,
    pub failure: Option<GeomError>,
}

impl Outcome {
    pub fn into_result(self) -> Result<(ChartState, Option<Matrix>)> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok((self.state, self.tangents)),
        }
    }
}

fn rhs(
    field: &dyn VectorField,
    chart: crate::atlas::ChartId,
    y: &DVector<f64>,
    w: Option<&Matrix>,
) -> Result<(DVector<f64>, Option<Matrix>)> {
    let dy = field.eval(chart, y)?;
    let dw = match w {
        Some(w) => Some(field.jacobian(chart, y)? * w),
        None => None,
    };
    Ok((dy, dw))
}

fn axpy(y: &DVector<f64>, w: Option<&Matrix>, h: f64, k: &(DVector<f64>, Option<Matrix>)) -> (DVector<f64>, Option<Matrix>) {
    let y2 = y + &k.0 * h;
    let w2 = w.zip(k.1.as_ref()).map(|(w, kw)| w + kw * h);
    (y2, w2)
}

/// Integrates `field` (jointly with its linearization when `tangents` is
/// given) for `duration`, calling `observe` at every step. `observe`
/// returns `false` to abort with [`GeomError::Diverged`].
pub(crate) fn drive(
    field: &dyn VectorField,
    start: &ChartState,
    tangents: Option<&Matrix>,
    duration: f64,
    cfg: &IntegratorConfig,
    observe: &mut dyn FnMut(f64, &ChartState, Option<&Matrix>) -> bool,
) -> Outcome {
    assert!(cfg.step > 0.0, "integrator step must be positive");
    let atlas = field.atlas().clone();
    let layout = field.layout();
    let n = layout.n;

    let mut state = start.clone();
    let mut w = tangents.cloned();
    let mut t = 0.0;
    let mut hops = 0usize;
    let fail = |state: ChartState, w: Option<Matrix>, t: f64, e: GeomError| Outcome { state, tangents: w, t, failure: Some(e) };

    if !observe(0.0, &state, w.as_ref()) {
        return fail(state, w, 0.0, GeomError::Diverged { t: 0.0 });
    }
    let steps = if duration == 0.0 { 0 } else { (duration.abs() / cfg.step).ceil() as usize };
    let h = if steps == 0 { 0.0 } else { duration / steps as f64 };

    for k in 0..steps {
        let chart = state.chart;
        let y = &state.state;
        let step = (|| -> Result<(DVector<f64>, Option<Matrix>)> {
            let k1 = rhs(field, chart, y, w.as_ref())?;
            let s2 = axpy(y, w.as_ref(), h / 2.0, &k1);
            let k2 = rhs(field, chart, &s2.0, s2.1.as_ref())?;
            let s3 = axpy(y, w.as_ref(), h / 2.0, &k2);
            let k3 = rhs(field, chart, &s3.0, s3.1.as_ref())?;
            let s4 = axpy(y, w.as_ref(), h, &k3);
            let k4 = rhs(field, chart, &s4.0, s4.1.as_ref())?;
            let y_next = y + (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (h / 6.0);
            let w_next = w.as_ref().map(|w| {
                let (a, b, c, d) = (k1.1.unwrap(), k2.1.unwrap(), k3.1.unwrap(), k4.1.unwrap());
                w + (a + b * 2.0 + c * 2.0 + d) * (h / 6.0)
            });
            Ok((y_next, w_next))
        })();
        let t_next = (k + 1) as f64 * h;
        let (y_next, w_next) = match step {
            Ok(v) => v,
            Err(e) => return fail(state, w, t, e),
        };
        if !y_next.iter().all(|v| v.is_finite()) {
            return fail(state, w, t, GeomError::Diverged { t: t_next });
        }
        let mut next = ChartState::new(chart, y_next);
        let mut w_next = w_next;

        let base = Point::new(chart, next.state.rows(0, n).into_owned());
        if !atlas.contains(chart, &base.coords, cfg.rechart_margin) {
            let target = atlas
                .preferred_chart(&base, cfg.rechart_margin)
                .or_else(|| atlas.preferred_chart(&base, 0.0))
                .map(|p| p.chart);
            match target {
                Some(c) if c != chart => {
                    hops += 1;
                    if hops > cfg.max_hops {
                        return fail(next, w_next, t_next, GeomError::HopLimit { limit: cfg.max_hops, t: t_next });
                    }
                    let moved = rechart_state(&atlas, layout, chart, c, &next.state).and_then(|s| {
                        let wm = match &w_next {
                            Some(wm) => Some(rechart_state_tangents(&atlas, layout, chart, c, &next.state, wm)?),
                            None => None,
                        };
                        Ok((s, wm))
                    });
                    match moved {
                        Ok((s, wm)) => {
                            next = ChartState::new(c, s);
                            w_next = wm;
                        }
                        Err(_) => return fail(state, w, t, GeomError::LeftAtlas { t: t_next }),
                    }
                }
                Some(_) => {}
                None => return fail(state, w, t, GeomError::LeftAtlas { t: t_next }),
            }
        }
        state = next;
        w = w_next;
        t = t_next;
        if !observe(t, &state, w.as_ref()) {
            return fail(state, w, t, GeomError::Diverged { t });
        }
    }
    Outcome { state, tangents: w, t, failure: None }
}
