//! CSV trajectories: geodesics, field flows and horizontal frame curves.
//!
//! Every row starts with `t` and the chart the coordinates are written in,
//! so a trajectory that hands off between charts can be followed exactly.

use std::io::Write;

use affine_core::atlas::Atlas;
use affine_core::connection::ConnectionField;
use affine_core::flows::{self, ChartState, IntegratorConfig, VectorFieldSpec};
use affine_core::frame_bundle::{Frame, StandardHorizontal};
use affine_core::geodesics;
use affine_core::{Coords, Point, Tangent};

use crate::error::HarnessError;

fn header(n: usize, groups: &[&str]) -> Vec<String> {
    let mut h = vec!["t".to_string(), "chart".to_string()];
    for g in groups {
        match *g {
            "g" => {
                for i in 1..=n {
                    for j in 1..=n {
                        h.push(format!("g{i}{j}"));
                    }
                }
            }
            p => h.extend((1..=n).map(|i| format!("{p}{i}"))),
        }
    }
    h
}

fn row(t: f64, chart: &str, values: impl IntoIterator<Item = f64>) -> Vec<String> {
    let mut r = vec![format!("{t}"), chart.to_string()];
    r.extend(values.into_iter().map(|v| format!("{v}")));
    r
}

fn write_rows(out: impl Write, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| HarnessError::Io { path: "csv output".into(), source: e })?;
    Ok(())
}

/// `t, chart, x…, v…` along the geodesic with initial velocity `v`.
pub fn geodesic_csv(conn: &ConnectionField, v: &Tangent, duration: f64, cfg: &IntegratorConfig, out: impl Write) -> Result<(), HarnessError> {
    let atlas = conn.atlas();
    let curve = geodesics::geodesic(conn, v, (0.0, duration), cfg)?;
    let rows = curve
        .samples()
        .iter()
        .map(|s| row(s.t, atlas.chart_name(s.point.chart), s.point.coords.iter().chain(s.velocity.iter()).copied()))
        .collect();
    write_rows(out, header(atlas.dim(), &["x", "v"]), rows)
}

/// `t, chart, x…` along the flow of a field.
pub fn flow_csv(field: &VectorFieldSpec, p: &Point, duration: f64, cfg: &IntegratorConfig, out: impl Write) -> Result<(), HarnessError> {
    let atlas = field.atlas();
    let nodes = flows::trajectory(field, &ChartState::from_point(p), duration, cfg)?;
    let rows = nodes.iter().map(|(t, s)| row(*t, atlas.chart_name(s.chart), s.state.iter().copied())).collect();
    write_rows(out, header(atlas.dim(), &["x"]), rows)
}

/// `t, chart, x…, g11, g12, …` (frame matrix row-major) along the
/// standard horizontal field `H_λ`.
pub fn frame_csv(
    conn: &ConnectionField,
    lambda: &Coords,
    frame: &Frame,
    duration: f64,
    cfg: &IntegratorConfig,
    out: impl Write,
) -> Result<(), HarnessError> {
    let atlas: &Atlas = conn.atlas();
    let n = atlas.dim();
    let h = StandardHorizontal::new(conn, lambda.clone());
    let nodes = flows::trajectory(&h, &frame.to_state(), duration, cfg)?;
    let rows = nodes
        .iter()
        .map(|(t, s)| {
            let f = Frame::from_state(s, n);
            let g_rows: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| f.g[(i, j)]).collect();
            row(*t, atlas.chart_name(s.chart), f.x.iter().copied().chain(g_rows))
        })
        .collect();
    write_rows(out, header(n, &["x", "g"]), rows)
}
