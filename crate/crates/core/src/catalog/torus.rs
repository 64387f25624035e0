use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;

use super::ManifoldEntry;
use crate::atlas::{Atlas, ChartId, Domain, Point, Transition};
use crate::connection::ConnectionField;
use crate::flows::{ChartField, VectorFieldSpec};
use crate::linalg::{Bilinear, Coords, Matrix};

const OFFSETS: [(f64, f64); 4] = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];

fn c2(a: f64, b: f64) -> Coords {
    Coords::from_row_slice(&[a, b])
}

/// `R² / Z²` covered by four open unit squares with corners at the
/// offsets `(0,0)`, `(½,0)`, `(0,½)`, `(½,½)`. Transitions are integer
/// translations.
pub fn flat_torus() -> ManifoldEntry {
    let mut b = Atlas::builder("flat-torus", 2);
    let ids: Vec<ChartId> = OFFSETS
        .iter()
        .enumerate()
        .map(|(i, &(ox, oy))| {
            b.chart(
                &format!("c{}{}", (ox * 2.0) as u8, (oy * 2.0) as u8),
                i as u32,
                Domain::Box { lo: vec![ox, oy], hi: vec![ox + 1.0, oy + 1.0] },
            )
        })
        .collect();
    for (i, &from) in ids.iter().enumerate() {
        for (j, &to) in ids.iter().enumerate() {
            if i == j {
                continue;
            }
            let (ox, oy) = OFFSETS[j];
            b.transition(
                from,
                to,
                Transition::new(move |x| c2(ox + (x[0] - ox).rem_euclid(1.0), oy + (x[1] - oy).rem_euclid(1.0)))
                    .with_jacobian(|_| Matrix::identity(2, 2))
                    .with_hessian(|_| Bilinear::zeros(2)),
            );
        }
    }
    let atlas = b.build();
    let shear = ChartField::new(|x| c2((TAU * x[1]).sin(), 0.0))
        .with_jacobian(|x| Matrix::from_row_slice(2, 2, &[0.0, TAU * (TAU * x[1]).cos(), 0.0, 0.0]))
        .with_hessian(|x| {
            let mut h = Bilinear::zeros(2);
            h.set(0, 1, 1, -TAU * TAU * (TAU * x[1]).sin());
            h
        });
    let fields = vec![
        VectorFieldSpec::uniform("translation-x", atlas.clone(), ChartField::affine(Matrix::zeros(2, 2), c2(1.0, 0.0))),
        VectorFieldSpec::uniform("translation-y", atlas.clone(), ChartField::affine(Matrix::zeros(2, 2), c2(0.0, 1.0))),
        VectorFieldSpec::uniform("shear-wave", atlas.clone(), shear),
    ];
    let a2 = atlas.clone();
    let first = ids[0];
    ManifoldEntry::new(
        "flat-torus",
        atlas.clone(),
        vec![ConnectionField::flat(atlas)],
        fields,
        Arc::new(move |rng| {
            let p = Point::new(first, c2(rng.random_range(0.001..0.999), rng.random_range(0.001..0.999)));
            a2.preferred_chart(&p, crate::atlas::DEFAULT_MARGIN).unwrap_or(p)
        }),
    )
}
