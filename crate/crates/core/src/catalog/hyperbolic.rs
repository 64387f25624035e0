use std::sync::Arc;

use rand::Rng;

use super::ManifoldEntry;
use crate::atlas::{Atlas, Domain, Point};
use crate::connection::{ChartConnection, ConnectionField};
use crate::flows::{ChartField, VectorFieldSpec};
use crate::linalg::{Bilinear, Coords, Matrix};

fn c2(a: f64, b: f64) -> Coords {
    Coords::from_row_slice(&[a, b])
}

/// `B = −Γ` for `(dx² + dy²) / y²`, from
/// `Γ^x_xy = Γ^x_yx = −1/y`, `Γ^y_xx = 1/y`, `Γ^y_yy = −1/y`.
fn hyperbolic_b(x: &Coords) -> Bilinear {
    let k = 1.0 / x[1];
    let mut b = Bilinear::zeros(2);
    b.set(0, 0, 1, k);
    b.set(0, 1, 0, k);
    b.set(1, 0, 0, -k);
    b.set(1, 1, 1, k);
    b
}

/// The upper half-plane `y > 0` with its hyperbolic Levi-Civita
/// connection. `h-translation`, `h-dilation` and `h-special` span the
/// isometry algebra; `h-shear` is not affine.
pub fn hyperbolic_half_plane() -> ManifoldEntry {
    let mut b = Atlas::builder("hyperbolic-half-plane", 2);
    let c = b.chart(
        "upper",
        0,
        Domain::Box { lo: vec![f64::NEG_INFINITY, 0.0], hi: vec![f64::INFINITY, f64::INFINITY] },
    );
    let atlas = b.build();
    let conn = ConnectionField::new("hyperbolic", atlas.clone()).with_chart(
        c,
        ChartConnection::new(hyperbolic_b).with_derivative(|x| vec![Bilinear::zeros(2), hyperbolic_b(x) * (-1.0 / x[1])]),
    );
    let special = ChartField::new(|x| c2(x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]))
        .with_jacobian(|x| Matrix::from_row_slice(2, 2, &[2.0 * x[0], -2.0 * x[1], 2.0 * x[1], 2.0 * x[0]]))
        .with_hessian(|_| {
            let mut h = Bilinear::zeros(2);
            h.set(0, 0, 0, 2.0);
            h.set(0, 1, 1, -2.0);
            h.set(1, 0, 1, 2.0);
            h.set(1, 1, 0, 2.0);
            h
        });
    let fields = vec![
        VectorFieldSpec::uniform("h-translation", atlas.clone(), ChartField::affine(Matrix::zeros(2, 2), c2(1.0, 0.0))),
        VectorFieldSpec::uniform("h-dilation", atlas.clone(), ChartField::affine(Matrix::identity(2, 2), c2(0.0, 0.0))),
        VectorFieldSpec::uniform("h-special", atlas.clone(), special),
        VectorFieldSpec::uniform(
            "h-shear",
            atlas.clone(),
            ChartField::affine(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), c2(0.0, 0.0)),
        ),
    ];
    ManifoldEntry::new(
        "hyperbolic-half-plane",
        atlas,
        vec![conn],
        fields,
        Arc::new(move |rng| Point::new(c, c2(rng.random_range(-1.5..1.5), rng.random_range(0.5..2.5)))),
    )
}
