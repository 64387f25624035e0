//! Chart-based computations on affine manifolds.
//!
//! A manifold is a finite [`atlas::Atlas`] over `R^n`; an affine
//! connection is a per-chart bilinear field `x ↦ B_x`
//! ([`connection::ConnectionField`]). On top of these the crate integrates
//! geodesics and parallel transport, works in the frame bundle with the
//! forms `θ`, `ω` and the standard horizontal fields, checks and extends
//! infinitesimal affine automorphisms, and builds automorphisms as
//! time-1 flows.
//!
//! ```
//! use affine_core::{catalog, geodesics, flows::IntegratorConfig, Point, Tangent, Coords};
//!
//! let sphere = catalog::sphere();
//! let round = sphere.connection("round").unwrap();
//! let north = sphere.atlas.chart_id("north").unwrap();
//! // Unit-speed geodesic from the north pole, measured in the metric 4|du|²/(1+|u|²)².
//! let v = Tangent::new(Point::new(north, Coords::from_row_slice(&[0.0, 0.0])), Coords::from_row_slice(&[0.5, 0.0]));
//! let end = geodesics::exp_scaled(round, &v, std::f64::consts::PI, &IntegratorConfig::default()).unwrap();
//! // After half a great circle we sit at the south pole, the origin of the south chart.
//! let south = sphere.atlas.transition(&end, sphere.atlas.chart_id("south").unwrap()).unwrap();
//! assert!(south.coords.norm() < 1e-5);
//! ```

pub mod atlas;
pub mod automorphism;
pub mod catalog;
pub mod connection;
pub mod error;
pub mod flows;
pub mod frame_bundle;
pub mod geodesics;
pub mod killing;
pub mod linalg;

pub use atlas::{Atlas, ChartId, Domain, Point, Tangent};
pub use error::{GeomError, Result};
pub use linalg::{Bilinear, Coords, Matrix};

// The guide's snippets run as doc tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/atlases.md")]
    mod atlases {}
    #[doc = include_str!("../../../book/src/flows.md")]
    mod flows {}
    #[doc = include_str!("../../../book/src/geodesics.md")]
    mod geodesics {}
    #[doc = include_str!("../../../book/src/frame-bundle.md")]
    mod frame_bundle {}
    #[doc = include_str!("../../../book/src/killing.md")]
    mod killing {}
    #[doc = include_str!("../../../book/src/automorphisms.md")]
    mod automorphisms {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
