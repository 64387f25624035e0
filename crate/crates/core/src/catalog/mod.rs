//! Built-in manifolds with their connections and named vector fields.
//!
//! | name | charts | connections | fields |
//! |---|---|---|---|
//! | `flat-plane` | cartesian | flat | translation-x, translation-y, rotation, affine, quadratic |
//! | `flat-space-3` | cartesian | flat | translation-x, translation-y, translation-z, rotation-z |
//! | `flat-polar` | cartesian, polar | flat | rotation, translation-x |
//! | `flat-torus` | 4 offset unit squares | flat | translation-x, translation-y, shear-wave |
//! | `sphere` | north, south (stereographic) | round | L1, L2, L3, dilation |
//! | `sphere-colatitude` | colatitude | round | rotation-z |
//! | `hyperbolic-half-plane` | upper | hyperbolic | h-translation, h-dilation, h-special, h-shear |
//! | `unit-disk` | disk | flat | translation-x, rotation |
//! | `punctured-disk` | punctured | flat | translation-x, rotation |

mod hyperbolic;
mod plane;
pub mod sphere;
mod torus;

use std::sync::Arc;

use rand::{Rng, RngCore};

pub use hyperbolic::hyperbolic_half_plane;
pub use plane::{flat_plane, flat_polar, flat_space_3, punctured_disk, unit_disk, AffineMap};
pub use sphere::{sphere, sphere_colatitude, SphereRotation};
pub use torus::flat_torus;

use crate::atlas::{Atlas, ChartId, Point};
use crate::connection::ConnectionField;
use crate::flows::VectorFieldSpec;

pub type Sampler = Arc<dyn Fn(&mut dyn RngCore) -> Point + Send + Sync>;

/// Version string echoed into harness reports.
pub const CATALOG_VERSION: &str = "1";

pub const NAMES: &[&str] = &[
    "flat-plane",
    "flat-space-3",
    "flat-polar",
    "flat-torus",
    "sphere",
    "sphere-colatitude",
    "hyperbolic-half-plane",
    "unit-disk",
    "punctured-disk",
];

#[derive(Clone)]
pub struct ManifoldEntry {
    pub name: String,
    pub atlas: Arc<Atlas>,
    pub connections: Vec<ConnectionField>,
    pub fields: Vec<VectorFieldSpec>,
    sampler: Sampler,
}

impl std::fmt::Debug for ManifoldEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManifoldEntry").field("name", &self.name).finish_non_exhaustive()
    }
}

impl ManifoldEntry {
    pub fn new(
        name: &str,
        atlas: Arc<Atlas>,
        connections: Vec<ConnectionField>,
        fields: Vec<VectorFieldSpec>,
        sampler: Sampler,
    ) -> Self {
        Self { name: name.to_string(), atlas, connections, fields, sampler }
    }

    pub fn connection(&self, name: &str) -> Option<&ConnectionField> {
        self.connections.iter().find(|c| c.name() == name)
    }

    pub fn field(&self, name: &str) -> Option<&VectorFieldSpec> {
        self.fields.iter().find(|f| f.name() == name)
    }

    pub fn field_names(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.name()).collect()
    }

    pub fn connection_names(&self) -> Vec<&str> {
        self.connections.iter().map(|c| c.name()).collect()
    }

    /// A random point inside the safety margin of its preferred chart.
    pub fn sample_point(&self, rng: &mut dyn RngCore) -> Point {
        (self.sampler)(rng)
    }

    /// A random point lying in both charts' margin-shrunk domains,
    /// expressed in chart `a`.
    pub fn sample_overlap(&self, rng: &mut dyn RngCore, a: ChartId, b: ChartId, margin: f64) -> Option<Point> {
        for _ in 0..100_000 {
            let p = self.sample_point(rng);
            let Ok(pa) = self.atlas.transition(&p, a) else { continue };
            if !self.atlas.contains(a, &pa.coords, margin) {
                continue;
            }
            let Ok(pb) = self.atlas.transition(&pa, b) else { continue };
            if self.atlas.contains(b, &pb.coords, margin) {
                return Some(pa);
            }
        }
        None
    }
}

/// Builds a catalog entry by name.
pub fn lookup(name: &str) -> Option<ManifoldEntry> {
    Some(match name {
        "flat-plane" => flat_plane(),
        "flat-space-3" => flat_space_3(),
        "flat-polar" => flat_polar(),
        "flat-torus" => flat_torus(),
        "sphere" => sphere(),
        "sphere-colatitude" => sphere_colatitude(),
        "hyperbolic-half-plane" => hyperbolic_half_plane(),
        "unit-disk" => unit_disk(),
        "punctured-disk" => punctured_disk(),
        _ => return None,
    })
}

/// Uniform direction on the unit sphere in `R^n`, for probe seeds.
pub fn random_unit_vector(rng: &mut dyn RngCore, n: usize) -> crate::linalg::Coords {
    loop {
        let v = crate::linalg::Coords::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let r = v.norm();
        if r > 1e-3 && r <= 1.0 {
            return v / r;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_name_resolves_and_samples_stay_inside_margins() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in NAMES {
            let m = lookup(name).unwrap();
            assert_eq!(m.name, *name);
            for _ in 0..50 {
                let p = m.sample_point(&mut rng);
                assert!(m.atlas.contains(p.chart, &p.coords, crate::atlas::DEFAULT_MARGIN), "{name}");
            }
        }
        assert!(lookup("torus5").is_none());
    }

    #[test]
    fn catalog_fields_are_well_defined_on_overlaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in NAMES {
            let m = lookup(name).unwrap();
            for a in m.atlas.chart_ids() {
                for b in m.atlas.chart_ids().filter(|&b| b != a) {
                    for _ in 0..10 {
                        let Some(p) = m.sample_overlap(&mut rng, a, b, 0.1) else { break };
                        for f in &m.fields {
                            let r = f.well_definedness_residual(&p, b).unwrap();
                            assert!(r < 1e-9, "{name}/{}: {r}", f.name());
                        }
                    }
                }
            }
        }
    }
}
