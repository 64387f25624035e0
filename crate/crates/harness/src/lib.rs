//! Scenario-driven verification harness for `affine-core`.
//!
//! A scenario names a catalog manifold, a connection and some fields, plus a
//! list of checks. [`run_suite`] runs the checks in parallel and collects a
//! [`Report`]; the `affine` binary wraps this with `run`, `list` and `dump`
//! subcommands.
//!
//! ```
//! use affine_harness::{run_suite, Scenario};
//!
//! let s = Scenario::from_json(
//!     r#"{"manifold": "flat-plane", "connection": "flat", "fields": ["rotation"],
//!         "checks": [{"kind": "killing_residual", "samples": 10}]}"#,
//!     "inline",
//! ).unwrap();
//! let report = run_suite(&s).unwrap();
//! assert!(report.passed());
//! ```

pub mod checks;
pub mod dump;
pub mod error;
pub mod report;
pub mod scenario;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use error::HarnessError;
pub use report::{CheckResult, Meta, Report, Status};
pub use scenario::{load_scenario, CheckKind, CheckSpec, Scenario};

/// The random stream of the `index`-th check. An explicit per-check seed
/// replaces the scenario seed; otherwise checks draw from disjoint streams
/// of the scenario seed so reordering never changes a check's samples.
pub fn check_rng(scenario: &Scenario, index: usize) -> ChaCha8Rng {
    let spec = &scenario.checks[index];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(scenario.rng_seed));
    if spec.seed.is_none() {
        rng.set_stream(index as u64);
    }
    rng
}

/// Runs every check of a scenario. A panicking check is reported as a
/// failure and does not take the others down.
pub fn run_suite(scenario: &Scenario) -> Result<Report, HarnessError> {
    scenario.validate()?;
    let entry = scenario.entry()?;
    let conn = scenario.connection_in(&entry)?;
    let ctx = checks::Context {
        entry: &entry,
        conn,
        fields: scenario.fields_in(&entry, &scenario.fields)?,
        cfg: scenario.integrator_config(),
        tol_kill: scenario.tol_kill(),
    };
    let results: Vec<CheckResult> = scenario
        .checks
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let started = Instant::now();
            let mut rng = check_rng(scenario, i);
            let tolerance = scenario.tolerance(spec);
            let m = catch_unwind(AssertUnwindSafe(|| checks::run_check(&ctx, spec, &mut rng))).unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                checks::Measurement { worst: f64::NAN, samples: 0, error: Some(format!("panicked: {msg}")) }
            });
            let worst = m.worst.is_finite().then_some(m.worst);
            let pass = m.error.is_none() && worst.is_some_and(|w| w <= tolerance);
            CheckResult {
                name: spec.display_name(),
                kind: spec.kind,
                status: if pass { Status::Pass } else { Status::Fail },
                worst,
                tolerance,
                samples: m.samples,
                ms: started.elapsed().as_millis() as u64,
                error: m.error,
            }
        })
        .collect();
    Ok(Report { checks: results, meta: Meta::of(scenario) })
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harness.md")]
mod book_harness {}
