//! JSON run reports.

use serde::{Deserialize, Serialize};

use crate::scenario::{CheckKind, Scenario};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub kind: CheckKind,
    pub status: Status,
    /// `None` when the measurement is not a finite number.
    pub worst: Option<f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorMeta {
    pub step: f64,
    pub max_hops: usize,
    pub rechart_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub catalog_version: String,
    pub manifold: String,
    pub connection: String,
    pub fields: Vec<String>,
    pub rng_seed: u64,
    pub integrator: IntegratorMeta,
    pub tol_kill: f64,
    pub tol_scale: f64,
    pub version: String,
}

impl Meta {
    pub fn of(s: &Scenario) -> Self {
        let cfg = s.integrator_config();
        Self {
            catalog_version: affine_core::catalog::CATALOG_VERSION.to_string(),
            manifold: s.manifold.clone(),
            connection: s.connection.clone(),
            fields: s.fields.clone(),
            rng_seed: s.rng_seed,
            integrator: IntegratorMeta { step: cfg.step, max_hops: cfg.max_hops, rechart_margin: cfg.rechart_margin },
            tol_kill: s.tol_kill(),
            tol_scale: s.tol_scale,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<CheckResult>,
    pub meta: Meta,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite numbers and strings")
    }

    /// One line per check, for terminals.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let worst = c.worst.map_or("n/a".to_string(), |w| format!("{w:.3e}"));
            out.push_str(&format!(
                "{} {:<24} worst {:>10}  tol {:.1e}  n={:<4} {:>6} ms",
                if c.status == Status::Pass { "PASS" } else { "FAIL" },
                c.name,
                worst,
                c.tolerance,
                c.samples,
                c.ms
            ));
            if let Some(e) = &c.error {
                out.push_str(&format!("  ({e})"));
            }
            out.push('\n');
        }
        out.push_str(&format!("{} of {} checks passed\n", self.checks.len() - self.failures(), self.checks.len()));
        out
    }
}
