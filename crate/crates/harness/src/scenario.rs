//! Scenario files: which manifold, connection and fields to load from the
//! catalog, and which checks to run against them.
//!
//! Scenarios are JSON. Unknown keys anywhere are rejected.
//!
//! ```json
//! {
//!   "manifold": "sphere",
//!   "connection": "round",
//!   "fields": ["L1", "L2", "L3"],
//!   "rng_seed": 7,
//!   "integrator": { "step": 0.001 },
//!   "checks": [
//!     { "kind": "killing_residual", "tolerance": 1e-8, "samples": 100 }
//!   ]
//! }
//! ```

use std::path::Path;

use affine_core::catalog::{self, ManifoldEntry};
use affine_core::connection::ConnectionField;
use affine_core::flows::{IntegratorConfig, VectorFieldSpec};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Every check the harness knows how to run.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Change-of-variable residual of the connection on chart overlaps.
    ChangeOfVariable,
    /// Agreement of every field's chart expressions on overlaps.
    FieldWellDefined,
    /// Second-order Killing residual of each field.
    KillingResidual,
    /// Residual-based and flow-commutation-based Killing verdicts agree.
    Equivalence,
    /// Projections of standard horizontal curves are the predicted geodesics.
    HorizontalProjection,
    /// Bracket of natural lifts equals the lift of the bracket.
    LiftBracket,
    /// Extending a field's seed along a horizontal path recovers the field.
    KillingExtension,
    /// Extension is linear in the seed.
    ExtensionLinearity,
    /// `exp(ξ)` satisfies the affine-map equation.
    AutomorphismAffine,
    /// `Fr(exp ξ)` preserves `κ`.
    KappaPullback,
    /// `exp(ξ) ∘ exp_x = exp_{f(x)} ∘ T exp(ξ)`.
    ExpCommutes,
    /// `Fr(f ∘ g) = Fr(f) ∘ Fr(g)` for consecutive fields.
    FrameHomomorphism,
    /// Numerical rank of the fields' seeds at one point.
    GramRank,
    /// Derivative of `v ↦ Fl^{κ⁻¹(v)}_1(p)` at zero equals `κ_p⁻¹`.
    ParameterFlow,
    /// Geodesics from random seeds reach the horizon.
    Completeness,
}

impl CheckKind {
    pub const ALL: [CheckKind; 15] = [
        CheckKind::ChangeOfVariable,
        CheckKind::FieldWellDefined,
        CheckKind::KillingResidual,
        CheckKind::Equivalence,
        CheckKind::HorizontalProjection,
        CheckKind::LiftBracket,
        CheckKind::KillingExtension,
        CheckKind::ExtensionLinearity,
        CheckKind::AutomorphismAffine,
        CheckKind::KappaPullback,
        CheckKind::ExpCommutes,
        CheckKind::FrameHomomorphism,
        CheckKind::GramRank,
        CheckKind::ParameterFlow,
        CheckKind::Completeness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::ChangeOfVariable => "change_of_variable",
            CheckKind::FieldWellDefined => "field_well_defined",
            CheckKind::KillingResidual => "killing_residual",
            CheckKind::Equivalence => "equivalence",
            CheckKind::HorizontalProjection => "horizontal_projection",
            CheckKind::LiftBracket => "lift_bracket",
            CheckKind::KillingExtension => "killing_extension",
            CheckKind::ExtensionLinearity => "extension_linearity",
            CheckKind::AutomorphismAffine => "automorphism_affine",
            CheckKind::KappaPullback => "kappa_pullback",
            CheckKind::ExpCommutes => "exp_commutes",
            CheckKind::FrameHomomorphism => "frame_homomorphism",
            CheckKind::GramRank => "gram_rank",
            CheckKind::ParameterFlow => "parameter_flow",
            CheckKind::Completeness => "completeness",
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            CheckKind::ChangeOfVariable => 1e-6,
            CheckKind::FieldWellDefined => 1e-9,
            CheckKind::KillingResidual => 1e-8,
            CheckKind::HorizontalProjection => 1e-4,
            CheckKind::LiftBracket => 1e-6,
            CheckKind::KillingExtension => 1e-5,
            CheckKind::ExtensionLinearity => 1e-8,
            CheckKind::AutomorphismAffine | CheckKind::KappaPullback | CheckKind::ExpCommutes => 1e-5,
            CheckKind::FrameHomomorphism => 1e-8,
            CheckKind::ParameterFlow => 1e-4,
            // Counts: disagreements, rank deficit, failed seeds.
            CheckKind::Equivalence | CheckKind::GramRank | CheckKind::Completeness => 0.5,
        }
    }

    pub fn default_samples(self) -> usize {
        match self {
            CheckKind::ChangeOfVariable | CheckKind::KillingResidual => 100,
            CheckKind::FieldWellDefined => 50,
            CheckKind::Completeness => 20,
            CheckKind::GramRank => 1,
            CheckKind::LiftBracket => 20,
            _ => 5,
        }
    }

    /// Checks that count events (disagreements, rank deficit, failed seeds)
    /// rather than measure a defect. `tol_scale` leaves them alone.
    pub fn is_count(self) -> bool {
        matches!(self, CheckKind::Equivalence | CheckKind::GramRank | CheckKind::Completeness)
    }

    /// Checks whose tolerance `tol_kill` replaces.
    pub fn uses_tol_kill(self) -> bool {
        matches!(self, CheckKind::KillingResidual)
    }
}

impl std::fmt::Display for CheckKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One check as written in a scenario file. Omitted parameters take the
/// kind's defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub kind: CheckKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Replaces the stream derived from the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_span: Option<[f64; 2]>,
    /// Replaces the scenario's field list for this check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<String>>,
    /// Completeness horizon, or chart length of the extension path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_rank: Option<usize>,
}

impl CheckSpec {
    pub fn new(kind: CheckKind) -> Self {
        Self {
            kind,
            name: None,
            tolerance: None,
            samples: None,
            seed: None,
            t_span: None,
            fields: None,
            horizon: None,
            expected_rank: None,
        }
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_hops: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rechart_margin: Option<f64>,
}

impl IntegratorOverrides {
    pub fn resolve(&self) -> IntegratorConfig {
        let d = IntegratorConfig::default();
        IntegratorConfig {
            step: self.step.unwrap_or(d.step),
            max_hops: self.max_hops.unwrap_or(d.max_hops),
            rechart_margin: self.rechart_margin.unwrap_or(d.rechart_margin),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub manifold: String,
    pub connection: String,
    #[serde(default)]
    pub fields: Vec<String>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub integrator: IntegratorOverrides,
    #[serde(default)]
    pub rng_seed: u64,
    /// Tolerance on the Killing residual, used by `killing_residual` and by
    /// every check that builds `exp(ξ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_kill: Option<f64>,
    /// Multiplies every check tolerance.
    #[serde(default = "one")]
    pub tol_scale: f64,
}

impl Scenario {
    /// Parses and validates scenario text. `origin` names the source in errors.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    /// Names resolve in the catalog and tolerances are positive.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let entry = self.entry()?;
        self.connection_in(&entry)?;
        self.fields_in(&entry, &self.fields)?;
        for check in &self.checks {
            if let Some(fields) = &check.fields {
                self.fields_in(&entry, fields)?;
            }
            if let Some(t) = check.tolerance {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(HarnessError::InvalidParameter { what: format!("tolerance of `{}`", check.display_name()), value: t });
                }
            }
            if let Some(h) = check.horizon {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(HarnessError::InvalidParameter { what: format!("horizon of `{}`", check.display_name()), value: h });
                }
            }
        }
        for (what, v) in [("tol_kill", self.tol_kill.unwrap_or(1.0)), ("tol_scale", self.tol_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::InvalidParameter { what: what.to_string(), value: v });
            }
        }
        let cfg = self.integrator_config();
        if !(cfg.step > 0.0 && cfg.step.is_finite()) {
            return Err(HarnessError::InvalidParameter { what: "integrator.step".into(), value: cfg.step });
        }
        if !(0.0..0.5).contains(&cfg.rechart_margin) {
            return Err(HarnessError::InvalidParameter { what: "integrator.rechart_margin".into(), value: cfg.rechart_margin });
        }
        Ok(())
    }

    pub fn entry(&self) -> Result<ManifoldEntry, HarnessError> {
        catalog::lookup(&self.manifold).ok_or_else(|| HarnessError::UnknownCatalogName { kind: "manifold", name: self.manifold.clone() })
    }

    pub fn connection_in<'a>(&self, entry: &'a ManifoldEntry) -> Result<&'a ConnectionField, HarnessError> {
        entry
            .connection(&self.connection)
            .ok_or_else(|| HarnessError::UnknownCatalogName { kind: "connection", name: self.connection.clone() })
    }

    pub fn fields_in(&self, entry: &ManifoldEntry, names: &[String]) -> Result<Vec<VectorFieldSpec>, HarnessError> {
        names
            .iter()
            .map(|n| entry.field(n).cloned().ok_or_else(|| HarnessError::UnknownCatalogName { kind: "field", name: n.clone() }))
            .collect()
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        self.integrator.resolve()
    }

    /// Tolerance in force for a check after defaults, `tol_kill` and `tol_scale`.
    pub fn tolerance(&self, check: &CheckSpec) -> f64 {
        let base = match (check.tolerance, self.tol_kill) {
            (Some(t), _) => t,
            (None, Some(k)) if check.kind.uses_tol_kill() => k,
            (None, _) => check.kind.default_tolerance(),
        };
        if check.kind.is_count() {
            base
        } else {
            base * self.tol_scale
        }
    }

    pub fn tol_kill(&self) -> f64 {
        self.tol_kill.unwrap_or(affine_core::automorphism::TOL_KILL)
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.display().to_string(), source: e })?;
    Scenario::from_json(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::from_json(r#"{"manifold": "sphere", "connection": "round"}"#, "inline").unwrap();
        assert!(s.checks.is_empty() && s.fields.is_empty());
        assert_eq!(s.rng_seed, 0);
        assert_eq!(s.tol_scale, 1.0);
        assert_eq!(s.integrator_config(), IntegratorConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = Scenario::from_json("{\n  \"manifold\": \"sphere\",\n  \"connection\": \"round\",\n  \"colour\": 3\n}", "inline").unwrap_err();
        match err {
            HarnessError::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_names_are_reported() {
        let err = Scenario::from_json(r#"{"manifold": "torus5", "connection": "flat"}"#, "inline").unwrap_err();
        assert!(matches!(err, HarnessError::UnknownCatalogName { kind: "manifold", .. }));
        let err = Scenario::from_json(r#"{"manifold": "sphere", "connection": "round", "fields": ["L4"]}"#, "inline").unwrap_err();
        assert!(matches!(err, HarnessError::UnknownCatalogName { kind: "field", .. }));
    }

    #[test]
    fn tolerance_resolution() {
        let mut s = Scenario::from_json(
            r#"{"manifold": "sphere", "connection": "round", "tol_kill": 1e-20,
                "checks": [{"kind": "killing_residual"}, {"kind": "lift_bracket", "tolerance": 0.5}]}"#,
            "inline",
        )
        .unwrap();
        assert_eq!(s.tolerance(&s.checks[0]), 1e-20);
        assert_eq!(s.tolerance(&s.checks[1]), 0.5);
        s.tol_scale = 2.0;
        assert_eq!(s.tolerance(&s.checks[1]), 1.0);
        assert_eq!(s.tolerance(&CheckSpec::new(CheckKind::GramRank)), 0.5);
        let bad = r#"{"manifold": "sphere", "connection": "round", "checks": [{"kind": "gram_rank", "tolerance": -1}]}"#;
        assert!(matches!(Scenario::from_json(bad, "inline"), Err(HarnessError::InvalidParameter { .. })));
    }
}
