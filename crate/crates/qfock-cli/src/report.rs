//! Flat verification-report schema: one residual per row, so the JSON and
//! CSV renderings carry identical information and diff cleanly in CI.
//!
//! Reports are byte-stable across identical invocations: no timestamps or
//! timings are serialized (wall-times go to a separate log).

use serde::Serialize;

/// Whether a check passes below or above its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    /// Residual must not exceed the threshold.
    UpperBound,
    /// Certificate must exceed the threshold (e.g. non-unitarity).
    LowerBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub id: String,
    pub block: usize,
    pub norm: String,
    pub value: f64,
    pub threshold: f64,
    pub gate: Gate,
    pub pass: bool,
}

impl CheckRow {
    pub fn upper(id: &str, block: usize, norm: &str, value: f64, threshold: f64) -> Self {
        Self {
            id: id.to_string(),
            block,
            norm: norm.to_string(),
            value,
            threshold,
            gate: Gate::UpperBound,
            pass: value.is_finite() && value <= threshold,
        }
    }

    pub fn lower(id: &str, block: usize, norm: &str, value: f64, threshold: f64) -> Self {
        Self {
            id: id.to_string(),
            block,
            norm: norm.to_string(),
            value,
            threshold,
            gate: Gate::LowerBound,
            pass: value.is_finite() && value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub tool_version: String,
    pub config: serde_json::Value,
    /// Set when any default threshold was overridden on the command line.
    pub non_standard_thresholds: bool,
    pub checks: Vec<CheckRow>,
    pub diagnostics: serde_json::Value,
    #[serde(skip)]
    pub stage_seconds: Vec<(String, f64)>,
}

impl VerificationReport {
    pub fn new(config: serde_json::Value, non_standard: bool) -> Self {
        Self {
            tool_version: format!("qfock {}", env!("CARGO_PKG_VERSION")),
            config,
            non_standard_thresholds: non_standard,
            checks: Vec::new(),
            diagnostics: serde_json::Value::Null,
            stage_seconds: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,block,norm,value,threshold,gate,pass\n");
        for c in &self.checks {
            let gate = match c.gate {
                Gate::UpperBound => "upper-bound",
                Gate::LowerBound => "lower-bound",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.id, c.block, c.norm, c.value, c.threshold, gate, c.pass
            ));
        }
        out
    }
}

/// Default thresholds per check id; overriding any of them marks the
/// report non-standard.
pub fn default_threshold(id: &str) -> Option<(f64, Gate)> {
    use Gate::*;
    let t = match id {
        "ladder.canonical-commutator" => (1e-13, UpperBound),
        "ladder.number-quadrature" => (1e-13, UpperBound),
        "ladder.position-momentum" => (1e-13, UpperBound),
        "flow.unitarity" => (1e-10, UpperBound),
        "flow.group-law" => (1e-12, UpperBound),
        "flow.inverse-adjoint" => (1e-12, UpperBound),
        "flow.position-shift" => (1e-8, UpperBound),
        "flow.generator-commutation" => (1e-12, UpperBound),
        "flow.number-conjugation" => (1e-8, UpperBound),
        "flow.kernel-agreement" => (1e-11, UpperBound),
        "similarity.sylvester-rows" => (1e-10, UpperBound),
        "similarity.recurrence-rows" => (1e-12, UpperBound),
        "similarity.inversion-certificate" => (1e-6, UpperBound),
        "similarity.nonunitarity" => (0.01, LowerBound),
        "pair.deformed-commutator" => (1e-6, UpperBound),
        "pair.split-commutator" => (1e-8, UpperBound),
        "pair.conjugation" => (1e-6, UpperBound),
        "pair.invert-lowering" => (1e-8, UpperBound),
        "pair.invert-raising" => (1e-8, UpperBound),
        "pair.adjoint-defect" => (0.01, LowerBound),
        "pair.adjoint-defect-trivial" => (1e-12, UpperBound),
        "map.bracket-commutator" => (1e-12, UpperBound),
        "map.q-identity" => (1e-14, UpperBound),
        "ode.indicial" => (1e-12, UpperBound),
        "ode.dual-integrator" => (1e-6, UpperBound),
        "ode.infinity-pole" => (5.5, LowerBound),
        _ => return None,
    };
    Some(t)
}
