//! Machine-readable experiment reports.
//!
//! Reports serialize to JSON with deterministic field order; given the same
//! config and seed the body is byte-identical up to the wall-time field.
//! Tables destined for plotting are emitted as CSV with a fixed header.

use serde::{Deserialize, Serialize};

/// One verification inside an experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl CheckRecord {
    /// A check that passes when the residual does not exceed the tolerance.
    pub fn upper_bound(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            detail: None,
        }
    }

    /// A check that passes when the measured value reaches the threshold.
    pub fn lower_bound(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            residual: measured,
            tolerance: threshold,
            pass: measured >= threshold,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Environment {
    pub package_version: String,
    pub float_precision: String,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            float_precision: "f64".to_string(),
        }
    }
}

/// Result of one experiment: the config echo, the per-check records, and an
/// overall verdict that is the conjunction of the per-check verdicts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub config: serde_json::Value,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    pub environment: Environment,
    pub wall_time_ms: u128,
}

impl Report {
    pub fn new(config: serde_json::Value, checks: Vec<CheckRecord>, wall_time_ms: u128) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            config,
            checks,
            pass,
            environment: Environment::default(),
            wall_time_ms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Aggregate over a sweep; experiments keep their config order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub experiments: Vec<Report>,
    pub pass: bool,
    pub failed: Vec<usize>,
}

impl SweepReport {
    pub fn new(experiments: Vec<Report>) -> Self {
        let failed: Vec<usize> = experiments
            .iter()
            .enumerate()
            .filter_map(|(k, r)| (!r.pass).then_some(k))
            .collect();
        Self {
            pass: failed.is_empty(),
            failed,
            experiments,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Fixed-header CSV of convergence rows across a sweep, keyed by the
/// experiment index.
pub fn convergence_csv(rows: &[(usize, f64, f64, f64)]) -> String {
    let mut out = String::from("experiment,h,covariance_diag_error,interpolation_error\n");
    for (idx, h, cov, interp) in rows {
        out.push_str(&format!("{idx},{h:?},{cov:?},{interp:?}\n"));
    }
    out
}
