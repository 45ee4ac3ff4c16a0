//! Declarative experiment configuration.
//!
//! One experiment per JSON record, tagged by the `experiment` field;
//! command-line flags override individual fields of the record. Every
//! tolerance must be strictly positive, and any experiment that samples
//! requires an explicit seed.

use serde::{Deserialize, Serialize};

fn default_true() -> bool {
    true
}

fn default_quad_order() -> usize {
    8
}

fn default_projective_tolerance() -> f64 {
    1e-8
}

fn default_isometry_tolerance() -> f64 {
    1e-12
}

fn default_covariance_tolerance() -> f64 {
    1e-6
}

fn default_slack_tolerance() -> f64 {
    1e-12
}

fn default_order_threshold() -> f64 {
    1.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentConfig {
    /// Exact integer cochain-map identity between levels j < i.
    CochainMap { d: usize, i: u32, j: u32 },

    /// Covariance transport residual of the Gaussian family between levels.
    Projective {
        d: usize,
        i: u32,
        j: u32,
        #[serde(default = "default_projective_tolerance")]
        tolerance: f64,
        /// With `false`, checks the unrenormalized family instead (the
        /// negative control; expected to fail for d >= 2).
        #[serde(default = "default_true")]
        renormalized: bool,
    },

    /// Monte-Carlo witness of the pushforward identity.
    McPushforward {
        d: usize,
        i: u32,
        j: u32,
        samples: usize,
        seed: u64,
        /// Defaults to max(0.05, 10/sqrt(samples)).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },

    /// Mass-matrix isometry of the bonding map between nested meshes.
    WhitneyIsometry {
        geometry: GeometryConfig,
        coarse_n: usize,
        fine_n: usize,
        #[serde(default = "default_isometry_tolerance")]
        tolerance: f64,
    },

    /// Inductive-system identity of the compressed covariances.
    CovarianceConsistency {
        geometry: GeometryConfig,
        coarse_n: usize,
        fine_n: usize,
        #[serde(default = "default_quad_order")]
        quad_order: usize,
        #[serde(default = "default_covariance_tolerance")]
        tolerance: f64,
    },

    /// Convergence table over a nested mesh sequence.
    Convergence {
        geometry: GeometryConfig,
        mesh_sizes: Vec<usize>,
        #[serde(default = "default_quad_order")]
        quad_order: usize,
        #[serde(default = "default_order_threshold")]
        order_threshold: f64,
    },

    /// Gaussian equicontinuity bound over random pairs.
    Equicontinuity {
        d: usize,
        i: u32,
        pairs: usize,
        seed: u64,
        /// Allowed negative slack, as a positive magnitude.
        #[serde(default = "default_slack_tolerance")]
        tolerance: f64,
    },
}

/// Mesh geometry description shared by the Whitney experiments.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GeometryConfig {
    /// "circle" or "line".
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circumference: Option<f64>,
    /// Windows for line geometry; the coarse window must sit inside the
    /// fine one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_window: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_window: Option<(f64, f64)>,
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::CochainMap { .. } => "cochain-map",
            Self::Projective { .. } => "projective",
            Self::McPushforward { .. } => "mc-pushforward",
            Self::WhitneyIsometry { .. } => "whitney-isometry",
            Self::CovarianceConsistency { .. } => "covariance-consistency",
            Self::Convergence { .. } => "convergence",
            Self::Equicontinuity { .. } => "equicontinuity",
        }
    }

    /// Field-level validation beyond what the deserializer enforces.
    pub fn validate(&self) -> Result<(), String> {
        let check_tol = |t: f64, name: &str| {
            if t > 0.0 && t.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be strictly positive, got {t}"))
            }
        };
        let check_levels = |i: u32, j: u32| {
            if j >= 1 && j < i {
                Ok(())
            } else {
                Err(format!("levels must satisfy 1 <= j < i, got i={i}, j={j}"))
            }
        };
        match self {
            Self::CochainMap { d, i, j } => {
                if *d == 0 {
                    return Err("d must be at least 1".into());
                }
                check_levels(*i, *j)
            }
            Self::Projective {
                d, i, j, tolerance, ..
            } => {
                if *d == 0 {
                    return Err("d must be at least 1".into());
                }
                check_levels(*i, *j)?;
                check_tol(*tolerance, "tolerance")
            }
            Self::McPushforward {
                d,
                i,
                j,
                samples,
                tolerance,
                ..
            } => {
                if *d == 0 {
                    return Err("d must be at least 1".into());
                }
                check_levels(*i, *j)?;
                if *samples < 10_000 {
                    return Err(format!("samples must be at least 10000, got {samples}"));
                }
                if let Some(t) = tolerance {
                    check_tol(*t, "tolerance")?;
                }
                Ok(())
            }
            Self::WhitneyIsometry {
                geometry,
                coarse_n,
                fine_n,
                tolerance,
            } => {
                geometry.validate()?;
                check_tol(*tolerance, "tolerance")?;
                if coarse_n >= fine_n {
                    return Err("coarse_n must be smaller than fine_n".into());
                }
                Ok(())
            }
            Self::CovarianceConsistency {
                geometry,
                coarse_n,
                fine_n,
                quad_order,
                tolerance,
            } => {
                geometry.validate()?;
                check_tol(*tolerance, "tolerance")?;
                if *quad_order < 2 {
                    return Err("quad_order must be at least 2".into());
                }
                if coarse_n >= fine_n {
                    return Err("coarse_n must be smaller than fine_n".into());
                }
                Ok(())
            }
            Self::Convergence {
                geometry,
                mesh_sizes,
                quad_order,
                order_threshold,
            } => {
                geometry.validate()?;
                if mesh_sizes.len() < 3 {
                    return Err("convergence needs at least 3 mesh sizes".into());
                }
                if mesh_sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("mesh sizes must be strictly increasing".into());
                }
                if *quad_order < 2 {
                    return Err("quad_order must be at least 2".into());
                }
                check_tol(*order_threshold, "order_threshold")
            }
            Self::Equicontinuity {
                d,
                i,
                pairs,
                tolerance,
                ..
            } => {
                if *d == 0 || *i == 0 {
                    return Err("d and i must be at least 1".into());
                }
                if *pairs == 0 {
                    return Err("pairs must be at least 1".into());
                }
                check_tol(*tolerance, "tolerance")
            }
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), String> {
        match self.kind.as_str() {
            "circle" => match self.circumference {
                Some(l) if l > 0.0 && l.is_finite() => Ok(()),
                _ => Err("circle geometry requires a positive circumference".into()),
            },
            "line" => {
                let ok = |w: Option<(f64, f64)>| matches!(w, Some((a, b)) if a < b);
                if !ok(self.coarse_window) || !ok(self.fine_window) {
                    return Err(
                        "line geometry requires coarse_window and fine_window with a < b".into(),
                    );
                }
                Ok(())
            }
            other => Err(format!(
                "unknown geometry kind '{other}' (expected 'circle' or 'line')"
            )),
        }
    }
}

/// Command-line overrides applied on top of a config record.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub i: Option<u32>,
    #[arg(long)]
    pub j: Option<u32>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub quad_order: Option<usize>,
    #[arg(long)]
    pub coarse_n: Option<usize>,
    #[arg(long)]
    pub fine_n: Option<usize>,
    #[arg(long)]
    pub pairs: Option<usize>,
}

impl Overrides {
    /// Applies the overrides to a raw JSON record; re-parsing afterwards
    /// reports stale or inapplicable fields as usage errors.
    pub fn apply(&self, record: &mut serde_json::Value) -> Result<(), String> {
        let obj = record
            .as_object_mut()
            .ok_or("experiment record must be a JSON object")?;
        let mut set = |key: &str, value: Option<serde_json::Value>| {
            if let Some(v) = value {
                obj.insert(key.to_string(), v);
            }
        };
        set("d", self.d.map(Into::into));
        set("i", self.i.map(Into::into));
        set("j", self.j.map(Into::into));
        set("samples", self.samples.map(Into::into));
        set("seed", self.seed.map(Into::into));
        set("tolerance", self.tolerance.map(|t| serde_json::json!(t)));
        set("quad_order", self.quad_order.map(Into::into));
        set("coarse_n", self.coarse_n.map(Into::into));
        set("fine_n", self.fine_n.map(Into::into));
        set("pairs", self.pairs.map(Into::into));
        Ok(())
    }
}

/// Parses a single experiment record after applying overrides.
pub fn parse_experiment(
    mut record: serde_json::Value,
    overrides: &Overrides,
) -> Result<ExperimentConfig, String> {
    overrides.apply(&mut record)?;
    let config: ExperimentConfig =
        serde_json::from_value(record).map_err(|e| format!("invalid experiment record: {e}"))?;
    config.validate()?;
    Ok(config)
}
