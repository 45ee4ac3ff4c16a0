//! Experiment dispatch: builds the library objects named by a config record,
//! runs the verification, and assembles the report.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use projfield::cubical::DEFAULT_LEVEL_CAP;
use projfield::gramlin::gram_spectral_norm;
use projfield::projective::{
    check_projective_consistency, cochain_map_residual, dirichlet_spec, equicontinuity_bound_check,
    pushforward_mc_check, renormalized_grams, renormalized_laplacian, ConsistencyRecord,
    GaussianSpec, Tower,
};
use projfield::whitney::{
    check_covariance_consistency, check_iw_isometry, convergence_table, KernelOracle, Mesh1D,
};
use projfield::Error as CoreError;

use crate::config::{ExperimentConfig, GeometryConfig};
use crate::report::{CheckRecord, Report};

/// Environment variable overriding the refinement-level cap.
pub const LEVEL_CAP_ENV: &str = "PROJFIELD_LEVEL_CAP";

#[derive(Debug)]
pub enum RunError {
    /// Invalid configuration; exit code 2.
    Usage(String),
    /// Resource cap exceeded; exit code 3.
    Resource(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Resource(m) => write!(f, "resource error: {m}"),
        }
    }
}

fn lift(err: CoreError) -> RunError {
    match err {
        CoreError::LevelCap { .. } => RunError::Resource(err.to_string()),
        other => RunError::Usage(other.to_string()),
    }
}

/// The refinement-level cap: the library default unless the environment
/// overrides it.
pub fn level_cap() -> Result<u32, RunError> {
    match std::env::var(LEVEL_CAP_ENV) {
        Ok(v) => v.parse::<u32>().map_err(|_| {
            RunError::Usage(format!(
                "{LEVEL_CAP_ENV} must be a non-negative integer, got '{v}'"
            ))
        }),
        Err(_) => Ok(DEFAULT_LEVEL_CAP),
    }
}

fn renormalized_specs(
    d: usize,
    up_to: u32,
    cap: u32,
) -> Result<(Tower, Vec<GaussianSpec>), RunError> {
    let tower = Tower::build_with_cap(d, up_to, cap).map_err(lift)?;
    let rgrams = renormalized_grams(&tower, up_to).map_err(lift)?;
    let specs = (1..=up_to)
        .map(|l| renormalized_laplacian(&tower, &rgrams, l))
        .collect::<projfield::Result<Vec<_>>>()
        .map_err(lift)?;
    Ok((tower, specs))
}

fn build_mesh_pair(
    geometry: &GeometryConfig,
    coarse_n: usize,
    fine_n: usize,
) -> Result<(Mesh1D, Mesh1D, KernelOracle), RunError> {
    match geometry.kind.as_str() {
        "circle" => {
            let l = geometry.circumference.expect("validated");
            let coarse = Mesh1D::uniform_circle(l, coarse_n).map_err(lift)?;
            let fine = Mesh1D::uniform_circle(l, fine_n).map_err(lift)?;
            let oracle = KernelOracle::circle(l).map_err(lift)?;
            Ok((coarse, fine, oracle))
        }
        "line" => {
            let (ca, cb) = geometry.coarse_window.expect("validated");
            let (fa, fb) = geometry.fine_window.expect("validated");
            let coarse = Mesh1D::line_window(ca, cb, coarse_n, true).map_err(lift)?;
            let fine = Mesh1D::line_window(fa, fb, fine_n, true).map_err(lift)?;
            Ok((coarse, fine, KernelOracle::line()))
        }
        _ => unreachable!("validated geometry kind"),
    }
}

/// Runs one experiment and assembles its report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, RunError> {
    let start = Instant::now();
    let cap = level_cap()?;
    let config_echo = serde_json::to_value(config).expect("config serialization cannot fail");
    let checks = match config {
        ExperimentConfig::CochainMap { d, i, j } => {
            let tower = Tower::build_with_cap(*d, *i, cap).map_err(lift)?;
            let p1 = tower.p1_int_composed(*i, *j).map_err(lift)?;
            let p0 = tower.p0_int_composed(*i, *j).map_err(lift)?;
            let residual = cochain_map_residual(
                &p1,
                &tower.complex(*i).coboundary_int(true),
                &tower.complex(*j).coboundary_int(true),
                &p0,
            );
            vec![
                CheckRecord::upper_bound("cochain-map-identity", residual as f64, 0.0).with_detail(
                    serde_json::json!({
                        "fine_summary": tower.complex(*i).summary(),
                        "coarse_summary": tower.complex(*j).summary(),
                    }),
                ),
            ]
        }

        ExperimentConfig::Projective {
            d,
            i,
            j,
            tolerance,
            renormalized,
        } => {
            let (fine, coarse, p0) = if *renormalized {
                let (tower, specs) = renormalized_specs(*d, *i, cap)?;
                let p0 = tower.p0_composed(*i, *j).map_err(lift)?;
                (
                    specs[(*i - 1) as usize].clone(),
                    specs[(*j - 1) as usize].clone(),
                    p0,
                )
            } else {
                let tower = Tower::build_with_cap(*d, *i, cap).map_err(lift)?;
                let fine = dirichlet_spec(tower.complex(*i)).map_err(lift)?;
                let coarse = dirichlet_spec(tower.complex(*j)).map_err(lift)?;
                let p0 = tower.p0_composed(*i, *j).map_err(lift)?;
                (fine, coarse, p0)
            };
            let residual = check_projective_consistency(&fine, &coarse, &p0).map_err(lift)?;
            let record = ConsistencyRecord::new(*d, *i, *j, residual, *tolerance);
            vec![
                CheckRecord::upper_bound("projective-consistency", residual, *tolerance)
                    .with_detail(serde_json::to_value(record).expect("record serializes")),
            ]
        }

        ExperimentConfig::McPushforward {
            d,
            i,
            j,
            samples,
            seed,
            tolerance,
        } => {
            let (tower, specs) = renormalized_specs(*d, *i, cap)?;
            let p0 = tower.p0_composed(*i, *j).map_err(lift)?;
            let tol = tolerance.unwrap_or_else(|| (10.0 / (*samples as f64).sqrt()).max(0.05));
            let err = pushforward_mc_check(
                &specs[(*i - 1) as usize],
                &p0,
                &specs[(*j - 1) as usize],
                *samples,
                *seed,
            )
            .map_err(lift)?;
            vec![CheckRecord::upper_bound("mc-pushforward", err, tol)]
        }

        ExperimentConfig::WhitneyIsometry {
            geometry,
            coarse_n,
            fine_n,
            tolerance,
        } => {
            let (coarse, fine, _) = build_mesh_pair(geometry, *coarse_n, *fine_n)?;
            let residual = check_iw_isometry(&coarse, &fine).map_err(lift)?;
            vec![
                CheckRecord::upper_bound("whitney-isometry", residual, *tolerance).with_detail(
                    serde_json::json!({
                        "coarse_mesh": coarse.summary(),
                        "fine_mesh": fine.summary(),
                    }),
                ),
            ]
        }

        ExperimentConfig::CovarianceConsistency {
            geometry,
            coarse_n,
            fine_n,
            quad_order,
            tolerance,
        } => {
            let (coarse, fine, oracle) = build_mesh_pair(geometry, *coarse_n, *fine_n)?;
            let residual =
                check_covariance_consistency(&coarse, &fine, &oracle, *quad_order).map_err(lift)?;
            vec![CheckRecord::upper_bound(
                "covariance-consistency",
                residual,
                *tolerance,
            )]
        }

        ExperimentConfig::Convergence {
            geometry,
            mesh_sizes,
            quad_order,
            order_threshold,
        } => {
            let (meshes, oracle): (Vec<Mesh1D>, KernelOracle) = match geometry.kind.as_str() {
                "circle" => {
                    let l = geometry.circumference.expect("validated");
                    let meshes = mesh_sizes
                        .iter()
                        .map(|&n| Mesh1D::uniform_circle(l, n))
                        .collect::<projfield::Result<Vec<_>>>()
                        .map_err(lift)?;
                    (meshes, KernelOracle::circle(l).map_err(lift)?)
                }
                "line" => {
                    let (a, b) = geometry
                        .fine_window
                        .or(geometry.coarse_window)
                        .ok_or_else(|| RunError::Usage("line convergence needs a window".into()))?;
                    let meshes = mesh_sizes
                        .iter()
                        .map(|&n| Mesh1D::line_window(a, b, n, true))
                        .collect::<projfield::Result<Vec<_>>>()
                        .map_err(lift)?;
                    (meshes, KernelOracle::line())
                }
                _ => unreachable!("validated geometry kind"),
            };
            let table = convergence_table(&oracle, &meshes, *quad_order).map_err(lift)?;
            let worst_ratio = table
                .rows
                .windows(2)
                .map(|w| {
                    (w[1].covariance_diag_error / w[0].covariance_diag_error)
                        .max(w[1].interpolation_error / w[0].interpolation_error)
                })
                .fold(0.0_f64, f64::max);
            let detail = serde_json::to_value(&table).expect("table serializes");
            vec![
                CheckRecord::upper_bound(
                    "errors-strictly-decreasing",
                    worst_ratio,
                    1.0 - f64::EPSILON,
                )
                .with_detail(detail),
                CheckRecord::lower_bound(
                    "interpolation-order",
                    table.order_interpolation,
                    *order_threshold,
                ),
            ]
        }

        ExperimentConfig::Equicontinuity {
            d,
            i,
            pairs,
            seed,
            tolerance,
        } => {
            let tower = Tower::build_with_cap(*d, *i, cap).map_err(lift)?;
            let rgrams = renormalized_grams(&tower, *i).map_err(lift)?;
            let spec = renormalized_laplacian(&tower, &rgrams, *i).map_err(lift)?;
            let bound = gram_spectral_norm(spec.covariance(), spec.gram()).map_err(lift)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let dim = spec.space_dim();
            let sample_pairs: Vec<(DVector<f64>, DVector<f64>)> = (0..*pairs)
                .map(|_| {
                    (
                        DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0_f64)),
                        DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0_f64)),
                    )
                })
                .collect();
            let slack = equicontinuity_bound_check(&spec, &sample_pairs, bound).map_err(lift)?;
            vec![CheckRecord::lower_bound(
                "equicontinuity-slack",
                slack,
                -*tolerance,
            )]
        }
    };
    Ok(Report::new(
        config_echo,
        checks,
        start.elapsed().as_millis(),
    ))
}
