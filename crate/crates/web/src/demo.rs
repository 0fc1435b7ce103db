//! Plain-Rust bodies of the exported functions, usable and testable off the browser.

use catsim::analysis::{fidelity_surface, DEFAULT_ALPHA_RANGE};
use catsim::fock::wigner;
use catsim::gauss::{predict_states, LossCorrection, PredictionConfig, PredictionRecord};
use catsim::{Error, Result};

/// Fock truncation used throughout the demo.
pub const N_MAX: usize = 15;
pub const MAX_GRID_POINTS: usize = 401;

pub fn parse_correction(name: &str) -> Result<LossCorrection> {
    match name {
        "none" => Ok(LossCorrection::None),
        "homodyne" => Ok(LossCorrection::Homodyne),
        "full" => Ok(LossCorrection::Full),
        other => Err(Error::InvalidArgument(format!("unknown correction {other:?} (none, homodyne, full)"))),
    }
}

fn config(xi: f64, correction: &str) -> Result<PredictionConfig> {
    Ok(PredictionConfig { xi, correction: parse_correction(correction)?, ..Default::default() })
}

pub fn predict_table(powers: &[f64], xi: f64, correction: &str) -> Result<Vec<PredictionRecord>> {
    if powers.is_empty() {
        return Err(Error::InvalidArgument("no pump powers given".into()));
    }
    let cfg = config(xi, correction)?;
    powers.iter().map(|&p| predict_states(p, &cfg, N_MAX)?.record(xi)).collect()
}

/// Wigner function of the predicted state on a `points`×`points` grid over
/// `[-extent, extent]²`, row-major with `p` along rows and `x` along columns.
pub fn wigner_grid(power: f64, xi: f64, correction: &str, extent: f64, points: usize) -> Result<Vec<f64>> {
    if !(extent > 0.0) || !(2..=MAX_GRID_POINTS).contains(&points) {
        return Err(Error::InvalidArgument(format!(
            "grid needs extent > 0 and 2..={MAX_GRID_POINTS} points, got {extent} and {points}"
        )));
    }
    let cfg = config(xi, correction)?;
    let rho = predict_states(power, &cfg, N_MAX)?.density(xi)?;
    let axis: Vec<f64> = (0..points).map(|i| -extent + 2.0 * extent * i as f64 / (points - 1) as f64).collect();
    Ok(axis.iter().flat_map(|&p| axis.iter().map(|&x| wigner(&rho, x, p)).collect::<Vec<_>>()).collect())
}

/// Best odd-cat fidelity of an ideally squeezed single photon, against squeezing in dB.
pub fn fidelity_curve(alpha: f64, db_max: f64, points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = DEFAULT_ALPHA_RANGE;
    if !(lo..=hi).contains(&alpha) || !(db_max > 0.0) || points < 2 {
        return Err(Error::InvalidArgument(format!(
            "need alpha in [{lo}, {hi}], db_max > 0 and at least 2 points, got {alpha}, {db_max}, {points}"
        )));
    }
    let dbs: Vec<f64> = (1..=points).map(|i| db_max * i as f64 / points as f64).collect();
    Ok(fidelity_surface(&dbs, &[alpha], N_MAX)?.into_iter().map(|row| row[0]).collect())
}
