use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use catsim::gauss::{LossCorrection, PredictionConfig};
use catsim::{Error, Result};
use serde::{Deserialize, Serialize};

/// Experiment constants; every field defaults to the measured setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pump_powers_mw: Vec<f64>,
    /// r = gain_c·√P_p.
    pub gain_c: f64,
    /// Spatial mode overlap of the parametric amplifier.
    pub epsilon: f64,
    #[serde(rename = "tap_R")]
    pub tap_r: f64,
    pub eta_hd: f64,
    /// Efficiency seen by the squeezing measurement.
    pub eta_alt: f64,
    /// Transmission of the tap beamsplitter.
    pub eta_bs: f64,
    /// Modal purity Ξ per pump power, keyed by the power in mW (`"8"`, `"8.0"`).
    pub xi_per_power: Option<BTreeMap<String, f64>>,
    pub n_segments: usize,
    pub n_max: usize,
    pub bin_size: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pump_powers_mw: vec![2.0, 4.0, 6.0, 8.0],
            gain_c: 0.28,
            epsilon: 0.77,
            tap_r: 0.077,
            eta_hd: 0.77,
            eta_alt: 0.62,
            eta_bs: 0.92,
            xi_per_power: None,
            n_segments: 4000,
            n_max: 15,
            bin_size: 100,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    /// Ξ configured for `power`, 1 when none is given.
    pub fn xi_at(&self, power: f64) -> Result<f64> {
        let Some(map) = &self.xi_per_power else { return Ok(1.0) };
        for (key, &xi) in map {
            let p: f64 = key.trim().parse().map_err(|_| Error::Parse(format!("xi_per_power key {key:?} is not a power")))?;
            if (p - power).abs() < 1e-9 {
                return Ok(xi);
            }
        }
        Ok(1.0)
    }

    pub fn prediction(&self, correction: LossCorrection, xi: f64) -> PredictionConfig {
        PredictionConfig {
            gain_c: self.gain_c,
            tap_reflectivity: self.tap_r,
            eta_hd: self.eta_hd,
            eta_bs: self.eta_bs,
            eta_squeezing: self.eta_alt,
            xi,
            correction,
            ..Default::default()
        }
    }
}
