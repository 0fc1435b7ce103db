use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Fock truncation at n_max = {n_max} leaves tail mass {tail:.3e}")]
    Truncation { n_max: usize, tail: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("herald click probability {probability:.3e} is too small")]
    HeraldImpossible { probability: f64 },

    #[error("variances V_x = {vx}, V_p = {vp} violate V_x V_p >= 1")]
    UncertaintyViolation { vx: f64, vp: f64 },

    #[error("phase-space quadrature lost normalization (drift {drift:.3e})")]
    QuadratureFailure { drift: f64 },

    #[error("fit did not converge within {iterations} iterations")]
    FitDiverged { iterations: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no shot-noise signal for zero local-oscillator photons")]
    NoSignal,

    #[error("trigger rate {trigger} s^-1 does not exceed dark rate {dark} s^-1")]
    DegenerateRates { trigger: f64, dark: f64 },

    #[error("bin variances span [{v_min}, {v_max}], too narrow to resolve a phase")]
    PhaseUnresolvable { v_min: f64, v_max: f64 },

    #[error("loss correction with efficiency {eta} is ill-conditioned (need eta >= 0.5)")]
    IllConditionedCorrection { eta: f64 },

    #[error("no data")]
    EmptyData,

    #[error("reconstruction did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("no modal purity reproduces the measurement (normalized mismatch {mismatch:.3})")]
    NoFit { mismatch: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by malformed or missing input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse(_) | Error::EmptyData
        )
    }

    pub fn is_usage_error(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub(crate) fn check_unit_interval(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::InvalidArgument(format!("{name} = {value} is outside [0, 1]")));
    }
    Ok(())
}
