//! Scalar calibration models (frequency doubling, parametric gain, squeezing,
//! homodyne noise budget) and least-squares fits of their parameters.

use std::collections::BTreeMap;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::simplex::{minimize, SimplexOptions};

/// Total efficiency inferred from the measured squeezing/anti-squeezing.
pub const MEASURED_SQUEEZING_EFFICIENCY: f64 = 0.62;
/// Efficiency from the homodyne loss budget.
pub const HOMODYNE_BUDGET_EFFICIENCY: f64 = 0.77;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainModelParams {
    /// r = c·√P_p with P_p in mW.
    pub c: f64,
    /// Spatial overlap between seed and squeezed mode.
    pub epsilon: f64,
}

impl Default for GainModelParams {
    fn default() -> Self {
        Self { c: 0.28, epsilon: 0.77 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShgModelParams {
    pub eta_inf: f64,
    pub g: f64,
}

impl Default for ShgModelParams {
    fn default() -> Self {
        Self { eta_inf: 0.53, g: 0.18 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub gain_mv2_per_1e6_photons: f64,
    pub elec_noise_mv2: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self { gain_mv2_per_1e6_photons: 13.6, elec_noise_mv2: 3.7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    pub eta_op: f64,
    pub eta_mm: f64,
    pub eta_ph: f64,
    pub eta_el: f64,
}

impl Default for EfficiencyBudget {
    fn default() -> Self {
        Self { eta_op: 0.90, eta_mm: 0.95, eta_ph: 0.95, eta_el: 0.995 }
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) {
        return Err(Error::InvalidArgument(format!("{name} = {v} must be >= 0")));
    }
    Ok(())
}

/// Frequency-doubling efficiency `η∞ tanh²(g √P_F)`.
pub fn shg_efficiency(p_fundamental_mw: f64, p: ShgModelParams) -> Result<f64> {
    check_nonnegative("fundamental power", p_fundamental_mw)?;
    if !(p.eta_inf > 0.0 && p.g > 0.0) {
        return Err(Error::InvalidArgument("SHG parameters must be positive".into()));
    }
    let eta = p.eta_inf * (p.g * p_fundamental_mw.sqrt()).tanh().powi(2);
    check_unit_interval("SHG efficiency", eta)?;
    Ok(eta)
}

/// Seed de-amplification and amplification `(g_min, g_max)`; the fraction `ε`
/// of the seed overlapping the squeezed mode sees `e^{∓2r}`, the rest is unchanged.
pub fn parametric_gain(p_pump_mw: f64, p: GainModelParams) -> Result<(f64, f64)> {
    check_nonnegative("pump power", p_pump_mw)?;
    check_unit_interval("spatial overlap", p.epsilon)?;
    if !(p.c > 0.0) {
        return Err(Error::InvalidArgument(format!("gain coefficient {} must be > 0", p.c)));
    }
    let r = p.c * p_pump_mw.sqrt();
    let e = p.epsilon;
    Ok((e * (-2.0 * r).exp() + 1.0 - e, e * (2.0 * r).exp() + 1.0 - e))
}

/// Squeezed and anti-squeezed variances in shot-noise units after efficiency `η`.
pub fn squeezing_variance(p_pump_mw: f64, c: f64, eta: f64) -> Result<(f64, f64)> {
    let (vmin, vmax) = parametric_gain(p_pump_mw, GainModelParams { c, epsilon: eta })?;
    Ok((vmin, vmax))
}

/// `η_op η_mm² η_ph η_el`.
pub fn homodyne_efficiency(b: EfficiencyBudget) -> Result<f64> {
    for (name, v) in [("eta_op", b.eta_op), ("eta_mm", b.eta_mm), ("eta_ph", b.eta_ph), ("eta_el", b.eta_el)] {
        check_unit_interval(name, v)?;
    }
    Ok(b.eta_op * b.eta_mm * b.eta_mm * b.eta_ph * b.eta_el)
}

/// Equivalent efficiency of electronic noise `1 - 10^{-clearance/10}`.
pub fn electronic_noise_efficiency(clearance_db: f64) -> Result<f64> {
    check_nonnegative("shot-noise clearance", clearance_db)?;
    Ok(1.0 - 10f64.powf(-clearance_db / 10.0))
}

/// Shot-noise to electronic-noise ratio in dB for `n_lo` photons per pulse.
pub fn shot_noise_clearance(n_lo_photons: f64, d: DetectorModel) -> Result<f64> {
    check_nonnegative("LO photon number", n_lo_photons)?;
    if !(d.gain_mv2_per_1e6_photons > 0.0 && d.elec_noise_mv2 > 0.0) {
        return Err(Error::InvalidArgument("detector gain and noise must be > 0".into()));
    }
    if n_lo_photons == 0.0 {
        return Err(Error::NoSignal);
    }
    Ok(10.0 * (d.gain_mv2_per_1e6_photons * n_lo_photons / 1e6 / d.elec_noise_mv2).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `(P_F, η)` points, parameters `eta_inf, g`.
    Shg,
    /// `(P_p, g_min, g_max)` points, parameters `c, epsilon`.
    Gain,
    /// `(P_p, V_min, V_max)` points in shot-noise units, parameters `c, eta`.
    Squeezing,
}

impl FitModel {
    pub fn param_names(self) -> [&'static str; 2] {
        match self {
            FitModel::Shg => ["eta_inf", "g"],
            FitModel::Gain => ["c", "epsilon"],
            FitModel::Squeezing => ["c", "eta"],
        }
    }

    fn two_branch(self) -> bool {
        !matches!(self, FitModel::Shg)
    }

    /// Model prediction `(y, y2)` at `x`, or `None` outside the parameter domain.
    pub fn eval(self, params: &[f64], x: f64) -> Option<(f64, f64)> {
        let (a, b) = (params[0], params[1]);
        match self {
            FitModel::Shg => shg_efficiency(x, ShgModelParams { eta_inf: a, g: b }).ok().map(|y| (y, f64::NAN)),
            FitModel::Gain | FitModel::Squeezing => parametric_gain(x, GainModelParams { c: a, epsilon: b }).ok(),
        }
    }

    fn initial_guess(self) -> [f64; 2] {
        match self {
            FitModel::Shg => [0.5, 0.2],
            FitModel::Gain => [0.3, 0.8],
            FitModel::Squeezing => [0.3, 0.6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalPoint {
    pub x: f64,
    pub y: f64,
    /// Second branch (maximum) for two-branch models.
    pub y2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    pub params: BTreeMap<String, f64>,
    pub residual_rms: f64,
    pub n_points: usize,
}

impl FitReport {
    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }
}

fn sum_squares(model: FitModel, params: &[f64], points: &[CalPoint]) -> f64 {
    let mut s = 0.0;
    for pt in points {
        let Some((y, y2)) = model.eval(params, pt.x) else {
            return f64::INFINITY;
        };
        s += (y - pt.y).powi(2);
        if let Some(m2) = pt.y2 {
            s += (y2 - m2).powi(2);
        }
    }
    s
}

/// Least-squares fit of `model` to `points`; two-branch models weight both branches equally.
pub fn fit_curve(model: FitModel, points: &[CalPoint]) -> Result<FitReport> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", points.len())));
    }
    for pt in points {
        check_nonnegative("abscissa", pt.x)?;
        if !pt.y.is_finite() || (model.two_branch() && !pt.y2.is_some_and(f64::is_finite)) {
            return Err(Error::Parse(format!("incomplete calibration point at x = {}", pt.x)));
        }
    }
    let first = points[0].x;
    if points.iter().all(|p| p.x == first) {
        return Err(Error::DegenerateFit("all points share the same abscissa".into()));
    }
    let best = minimize(|p| sum_squares(model, p, points), &model.initial_guess(), &SimplexOptions::default())?;
    let n_residuals = points.len() * if model.two_branch() { 2 } else { 1 };
    let params = model.param_names().iter().zip(&best.x).map(|(k, v)| (k.to_string(), *v)).collect();
    Ok(FitReport {
        model,
        params,
        residual_rms: (best.value / n_residuals as f64).sqrt(),
        n_points: points.len(),
    })
}

/// Model points with multiplicative Gaussian noise of relative size `rel_noise`.
pub fn synthetic_points(model: FitModel, params: [f64; 2], xs: &[f64], rel_noise: f64, seed: u64) -> Result<Vec<CalPoint>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, rel_noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    xs.iter()
        .map(|&x| {
            let (y, y2) = model
                .eval(&params, x)
                .ok_or_else(|| Error::InvalidArgument(format!("{model:?} parameters {params:?} out of domain")))?;
            let y = y * (1.0 + noise.sample(&mut rng));
            let y2 = model.two_branch().then(|| y2 * (1.0 + noise.sample(&mut rng)));
            Ok(CalPoint { x, y, y2 })
        })
        .collect()
}

/// Reads `P,eta` (SHG) or `P,vmin,vmax` (gain, squeezing) CSV data.
pub fn read_points<R: Read>(reader: R, model: FitModel) -> Result<Vec<CalPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let expected: &[&str] = if model.two_branch() { &["P", "vmin", "vmax"] } else { &["P", "eta"] };
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse(format!("expected header {}, found {}", expected.join(","), headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: column {} is not a number", line + 2, i + 1)))
        };
        out.push(CalPoint { x: num(0)?, y: num(1)?, y2: if model.two_branch() { Some(num(2)?) } else { None } });
    }
    if out.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let e = shg_efficiency(33.0, ShgModelParams::default()).unwrap();
        assert!((e - 0.319).abs() < 5e-4, "{e}");
        assert_eq!(shg_efficiency(0.0, ShgModelParams::default()).unwrap(), 0.0);
        assert!((shg_efficiency(1e9, ShgModelParams::default()).unwrap() - 0.53).abs() < 1e-12);

        let (gmin, gmax) = parametric_gain(9.0, GainModelParams::default()).unwrap();
        assert!((gmin - 0.374).abs() < 5e-4 && gmin <= 1.0 && gmax >= 1.0);
        assert_eq!(parametric_gain(0.0, GainModelParams { c: 0.28, epsilon: 1.0 }).unwrap(), (1.0, 1.0));

        let (vmin, vmax) = squeezing_variance(4.0, 0.28, 0.62).unwrap();
        assert!((vmin - 0.582).abs() < 5e-4 && (vmax - 2.280).abs() < 5e-4, "{vmin} {vmax}");
        assert!((10.0 * vmin.log10() + 2.35).abs() < 5e-3);
        assert_eq!(squeezing_variance(4.0, 0.28, 0.0).unwrap(), (1.0, 1.0));

        assert!((homodyne_efficiency(EfficiencyBudget::default()).unwrap() - 0.7678).abs() < 1e-4);
        assert!((electronic_noise_efficiency(23.0).unwrap() - 0.99499).abs() < 1e-5);
        assert_eq!(electronic_noise_efficiency(0.0).unwrap(), 0.0);
        assert!((shot_noise_clearance(70e6, DetectorModel::default()).unwrap() - 24.1).abs() < 0.05);
        assert!((shot_noise_clearance(1e6, DetectorModel::default()).unwrap() - 5.65).abs() < 5e-3);
        assert!(matches!(shot_noise_clearance(0.0, DetectorModel::default()), Err(Error::NoSignal)));
    }

    #[test]
    fn gains_bracket_unity() {
        for &(p, e) in &[(0.5, 0.3), (4.0, 0.77), (9.0, 1.0)] {
            let (a, b) = parametric_gain(p, GainModelParams { c: 0.28, epsilon: e }).unwrap();
            assert!(a * b >= 1.0 - 1e-15);
            if e == 1.0 {
                assert!((a * b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_fits_are_exact() {
        let xs: Vec<f64> = (1..=9).map(f64::from).collect();
        for (model, truth) in [(FitModel::Gain, [0.28, 0.77]), (FitModel::Squeezing, [0.28, 0.62])] {
            let pts = synthetic_points(model, truth, &xs, 0.0, 1).unwrap();
            let rep = fit_curve(model, &pts).unwrap();
            let [a, b] = model.param_names();
            assert!((rep.param(a) / truth[0] - 1.0).abs() < 1e-6);
            assert!((rep.param(b) / truth[1] - 1.0).abs() < 1e-6);
            assert!(rep.residual_rms < 1e-8);
        }
        let xs: Vec<f64> = (1..=20).map(|i| 2.0 * i as f64).collect();
        let pts = synthetic_points(FitModel::Shg, [0.53, 0.18], &xs, 0.0, 1).unwrap();
        let rep = fit_curve(FitModel::Shg, &pts).unwrap();
        assert!((rep.param("eta_inf") / 0.53 - 1.0).abs() < 1e-6);
        assert!((rep.param("g") / 0.18 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        let pt = CalPoint { x: 2.0, y: 0.1, y2: None };
        assert!(matches!(fit_curve(FitModel::Shg, &[pt, pt]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_curve(FitModel::Shg, &[pt, pt, pt]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn csv_parsing() {
        let pts = read_points("P,vmin,vmax\n1,0.8,1.3\n2, 0.7 ,1.6\n".as_bytes(), FitModel::Gain).unwrap();
        assert_eq!(pts[1], CalPoint { x: 2.0, y: 0.7, y2: Some(1.6) });
        assert!(matches!(read_points("P,eta\n".as_bytes(), FitModel::Shg), Err(Error::EmptyData)));
        assert!(matches!(read_points("P,eta\n1,x\n".as_bytes(), FitModel::Shg), Err(Error::Parse(_))));
        assert!(matches!(read_points("P,eta\n1,0.1\n".as_bytes(), FitModel::Gain), Err(Error::Parse(_))));
    }
}
