//! Wigner functions as signed mixtures of two-dimensional Gaussians.
//!
//! Every operation of the heralded photon-subtraction model (squeezing, tap
//! beamsplitter with on/off click, loss, modal-purity mixing) maps such a
//! mixture to another one in closed form. Units follow [`crate::fock`]:
//! vacuum covariance `I/2`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::analysis::{cat_fidelity_max, CatFit, DEFAULT_ALPHA_RANGE};
use crate::error::{check_unit_interval, Error, Result};
use crate::fock::{DensityMatrix, MIN_HERALD_PROBABILITY};
use crate::quad::hermite_functions_into;
use crate::C64;

const WEIGHT_TOL: f64 = 1e-9;
const QUADRATURE_DRIFT_TOL: f64 = 1e-5;
/// Projections losing more population than this above `n_max` are rejected.
pub const MAX_PROJECTION_TAIL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self> {
        if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 {
            return Err(Error::InvalidArgument("covariance must be symmetric".into()));
        }
        if !(cov[(0, 0)] > 0.0) || !(cov.determinant() > 0.0) {
            return Err(Error::InvalidArgument("covariance must be positive definite".into()));
        }
        Ok(Self { weight, mean, cov })
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        let d = Vector2::new(x, p) - self.mean;
        let det = self.cov.determinant();
        let inv = self.cov.try_inverse().expect("positive definite covariance");
        self.weight * (-0.5 * d.dot(&(inv * d))).exp() / (2.0 * PI * det.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianMixtureWigner {
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixtureWigner {
    pub fn vacuum() -> Self {
        Self {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean: Vector2::zeros(),
                cov: Matrix2::identity() * 0.5,
            }],
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        self.components.iter().map(|c| c.eval(x, p)).sum()
    }

    fn check_normalized(&self) -> Result<()> {
        let w = self.total_weight();
        if (w - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {w}, expected 1")));
        }
        Ok(())
    }

    fn scaled(&self, factor: f64) -> impl Iterator<Item = GaussianComponent> + '_ {
        self.components.iter().map(move |c| GaussianComponent { weight: c.weight * factor, ..*c })
    }
}

/// Squeezed (possibly mixed) Gaussian state from shot-noise-normalized
/// variances: covariance `diag(V_x/2, V_p/2)`.
pub fn squeezed_wigner(v_x: f64, v_p: f64) -> Result<GaussianMixtureWigner> {
    if !(v_x > 0.0 && v_p > 0.0) {
        return Err(Error::InvalidArgument(format!("variances must be positive, got {v_x}, {v_p}")));
    }
    if v_x * v_p < 1.0 - 1e-9 {
        return Err(Error::UncertaintyViolation { vx: v_x, vp: v_p });
    }
    Ok(GaussianMixtureWigner {
        components: vec![GaussianComponent {
            weight: 1.0,
            mean: Vector2::zeros(),
            cov: Matrix2::new(v_x / 2.0, 0.0, 0.0, v_p / 2.0),
        }],
    })
}

/// Pure squeezed vacuum with squeezing parameter `r` along `x`.
pub fn squeezed_vacuum_wigner(r: f64) -> Result<GaussianMixtureWigner> {
    squeezed_wigner((-2.0 * r).exp(), (2.0 * r).exp())
}

/// Splits the state on a beamsplitter of reflectivity `R` against vacuum and
/// conditions on a click (`1 - |0⟩⟨0|`) in the reflected mode.
///
/// Each input component yields its transmitted marginal minus the
/// no-click-conditioned Gaussian weighted by the vacuum probability of the tap.
/// Returns the renormalized mixture and the click probability.
pub fn subtract_click(
    state: &GaussianMixtureWigner,
    reflectivity: f64,
) -> Result<(GaussianMixtureWigner, f64)> {
    if !(reflectivity > 0.0 && reflectivity < 1.0) {
        return Err(Error::InvalidArgument(format!("tap reflectivity {reflectivity} must be in (0, 1)")));
    }
    state.check_normalized()?;
    let t = (1.0 - reflectivity).sqrt();
    let r = reflectivity.sqrt();
    let half = Matrix2::identity() * 0.5;
    let mut out = Vec::with_capacity(2 * state.components.len());
    let mut click = 0.0;
    for c in &state.components {
        // X1' = t X1 + r X2, X2' = -r X1 + t X2, tap X2 in vacuum.
        let m1 = c.mean * t;
        let m2 = -c.mean * r;
        let g11 = c.cov * (t * t) + half * (r * r);
        let g12 = (half - c.cov) * (t * r);
        let g22 = c.cov * (r * r) + half * (t * t);
        // overlap of the tap marginal with vacuum, 2π ∫ W_tap W_0
        let s = g22 + half;
        let s_inv = s.try_inverse().ok_or_else(|| Error::InvalidArgument("singular covariance".into()))?;
        let p_vac = (-0.5 * m2.dot(&(s_inv * m2))).exp() / s.determinant().sqrt();
        let gain = g12 * s_inv;
        let cond_mean = m1 - gain * m2;
        let cond_cov = g11 - gain * g12.transpose();
        out.push(GaussianComponent { weight: c.weight, mean: m1, cov: g11 });
        out.push(GaussianComponent { weight: -c.weight * p_vac, mean: cond_mean, cov: symmetrize(cond_cov) });
        click += c.weight * (1.0 - p_vac);
    }
    if !(click >= MIN_HERALD_PROBABILITY) {
        return Err(Error::HeraldImpossible { probability: click });
    }
    for c in &mut out {
        c.weight /= click;
    }
    Ok((GaussianMixtureWigner { components: out }, click))
}

/// Modal-purity mixture `Ξ·W_out + (1-Ξ)·W_s`.
pub fn mix_modal_purity(
    heralded: &GaussianMixtureWigner,
    background: &GaussianMixtureWigner,
    xi: f64,
) -> Result<GaussianMixtureWigner> {
    check_unit_interval("modal purity", xi)?;
    heralded.check_normalized()?;
    background.check_normalized()?;
    let components = heralded.scaled(xi).chain(background.scaled(1.0 - xi)).collect();
    Ok(GaussianMixtureWigner { components })
}

/// Loss with efficiency `η`: mean → √η·mean, cov → η·cov + (1-η)/2·I.
pub fn apply_gaussian_loss(state: &GaussianMixtureWigner, eta: f64) -> Result<GaussianMixtureWigner> {
    check_unit_interval("efficiency", eta)?;
    let components = state
        .components
        .iter()
        .map(|c| GaussianComponent {
            weight: c.weight,
            mean: c.mean * eta.sqrt(),
            cov: c.cov * eta + Matrix2::identity() * ((1.0 - eta) / 2.0),
        })
        .collect();
    Ok(GaussianMixtureWigner { components })
}

fn symmetrize(m: Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Fock-basis density matrix of a normalized mixture, truncated at `n_max`
/// and renormalized.
///
/// Each component's position-space kernel `ρ(x, x') = ∫ W((x+x')/2, p) e^{ip(x-x')} dp`
/// is Gaussian in closed form; `ρ_mn = ∫∫ ψ_m(x) ρ(x, x') ψ_n(x') dx dx'` is
/// then evaluated by the trapezoid rule, which converges geometrically for
/// these integrands.
pub fn mixture_to_fock(state: &GaussianMixtureWigner, n_max: usize) -> Result<DensityMatrix> {
    Ok(mixture_to_fock_with_tail(state, n_max)?.0)
}

/// As [`mixture_to_fock`], also returning the population above `n_max`.
pub fn mixture_to_fock_with_tail(state: &GaussianMixtureWigner, n_max: usize) -> Result<(DensityMatrix, f64)> {
    state.check_normalized()?;
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let mut half_width = (2.0 * n_max as f64 + 1.0).sqrt() + 7.0;
    let mut step: f64 = 0.05;
    for c in &state.components {
        let a = c.cov[(0, 0)];
        let s2 = c.cov[(1, 1)] - c.cov[(0, 1)].powi(2) / a;
        half_width = half_width.max(c.mean[0].abs() + 9.0 * a.sqrt());
        step = step.min(0.25 * a.sqrt()).min(0.25 / s2.sqrt());
    }
    let npts = (2.0 * half_width / step).ceil() as usize + 1;
    let xs: Vec<f64> = (0..npts).map(|i| -half_width + i as f64 * step).collect();

    let mut kernel = DMatrix::<C64>::zeros(npts, npts);
    for c in &state.components {
        let a = c.cov[(0, 0)];
        let slope = c.cov[(0, 1)] / a;
        let s2 = c.cov[(1, 1)] - c.cov[(0, 1)] * slope;
        let norm = c.weight / (2.0 * PI * a).sqrt();
        for (j, &xp) in xs.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let centre = 0.5 * (x + xp) - c.mean[0];
                let y = x - xp;
                let envelope = -0.5 * centre * centre / a - 0.5 * y * y * s2;
                if envelope < -745.0 {
                    continue;
                }
                let phase = y * (c.mean[1] + slope * centre);
                kernel[(i, j)] += C64::from_polar(norm * envelope.exp(), phase);
            }
        }
    }
    let diag_mass: f64 = (0..npts).map(|i| kernel[(i, i)].re).sum::<f64>() * step;
    let drift = (diag_mass - 1.0).abs();
    if drift > QUADRATURE_DRIFT_TOL {
        return Err(Error::QuadratureFailure { drift });
    }

    let d = n_max + 1;
    let mut psi = DMatrix::<C64>::zeros(npts, d);
    let mut buf = Vec::with_capacity(d);
    for (i, &x) in xs.iter().enumerate() {
        hermite_functions_into(x, n_max, &mut buf);
        for n in 0..d {
            psi[(i, n)] = C64::from(buf[n]);
        }
    }
    let rho = psi.transpose() * kernel * &psi * C64::from(step * step);
    let tail = 1.0 - rho.trace().re;
    if tail > MAX_PROJECTION_TAIL {
        return Err(Error::Truncation { n_max, tail });
    }
    let rho = DensityMatrix::normalized(rho)?;
    rho.validate(-1e-6)?;
    Ok((rho, tail))
}

/// How the transmitted state is degraded between the tap and the homodyne detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectionModel {
    /// The efficiency seen by the squeezing measurement, with the tap
    /// transmission (modeled explicitly by the beamsplitter) divided out.
    #[default]
    MeasuredSqueezing,
    /// Only the homodyne efficiency budget.
    HomodyneBudget,
}

/// Which losses are removed from the predicted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossCorrection {
    #[default]
    None,
    /// Divide out the homodyne efficiency only.
    Homodyne,
    /// Divide out every detection loss; only the tap itself remains.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionConfig {
    /// r = gain_c·√P_p, P_p in mW.
    pub gain_c: f64,
    pub tap_reflectivity: f64,
    pub eta_hd: f64,
    pub eta_bs: f64,
    /// Total efficiency from the squeezing measurement.
    pub eta_squeezing: f64,
    pub xi: f64,
    pub detection: DetectionModel,
    pub correction: LossCorrection,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            gain_c: 0.28,
            tap_reflectivity: 0.077,
            eta_hd: 0.77,
            eta_bs: 0.92,
            eta_squeezing: 0.62,
            xi: 1.0,
            detection: DetectionModel::MeasuredSqueezing,
            correction: LossCorrection::None,
        }
    }
}

impl PredictionConfig {
    pub fn squeezing_parameter(&self, pump_power_mw: f64) -> f64 {
        self.gain_c * pump_power_mw.sqrt()
    }

    /// Efficiency applied after the herald, before any correction.
    pub fn detection_efficiency(&self) -> f64 {
        match self.detection {
            DetectionModel::MeasuredSqueezing => self.eta_squeezing / self.eta_bs,
            DetectionModel::HomodyneBudget => self.eta_hd,
        }
    }

    /// Efficiency applied after the herald once the selected correction is removed.
    pub fn post_herald_efficiency(&self) -> f64 {
        match self.correction {
            LossCorrection::None => self.detection_efficiency(),
            LossCorrection::Homodyne => (self.detection_efficiency() / self.eta_hd).min(1.0),
            LossCorrection::Full => 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gain_c > 0.0) {
            return Err(Error::InvalidArgument(format!("gain coefficient {} must be > 0", self.gain_c)));
        }
        check_unit_interval("eta_hd", self.eta_hd)?;
        check_unit_interval("eta_bs", self.eta_bs)?;
        check_unit_interval("eta_squeezing", self.eta_squeezing)?;
        check_unit_interval("xi", self.xi)?;
        check_unit_interval("detection efficiency", self.detection_efficiency())?;
        if self.eta_hd == 0.0 {
            return Err(Error::InvalidArgument("eta_hd must be > 0".into()));
        }
        Ok(())
    }
}

/// One row of a prediction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub pump_power_mw: f64,
    pub f_odd: f64,
    pub alpha: f64,
    pub w00: f64,
    pub success_prob: f64,
    pub xi: f64,
    /// Efficiency applied after the herald.
    pub eta_post: f64,
    /// Orientation of the best-matching cat in phase space.
    pub cat_phase: f64,
    pub alpha_at_boundary: bool,
}

/// The heralded and unconditioned parts of a prediction, after losses.
/// Modal-purity mixing is linear, so any Ξ can be evaluated from these.
#[derive(Debug, Clone)]
pub struct PredictedStates {
    pub pump_power_mw: f64,
    pub heralded: GaussianMixtureWigner,
    pub background: GaussianMixtureWigner,
    pub heralded_fock: DensityMatrix,
    pub background_fock: DensityMatrix,
    pub success_prob: f64,
    pub eta_post: f64,
}

impl PredictedStates {
    pub fn mixture(&self, xi: f64) -> Result<GaussianMixtureWigner> {
        mix_modal_purity(&self.heralded, &self.background, xi)
    }

    pub fn density(&self, xi: f64) -> Result<DensityMatrix> {
        self.heralded_fock.blend(&self.background_fock, xi)
    }

    pub fn w00(&self, xi: f64) -> f64 {
        xi * self.heralded.eval(0.0, 0.0) + (1.0 - xi) * self.background.eval(0.0, 0.0)
    }

    pub fn record(&self, xi: f64) -> Result<PredictionRecord> {
        let rho = self.density(xi)?;
        let CatFit { fidelity, alpha, phase, at_boundary } = cat_fidelity_max(&rho, DEFAULT_ALPHA_RANGE)?;
        Ok(PredictionRecord {
            pump_power_mw: self.pump_power_mw,
            f_odd: fidelity,
            alpha,
            w00: self.w00(xi),
            success_prob: self.success_prob,
            xi,
            eta_post: self.eta_post,
            cat_phase: phase,
            alpha_at_boundary: at_boundary,
        })
    }
}

/// Runs squeezing → tap and herald → loss for one pump power.
pub fn predict_states(pump_power_mw: f64, cfg: &PredictionConfig, n_max: usize) -> Result<PredictedStates> {
    if !(pump_power_mw > 0.0) {
        return Err(Error::InvalidArgument(format!("pump power {pump_power_mw} mW must be > 0")));
    }
    cfg.validate()?;
    let r = cfg.squeezing_parameter(pump_power_mw);
    let squeezed = squeezed_vacuum_wigner(r)?;
    let (heralded, success_prob) = subtract_click(&squeezed, cfg.tap_reflectivity)?;
    // the state seen when the click is uncorrelated with the measured mode
    let background = apply_gaussian_loss(&squeezed, 1.0 - cfg.tap_reflectivity)?;
    let eta_post = cfg.post_herald_efficiency();
    let heralded = apply_gaussian_loss(&heralded, eta_post)?;
    let background = apply_gaussian_loss(&background, eta_post)?;
    let heralded_fock = mixture_to_fock(&heralded, n_max)?;
    let background_fock = mixture_to_fock(&background, n_max)?;
    Ok(PredictedStates {
        pump_power_mw,
        heralded,
        background,
        heralded_fock,
        background_fock,
        success_prob,
        eta_post,
    })
}

/// Predicted cat-state figures of merit at one pump power.
pub fn predict_state(pump_power_mw: f64, cfg: &PredictionConfig, n_max: usize) -> Result<PredictionRecord> {
    predict_states(pump_power_mw, cfg, n_max)?.record(cfg.xi)
}

/// CSV with the table columns `P_p,F_odd,alpha,w00`.
pub fn write_predictions_csv<W: Write>(writer: W, records: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["P_p", "F_odd", "alpha", "w00"])?;
    for r in records {
        w.write_record([
            r.pump_power_mw.to_string(),
            format!("{:.4}", r.f_odd),
            format!("{:.4}", r.alpha),
            format!("{:.4}", r.w00),
        ])?;
    }
    w.flush()?;
    Ok(())
}
