//! Cat-state figures of merit: optimal odd-cat fidelity, Wigner value at the
//! origin, fidelity surfaces and modal-purity back-fitting.

use std::f64::consts::{FRAC_PI_2, LN_10, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::fock::{odd_cat_coefficients, overlap, photon_distribution, squeezed_vacuum_adaptive, DensityMatrix};
use crate::gauss::{predict_states, PredictionConfig};
use crate::quad::golden_section_max;

pub const DEFAULT_ALPHA_RANGE: (f64, f64) = (0.1, 3.0);
const ALPHA_GRID_STEP: f64 = 0.01;
/// Cat orientations searched: along `x` and along `p`.
const CAT_PHASES: [f64; 2] = [0.0, FRAC_PI_2];
/// Tolerances used to weight the (F_odd, W(0,0)) mismatch when fitting Ξ.
pub const XI_FIT_SCALES: (f64, f64) = (0.03, 0.02);
/// Normalized squared mismatch above which no Ξ is accepted.
pub const XI_NO_FIT_THRESHOLD: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatFit {
    pub fidelity: f64,
    pub alpha: f64,
    /// Phase-space orientation of the best cat (0: along x, π/2: along p).
    pub phase: f64,
    pub at_boundary: bool,
}

fn cat_fidelity(rho: &DensityMatrix, alpha: f64, phase: f64) -> f64 {
    overlap(rho, &odd_cat_coefficients(alpha, phase, rho.n_max()))
}

/// Maximizes `⟨cat_α|ρ|cat_α⟩` over α in `range` (0.01 grid, then golden
/// section) and over the two principal orientations.
pub fn cat_fidelity_max(rho: &DensityMatrix, range: (f64, f64)) -> Result<CatFit> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("invalid α range [{lo}, {hi}]")));
    }
    let steps = ((hi - lo) / ALPHA_GRID_STEP).round() as usize;
    let mut best = CatFit { fidelity: -1.0, alpha: lo, phase: 0.0, at_boundary: false };
    for &phase in &CAT_PHASES {
        for i in 0..=steps {
            let alpha = (lo + i as f64 * ALPHA_GRID_STEP).min(hi);
            let f = cat_fidelity(rho, alpha, phase);
            if f > best.fidelity {
                best = CatFit { fidelity: f, alpha, phase, at_boundary: false };
            }
        }
    }
    let a = (best.alpha - ALPHA_GRID_STEP).max(lo);
    let b = (best.alpha + ALPHA_GRID_STEP).min(hi);
    let (alpha, f) = golden_section_max(|al| cat_fidelity(rho, al, best.phase), a, b, 1e-7);
    if f > best.fidelity {
        best.alpha = alpha;
        best.fidelity = f;
    }
    best.at_boundary = best.alpha - lo < 1e-6 || hi - best.alpha < 1e-6;
    Ok(best)
}

/// `W(0,0) = (1/π) Σ (-1)^n ρ_nn`.
pub fn wigner_origin(rho: &DensityMatrix) -> f64 {
    rho.parity() / PI
}

/// Squeezing parameter for a squeezing level in dB (10·log10 of the variance ratio).
pub fn squeezing_db_to_r(db: f64) -> f64 {
    db * LN_10 / 20.0
}

/// Smallest truncation whose coherent-state tail beyond it is below 1e-16.
fn cat_levels(alpha: f64) -> usize {
    let mean = alpha * alpha;
    let mut p = (-mean).exp();
    let mut cum = p;
    let mut n = 0;
    while 1.0 - cum > 1e-16 && n < 400 {
        n += 1;
        p *= mean / n as f64;
        cum += p;
    }
    n + 1
}

/// Fidelity between the ideally photon-subtracted squeezed vacuum and the odd
/// cat, `result[i][j]` for `squeezing_db[i]` and `alphas[j]`.
pub fn fidelity_surface(squeezing_db: &[f64], alphas: &[f64], n_max: usize) -> Result<Vec<Vec<f64>>> {
    if squeezing_db.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidArgument("fidelity surface needs nonempty axes".into()));
    }
    // enough levels that the largest cat is represented to machine precision
    let levels = cat_levels(alphas.iter().fold(0.0, |m: f64, a| m.max(a.abs())));
    squeezing_db
        .iter()
        .map(|&db| {
            if !(db >= 0.0) {
                return Err(Error::InvalidArgument(format!("squeezing {db} dB must be >= 0")));
            }
            let psi = squeezed_vacuum_adaptive(squeezing_db_to_r(db), n_max.max(levels))?.annihilated()?;
            let rho = DensityMatrix::from_pure(&psi);
            alphas
                .iter()
                .map(|&alpha| {
                    if !(alpha > 0.0) {
                        return Err(Error::InvalidArgument(format!("α = {alpha} must be > 0")));
                    }
                    Ok(CAT_PHASES.iter().map(|&ph| cat_fidelity(&rho, alpha, ph)).fold(0.0, f64::max))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportSource {
    Predicted,
    Reconstructed,
    ReconstructedLossCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub pump_power_mw: Option<f64>,
    pub f_odd: f64,
    pub alpha_opt: f64,
    pub alpha_at_boundary: bool,
    pub w00: f64,
    pub xi_fit: Option<f64>,
    pub photon_dist: Vec<f64>,
    pub source: ReportSource,
}

pub fn analyze(rho: &DensityMatrix, source: ReportSource, pump_power_mw: Option<f64>) -> Result<AnalysisReport> {
    let fit = cat_fidelity_max(rho, DEFAULT_ALPHA_RANGE)?;
    let mut photon_dist = photon_distribution(rho);
    let total: f64 = photon_dist.iter().sum();
    photon_dist.iter_mut().for_each(|p| *p /= total);
    Ok(AnalysisReport {
        pump_power_mw,
        f_odd: fit.fidelity,
        alpha_opt: fit.alpha,
        alpha_at_boundary: fit.at_boundary,
        w00: wigner_origin(rho),
        xi_fit: None,
        photon_dist,
        source,
    })
}

/// Modal purity Ξ for which the model's (F_odd, W(0,0)) best match `measured`,
/// each residual scaled by [`XI_FIT_SCALES`].
pub fn fit_xi(measured: &AnalysisReport, pump_power_mw: f64, cfg: &PredictionConfig, n_max: usize) -> Result<f64> {
    let parts = predict_states(pump_power_mw, cfg, n_max)?;
    let mismatch = |xi: f64| -> Result<f64> {
        let rho = parts.density(xi)?;
        let f = cat_fidelity_max(&rho, DEFAULT_ALPHA_RANGE)?.fidelity;
        let w = parts.w00(xi);
        Ok(((f - measured.f_odd) / XI_FIT_SCALES.0).powi(2) + ((w - measured.w00) / XI_FIT_SCALES.1).powi(2))
    };
    // coarse scan, then golden section around the best node
    let nodes = 20;
    let mut best = (1.0, f64::INFINITY);
    for i in 0..=nodes {
        let xi = i as f64 / nodes as f64;
        let m = mismatch(xi)?;
        if m < best.1 {
            best = (xi, m);
        }
    }
    let a = (best.0 - 1.0 / nodes as f64).max(0.0);
    let b = (best.0 + 1.0 / nodes as f64).min(1.0);
    let (xi, neg) = golden_section_max(|xi| -mismatch(xi).unwrap_or(f64::INFINITY), a, b, 1e-6);
    if -neg < best.1 {
        best = (xi, -neg);
    }
    if best.1 > XI_NO_FIT_THRESHOLD {
        return Err(Error::NoFit { mismatch: best.1 });
    }
    check_unit_interval("fitted modal purity", best.0)?;
    Ok(best.0)
}

/// CSV rows in table column order `P_p,F_odd,alpha,w00,xi`.
pub fn write_reports_csv<W: Write>(writer: W, reports: &[AnalysisReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["P_p", "F_odd", "alpha", "w00", "xi"])?;
    let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_default();
    for r in reports {
        w.write_record([
            opt(r.pump_power_mw, 1),
            format!("{:.4}", r.f_odd),
            format!("{:.4}", r.alpha_opt),
            format!("{:.4}", r.w00),
            opt(r.xi_fit, 3),
        ])?;
    }
    w.flush()?;
    Ok(())
}
