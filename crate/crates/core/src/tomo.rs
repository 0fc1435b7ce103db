//! Phase assignment from binned quadrature variances and iterative
//! maximum-likelihood reconstruction, optionally with loss-corrected POVMs.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::acquisim::QuadratureDataset;
use crate::error::{Error, Result};
use crate::fock::{bernoulli_amplitudes, DensityMatrix};
use crate::quad::{gauss_legendre, hermite_functions_into};
use crate::C64;

pub const DEFAULT_BIN_SIZE: usize = 100;
/// Histogram over [-X_HIST_HALF_WIDTH, X_HIST_HALF_WIDTH] (Wigner units).
pub const X_HIST_BINS: usize = 100;
pub const X_HIST_HALF_WIDTH: f64 = 6.0;
/// Below this efficiency inverting the loss amplifies noise without bound.
pub const MIN_CORRECTABLE_EFFICIENCY: f64 = 0.5;
/// Percentiles of the bin variances used as V_min and V_max when not supplied.
pub const VARIANCE_PERCENTILES: (f64, f64) = (0.02, 0.98);
/// Normal quantile of the bin-variance homogeneity test (0.1% significance).
pub const HOMOGENEITY_SIGNIFICANCE_Z: f64 = 3.09;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBin {
    pub index: usize,
    pub theta: f64,
    pub variance: f64,
    /// Variance fell outside [v_min, v_max] and was clamped.
    pub clamped: bool,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAssignment {
    pub bins: Vec<PhaseBin>,
    pub bin_size: usize,
    pub v_min: f64,
    pub v_max: f64,
}

/// Consecutive bins of `bin_size` samples; the remainder joins the last bin.
/// Returns `(start, len, variance)` with the unbiased sample variance.
pub fn bin_variances(ds: &QuadratureDataset, bin_size: usize) -> Result<Vec<(usize, usize, f64)>> {
    let n = ds.samples.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if bin_size < 2 || n < bin_size {
        return Err(Error::InvalidArgument(format!("bin size {bin_size} incompatible with {n} samples")));
    }
    let n_bins = n / bin_size;
    Ok((0..n_bins)
        .map(|b| {
            let start = b * bin_size;
            let len = if b + 1 == n_bins { n - start } else { bin_size };
            let xs = &ds.samples[start..start + len];
            let mean = xs.iter().map(|s| s.x).sum::<f64>() / len as f64;
            let var = xs.iter().map(|s| (s.x - mean).powi(2)).sum::<f64>() / (len - 1) as f64;
            (start, len, var)
        })
        .collect())
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bartlett's test for equal variances across bins at significance
/// [`HOMOGENEITY_SIGNIFICANCE_Z`] (one-sided normal quantile); the chi-square
/// critical value uses the Wilson-Hilferty approximation.
fn variances_homogeneous(raw: &[(usize, usize, f64)]) -> bool {
    let k = raw.len();
    if k < 2 {
        return true;
    }
    let dof: Vec<f64> = raw.iter().map(|b| (b.1 - 1) as f64).collect();
    let total: f64 = dof.iter().sum();
    let pooled = raw.iter().zip(&dof).map(|(b, d)| d * b.2).sum::<f64>() / total;
    let stat = total * pooled.ln() - raw.iter().zip(&dof).map(|(b, d)| d * b.2.ln()).sum::<f64>();
    let corr = 1.0 + (dof.iter().map(|d| 1.0 / d).sum::<f64>() - 1.0 / total) / (3.0 * (k - 1) as f64);
    let nu = (k - 1) as f64;
    let a = 2.0 / (9.0 * nu);
    let critical = nu * (1.0 - a + HOMOGENEITY_SIGNIFICANCE_Z * a.sqrt()).powi(3);
    stat / corr < critical
}

/// Assigns `θ_i = asin √((V_i - V_min)/(V_max - V_min))` ∈ [0, π/2] to each bin.
/// Without `v_range`, the extremes are the 2nd/98th percentiles of the bin
/// variances, and data whose bin variances are statistically homogeneous
/// (no phase dependence) are rejected.
pub fn estimate_phases(ds: &QuadratureDataset, v_range: Option<(f64, f64)>, bin_size: usize) -> Result<PhaseAssignment> {
    let raw = bin_variances(ds, bin_size)?;
    let (v_min, v_max) = match v_range {
        Some(r) => r,
        None => {
            let mut v: Vec<f64> = raw.iter().map(|b| b.2).collect();
            v.sort_by(f64::total_cmp);
            let range = (percentile(&v, VARIANCE_PERCENTILES.0), percentile(&v, VARIANCE_PERCENTILES.1));
            if variances_homogeneous(&raw) {
                return Err(Error::PhaseUnresolvable { v_min: range.0, v_max: range.1 });
            }
            range
        }
    };
    if !(v_min > 0.0 && v_max > v_min) || v_max - v_min < 0.05 * v_min {
        return Err(Error::PhaseUnresolvable { v_min, v_max });
    }
    let bins = raw
        .into_iter()
        .enumerate()
        .map(|(index, (start, len, variance))| {
            let f = (variance - v_min) / (v_max - v_min);
            PhaseBin {
                index,
                theta: f.clamp(0.0, 1.0).sqrt().asin().clamp(0.0, FRAC_PI_2),
                variance,
                clamped: !(0.0..=1.0).contains(&f),
                start,
                len,
            }
        })
        .collect();
    Ok(PhaseAssignment { bins, bin_size, v_min, v_max })
}

/// Phase assignment from the recorded scan phases (bin mean, folded into
/// [0, π/2] by the reflection symmetry of phase-insensitive binning). For data
/// whose variance does not resolve the phase, e.g. vacuum.
pub fn scan_phase_assignment(ds: &QuadratureDataset, bin_size: usize) -> Result<PhaseAssignment> {
    let raw = bin_variances(ds, bin_size)?;
    let bins = raw
        .into_iter()
        .enumerate()
        .map(|(index, (start, len, variance))| {
            let mean = ds.samples[start..start + len].iter().map(|s| s.scan_phase).sum::<f64>() / len as f64;
            let folded = mean.rem_euclid(PI);
            let theta = if folded > FRAC_PI_2 { PI - folded } else { folded };
            PhaseBin { index, theta, variance, clamped: false, start, len }
        })
        .collect();
    Ok(PhaseAssignment { bins, bin_size, v_min: f64::NAN, v_max: f64::NAN })
}

/// A quadrature (Wigner units) tagged with its phase bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub phase_bin: usize,
    pub x: f64,
}

pub fn observations(ds: &QuadratureDataset, pa: &PhaseAssignment) -> Vec<Observation> {
    pa.bins
        .iter()
        .flat_map(|b| ds.samples[b.start..b.start + b.len].iter().map(move |s| Observation { phase_bin: b.index, x: s.x / SQRT_2 }))
        .collect()
}

pub fn default_x_edges() -> Vec<f64> {
    let h = 2.0 * X_HIST_HALF_WIDTH / X_HIST_BINS as f64;
    (0..=X_HIST_BINS).map(|i| -X_HIST_HALF_WIDTH + i as f64 * h).collect()
}

/// Measurement operators `Π_jk = D(θ_j) M_k D(θ_j)†`, `D = diag(e^{imθ})`, with
/// `M_k = ∫_{bin k} |x⟩⟨x| dx` (two overflow bins close the histogram) and,
/// for `η < 1`, the adjoint loss map applied to `M_k`.
#[derive(Debug, Clone)]
pub struct PovmSet {
    pub thetas: Vec<f64>,
    pub x_edges: Vec<f64>,
    pub eta_correction: f64,
    pub n_max: usize,
    /// Index 0 and the last are the lower and upper overflow bins.
    base: Vec<DMatrix<f64>>,
}

impl PovmSet {
    pub fn n_x_bins(&self) -> usize {
        self.base.len()
    }

    pub fn x_index(&self, x: f64) -> usize {
        self.x_edges.partition_point(|&e| e <= x)
    }

    pub fn base_element(&self, k: usize) -> &DMatrix<f64> {
        &self.base[k]
    }

    pub fn element(&self, phase_bin: usize, k: usize) -> DMatrix<C64> {
        let th = self.thetas[phase_bin];
        let m = &self.base[k];
        DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| C64::from_polar(m[(a, b)], th * (a as f64 - b as f64)))
    }
}

fn bin_integral(a: f64, b: f64, d: usize, nodes: &[f64], weights: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d, d);
    let pieces = ((b - a) / 0.25).ceil().max(1.0) as usize;
    let h = (b - a) / pieces as f64;
    let mut psi = Vec::with_capacity(d);
    for piece in 0..pieces {
        let lo = a + piece as f64 * h;
        for (z, w) in nodes.iter().zip(weights) {
            let x = lo + 0.5 * h * (z + 1.0);
            hermite_functions_into(x, d - 1, &mut psi);
            let wx = 0.5 * h * w;
            for m in 0..d {
                for n in 0..=m {
                    out[(m, n)] += wx * psi[m] * psi[n];
                }
            }
        }
    }
    for m in 0..d {
        for n in 0..m {
            out[(n, m)] = out[(m, n)];
        }
    }
    out
}

/// `(L†_η Π)_ab = Σ_k b_{a-k,k} b_{b-k,k} Π_{a-k,b-k}`.
pub fn adjoint_loss(pi: &DMatrix<f64>, eta: f64) -> DMatrix<f64> {
    let d = pi.nrows();
    let b = bernoulli_amplitudes(d, eta);
    DMatrix::from_fn(d, d, |p, q| (0..=p.min(q)).map(|k| b[p - k][k] * b[q - k][k] * pi[(p - k, q - k)]).sum())
}

pub fn build_povm(pa: &PhaseAssignment, x_edges: &[f64], n_max: usize, eta: f64) -> Result<PovmSet> {
    if !(eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("efficiency {eta} must be <= 1")));
    }
    if !(eta >= MIN_CORRECTABLE_EFFICIENCY) {
        return Err(Error::IllConditionedCorrection { eta });
    }
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    if x_edges.len() < 2 || x_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("histogram edges must be strictly increasing".into()));
    }
    let (lo, hi) = (x_edges[0], x_edges[x_edges.len() - 1]);
    if lo > -X_HIST_HALF_WIDTH || hi < X_HIST_HALF_WIDTH {
        return Err(Error::InvalidArgument(format!("histogram [{lo}, {hi}] must cover [-6, 6]")));
    }
    let d = n_max + 1;
    let (nodes, weights) = gauss_legendre(8);
    // ψ_n for n <= 40 is below 1e-30 beyond |x| = 18
    let reach = 18.0f64.max(hi.abs()).max(lo.abs()) + 1.0;
    let mut base = Vec::with_capacity(x_edges.len() + 1);
    base.push(bin_integral(-reach, lo, d, &nodes, &weights));
    for w in x_edges.windows(2) {
        base.push(bin_integral(w[0], w[1], d, &nodes, &weights));
    }
    base.push(bin_integral(hi, reach, d, &nodes, &weights));
    if eta < 1.0 {
        base = base.iter().map(|m| adjoint_loss(m, eta)).collect();
    }
    Ok(PovmSet {
        thetas: pa.bins.iter().map(|b| b.theta).collect(),
        x_edges: x_edges.to_vec(),
        eta_correction: eta,
        n_max,
        base,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub rel_ll_change: f64,
    pub max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { rel_ll_change: 1e-9, max_iter: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    /// Mean log-likelihood per sample, starting with the initial state.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ReconstructionResult {
    pub fn final_ll(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace holds the initial value")
    }

    /// Turns an unconverged result into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iterations: self.iterations })
        }
    }
}

/// Sufficient statistics of the data plus the harmonic tables that make each
/// likelihood evaluation O(pairs · d) rather than O(pairs · d²).
struct Likelihood<'a> {
    povm: &'a PovmSet,
    /// `(phase bin, x bin, relative frequency)`, sorted.
    pairs: Vec<(usize, usize, f64)>,
    /// `cos(δθ_j), sin(δθ_j)` for δ = 0..d.
    harmonics: Vec<Vec<(f64, f64)>>,
}

impl<'a> Likelihood<'a> {
    fn new(obs: &[Observation], povm: &'a PovmSet) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut keys: Vec<(usize, usize)> = Vec::with_capacity(obs.len());
        for o in obs {
            if o.phase_bin >= povm.thetas.len() || !o.x.is_finite() {
                return Err(Error::InvalidArgument(format!("observation {o:?} has no POVM element")));
            }
            keys.push((o.phase_bin, povm.x_index(o.x)));
        }
        keys.sort_unstable();
        let total = keys.len() as f64;
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for key in keys {
            match pairs.last_mut() {
                Some(last) if (last.0, last.1) == key => last.2 += 1.0,
                _ => pairs.push((key.0, key.1, 1.0)),
            }
        }
        pairs.iter_mut().for_each(|p| p.2 /= total);
        let d = povm.n_max + 1;
        let harmonics = povm
            .thetas
            .iter()
            .map(|th| (0..d).map(|k| ((k as f64 * th).cos(), (k as f64 * th).sin())).collect())
            .collect();
        Ok(Self { povm, pairs, harmonics })
    }

    /// Mean log-likelihood and, if requested, `R = Σ (f/p) Π`.
    fn eval(&self, rho: &DMatrix<C64>, want_r: bool) -> (f64, Option<DMatrix<C64>>) {
        let d = rho.nrows();
        let kmax = self.povm.n_x_bins();
        // per x-bin: Σ_{m-n=δ} w_δ ρ_mn M_mn split in real/imag parts
        let mut proj = vec![vec![(0.0, 0.0); d]; kmax];
        let mut used = vec![false; kmax];
        self.pairs.iter().for_each(|p| used[p.1] = true);
        for k in (0..kmax).filter(|&k| used[k]) {
            let m_k = &self.povm.base[k];
            for m in 0..d {
                for n in 0..=m {
                    let w = if m == n { 1.0 } else { 2.0 };
                    let z = rho[(m, n)] * (w * m_k[(m, n)]);
                    let e = &mut proj[k][m - n];
                    e.0 += z.re;
                    e.1 += z.im;
                }
            }
        }
        let mut ll = 0.0;
        let mut coeff = if want_r { vec![vec![C64::from(0.0); d]; kmax] } else { Vec::new() };
        for &(j, k, f) in &self.pairs {
            let h = &self.harmonics[j];
            let p: f64 = proj[k].iter().zip(h).map(|((a, b), (c, s))| a * c + b * s).sum();
            let p = p.max(1e-300);
            ll += f * p.ln();
            if want_r {
                let w = f / p;
                for (dlt, (c, s)) in h.iter().enumerate() {
                    coeff[k][dlt] += C64::new(w * c, w * s);
                }
            }
        }
        if !want_r {
            return (ll, None);
        }
        let mut r = DMatrix::<C64>::zeros(d, d);
        for k in (0..kmax).filter(|&k| used[k]) {
            let m_k = &self.povm.base[k];
            for m in 0..d {
                for n in 0..=m {
                    r[(m, n)] += coeff[k][m - n] * m_k[(m, n)];
                }
            }
        }
        for m in 0..d {
            for n in 0..m {
                r[(n, m)] = r[(m, n)].conj();
            }
        }
        (ll, Some(r))
    }
}

fn sandwich(a: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = a * rho * a;
    out = (&out + out.adjoint()) * C64::from(0.5);
    let tr = out.trace().re;
    out / C64::from(tr)
}

/// Iterates `ρ ← N[R ρ R]` from `I/d`. A step that would lower the likelihood
/// is replaced by the diluted update `(I + εR) ρ (I + εR)` with ε halved until
/// the likelihood does not decrease.
pub fn mle_reconstruct(obs: &[Observation], povm: &PovmSet, stop: StopRule) -> Result<ReconstructionResult> {
    let lik = Likelihood::new(obs, povm)?;
    let d = povm.n_max + 1;
    let eye = DMatrix::<C64>::identity(d, d);
    let mut rho = eye.clone() / C64::from(d as f64);
    let (mut ll, r0) = lik.eval(&rho, true);
    let mut r = r0.expect("requested");
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < stop.max_iter {
        iterations += 1;
        let mut cand = sandwich(&r, &rho);
        let (mut cand_ll, mut cand_r) = lik.eval(&cand, true);
        let mut eps = 1.0;
        while cand_ll < ll && eps > 1e-10 {
            let a = &eye + &r * C64::from(eps);
            cand = sandwich(&a, &rho);
            (cand_ll, cand_r) = lik.eval(&cand, true);
            eps *= 0.5;
        }
        if cand_ll < ll {
            // no ascent direction left: stationary point
            converged = true;
            iterations -= 1;
            break;
        }
        let change = (cand_ll - ll).abs() / ll.abs().max(1e-300);
        rho = cand;
        ll = cand_ll;
        r = cand_r.expect("requested");
        trace.push(ll);
        if change < stop.rel_ll_change {
            converged = true;
            break;
        }
    }
    Ok(ReconstructionResult {
        rho: DensityMatrix::from_matrix_unchecked(rho)?,
        log_likelihood_trace: trace,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructOptions {
    pub n_max: usize,
    /// Efficiency divided out of the POVMs (1 = no correction).
    pub eta: f64,
    pub bin_size: usize,
    pub v_range: Option<(f64, f64)>,
    pub stop: StopRule,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self { n_max: 15, eta: 1.0, bin_size: DEFAULT_BIN_SIZE, v_range: None, stop: StopRule::default() }
    }
}

/// Phase estimation, POVM construction and MLE in one call.
pub fn reconstruct(ds: &QuadratureDataset, opts: &ReconstructOptions) -> Result<(ReconstructionResult, PhaseAssignment)> {
    let pa = estimate_phases(ds, opts.v_range, opts.bin_size)?;
    let povm = build_povm(&pa, &default_x_edges(), opts.n_max, opts.eta)?;
    let res = mle_reconstruct(&observations(ds, &pa), &povm, opts.stop)?;
    Ok((res, pa))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub rho: DensityMatrix,
    pub iterations: usize,
    pub final_ll: f64,
    pub converged: bool,
    pub eta_correction: f64,
    pub n_max: usize,
    pub bin_size: usize,
}

impl ReconstructionReport {
    pub fn new(res: &ReconstructionResult, opts: &ReconstructOptions) -> Self {
        Self {
            rho: res.rho.clone(),
            iterations: res.iterations,
            final_ll: res.final_ll(),
            converged: res.converged,
            eta_correction: opts.eta,
            n_max: opts.n_max,
            bin_size: opts.bin_size,
        }
    }
}
