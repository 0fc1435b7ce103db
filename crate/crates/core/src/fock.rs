//! Truncated Fock-basis states and channels.
//!
//! Phase-space convention: quadratures `x = (a + a†)/√2`, `p = (a - a†)/(i√2)`,
//! rotated quadrature `x_θ = x cos θ + p sin θ`, vacuum variance 1/2, so the
//! vacuum Wigner function is `exp(-x² - p²)/π`. Shot-noise-normalized
//! variances (vacuum = 1) are twice the Wigner-unit variances.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::quad::{binomial, hermite_functions, laguerre};
use crate::C64;

pub const DEFAULT_N_MAX: usize = 20;
/// Largest analytic probability mass allowed above `n_max` when building a state.
pub const TAIL_TOLERANCE: f64 = 1e-6;
pub const VACUUM_VARIANCE: f64 = 0.5;
/// Click probabilities below this make a herald meaningless.
pub const MIN_HERALD_PROBABILITY: f64 = 1e-12;

const NORM_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-9;
const PSD_TOL: f64 = -1e-8;
const ADAPTIVE_N_LIMIT: usize = 400;

/// Converts a Wigner-unit variance (vacuum 1/2) to shot-noise units (vacuum 1).
pub fn to_shot_noise_variance(wigner_variance: f64) -> f64 {
    2.0 * wigner_variance
}

pub fn to_wigner_variance(shot_noise_variance: f64) -> f64 {
    shot_noise_variance / 2.0
}

/// A normalized state vector in the Fock basis `|0⟩ .. |n_max⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    coeffs: DVector<C64>,
}

impl PureState {
    /// Normalizes `coeffs` into a state. Fails on a zero vector.
    pub fn from_coeffs(coeffs: DVector<C64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidArgument("a state needs n_max >= 1".into()));
        }
        let norm = coeffs.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("state vector has zero or non-finite norm".into()));
        }
        Ok(Self { coeffs: coeffs / C64::from(norm) })
    }

    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::InvalidArgument(format!("|{n}⟩ does not fit in n_max = {n_max}")));
        }
        let mut c = DVector::zeros(n_max + 1);
        c[n] = C64::from(1.0);
        Self::from_coeffs(c)
    }

    pub fn vacuum(n_max: usize) -> Result<Self> {
        Self::fock(0, n_max)
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &DVector<C64> {
        &self.coeffs
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
    }

    /// Zero-extends to a larger truncation; truncation to a smaller one renormalizes.
    pub fn resized(&self, n_max: usize) -> Result<Self> {
        let mut c = DVector::zeros(n_max + 1);
        let k = n_max.min(self.n_max());
        c.rows_mut(0, k + 1).copy_from(&self.coeffs.rows(0, k + 1));
        Self::from_coeffs(c)
    }

    /// Normalized `a|ψ⟩`: the ideal single-photon subtraction (vanishing tap).
    pub fn annihilated(&self) -> Result<Self> {
        let mut c = DVector::zeros(self.coeffs.len());
        for n in 1..self.coeffs.len() {
            c[n - 1] = self.coeffs[n] * (n as f64).sqrt();
        }
        let p = c.norm_squared();
        if p < MIN_HERALD_PROBABILITY {
            return Err(Error::HeraldImpossible { probability: p });
        }
        Self::from_coeffs(c)
    }
}

/// Squeezed vacuum `S(r)|0⟩`, squeezed along `x` (θ = 0) with `c_0 > 0`:
/// `c_2k = (-tanh r)^k √((2k)!) / (2^k k! √cosh r)`.
pub fn squeezed_vacuum(r: f64, n_max: usize) -> Result<PureState> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("squeezing r = {r} must be finite and >= 0")));
    }
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let t = r.tanh();
    let mut c = DVector::<C64>::zeros(n_max + 1);
    let mut amp = 1.0 / r.cosh().sqrt();
    c[0] = C64::from(amp);
    let mut k = 1;
    while 2 * k <= n_max {
        amp *= -t * ((2 * k - 1) as f64 / (2 * k) as f64).sqrt();
        c[2 * k] = C64::from(amp);
        k += 1;
    }
    let tail = 1.0 - c.norm_squared();
    if tail >= TAIL_TOLERANCE {
        return Err(Error::Truncation { n_max, tail });
    }
    PureState::from_coeffs(c)
}

/// Squeezed vacuum at the smallest truncation `>= n_min` whose tail passes.
pub fn squeezed_vacuum_adaptive(r: f64, n_min: usize) -> Result<PureState> {
    let mut n = n_min.max(2);
    loop {
        match squeezed_vacuum(r, n) {
            Err(Error::Truncation { .. }) if n < ADAPTIVE_N_LIMIT => n += 2,
            other => return other,
        }
    }
}

/// Coefficients of the odd cat `|αe^{iφ}⟩ - |-αe^{iφ}⟩` normalized over the
/// untruncated space; the truncated vector therefore has norm <= 1.
pub(crate) fn odd_cat_coefficients(alpha: f64, phase: f64, n_max: usize) -> DVector<C64> {
    let a2 = alpha * alpha;
    // 1/sqrt(sinh α²) times α^n/√n!, built incrementally to avoid overflow.
    let norm = if a2 < 1e-8 { (a2 * (1.0 + a2 * a2 / 6.0)).sqrt() } else { a2.sinh().sqrt() };
    let mut c = DVector::<C64>::zeros(n_max + 1);
    let mut term = 1.0 / norm; // α^n/√n! / norm, at n = 0
    for n in 1..=n_max {
        term *= alpha / (n as f64).sqrt();
        if n % 2 == 1 {
            c[n] = C64::from_polar(term, phase * n as f64);
        }
    }
    c
}

/// Odd cat state `∝ |α⟩ - |-α⟩` with real `α > 0`.
pub fn odd_cat(alpha: f64, n_max: usize) -> Result<PureState> {
    odd_cat_rotated(alpha, 0.0, n_max)
}

/// Odd cat with amplitude `α e^{iφ}`; `φ = π/2` aligns it with the `p` axis.
pub fn odd_cat_rotated(alpha: f64, phase: f64, n_max: usize) -> Result<PureState> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("cat amplitude α = {alpha} must be > 0")));
    }
    let c = odd_cat_coefficients(alpha, phase, n_max);
    let tail = 1.0 - c.norm_squared();
    if tail >= TAIL_TOLERANCE {
        return Err(Error::Truncation { n_max, tail });
    }
    PureState::from_coeffs(c)
}

/// Hermitian, unit-trace, positive semidefinite operator on `|0⟩ .. |n_max⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixJson", into = "DensityMatrixJson")]
pub struct DensityMatrix {
    elements: DMatrix<C64>,
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    n_max: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for DensityMatrixJson {
    fn from(rho: DensityMatrix) -> Self {
        let d = rho.dim();
        let re = (0..d).map(|m| (0..d).map(|n| rho.elements[(m, n)].re).collect()).collect();
        let im = (0..d).map(|m| (0..d).map(|n| rho.elements[(m, n)].im).collect()).collect();
        Self { n_max: d - 1, re, im }
    }
}

impl TryFrom<DensityMatrixJson> for DensityMatrix {
    type Error = Error;

    fn try_from(j: DensityMatrixJson) -> Result<Self> {
        let d = j.n_max + 1;
        let rows_ok = |v: &Vec<Vec<f64>>| v.len() == d && v.iter().all(|r| r.len() == d);
        if !rows_ok(&j.re) || !rows_ok(&j.im) {
            return Err(Error::Parse(format!("density matrix arrays must be {d}x{d}")));
        }
        let m = DMatrix::from_fn(d, d, |a, b| C64::new(j.re[a][b], j.im[a][b]));
        DensityMatrix::from_matrix(m)
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(elements: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(elements)?;
        rho.validate(PSD_TOL)?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(elements: DMatrix<C64>) -> Result<Self> {
        if elements.nrows() != elements.ncols() || elements.nrows() < 2 {
            return Err(Error::InvalidState("density matrix must be square with n_max >= 1".into()));
        }
        Ok(Self { elements })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let c = psi.coeffs();
        Self { elements: c * c.adjoint() }
    }

    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        Ok(Self::from_pure(&PureState::fock(n, n_max)?))
    }

    pub fn vacuum(n_max: usize) -> Result<Self> {
        Self::fock(0, n_max)
    }

    /// Maximally mixed state `I/(n_max+1)`.
    pub fn maximally_mixed(n_max: usize) -> Self {
        let d = n_max + 1;
        Self { elements: DMatrix::identity(d, d) * C64::from(1.0 / d as f64) }
    }

    pub fn n_max(&self) -> usize {
        self.elements.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.elements[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.elements + self.elements.adjoint()) * C64::from(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    /// Checks the invariants with the given lower bound on eigenvalues.
    pub fn validate(&self, psd_tol: f64) -> Result<()> {
        let d = self.dim();
        for m in 0..d {
            for n in 0..d {
                let z = self.elements[(m, n)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::InvalidState("non-finite element".into()));
                }
                if (z - self.elements[(n, m)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidState(format!("not Hermitian at ({m}, {n})")));
                }
            }
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let lmin = self.min_eigenvalue();
        if lmin < psd_tol {
            return Err(Error::InvalidState(format!("minimum eigenvalue {lmin:.3e} < {psd_tol:.1e}")));
        }
        Ok(())
    }

    /// Symmetrizes and rescales to unit trace. Fails on a vanishing trace.
    pub(crate) fn normalized(mut elements: DMatrix<C64>) -> Result<Self> {
        elements = (&elements + elements.adjoint()) * C64::from(0.5);
        let tr = elements.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize trace {tr}")));
        }
        elements /= C64::from(tr);
        Self::from_matrix_unchecked(elements)
    }

    /// Projects onto `|0⟩ .. |n_max⟩` and renormalizes; also returns the
    /// discarded population.
    pub fn truncated(&self, n_max: usize) -> Result<(Self, f64)> {
        if n_max >= self.n_max() {
            return Ok((self.padded(n_max), 0.0));
        }
        let block = self.elements.view((0, 0), (n_max + 1, n_max + 1)).into_owned();
        let tail = 1.0 - block.trace().re;
        Ok((Self::normalized(block)?, tail))
    }

    /// Zero-extends to a larger truncation (no-op if already that large).
    pub fn padded(&self, n_max: usize) -> Self {
        if n_max <= self.n_max() {
            return self.clone();
        }
        let d = n_max + 1;
        let mut m = DMatrix::zeros(d, d);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.elements);
        Self { elements: m }
    }

    /// Convex combination `w·self + (1-w)·other` (padded to the larger size).
    pub fn blend(&self, other: &Self, weight: f64) -> Result<Self> {
        check_unit_interval("mixing weight", weight)?;
        let n = self.n_max().max(other.n_max());
        let a = self.padded(n);
        let b = other.padded(n);
        Ok(Self { elements: a.elements * C64::from(weight) + b.elements * C64::from(1.0 - weight) })
    }

    /// Phase rotation `e^{iφ a†a} ρ e^{-iφ a†a}`.
    pub fn rotated(&self, phase: f64) -> Self {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |a, b| {
            self.elements[(a, b)] * C64::from_polar(1.0, phase * (a as f64 - b as f64))
        });
        Self { elements: m }
    }

    /// `⟨(-1)^n⟩`.
    pub fn parity(&self) -> f64 {
        (0..self.dim())
            .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * self.elements[(n, n)].re)
            .sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.elements[(n, n)].re).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Photon subtraction heralded by an on/off click on a tap of reflectivity `R`.
/// Returns the normalized transmitted state and the click probability.
pub fn herald_subtract(input: &PureState, reflectivity: f64) -> Result<(DensityMatrix, f64)> {
    herald_subtract_density(&DensityMatrix::from_pure(input), reflectivity, input.n_max())
}

/// As [`herald_subtract`], keeping only tap occupations `1..=tap_levels`.
pub fn herald_subtract_truncated_tap(
    input: &PureState,
    reflectivity: f64,
    tap_levels: usize,
) -> Result<(DensityMatrix, f64)> {
    herald_subtract_density(&DensityMatrix::from_pure(input), reflectivity, tap_levels)
}

/// Click-conditioned state for a mixed input. The beamsplitter maps
/// `|m+k⟩|0⟩` to amplitude `√C(m+k,k) t^m r^k` on `|m⟩|k⟩`; the click projector
/// `1 - |0⟩⟨0|` keeps tap occupations `k >= 1`.
pub fn herald_subtract_density(
    input: &DensityMatrix,
    reflectivity: f64,
    tap_levels: usize,
) -> Result<(DensityMatrix, f64)> {
    if !(reflectivity > 0.0 && reflectivity < 1.0) {
        return Err(Error::InvalidArgument(format!("tap reflectivity {reflectivity} must be in (0, 1)")));
    }
    let d = input.dim();
    let t = (1.0 - reflectivity).sqrt();
    let r = reflectivity.sqrt();
    let amp = |m: usize, k: usize| binomial(m + k, k).sqrt() * t.powi(m as i32) * r.powi(k as i32);
    let mut out = DMatrix::<C64>::zeros(d, d);
    for k in 1..=tap_levels.min(d - 1) {
        for m in 0..d - k {
            let am = amp(m, k);
            for n in 0..d - k {
                out[(m, n)] += input.elements[(m + k, n + k)] * (am * amp(n, k));
            }
        }
    }
    let probability = out.trace().re;
    if !(probability >= MIN_HERALD_PROBABILITY) {
        return Err(Error::HeraldImpossible { probability });
    }
    Ok((DensityMatrix::normalized(out)?, probability))
}

/// Photon loss with efficiency `η` (generalized Bernoulli map):
/// `ρ'_{mn} = Σ_k √(C(m+k,k) C(n+k,k)) η^{(m+n)/2} (1-η)^k ρ_{m+k,n+k}`.
pub fn apply_loss(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    check_unit_interval("efficiency", eta)?;
    let d = rho.dim();
    let b = bernoulli_amplitudes(d, eta);
    let mut out = DMatrix::<C64>::zeros(d, d);
    for m in 0..d {
        for n in 0..d {
            let mut acc = C64::from(0.0);
            for k in 0..d - m.max(n) {
                acc += rho.elements[(m + k, n + k)] * (b[m][k] * b[n][k]);
            }
            out[(m, n)] = acc;
        }
    }
    DensityMatrix::from_matrix_unchecked(out)
}

/// `b[j][k] = √(C(j+k,k) η^j (1-η)^k)` for `j + k < d`.
pub(crate) fn bernoulli_amplitudes(d: usize, eta: f64) -> Vec<Vec<f64>> {
    (0..d)
        .map(|j| {
            (0..d - j)
                .map(|k| (binomial(j + k, k) * eta.powi(j as i32) * (1.0 - eta).powi(k as i32)).sqrt())
                .collect()
        })
        .collect()
}

/// Wigner function from the Laguerre-Gaussian kernel of `|m⟩⟨n|`.
pub fn wigner(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let d = rho.dim();
    let r2 = x * x + p * p;
    let gauss = (-r2).exp() / PI;
    // (√2 (x - ip))^k
    let w = C64::new(x, -p) * std::f64::consts::SQRT_2;
    let mut total = 0.0;
    for n in 0..d {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut wpow = C64::from(1.0);
        // √(n!/m!) for m = n + k
        let mut fact_ratio = 1.0;
        for m in n..d {
            let k = m - n;
            if k > 0 {
                wpow *= w;
                fact_ratio /= (m as f64).sqrt();
            }
            let kernel = wpow * (sign * fact_ratio * gauss * laguerre(n, k, 2.0 * r2));
            let term = rho.elements[(m, n)] * kernel;
            total += if k == 0 { term.re } else { 2.0 * term.re };
        }
    }
    total
}

/// Wigner values on the Cartesian product of `xs` and `ps`, as `(x, p, w)` rows.
pub fn wigner_grid(rho: &DensityMatrix, xs: &[f64], ps: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(xs.len() * ps.len());
    for &x in xs {
        for &p in ps {
            out.push((x, p, wigner(rho, x, p)));
        }
    }
    out
}

/// Writes a grid as CSV with header `x,p,w`.
pub fn write_wigner_csv<W: Write>(writer: W, grid: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "p", "w"])?;
    for (x, p, v) in grid {
        w.write_record([x.to_string(), p.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Homodyne density `pr(x|θ) = Σ ρ_mn e^{-i(m-n)θ} ψ_m(x) ψ_n(x)` in Wigner units.
pub fn quadrature_pdf(rho: &DensityMatrix, theta: f64, x: f64) -> f64 {
    let psi = hermite_functions(x, rho.n_max());
    let d = rho.dim();
    let mut total = 0.0;
    for m in 0..d {
        total += rho.elements[(m, m)].re * psi[m] * psi[m];
        for n in 0..m {
            let z = rho.elements[(m, n)] * C64::from_polar(1.0, -theta * (m - n) as f64);
            total += 2.0 * z.re * psi[m] * psi[n];
        }
    }
    total.max(0.0)
}

/// `⟨x_θ²⟩` from operator algebra (Wigner units).
pub fn quadrature_second_moment(rho: &DensityMatrix, theta: f64) -> f64 {
    // x_θ = (a e^{-iθ} + a† e^{iθ})/√2, x_θ² = (a² e^{-2iθ} + a†² e^{2iθ} + 2a†a + 1)/2
    let d = rho.dim();
    let mut a2 = C64::from(0.0); // ⟨a²⟩ = Σ ρ_{n+2,n}... Tr(ρ a²) = Σ_n √(n(n-1)) ρ_{n-2,n}
    for n in 2..d {
        a2 += rho.elements[(n - 2, n)] * ((n * (n - 1)) as f64).sqrt();
    }
    let term = a2 * C64::from_polar(1.0, -2.0 * theta);
    (2.0 * term.re + 2.0 * rho.mean_photon_number() + 1.0) / 2.0
}

/// Pure-target fidelity `⟨ψ|ρ|ψ⟩`; the smaller truncation is zero-padded.
pub fn fidelity(rho: &DensityMatrix, psi: &PureState) -> f64 {
    let n = rho.n_max().max(psi.n_max());
    let rho = rho.padded(n);
    let mut c = DVector::<C64>::zeros(n + 1);
    c.rows_mut(0, psi.n_max() + 1).copy_from(psi.coeffs());
    overlap(&rho, &c)
}

/// Square root of a positive semidefinite matrix; eigenvalues at roundoff
/// level are zeroed first, since their square roots would not be.
fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let eig = h.symmetric_eigen();
    let floor = 1e-13 * eig.eigenvalues.amax();
    let sq = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from(if l > floor { l.sqrt() } else { 0.0 })));
    &eig.eigenvectors * sq * eig.eigenvectors.adjoint()
}

/// Mixed-state fidelity `(Tr √(√ρ σ √ρ))²`, evaluated as the squared trace
/// norm of `√ρ √σ` (singular values avoid square roots of roundoff-level
/// eigenvalues); the smaller truncation is zero-padded.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let n = rho.n_max().max(sigma.n_max());
    let (a, b) = (rho.padded(n), sigma.padded(n));
    let prod = hermitian_sqrt(&a.elements) * hermitian_sqrt(&b.elements);
    let root: f64 = prod.singular_values().iter().sum();
    (root * root).min(1.0)
}

/// `c† ρ c` for a coefficient vector of matching size.
pub(crate) fn overlap(rho: &DensityMatrix, c: &DVector<C64>) -> f64 {
    (c.adjoint() * &rho.elements * c)[(0, 0)].re.clamp(0.0, 1.0)
}

pub fn photon_distribution(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.dim()).map(|n| rho.elements[(n, n)].re.max(0.0)).collect()
}
