//! Derivative-free Nelder-Mead minimization with seeded multi-start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Converged when every vertex lies within this relative distance of the best one.
    pub rel_step: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iterations: 500, rel_step: 1e-10, starts: 5, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// One Nelder-Mead run from `x0` with initial edge lengths `scale`.
/// Returns `None` if the step criterion is not met in time.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], scale: &[f64], opts: &SimplexOptions) -> (Minimum, bool) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale[i];
        pts.push(v);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();

    let mut iterations = 0;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let best_norm = pts[0].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let spread = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0f64, f64::max);
        if spread / best_norm < opts.rel_step {
            return (Minimum { x: pts[0].clone(), value: vals[0], iterations }, true);
        }
        if iterations >= opts.max_iterations {
            return (Minimum { x: pts[0].clone(), value: vals[0], iterations }, false);
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            pts[i] = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            vals[i] = f(&pts[i]);
        }
    }
}

/// Minimizes `f` from several seeded starts around `x0` (each coordinate scaled
/// by a random factor in [0.5, 2]); the best converged run is polished by a
/// restart. Fails with [`Error::FitDiverged`] if no start converges.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &SimplexOptions) -> Result<Minimum> {
    if x0.is_empty() {
        return Err(Error::InvalidArgument("nothing to optimize".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut best: Option<Minimum> = None;
    for start in 0..opts.starts.max(1) {
        let x: Vec<f64> = if start == 0 {
            x0.to_vec()
        } else {
            x0.iter().map(|v| v * rng.random_range(0.5..2.0)).collect()
        };
        let scale: Vec<f64> = x.iter().map(|v| if *v != 0.0 { 0.1 * v.abs() } else { 0.01 }).collect();
        let (m, ok) = nelder_mead(&f, &x, &scale, opts);
        if ok && m.value.is_finite() && best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.ok_or(Error::FitDiverged { iterations: opts.max_iterations })?;
    // a fresh simplex at the optimum guards against premature collapse
    let scale: Vec<f64> = best.x.iter().map(|v| if *v != 0.0 { 1e-3 * v.abs() } else { 1e-4 }).collect();
    let (polished, ok) = nelder_mead(&f, &best.x, &scale, opts);
    Ok(if ok && polished.value <= best.value { polished } else { best })
}
