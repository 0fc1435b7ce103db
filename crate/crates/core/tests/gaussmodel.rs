use catsim::fock::{apply_loss, herald_subtract, squeezed_vacuum, uhlmann_fidelity};
use catsim::gauss::{
    apply_gaussian_loss, mix_modal_purity, mixture_to_fock, predict_states, squeezed_vacuum_wigner, squeezed_wigner,
    subtract_click, PredictionConfig,
};
use catsim::{DensityMatrix, Error, GaussianMixtureWigner};
use proptest::prelude::*;

/// Both paths: squeeze, herald on a tap of reflectivity `tap`, lose `eta`, mix with the
/// equally lossy unconditioned state at modal purity `xi`.
fn both_paths(r: f64, tap: f64, eta: f64, xi: f64) -> (DensityMatrix, DensityMatrix) {
    let sq = squeezed_vacuum_wigner(r).unwrap();
    let (herald, _) = subtract_click(&sq, tap).unwrap();
    let background = apply_gaussian_loss(&sq, 1.0 - tap).unwrap();
    let mixed = mix_modal_purity(
        &apply_gaussian_loss(&herald, eta).unwrap(),
        &apply_gaussian_loss(&background, eta).unwrap(),
        xi,
    )
    .unwrap();
    let gaussian = mixture_to_fock(&mixed, 20).unwrap();

    let psi = squeezed_vacuum(r, 60).unwrap();
    let (h, _) = herald_subtract(&psi, tap).unwrap();
    let bg = apply_loss(&DensityMatrix::from_pure(&psi), 1.0 - tap).unwrap();
    let fock = apply_loss(&h, eta).unwrap().blend(&apply_loss(&bg, eta).unwrap(), xi).unwrap();
    let (fock, _) = fock.truncated(20).unwrap();
    (gaussian, fock)
}

fn integral(w: &GaussianMixtureWigner) -> f64 {
    let h = 0.05;
    let pts: Vec<f64> = (-200..=200).map(|i| i as f64 * h).collect();
    pts.iter().flat_map(|&x| pts.iter().map(move |&p| w.eval(x, p))).sum::<f64>() * h * h
}

#[test]
fn modal_purity_root_matches_ratio() {
    let states = predict_states(8.0, &PredictionConfig::default(), 20).unwrap();
    let (w_out, w_s) = (states.w00(1.0), states.w00(0.0));
    assert!(w_out < 0.0 && w_s > 0.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if states.w00(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let analytic = w_s / (w_s - w_out);
    assert!((0.5 * (lo + hi) - analytic).abs() <= 1e-9);
}

#[test]
fn uncertainty_is_enforced() {
    assert!(matches!(squeezed_wigner(0.9, 1.0), Err(Error::UncertaintyViolation { .. })));
    let pure = squeezed_wigner((-1.12f64).exp(), 1.12f64.exp()).unwrap();
    assert!((pure.eval(0.0, 0.0) - std::f64::consts::FRAC_1_PI).abs() < 1e-12);
}

#[test]
fn success_probability_grows_with_squeezing_and_tap() {
    let click = |r: f64, tap: f64| subtract_click(&squeezed_vacuum_wigner(r).unwrap(), tap).unwrap().1;
    for i in 1..8 {
        let r = 0.1 * i as f64;
        for j in 1..8 {
            let tap = 0.02 * j as f64;
            assert!(click(r + 0.1, tap) > click(r, tap));
            assert!(click(r, tap + 0.02) > click(r, tap));
        }
    }
}

#[test]
fn prediction_is_stable_in_truncation() {
    let cfg = PredictionConfig::default();
    let a = predict_states(8.0, &cfg, 15).unwrap().record(1.0).unwrap();
    let b = predict_states(8.0, &cfg, 20).unwrap().record(1.0).unwrap();
    assert!((a.f_odd - b.f_odd).abs() < 0.03 && (a.alpha - b.alpha).abs() < 0.06 && (a.w00 - b.w00).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gaussian_and_fock_pipelines_agree(
        r in 0.05f64..=0.8,
        tap in 0.01f64..0.2,
        eta in 0.5f64..=1.0,
        xi in 0.0f64..=1.0,
    ) {
        let (g, f) = both_paths(r, tap, eta, xi);
        let fid = uhlmann_fidelity(&g, &f);
        prop_assert!(fid >= 0.9999, "fidelity {}", fid);
    }

    #[test]
    fn operations_preserve_normalization(r in 0.0f64..=0.8, tap in 0.01f64..0.2, eta in 0.0f64..=1.0) {
        let sq = squeezed_vacuum_wigner(r.max(1e-3)).unwrap();
        let (h, _) = subtract_click(&sq, tap).unwrap();
        let lossy = apply_gaussian_loss(&h, eta).unwrap();
        for w in [&sq, &h, &lossy] {
            prop_assert!((w.total_weight() - 1.0).abs() <= 1e-9);
            prop_assert!((integral(w) - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn gaussian_loss_composes(r in 0.0f64..=0.8, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0, x in -3.0f64..3.0, p in -3.0f64..3.0) {
        let sq = squeezed_vacuum_wigner(r).unwrap();
        let (h, _) = subtract_click(&squeezed_vacuum_wigner(r.max(0.05)).unwrap(), 0.077).unwrap();
        for w in [sq, h] {
            let two = apply_gaussian_loss(&apply_gaussian_loss(&w, e1).unwrap(), e2).unwrap();
            let one = apply_gaussian_loss(&w, e1 * e2).unwrap();
            prop_assert!((two.eval(x, p) - one.eval(x, p)).abs() <= 1e-12);
        }
    }
}
