use catsim::calib::{
    electronic_noise_efficiency, fit_curve, homodyne_efficiency, parametric_gain, read_points, shg_efficiency,
    shot_noise_clearance, squeezing_variance, synthetic_points, CalPoint, DetectorModel, EfficiencyBudget, FitModel,
    GainModelParams, ShgModelParams,
};
use catsim::Error;
use proptest::prelude::*;

#[test]
fn reference_values() {
    let shg = ShgModelParams { eta_inf: 0.53, g: 0.18 };
    assert!((shg_efficiency(33.0, shg).unwrap() - 0.319).abs() < 0.005);
    assert_eq!(shg_efficiency(0.0, shg).unwrap(), 0.0);
    assert!((shg_efficiency(1e6, shg).unwrap() - 0.53).abs() < 1e-12);

    let (g_min, _) = parametric_gain(9.0, GainModelParams { c: 0.28, epsilon: 0.77 }).unwrap();
    assert!((g_min - 0.374).abs() < 0.005);
    assert_eq!(parametric_gain(0.0, GainModelParams { c: 0.28, epsilon: 1.0 }).unwrap(), (1.0, 1.0));

    let (v_min, v_max) = squeezing_variance(4.0, 0.28, 0.62).unwrap();
    assert!((v_min - 0.582).abs() < 1e-3 && (v_max - 2.280).abs() < 1e-3);
    assert!((10.0 * v_min.log10() + 2.35).abs() < 0.01 && (10.0 * v_max.log10() - 3.58).abs() < 0.01);
    assert_eq!(squeezing_variance(4.0, 0.28, 0.0).unwrap(), (1.0, 1.0));

    let budget = EfficiencyBudget { eta_op: 0.90, eta_mm: 0.95, eta_ph: 0.95, eta_el: 0.995 };
    assert!((homodyne_efficiency(budget).unwrap() - 0.7678).abs() < 1e-4);
    let ones = EfficiencyBudget { eta_op: 1.0, eta_mm: 1.0, eta_ph: 1.0, eta_el: 1.0 };
    assert_eq!(homodyne_efficiency(ones).unwrap(), 1.0);
    assert_eq!(homodyne_efficiency(EfficiencyBudget { eta_mm: 0.0, ..ones }).unwrap(), 0.0);

    assert!((electronic_noise_efficiency(23.0).unwrap() - 0.99499).abs() < 1e-5);
    assert_eq!(electronic_noise_efficiency(0.0).unwrap(), 0.0);
    assert_eq!(electronic_noise_efficiency(f64::INFINITY).unwrap(), 1.0);

    let det = DetectorModel { gain_mv2_per_1e6_photons: 13.6, elec_noise_mv2: 3.7 };
    assert!((shot_noise_clearance(70e6, det).unwrap() - 24.1).abs() < 0.05);
    assert!((shot_noise_clearance(1e6, det).unwrap() - 5.65).abs() < 0.005);
    assert!(matches!(shot_noise_clearance(0.0, det), Err(Error::NoSignal)));
}

#[test]
fn out_of_range_efficiencies_are_errors() {
    let ones = EfficiencyBudget { eta_op: 1.0, eta_mm: 1.0, eta_ph: 1.0, eta_el: 1.0 };
    assert!(homodyne_efficiency(EfficiencyBudget { eta_ph: 1.2, ..ones }).is_err());
    assert!(parametric_gain(1.0, GainModelParams { c: 0.28, epsilon: -0.1 }).is_err());
    assert!(electronic_noise_efficiency(-1.0).is_err());
    assert!(shg_efficiency(10.0, ShgModelParams { eta_inf: 1.5, g: 0.5 }).is_err());
}

#[test]
fn degenerate_fits() {
    let pt = CalPoint { x: 2.0, y: 0.5, y2: Some(1.8) };
    assert!(matches!(fit_curve(FitModel::Gain, &[pt, pt]), Err(Error::DegenerateFit(_))));
    assert!(matches!(fit_curve(FitModel::Gain, &[pt, pt, pt]), Err(Error::DegenerateFit(_))));
}

#[test]
fn synthetic_gain_recovery() {
    let xs: Vec<f64> = (1..=9).map(f64::from).collect();
    let pts = synthetic_points(FitModel::Gain, [0.28, 0.77], &xs, 0.01, 3).unwrap();
    let rep = fit_curve(FitModel::Gain, &pts).unwrap();
    assert!((rep.param("c") / 0.28 - 1.0).abs() <= 0.02, "{rep:?}");
    assert!((rep.param("epsilon") / 0.77 - 1.0).abs() <= 0.02, "{rep:?}");
}

#[test]
fn csv_points() {
    let pts = read_points("P,vmin,vmax\n1,0.8,1.3\n2,0.7,1.6\n".as_bytes(), FitModel::Squeezing).unwrap();
    assert_eq!(pts.len(), 2);
    assert_eq!(pts[1].y2, Some(1.6));
    assert!(read_points("P,eta\n1,0.1\n".as_bytes(), FitModel::Gain).is_err());
    assert!(read_points("P,eta\n1,abc\n".as_bytes(), FitModel::Shg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gains_bracket_unity(p in 0.0f64..20.0, c in 0.01f64..1.0, e in 0.0f64..=1.0) {
        let (lo, hi) = parametric_gain(p, GainModelParams { c, epsilon: e }).unwrap();
        prop_assert!(lo <= 1.0 && hi >= 1.0);
        prop_assert!(lo * hi >= 1.0 - 1e-12);
        if e == 1.0 {
            prop_assert!((lo * hi - 1.0).abs() <= 1e-12);
        } else if p > 0.0 && e > 0.0 {
            prop_assert!(lo * hi > 1.0);
        }
    }

    #[test]
    fn noiseless_fits_are_idempotent(a in 0.2f64..0.8, b in 0.1f64..0.4, which in 0usize..3) {
        let (model, params, xs): (FitModel, [f64; 2], Vec<f64>) = match which {
            0 => (FitModel::Shg, [a, b], (1..=20).map(|i| 2.0 * i as f64).collect()),
            1 => (FitModel::Gain, [b, a], (1..=9).map(f64::from).collect()),
            _ => (FitModel::Squeezing, [b, a], (1..=9).map(f64::from).collect()),
        };
        let pts = synthetic_points(model, params, &xs, 0.0, 0).unwrap();
        let rep = fit_curve(model, &pts).unwrap();
        let [n0, n1] = model.param_names();
        prop_assert!((rep.param(n0) / params[0] - 1.0).abs() <= 1e-6, "{:?}", rep);
        prop_assert!((rep.param(n1) / params[1] - 1.0).abs() <= 1e-6, "{:?}", rep);
    }
}
