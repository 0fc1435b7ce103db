use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use catsim::acquisim::{sample_quadratures_described, write_dataset, read_dataset, AcquisitionConfig, QuadratureDataset};
use catsim::analysis::{analyze, fit_xi, wigner_origin, write_reports_csv, AnalysisReport, ReportSource};
use catsim::calib::{fit_curve, read_points, FitModel};
use catsim::fock::{squeezed_vacuum_adaptive, wigner_grid, write_wigner_csv};
use catsim::gauss::{predict_states, write_predictions_csv, LossCorrection, PredictionRecord};
use catsim::tomo::{reconstruct, ReconstructOptions, ReconstructionReport};
use catsim::{DensityMatrix, Error, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::{Cli, Command, FitKind, SimKind};

pub const GRID_EXTENT: f64 = 8.0;
pub const GRID_STEP: f64 = 0.05;
/// Squeezing runs record as many samples as the squeezing measurement.
const SQUEEZING_SEGMENTS: usize = 65200;

pub fn exit_code(e: &Error) -> u8 {
    if e.is_usage_error() {
        2
    } else if e.is_data_error() {
        3
    } else {
        4
    }
}

struct Context {
    cfg: ExperimentConfig,
    eta: Option<f64>,
    out: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.nmax {
        cfg.n_max = n;
    }
    if let Some(b) = cli.bin_size {
        cfg.bin_size = b;
    }
    fs::create_dir_all(&cli.out)?;
    let ctx = Context { cfg, eta: cli.eta, out: cli.out };
    match cli.command {
        Command::Predict { powers } => predict(&ctx, powers),
        Command::Simulate { kind, power, xi, segments } => match kind {
            SimKind::Squeezing => simulate_squeezing(&ctx, power, segments),
            SimKind::Subtraction => simulate_subtraction(&ctx, power, xi, segments),
        },
        Command::Reconstruct { dataset } => reconstruct_cmd(&ctx, &dataset),
        Command::Analyze { rho, power } => analyze_cmd(&ctx, &rho, power),
        Command::Fit { kind, csv } => fit(&ctx, kind, &csv),
        Command::Wigner { rho, power, xi, extent, step } => wigner_cmd(&ctx, rho.as_deref(), power, xi, extent, step),
    }
}

#[derive(Serialize)]
struct PredictionTables {
    uncorrected: Vec<PredictionRecord>,
    homodyne_corrected: Vec<PredictionRecord>,
    fully_corrected: Vec<PredictionRecord>,
}

fn predict(ctx: &Context, powers: Option<Vec<f64>>) -> Result<()> {
    let powers = powers.unwrap_or_else(|| ctx.cfg.pump_powers_mw.clone());
    if powers.is_empty() {
        return Err(Error::InvalidArgument("no pump powers given".into()));
    }
    let mut cfg = ctx.cfg.clone();
    if let Some(eta) = ctx.eta {
        cfg.eta_hd = eta;
    }
    let view = |correction| -> Result<Vec<PredictionRecord>> {
        powers
            .iter()
            .map(|&p| {
                let xi = cfg.xi_at(p)?;
                predict_states(p, &cfg.prediction(correction, xi), cfg.n_max)?.record(xi)
            })
            .collect()
    };
    let tables = PredictionTables {
        uncorrected: view(LossCorrection::None)?,
        homodyne_corrected: view(LossCorrection::Homodyne)?,
        fully_corrected: view(LossCorrection::Full)?,
    };
    write_predictions_csv(ctx.create("predictions.csv")?, &tables.uncorrected)?;
    write_predictions_csv(ctx.create("predictions_homodyne_corrected.csv")?, &tables.homodyne_corrected)?;
    write_predictions_csv(ctx.create("predictions_fully_corrected.csv")?, &tables.fully_corrected)?;
    ctx.write_json("predictions.json", &tables)?;
    println!("P_p [mW]  F_odd   alpha   W(0,0)");
    for r in &tables.uncorrected {
        println!("{:8.1}  {:.3}   {:.3}   {:+.3}", r.pump_power_mw, r.f_odd, r.alpha, r.w00);
    }
    Ok(())
}

/// Extreme variances from a least-squares fit of `⟨x²⟩(θ) = a + b cos 2θ + c sin 2θ`
/// over the whole scan: `a ∓ √(b² + c²)`.
fn extreme_variances(ds: &QuadratureDataset) -> (f64, f64) {
    // normal equations of the three-term model
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for s in &ds.samples {
        let row = [1.0, (2.0 * s.scan_phase).cos(), (2.0 * s.scan_phase).sin()];
        for i in 0..3 {
            aty[i] += row[i] * s.x * s.x;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let [a, b, c] = solve3(ata, aty);
    let amp = b.hypot(c);
    (a - amp, a + amp)
}

/// Cramer's rule for a 3×3 system.
fn solve3(m: [[f64; 3]; 3], y: [f64; 3]) -> [f64; 3] {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    std::array::from_fn(|k| {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = y[i];
        }
        det(&mk) / d
    })
}

#[derive(Serialize)]
struct ExtremeVariances {
    v_min: f64,
    v_max: f64,
}

fn simulate_squeezing(ctx: &Context, power: f64, segments: Option<usize>) -> Result<()> {
    if !(power > 0.0) {
        return Err(Error::InvalidArgument(format!("pump power {power} mW must be > 0")));
    }
    let r = ctx.cfg.gain_c * power.sqrt();
    let rho = DensityMatrix::from_pure(&squeezed_vacuum_adaptive(r, ctx.cfg.n_max)?);
    let acq = AcquisitionConfig {
        n_segments: segments.unwrap_or(SQUEEZING_SEGMENTS),
        bin_size: ctx.cfg.bin_size,
        seed: ctx.cfg.seed,
        eta_hd: ctx.eta.unwrap_or(ctx.cfg.eta_alt),
        xi: 1.0,
        ..Default::default()
    };
    let desc = format!("squeezed vacuum, P_p = {power} mW, r = {r}");
    let ds = sample_quadratures_described(&rho, &rho, &acq, &desc, &desc)?;
    let path = ctx.path("squeezing.csv");
    write_dataset(&path, &ds)?;
    let (v_min, v_max) = extreme_variances(&ds);
    ctx.write_json("squeezing_variances.json", &ExtremeVariances { v_min, v_max })?;
    println!("{} samples -> {}", ds.samples.len(), path.display());
    println!("quadrature variance {v_min:.4} .. {v_max:.4} (shot-noise units)");
    Ok(())
}

fn simulate_subtraction(ctx: &Context, power: f64, xi: Option<f64>, segments: Option<usize>) -> Result<()> {
    let xi = match xi {
        Some(x) => x,
        None => ctx.cfg.xi_at(power)?,
    };
    // the detection loss is applied by the sampler, so predict the loss-free state
    let model = ctx.cfg.prediction(LossCorrection::Full, xi);
    let states = predict_states(power, &model, ctx.cfg.n_max)?;
    let acq = AcquisitionConfig {
        n_segments: segments.unwrap_or(ctx.cfg.n_segments),
        bin_size: ctx.cfg.bin_size,
        seed: ctx.cfg.seed,
        eta_hd: ctx.eta.unwrap_or(model.detection_efficiency()),
        xi,
        ..Default::default()
    };
    let ds = sample_quadratures_described(
        &states.heralded_fock,
        &states.background_fock,
        &acq,
        &format!("click-heralded squeezed vacuum, P_p = {power} mW"),
        "unconditioned squeezed vacuum after the tap",
    )?;
    let path = ctx.path("subtraction.csv");
    write_dataset(&path, &ds)?;
    println!(
        "{} samples (xi = {xi}, eta = {}) -> {}",
        ds.samples.len(),
        acq.eta_hd,
        path.display()
    );
    Ok(())
}

fn reconstruct_cmd(ctx: &Context, dataset: &Path) -> Result<()> {
    let ds = read_dataset(dataset)?;
    let opts = ReconstructOptions {
        n_max: ctx.cfg.n_max,
        eta: ctx.eta.unwrap_or(1.0),
        bin_size: ctx.cfg.bin_size,
        ..Default::default()
    };
    let (res, _) = reconstruct(&ds, &opts)?;
    let report = ReconstructionReport::new(&res, &opts);
    ctx.write_json("reconstruction.json", &report)?;
    ctx.write_json("rho.json", &report.rho)?;
    println!(
        "{} iterations, converged: {}, log-likelihood per sample {:.6}, W(0,0) = {:.4}",
        report.iterations,
        report.converged,
        report.final_ll,
        wigner_origin(&report.rho)
    );
    res.require_converged()?;
    Ok(())
}

/// A bare density matrix, or the `rho` of a reconstruction report.
fn load_rho(path: &Path) -> Result<(DensityMatrix, ReportSource)> {
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if value.get("rho").is_some() {
        let report: ReconstructionReport = serde_json::from_value(value)?;
        let source = if report.eta_correction < 1.0 {
            ReportSource::ReconstructedLossCorrected
        } else {
            ReportSource::Reconstructed
        };
        Ok((report.rho, source))
    } else {
        Ok((serde_json::from_value(value)?, ReportSource::Reconstructed))
    }
}

fn grid_axis(extent: f64, step: f64) -> Result<Vec<f64>> {
    if !(extent > 0.0 && step > 0.0 && step <= extent) {
        return Err(Error::InvalidArgument(format!("grid extent {extent} and step {step} must satisfy 0 < step <= extent")));
    }
    let n = (extent / step).round() as i64;
    Ok((-n..=n).map(|i| i as f64 * step).collect())
}

fn write_grid(ctx: &Context, rho: &DensityMatrix, extent: f64, step: f64) -> Result<PathBuf> {
    let axis = grid_axis(extent, step)?;
    let path = ctx.path("wigner.csv");
    write_wigner_csv(BufWriter::new(File::create(&path)?), &wigner_grid(rho, &axis, &axis))?;
    Ok(path)
}

fn analyze_cmd(ctx: &Context, rho_path: &Path, power: Option<f64>) -> Result<()> {
    let (rho, source) = load_rho(rho_path)?;
    let mut report: AnalysisReport = analyze(&rho, source, power)?;
    if let Some(p) = power {
        let model = ctx.cfg.prediction(LossCorrection::None, 1.0);
        match fit_xi(&report, p, &model, ctx.cfg.n_max) {
            Ok(xi) => report.xi_fit = Some(xi),
            Err(e @ Error::NoFit { .. }) => eprintln!("note: {e}"),
            Err(e) => return Err(e),
        }
    }
    ctx.write_json("analysis.json", &report)?;
    write_reports_csv(ctx.create("analysis.csv")?, std::slice::from_ref(&report))?;
    let mut w = ctx.create("photon_distribution.csv")?;
    writeln!(w, "n,p")?;
    for (n, p) in report.photon_dist.iter().enumerate() {
        writeln!(w, "{n},{p}")?;
    }
    w.flush()?;
    write_grid(ctx, &rho, GRID_EXTENT, GRID_STEP)?;
    println!(
        "F_odd = {:.4} at alpha = {:.4}{}, W(0,0) = {:.4}",
        report.f_odd,
        report.alpha_opt,
        if report.alpha_at_boundary { " (range boundary)" } else { "" },
        report.w00
    );
    if let Some(xi) = report.xi_fit {
        println!("modal purity fit: {xi:.3}");
    }
    Ok(())
}

fn fit(ctx: &Context, kind: FitKind, csv: &Path) -> Result<()> {
    let model = match kind {
        FitKind::Shg => FitModel::Shg,
        FitKind::Gain => FitModel::Gain,
        FitKind::Squeezing => FitModel::Squeezing,
    };
    let points = read_points(File::open(csv)?, model)?;
    let report = fit_curve(model, &points)?;
    ctx.write_json("fit.json", &report)?;
    for (name, value) in &report.params {
        println!("{name} = {value:.5}");
    }
    println!("residual rms = {:.3e} over {} points", report.residual_rms, report.n_points);
    Ok(())
}

fn wigner_cmd(ctx: &Context, rho: Option<&Path>, power: f64, xi: Option<f64>, extent: f64, step: f64) -> Result<()> {
    let rho = match rho {
        Some(path) => load_rho(path)?.0,
        None => {
            let xi = match xi {
                Some(x) => x,
                None => ctx.cfg.xi_at(power)?,
            };
            predict_states(power, &ctx.cfg.prediction(LossCorrection::None, xi), ctx.cfg.n_max)?.density(xi)?
        }
    };
    let path = write_grid(ctx, &rho, extent, step)?;
    println!("W(0,0) = {:.4} -> {}", wigner_origin(&rho), path.display());
    Ok(())
}
