use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use vjcal_core::data::{
    filter_sigma, filter_support_density, load_dataset, synthesize, DEFAULT_MIN_COUNT, DEFAULT_SIGMA_THRESHOLD_UM,
};
use vjcal_core::diagnostics::repeatability::load_clusters;
use vjcal_core::diagnostics::{
    data_reduction_study, moving_average, project_residuals_to_joints, projected_joint_curve,
    run_crossval, submodel_spectra, CrossvalConfig,
};
use vjcal_core::estimator::{evaluate as evaluate_errors, position_errors_um, solve};
use vjcal_core::robot::NUM_JOINTS;
use vjcal_core::submodels::{parse_variants, Block, DEFAULT_D_SUPP};
use vjcal_core::{CalibrationResult, Dataset, ModelVariant, ParameterVector, RobotDescription, SolverConfig, SynthSpec};

use crate::manifest::{write_file, ManifestBuilder};
use crate::{
    CalibrateArgs, CliError, CrossvalArgs, EvaluateArgs, FitArgs, ProjectArgs, ReduceArgs, RepeatabilityArgs,
    ResultArgs, SynthArgs,
};

/// Contents of `--config` for the fitting commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    sigma_threshold_um: f64,
    d_supp: f64,
    folds: usize,
    solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma_threshold_um: DEFAULT_SIGMA_THRESHOLD_UM,
            d_supp: DEFAULT_D_SUPP,
            folds: 5,
            solver: SolverConfig::default(),
        }
    }
}

impl RunConfig {
    fn crossval(&self) -> CrossvalConfig {
        CrossvalConfig {
            folds: self.folds,
            d_supp: self.d_supp,
            solver: self.solver.clone(),
        }
    }
}

fn run_config(args: &FitArgs, folds: Option<usize>, m: &mut ManifestBuilder) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = match &args.config {
        Some(path) => {
            m.config_path(path);
            m.input(path)?;
            vjcal_core::config::load_toml(path)?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = args.d_supp {
        cfg.d_supp = d;
    }
    if let Some(l) = args.lambda_gn {
        cfg.solver.lambda_gn = l;
    }
    if let Some(l) = args.lambda_j {
        cfg.solver.lambda_j = l;
    }
    if let Some(f) = folds {
        cfg.folds = f;
    }
    cfg.solver.validate()?;
    if !(cfg.d_supp.is_finite() && cfg.d_supp > 0.0) {
        return Err(CliError::input(format!("d_supp must be positive, got {}", cfg.d_supp)));
    }
    if !(cfg.sigma_threshold_um.is_finite() && cfg.sigma_threshold_um > 0.0) {
        return Err(CliError::input(format!(
            "sigma_threshold_um must be positive, got {}",
            cfg.sigma_threshold_um
        )));
    }
    Ok(cfg)
}

fn load_robot(path: &Path, m: &mut ManifestBuilder) -> Result<RobotDescription, CliError> {
    let desc = RobotDescription::load(path)?;
    m.input(path)?;
    Ok(desc)
}

fn load_input_dataset(path: &Path, m: &mut ManifestBuilder) -> Result<Dataset, CliError> {
    let ds = load_dataset(path)?;
    m.input(path)?;
    Ok(ds)
}

fn load_result(path: &Path, desc: &RobotDescription, m: &mut ManifestBuilder) -> Result<CalibrationResult, CliError> {
    let result = CalibrationResult::load(path)?;
    m.input(path)?;
    if result.description_checksum != desc.checksum() {
        return Err(CliError::input(format!(
            "{} was calibrated for a different robot description",
            path.display()
        )));
    }
    Ok(result)
}

/// σ filter followed by the support-density filter.
fn filtered(raw: &Dataset, cfg: &RunConfig) -> Result<(Dataset, [(f64, f64); NUM_JOINTS]), CliError> {
    let (ds, stats) = filter_sigma(raw, cfg.sigma_threshold_um);
    let (ds, ranges) = filter_support_density(&ds, cfg.d_supp, DEFAULT_MIN_COUNT)?;
    eprintln!(
        "filters: {} samples in, {} above sigma threshold, {} outside supported segments, {} kept",
        raw.len(),
        stats.removed,
        raw.len() - stats.removed - ds.len(),
        ds.len()
    );
    Ok((ds, ranges))
}

fn out_dir(path: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

fn to_json(value: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::input(e.to_string()))
}

fn emit(m: &mut ManifestBuilder, path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    write_file(&path, contents)?;
    m.output(&path)
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("synth");
    let desc = load_robot(&a.robot, &mut m)?;
    let mut spec = SynthSpec::load(&a.config)?;
    m.config_path(&a.config);
    m.input(&a.config)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    m.seed("synth", spec.seed);
    m.effective_config(&spec);
    let (ds, truth) = synthesize(&desc, &spec)?;
    let out = out_dir(&a.out)?;
    let dataset_path = out.join("dataset.csv");
    ds.save(&dataset_path)?;
    m.output(&dataset_path)?;
    emit(&mut m, out.join("ground_truth.json"), to_json(&truth)?)?;
    m.finish(&out, 0)?;
    println!("wrote {} samples to {}", ds.len(), dataset_path.display());
    Ok(())
}

pub fn calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("calibrate");
    let desc = load_robot(&a.fit.robot, &mut m)?;
    let mut cfg = run_config(&a.fit, None, &mut m)?;
    cfg.solver.variant = a.variant.parse::<ModelVariant>()?;
    m.effective_config(&cfg);
    let raw = load_input_dataset(&a.fit.dataset, &mut m)?;
    let (ds, ranges) = filtered(&raw, &cfg)?;
    let theta0 = if cfg.solver.variant.joint {
        ParameterVector::initial_with_support(&ranges, cfg.d_supp)?
    } else {
        ParameterVector::initial(Vec::new())
    };
    let out = out_dir(&a.fit.out)?;
    match solve(&desc, &ds, &theta0, &cfg.solver) {
        Ok(result) => {
            emit(&mut m, out.join("result.json"), result.to_json()? + "\n")?;
            m.finish(&out, 0)?;
            let t = &result.train;
            println!(
                "{} on {} samples, {} iterations ({:?}): train mean {:.3} um, p95 {:.3} um, max {:.3} um",
                cfg.solver.variant,
                t.n,
                result.trace.iterations.len().saturating_sub(1),
                result.trace.stop,
                t.mean_um,
                t.p95_um,
                t.max_um
            );
            Ok(())
        }
        Err(e) if e.is_numerical() => {
            let trace_path = out.join("trace.json");
            if let Some(trace) = e.trace() {
                emit(&mut m, trace_path.clone(), to_json(trace)?)?;
            }
            m.finish(&out, 4)?;
            Err(CliError {
                code: 4,
                message: format!("{e} (trace in {})", trace_path.display()),
            })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("evaluate");
    let desc = load_robot(&a.robot, &mut m)?;
    let result = load_result(&a.result, &desc, &mut m)?;
    let ds = load_input_dataset(&a.dataset, &mut m)?;
    let summary = evaluate_errors(&desc, &ds, &result.theta)?;
    let out = out_dir(&a.out)?;
    let mut csv = String::from("index,timestamp_s,error_um\n");
    for (i, (s, e)) in ds.iter().zip(position_errors_um(&desc, ds.samples(), &result.theta)).enumerate() {
        let _ = writeln!(csv, "{i},{},{e}", s.timestamp);
    }
    emit(&mut m, out.join("errors.csv"), csv)?;
    emit(&mut m, out.join("evaluation.json"), to_json(&summary)?)?;
    m.finish(&out, 0)?;
    println!(
        "{} samples: mean {:.3} um, p95 {:.3} um, max {:.3} um",
        summary.n, summary.mean_um, summary.p95_um, summary.max_um
    );
    Ok(())
}

pub fn crossval(a: CrossvalArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("crossval");
    let desc = load_robot(&a.fit.robot, &mut m)?;
    let cfg = run_config(&a.fit, a.folds, &mut m)?;
    let variants = parse_variants(&a.variant)?;
    m.effective_config(&(&cfg, variants.iter().map(ToString::to_string).collect::<Vec<_>>()));
    let raw = load_input_dataset(&a.fit.dataset, &mut m)?;
    let (ds, _) = filtered(&raw, &cfg)?;
    let out = out_dir(&a.fit.out)?;
    let report = match run_crossval(&desc, &ds, &variants, &cfg.crossval()) {
        Ok(r) => r,
        Err(e) => {
            let err = CliError::from(e);
            if err.code != 2 {
                m.finish(&out, err.code)?;
            }
            return Err(err);
        }
    };
    let table = report.to_table();
    emit(&mut m, out.join("ablation.csv"), report.to_csv_string())?;
    emit(&mut m, out.join("ablation.txt"), &table)?;
    emit(&mut m, out.join("ablation.json"), to_json(&report)?)?;
    m.finish(&out, 0)?;
    print!("{table}");
    Ok(())
}

pub fn reduce_study(a: ReduceArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("reduce-study");
    let desc = load_robot(&a.fit.robot, &mut m)?;
    let mut cfg = run_config(&a.fit, a.folds, &mut m)?;
    cfg.solver.variant = a.variant.parse::<ModelVariant>()?;
    m.seed("subsample", a.seed);
    m.effective_config(&(&cfg, &a.k));
    let raw = load_input_dataset(&a.fit.dataset, &mut m)?;
    let (ds, _) = filtered(&raw, &cfg)?;
    let report = data_reduction_study(&desc, &ds, &a.k, &cfg.crossval(), a.seed)?;
    let out = out_dir(&a.fit.out)?;
    let csv = report.to_csv_string();
    emit(&mut m, out.join("reduction.csv"), &csv)?;
    emit(&mut m, out.join("reduction.json"), to_json(&report)?)?;
    m.finish(&out, 0)?;
    print!("{csv}");
    Ok(())
}

pub fn spectra(a: ResultArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("spectra");
    let desc = load_robot(&a.robot, &mut m)?;
    let result = load_result(&a.result, &desc, &mut m)?;
    let ds = load_input_dataset(&a.dataset, &mut m)?;
    let report = submodel_spectra(&desc, &ds, &result.theta, result.config.variant)?;
    let out = out_dir(&a.out)?;
    emit(&mut m, out.join("spectra.csv"), report.to_csv_string())?;
    m.finish(&out, 0)?;
    for block in Block::ALL {
        let s = report.block(block);
        if s.is_empty() {
            continue;
        }
        let tail = report
            .tail_ratio(block, 6)
            .map_or_else(|| "n/a".to_string(), |r| format!("{r:.3e}"));
        println!(
            "{}: {} values, max {:.3e}, min {:.3e}, 6th smallest / median {tail}",
            block.letter(),
            s.len(),
            s[0],
            s[s.len() - 1]
        );
    }
    Ok(())
}

pub fn project_residuals(a: ProjectArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("project-residuals");
    let desc = load_robot(&a.inputs.robot, &mut m)?;
    let result = load_result(&a.inputs.result, &desc, &mut m)?;
    let ds = load_input_dataset(&a.inputs.dataset, &mut m)?;
    if !(a.d_supp.is_finite() && a.d_supp > 0.0) {
        return Err(CliError::input(format!("d_supp must be positive, got {}", a.d_supp)));
    }
    let proj = project_residuals_to_joints(&desc, &ds, &result.theta);
    let mut samples = String::from("index,timestamp_s,dq1_rad,dq2_rad,dq3_rad,dq4_rad,dq5_rad,dq6_rad\n");
    for (i, (s, p)) in ds.iter().zip(&proj).enumerate() {
        let _ = write!(samples, "{i},{}", s.timestamp);
        for v in p {
            match v {
                Some(v) => {
                    let _ = write!(samples, ",{v}");
                }
                None => samples.push(','),
            }
        }
        samples.push('\n');
    }
    let mut curves = String::from("joint,q_rad,mean_rad,smoothed_rad,count\n");
    for joint in 0..NUM_JOINTS {
        let curve = projected_joint_curve(&proj, &ds, joint, a.d_supp, a.min_count);
        let smooth = moving_average(&curve, a.smooth);
        for (p, s) in curve.iter().zip(&smooth) {
            let _ = writeln!(curves, "{},{},{},{},{}", joint + 1, p.q, p.value, s.value, p.count);
        }
    }
    let out = out_dir(&a.inputs.out)?;
    emit(&mut m, out.join("projections.csv"), samples)?;
    emit(&mut m, out.join("curves.csv"), curves)?;
    m.finish(&out, 0)?;
    println!("projected {} residuals onto {NUM_JOINTS} joints", ds.len());
    Ok(())
}

pub fn repeatability(a: RepeatabilityArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("repeatability");
    let clusters = load_clusters(&a.dataset)?;
    m.input(&a.dataset)?;
    let window = (!a.no_drift).then_some(a.window);
    let report = vjcal_core::diagnostics::repeatability(&clusters, window)?;
    let out = out_dir(&a.out)?;
    emit(&mut m, out.join("repeatability.json"), to_json(&report)?)?;
    m.finish(&out, 0)?;
    println!(
        "{} clusters, {} points: l_bar {:.3} um, S_l {:.3} um, RP {:.3} um",
        clusters.len(),
        report.n_points,
        report.l_bar,
        report.s_l,
        report.rp
    );
    Ok(())
}
