//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vjcal_core::data::{
    filter_sigma, filter_support_density, synthesize, temporal_folds, Dataset, JointBox, MeasurementSample,
    Provenance, SynthSpec, DEFAULT_MIN_COUNT, DEFAULT_SIGMA_THRESHOLD_UM,
};
use vjcal_core::diagnostics::repeatability::load_clusters;
use vjcal_core::diagnostics::{
    moving_average, project_residuals_to_joints, projected_joint_curve, repeatability, rp_from_stats,
    run_crossval, submodel_spectra, CrossvalConfig,
};
use vjcal_core::estimator::{evaluate, solve};
use vjcal_core::jacobian::position_jacobian;
use vjcal_core::robot::{EnvState, JointState, RobotDescription, NUM_JOINTS};
use vjcal_core::submodels::{Block, ModelVariant, ParameterVector, DEFAULT_D_SUPP};
use vjcal_core::validation::{finite_difference_jacobian, max_column_relative_error};
use vjcal_core::{ParamLayout, SolverConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn random_q(rng: &mut impl Rng, desc: &RobotDescription) -> JointState {
    JointState::new(std::array::from_fn(|i| {
        let (lo, hi) = desc.joints[i].limits;
        rng.random_range(lo..hi)
    }))
}

/// Both filters at their defaults.
fn filtered(ds: &Dataset) -> Dataset {
    let (ds, _) = filter_sigma(ds, DEFAULT_SIGMA_THRESHOLD_UM);
    filter_support_density(&ds, DEFAULT_D_SUPP, DEFAULT_MIN_COUNT).expect("density filter").0
}

fn support_ranges(ds: &Dataset) -> [(f64, f64); NUM_JOINTS] {
    filter_support_density(ds, DEFAULT_D_SUPP, DEFAULT_MIN_COUNT).expect("ranges").1
}

fn gradient_correctness(desc: &RobotDescription) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let wide = JointBox {
        lower: std::array::from_fn(|i| desc.joints[i].limits.0),
        upper: std::array::from_fn(|i| desc.joints[i].limits.1),
    };
    let mut worst: f64 = 0.0;
    for draw in 0..200 {
        let mut spec = SynthSpec::new(1000 + draw, 1);
        spec.joint_box = wide.clone();
        spec.ground_truth.masses = std::array::from_fn(|_| rng.random_range(-80.0..80.0));
        spec.ground_truth.compliances = std::array::from_fn(|_| rng.random_range(1e-9..1e-7));
        spec.ground_truth.alpha_scale = rng.random_range(0.5..2.0);
        let theta = spec.ground_truth().map_err(|e| e.to_string())?;
        let q = random_q(&mut rng, desc);
        let env = EnvState::new(rng.random_range(15.0..30.0));
        let layout = ParamLayout::new(ModelVariant::FULL, &theta).map_err(|e| e.to_string())?;
        let analytic = position_jacobian(desc, &q, &env, &theta, ModelVariant::FULL).map_err(|e| e.to_string())?;
        let numeric = finite_difference_jacobian(desc, &q, &env, &theta, &layout);
        worst = worst.max(max_column_relative_error(&analytic, &numeric));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-6 && secs < 30.0,
        format!("max column relative error {worst:.2e} over 200 draws in {secs:.1} s"),
    )
}

fn initial_guess_identity(desc: &RobotDescription) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let theta0 = ParameterVector::initial_with_support(&[(-3.5, 3.5); NUM_JOINTS], DEFAULT_D_SUPP)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q = random_q(&mut rng, desc);
        let env = EnvState::new(rng.random_range(10.0..40.0));
        let d = desc.fk_augmented(&q, &env, &theta0).translation - desc.fk_nominal(&q).translation;
        worst = worst.max(d.norm());
    }
    check(worst < 1e-12, format!("max deviation {worst:.1e} mm over 1000 poses"))
}

/// Noiseless full-model fit on four of five temporal chunks.
struct NoiselessFit {
    truth: ParameterVector,
    theta: ParameterVector,
    validation_mean_um: f64,
    data: Dataset,
    secs: f64,
}

fn noiseless_fit(desc: &RobotDescription) -> Result<NoiselessFit, String> {
    let start = Instant::now();
    let spec = SynthSpec::new(2024, 4000);
    let (raw, truth) = synthesize(desc, &spec).map_err(|e| e.to_string())?;
    let data = filtered(&raw);
    let folds = temporal_folds(data.len(), 5).map_err(|e| e.to_string())?;
    let fold = &folds[folds.len() - 1];
    let (train, validation) = (data.subset(&fold.train), data.subset(&fold.validation));
    let theta0 =
        ParameterVector::initial_with_support(&support_ranges(&data), DEFAULT_D_SUPP).map_err(|e| e.to_string())?;
    let mut cfg = SolverConfig::with_variant(ModelVariant::FULL);
    cfg.max_iters = 400;
    let result = solve(desc, &train, &theta0, &cfg).map_err(|e| e.to_string())?;
    let val = evaluate(desc, &validation, &result.theta).map_err(|e| e.to_string())?;
    Ok(NoiselessFit {
        truth,
        theta: result.theta,
        validation_mean_um: val.mean_um,
        data,
        secs: start.elapsed().as_secs_f64(),
    })
}

fn noiseless_round_trip(fit: &NoiselessFit) -> Outcome {
    let alpha_err = (0..NUM_JOINTS)
        .map(|i| (fit.theta.thermal.alpha[i] / fit.truth.thermal.alpha[i] - 1.0).abs())
        .fold(0.0, f64::max);
    let (m, k) = (fit.theta.link_masses(), fit.theta.link_compliances());
    let (mt, kt) = (fit.truth.link_masses(), fit.truth.link_compliances());
    let mut product_err: f64 = 0.0;
    let mut worst_pair = (0, 0);
    for i in 1..NUM_JOINTS {
        for j in i..NUM_JOINTS {
            let e = (m[j] * k[i] / (mt[j] * kt[i]) - 1.0).abs();
            if e > product_err {
                product_err = e;
                worst_pair = (j + 1, i + 1);
            }
        }
    }
    check(
        fit.validation_mean_um < 1e-3 && alpha_err < 0.01 && product_err < 0.01 && fit.secs < 300.0,
        format!(
            "held-out mean {:.2e} um, max alpha error {:.2}%, max m_j*k_i error {:.2}% (m{}*k{}), {:.0} s",
            fit.validation_mean_um,
            alpha_err * 100.0,
            product_err * 100.0,
            worst_pair.0,
            worst_pair.1,
            fit.secs
        ),
    )
}

fn noisy_crossval(desc: &RobotDescription) -> Result<vjcal_core::diagnostics::AblationReport, String> {
    let mut spec = SynthSpec::new(2025, 4000);
    spec.noise_sigma_um = 5.0;
    let (raw, _) = synthesize(desc, &spec).map_err(|e| e.to_string())?;
    let data = filtered(&raw);
    let cfg = CrossvalConfig::default();
    run_crossval(
        desc,
        &data,
        &[ModelVariant::G, ModelVariant::GC, ModelVariant::GCT, ModelVariant::FULL],
        &cfg,
    )
    .map_err(|e| e.to_string())
}

fn noisy_round_trip(report: &vjcal_core::diagnostics::AblationReport) -> Outcome {
    let floor = 2.0 * (2.0 / std::f64::consts::PI).sqrt() * 5.0;
    let full = report.variant(ModelVariant::FULL).ok_or("no full-model row")?;
    let ratio = full.val_mean / floor;
    check(
        (0.8..=1.5).contains(&ratio),
        format!("full-model validation mean {:.3} um = {ratio:.3} x noise floor {floor:.3} um", full.val_mean),
    )
}

fn ablation_ordering(report: &vjcal_core::diagnostics::AblationReport) -> Outcome {
    let means: Vec<(String, f64)> = report.summary.iter().map(|s| (s.variant.to_string(), s.val_mean)).collect();
    let ok = means.windows(2).all(|w| w[1].1 < w[0].1);
    let text = means.iter().map(|(v, m)| format!("{v} {m:.3}")).collect::<Vec<_>>().join(", ");
    check(ok, format!("validation means (um): {text}"))
}

fn nullspace_invariance(desc: &RobotDescription) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let theta = SynthSpec::new(6, 1).ground_truth().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let q = random_q(&mut rng, desc);
        let env = EnvState::new(rng.random_range(15.0..30.0));
        let base = desc.fk_augmented(&q, &env, &theta).translation;
        for c in [0.5, 2.0, 7.0] {
            let scaled = desc.fk_augmented(&q, &env, &theta.scale_compliance(c)).translation;
            worst = worst.max((scaled - base).norm());
        }
    }
    check(worst < 1e-9, format!("max deviation {worst:.1e} mm for c in {{0.5, 2, 7}}"))
}

fn identifiability_spectra(desc: &RobotDescription) -> Outcome {
    let mut ratios = Vec::new();
    for scale in [1.0, 1e3, 1e6] {
        let mut spec = SynthSpec::new(2027, 2000);
        spec.noise_sigma_um = 5.0;
        spec.ground_truth.alpha = [20e-6; NUM_JOINTS];
        spec.ground_truth.alpha_scale = scale;
        let (data, truth) = synthesize(desc, &spec).map_err(|e| e.to_string())?;
        let report = submodel_spectra(desc, &data, &truth, ModelVariant::FULL).map_err(|e| e.to_string())?;
        ratios.push(report.tail_ratio(Block::Geometry, 6).ok_or("short geometry spectrum")?);
    }
    check(
        ratios[0] < 0.1 && ratios[1] > ratios[0] && ratios[2] > ratios[1],
        format!(
            "6th-smallest/median sigma_G: {:.2e} (x1), {:.2e} (x1e3), {:.2e} (x1e6)",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

/// Sup-norm distance between two curves sampled at the same points, after
/// removing each curve's mean (a constant joint offset belongs to the
/// geometry submodel).
fn centred_sup_distance(a: &[f64], b: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| ((x - ma) - (y - mb)).abs()).fold(0.0, f64::max)
}

fn joint_curve_recovery(desc: &RobotDescription, fit: &NoiselessFit) -> Outcome {
    let mut full_worst: f64 = 0.0;
    for (est, truth) in fit.theta.joint_correction.iter().zip(&fit.truth.joint_correction) {
        // supported interior: drop the outermost segment on each side
        let nodes: Vec<f64> = (1..est.len() - 1).map(|j| est.node(j)).collect();
        let a: Vec<f64> = nodes.iter().map(|&q| est.evaluate(q).value).collect();
        let b: Vec<f64> = nodes.iter().map(|&q| truth.evaluate(q).value).collect();
        full_worst = full_worst.max(centred_sup_distance(&a, &b));
    }

    // GCT fit on the same data, residuals projected into joint space
    let theta0 = ParameterVector::initial(Vec::new());
    let mut cfg = SolverConfig::with_variant(ModelVariant::GCT);
    cfg.max_iters = 400;
    let gct = solve(desc, &fit.data, &theta0, &cfg).map_err(|e| e.to_string())?;
    let projections = project_residuals_to_joints(desc, &fit.data, &gct.theta);
    let mut proj = Vec::with_capacity(NUM_JOINTS);
    for (i, truth) in fit.truth.joint_correction.iter().enumerate() {
        let curve = projected_joint_curve(&projections, &fit.data, i, DEFAULT_D_SUPP, DEFAULT_MIN_COUNT);
        let smooth = moving_average(&curve, 2);
        let interior: Vec<_> = smooth[2..smooth.len() - 2].to_vec();
        let a: Vec<f64> = interior.iter().map(|p| p.value).collect();
        let b: Vec<f64> = interior.iter().map(|p| truth.evaluate(p.q).value).collect();
        proj.push(centred_sup_distance(&a, &b));
    }
    let proj_worst = proj.iter().copied().fold(0.0, f64::max);
    let per_joint: Vec<String> = proj.iter().map(|d| format!("{:.3}", d * 1e3)).collect();
    check(
        full_worst < 5e-5 && proj_worst < 5e-5,
        format!(
            "sup deviation: full model {:.4} mrad, GCT residual projection per joint [{}] mrad",
            full_worst * 1e3,
            per_joint.join(", ")
        ),
    )
}

fn repeatability_arithmetic() -> Outcome {
    let clusters = load_clusters(fixture("repeatability_clusters.csv")).map_err(|e| e.to_string())?;
    let r = repeatability(&clusters, Some(1800.0)).map_err(|e| e.to_string())?;
    // frozen from the standalone numpy script next to the fixture
    let (l_bar, s_l, rp) = (5.951238718951894, 2.417861963643958, 13.204824609883767);
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let table = rp_from_stats(6.26, 2.75);
    check(
        r.n_points == 525
            && r.rp == r.l_bar + 3.0 * r.s_l
            && rel(r.l_bar, l_bar) < 1e-12
            && rel(r.s_l, s_l) < 1e-12
            && rel(r.rp, rp) < 1e-12
            && (table - 14.51).abs() < 1e-12
            && (table - 14.52).abs() <= 0.01 + 1e-12,
        format!(
            "fixture: l_bar {:.4} um, S_l {:.4} um, RP {:.4} um over {} points; table stats give {table:.2} um",
            r.l_bar, r.s_l, r.rp, r.n_points
        ),
    )
}

fn filter_contracts(desc: &RobotDescription) -> Outcome {
    let mut spec = SynthSpec::new(2030, 4000);
    spec.noise_sigma_um = 5.0;
    spec.sigma_mean_um = Some(2.0);
    let (raw, _) = synthesize(desc, &spec).map_err(|e| e.to_string())?;
    let (s1, _) = filter_sigma(&raw, DEFAULT_SIGMA_THRESHOLD_UM);
    let (s2, stats) = filter_sigma(&s1, DEFAULT_SIGMA_THRESHOLD_UM);
    let sigma_idem = s1.samples() == s2.samples() && stats.removed == 0;
    let (d1, r1) = filter_support_density(&s1, DEFAULT_D_SUPP, DEFAULT_MIN_COUNT).map_err(|e| e.to_string())?;
    let (d2, r2) = filter_support_density(&d1, DEFAULT_D_SUPP, DEFAULT_MIN_COUNT).map_err(|e| e.to_string())?;
    let density_idem = d1.samples() == d2.samples() && r1 == r2;
    let mut min_count = usize::MAX;
    for i in 0..NUM_JOINTS {
        let mut counts = std::collections::BTreeMap::new();
        for s in d1.iter() {
            *counts.entry((s.q.q[i] * DEFAULT_D_SUPP).floor() as i64).or_insert(0usize) += 1;
        }
        min_count = min_count.min(counts.values().copied().min().unwrap_or(0));
    }

    // joint 1 has ten samples in each of bins 0..=4 and nine in bin 5
    let sample = |m: usize, q1: f64| MeasurementSample {
        timestamp: m as f64,
        q: JointState::new([q1, 0.1, 0.1, 0.1, 0.1, 0.1]),
        kappa: 20.0,
        t_meas: Vector3::zeros(),
        sigma: None,
    };
    let mut samples = Vec::new();
    for bin in 0..6 {
        let n = if bin == 5 { 9 } else { 10 };
        for j in 0..n {
            samples.push(sample(samples.len(), (bin as f64 + 0.05 + 0.09 * j as f64) / 10.0));
        }
    }
    let edge = Dataset::new(samples, Provenance::default()).map_err(|e| e.to_string())?;
    let (kept, ranges) = filter_support_density(&edge, 10.0, 10).map_err(|e| e.to_string())?;
    let edge_excluded = kept.len() == 50 && ranges[0] == (0.0, 0.5);

    check(
        sigma_idem && density_idem && min_count >= 10 && edge_excluded,
        format!(
            "sigma idempotent {sigma_idem}, density idempotent {density_idem}, smallest retained bin {min_count}, 9-sample edge bin excluded {edge_excluded}"
        ),
    )
}

fn main() {
    let desc = RobotDescription::kr30_like();
    let start = Instant::now();
    let noiseless = noiseless_fit(&desc);
    let crossval = noisy_crossval(&desc);
    let on_fit = |f: &dyn Fn(&NoiselessFit) -> Outcome| match &noiseless {
        Ok(fit) => f(fit),
        Err(e) => Err(format!("noiseless fit failed: {e}")),
    };
    let on_cv = |f: &dyn Fn(&vjcal_core::diagnostics::AblationReport) -> Outcome| match &crossval {
        Ok(r) => f(r),
        Err(e) => Err(format!("cross-validation failed: {e}")),
    };
    let outcomes: Vec<(&str, Outcome)> = vec![
        ("gradient correctness", gradient_correctness(&desc)),
        ("initial-guess identity", initial_guess_identity(&desc)),
        ("noiseless round trip", on_fit(&noiseless_round_trip)),
        ("noisy round trip", on_cv(&noisy_round_trip)),
        ("ablation ordering", on_cv(&ablation_ordering)),
        ("nullspace invariance", nullspace_invariance(&desc)),
        ("identifiability spectra", identifiability_spectra(&desc)),
        ("joint-curve recovery", on_fit(&|fit| joint_curve_recovery(&desc, fit))),
        ("repeatability arithmetic", repeatability_arithmetic()),
        ("filter contracts", filter_contracts(&desc)),
    ];
    let mut failed = 0;
    for (n, (name, outcome)) in outcomes.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", n + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.0} s",
        outcomes.len() - failed,
        outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
