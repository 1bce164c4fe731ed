//! Temporal cross-validation over model variants, and the reduced-data study.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{filter_support_density, subsample_training, temporal_folds, Dataset, Fold, DEFAULT_MIN_COUNT};
use crate::error::{Error, Result};
use crate::estimator::{evaluate, sensitivity_scale, solve_problem, ErrorSummary, Problem, SolverConfig};
use crate::robot::{RobotDescription, NUM_JOINTS};
use crate::submodels::{ModelVariant, ParameterVector, DEFAULT_D_SUPP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalConfig {
    pub folds: usize,
    /// Support points per radian of the joint-correction curves.
    pub d_supp: f64,
    pub solver: SolverConfig,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            d_supp: DEFAULT_D_SUPP,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub variant: ModelVariant,
    pub fold: usize,
    pub train: ErrorSummary,
    pub validation: ErrorSummary,
    pub iterations: usize,
    pub theta: ParameterVector,
}

/// Aggregates of one variant over all folds (µm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: ModelVariant,
    /// Mean over the training residuals of all folds.
    pub train_mean: f64,
    /// Largest per-fold training p95 and maximum.
    pub train_p95: f64,
    pub train_max: f64,
    /// Mean over the validation residuals of all folds.
    pub val_mean: f64,
    pub val_p95: f64,
    pub val_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub folds: usize,
    pub fold_sizes: Vec<usize>,
    pub per_fold: Vec<FoldResult>,
    pub summary: Vec<VariantSummary>,
}

impl AblationReport {
    pub fn variant(&self, v: ModelVariant) -> Option<&VariantSummary> {
        self.summary.iter().find(|s| s.variant == v)
    }

    /// Per-fold rows followed by one `all` row per variant.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("variant,fold,train_mean_um,train_p95_um,train_max_um,val_mean_um,val_p95_um,val_max_um\n");
        for f in &self.per_fold {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                f.variant,
                f.fold + 1,
                f.train.mean_um,
                f.train.p95_um,
                f.train.max_um,
                f.validation.mean_um,
                f.validation.p95_um,
                f.validation.max_um
            );
        }
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{},all,{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                s.variant, s.train_mean, s.train_p95, s.train_max, s.val_mean, s.val_p95, s.val_max
            );
        }
        out
    }

    /// Plain-text table of the per-variant aggregates.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            "model", "train mean", "train p95", "train max", "val mean", "val p95", "val max"
        );
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{:<6} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
                s.variant.to_string(),
                s.train_mean,
                s.train_p95,
                s.train_max,
                s.val_mean,
                s.val_p95,
                s.val_max
            );
        }
        out
    }
}

/// Inputs shared by every fold: the dataset's support ranges (so all folds
/// use the same curve grid) and the folds themselves.
struct Plan {
    folds: Vec<Fold>,
    ranges: [(f64, f64); NUM_JOINTS],
}

fn plan(ds: &Dataset, cfg: &CrossvalConfig) -> Result<Plan> {
    cfg.solver.validate()?;
    let folds = temporal_folds(ds.len(), cfg.folds)?;
    let (filtered, ranges) = filter_support_density(ds, cfg.d_supp, DEFAULT_MIN_COUNT)?;
    if filtered.len() != ds.len() {
        return Err(Error::UnusableDataset(format!(
            "{} samples fall outside the supported segments; apply the density filter first",
            ds.len() - filtered.len()
        )));
    }
    Ok(Plan { folds, ranges })
}

fn initial_guess(variant: ModelVariant, plan: &Plan, d_supp: f64) -> Result<ParameterVector> {
    if variant.joint {
        ParameterVector::initial_with_support(&plan.ranges, d_supp)
    } else {
        Ok(ParameterVector::initial(Vec::new()))
    }
}

fn run_fold(
    desc: &RobotDescription,
    train: &Dataset,
    validation: &Dataset,
    variant: ModelVariant,
    fold: usize,
    plan: &Plan,
    cfg: &CrossvalConfig,
) -> Result<FoldResult> {
    let wrap = |e: Error| Error::Fold {
        fold: fold + 1,
        source: Box::new(e),
    };
    let theta0 = initial_guess(variant, plan, cfg.d_supp).map_err(wrap)?;
    let mut solver = cfg.solver.clone();
    solver.variant = variant;
    let problem = Problem::new(desc, train, &theta0, &solver).map_err(wrap)?;
    let result = solve_problem(&problem, &theta0).map_err(wrap)?;
    Ok(FoldResult {
        variant,
        fold,
        train: result.train,
        validation: evaluate(desc, validation, &result.theta).map_err(wrap)?,
        iterations: result.trace.iterations.len().saturating_sub(1),
        theta: result.theta,
    })
}

/// Calibrates every variant on every fold's training chunks and evaluates
/// on the held-out chunk. The dataset must already have passed the σ and
/// density filters.
pub fn run_crossval(
    desc: &RobotDescription,
    ds: &Dataset,
    variants: &[ModelVariant],
    cfg: &CrossvalConfig,
) -> Result<AblationReport> {
    if variants.is_empty() {
        return Err(Error::InvalidArgument("no model variants given".into()));
    }
    let plan = plan(ds, cfg)?;
    let splits: Vec<(Dataset, Dataset)> = plan
        .folds
        .iter()
        .map(|f| (ds.subset(&f.train), ds.subset(&f.validation)))
        .collect();
    let jobs: Vec<(ModelVariant, usize)> = variants
        .iter()
        .flat_map(|&v| (0..plan.folds.len()).map(move |f| (v, f)))
        .collect();
    let per_fold = jobs
        .par_iter()
        .map(|&(v, f)| run_fold(desc, &splits[f].0, &splits[f].1, v, f, &plan, cfg))
        .collect::<Result<Vec<_>>>()?;
    let summary = variants
        .iter()
        .map(|&v| {
            let rows: Vec<&FoldResult> = per_fold.iter().filter(|r| r.variant == v).collect();
            summarize(v, &rows)
        })
        .collect();
    Ok(AblationReport {
        folds: plan.folds.len(),
        fold_sizes: plan.folds.iter().map(|f| f.validation.len()).collect(),
        per_fold,
        summary,
    })
}

fn summarize(variant: ModelVariant, rows: &[&FoldResult]) -> VariantSummary {
    let pooled = |pick: fn(&FoldResult) -> &ErrorSummary| {
        let n: usize = rows.iter().map(|r| pick(r).n).sum();
        rows.iter().map(|r| pick(r).mean_um * pick(r).n as f64).sum::<f64>() / n as f64
    };
    let worst = |pick: fn(&FoldResult) -> f64| rows.iter().map(|r| pick(r)).fold(f64::NEG_INFINITY, f64::max);
    VariantSummary {
        variant,
        train_mean: pooled(|r| &r.train),
        train_p95: worst(|r| r.train.p95_um),
        train_max: worst(|r| r.train.max_um),
        val_mean: pooled(|r| &r.validation),
        val_p95: worst(|r| r.validation.p95_um),
        val_max: worst(|r| r.validation.max_um),
    }
}

/// Validation error and joint-curve size at one training-set size, as mean
/// and sample standard deviation over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPoint {
    pub k: usize,
    pub val_mean_um: f64,
    pub val_mean_std_um: f64,
    pub val_max_um: f64,
    pub val_max_std_um: f64,
    /// Mean `|θ_J|` over all support points (rad); zero without joint model.
    pub joint_abs_mean_rad: f64,
    pub joint_abs_mean_std_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub variant: ModelVariant,
    pub points: Vec<ReductionPoint>,
}

impl ReductionReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k,val_mean_um,val_mean_std_um,val_max_um,val_max_std_um,joint_abs_mean_rad,joint_abs_mean_std_rad\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{:.4},{:.4},{:e},{:e}",
                p.k, p.val_mean_um, p.val_mean_std_um, p.val_max_um, p.val_max_std_um, p.joint_abs_mean_rad, p.joint_abs_mean_std_rad
            );
        }
        out
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// For each `k`, calibrates `cfg.solver.variant` on a random `k`-subset of
/// every fold's training set and evaluates on the full validation chunk.
/// The joint regulariser scales `l_i` come from the full training set, so
/// only the amount of data changes with `k`.
pub fn data_reduction_study(
    desc: &RobotDescription,
    ds: &Dataset,
    k_values: &[usize],
    cfg: &CrossvalConfig,
    seed: u64,
) -> Result<ReductionReport> {
    if k_values.is_empty() || k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("k values must be non-empty and strictly ascending".into()));
    }
    let plan = plan(ds, cfg)?;
    let smallest = plan.folds.iter().map(|f| f.train.len()).min().unwrap_or(0);
    if let Some(&k) = k_values.iter().find(|&&k| k > smallest || k == 0) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={smallest} (smallest training set)"
        )));
    }
    let variant = cfg.solver.variant;
    let jobs: Vec<(usize, usize)> = k_values
        .iter()
        .flat_map(|&k| (0..plan.folds.len()).map(move |f| (k, f)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(k, f)| -> Result<(f64, f64, f64)> {
            let fold = &plan.folds[f];
            let wrap = |e: Error| Error::Fold {
                fold: f + 1,
                source: Box::new(e),
            };
            let full_train = ds.subset(&fold.train);
            let train = subsample_training(&full_train, k, seed.wrapping_add(f as u64)).map_err(wrap)?;
            let validation = ds.subset(&fold.validation);
            let theta0 = initial_guess(variant, &plan, cfg.d_supp).map_err(wrap)?;
            let scaling = sensitivity_scale(desc, full_train.samples()).map_err(wrap)?;
            let problem = Problem::new(desc, &train, &theta0, &cfg.solver).map_err(wrap)?.with_scaling(scaling);
            let result = solve_problem(&problem, &theta0).map_err(wrap)?;
            let val = evaluate(desc, &validation, &result.theta).map_err(wrap)?;
            let values: Vec<f64> = result.theta.joint_correction.iter().flat_map(|c| c.values.iter().map(|v| v.abs())).collect();
            let joint = if variant.joint && !values.is_empty() {
                values.iter().sum::<f64>() / values.len() as f64
            } else {
                0.0
            };
            Ok((val.mean_um, val.max_um, joint))
        })
        .collect::<Result<Vec<_>>>()?;
    let folds = plan.folds.len();
    let points = k_values
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let chunk = &results[i * folds..(i + 1) * folds];
            let (val_mean_um, val_mean_std_um) = mean_std(&chunk.iter().map(|r| r.0).collect::<Vec<_>>());
            let (val_max_um, val_max_std_um) = mean_std(&chunk.iter().map(|r| r.1).collect::<Vec<_>>());
            let (joint_abs_mean_rad, joint_abs_mean_std_rad) = mean_std(&chunk.iter().map(|r| r.2).collect::<Vec<_>>());
            ReductionPoint {
                k,
                val_mean_um,
                val_mean_std_um,
                val_max_um,
                val_max_std_um,
                joint_abs_mean_rad,
                joint_abs_mean_std_rad,
            }
        })
        .collect();
    Ok(ReductionReport { variant, points })
}
