//! Loss, regularisation and the damped Gauss-Newton solver.
//!
//! Residuals enter the loss in µm, the unit every error is reported in, so
//! the loss is in µm² and the regulariser scales `l_i` are in µm/rad. The
//! damping `λ_GN` acts on scaled coordinates
//! `θ_s = D·θ` with `D` from [`solver_scaling`]: rotations and joint
//! corrections in mrad, translations in mm, masses in units of 10 kg,
//! compliances in µrad/(N·mm) and thermal coefficients in 1e-3/K. These
//! units put every parameter that matters at the micrometre level at a
//! comparable magnitude.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MeasurementSample};
use crate::error::{Error, Result};
use crate::jacobian::{nominal_joint_sensitivity, sample_jacobian};
use crate::robot::{RobotDescription, NUM_JOINTS};
use crate::submodels::{Block, ModelVariant, ParamLayout, ParameterVector, FREE_MASSES};

/// Loss length unit per millimetre (µm).
pub const LOSS_UNIT: f64 = 1e3;
/// Solver coordinate per radian of a geometric rotation.
pub const ROTATION_UNIT: f64 = 1e3;
/// Solver coordinate per millimetre of a geometric translation.
pub const TRANSLATION_UNIT: f64 = 1.0;
/// Solver coordinate per kilogram.
pub const MASS_UNIT: f64 = 0.1;
/// Solver coordinate per rad/(N·mm) of compliance.
pub const COMPLIANCE_UNIT: f64 = 1e6;
/// Solver coordinate per 1/K of thermal expansion.
pub const THERMAL_UNIT: f64 = 1e3;
/// Solver coordinate per radian of joint correction.
pub const JOINT_UNIT: f64 = 1e3;

/// Samples per accumulation chunk (lower bound). Chunks are fixed by the
/// dataset size, never by the thread count, so reductions are reproducible.
const MIN_CHUNK: usize = 256;
const MAX_CHUNKS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda_gn: f64,
    pub lambda_j: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub variant: ModelVariant,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda_gn: 1e-7,
            lambda_j: 1e-5,
            max_iters: 200,
            rel_tol: 1e-12,
            variant: ModelVariant::FULL,
        }
    }
}

impl SolverConfig {
    pub fn with_variant(variant: ModelVariant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Error::Config { path: path.into(), message };
        if !(self.lambda_gn.is_finite() && self.lambda_gn >= 0.0) {
            return Err(bad("lambda_gn", format!("must be >= 0, got {}", self.lambda_gn)));
        }
        if !(self.lambda_j.is_finite() && self.lambda_j >= 0.0) {
            return Err(bad("lambda_j", format!("must be >= 0, got {}", self.lambda_j)));
        }
        if self.max_iters < 1 {
            return Err(bad("max_iters", "must be at least 1".into()));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol >= 0.0) {
            return Err(bad("rel_tol", format!("must be >= 0, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Loss (µm²) at this iterate.
    pub loss: f64,
    pub grad_norm: f64,
    /// Norm of the step taken from this iterate (0 for the last one).
    pub step_norm: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterations: Vec<IterationRecord>,
    pub stop: StopReason,
    /// Iteration whose parameters were returned.
    pub best_iteration: usize,
}

/// Per-pose error statistics in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub mean_um: f64,
    pub p95_um: f64,
    pub max_um: f64,
}

impl ErrorSummary {
    /// Mean, nearest-rank 95th percentile and maximum.
    pub fn from_errors(errors_um: &[f64]) -> Result<Self> {
        if errors_um.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut sorted = errors_um.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = (0.95 * n as f64).ceil() as usize;
        Ok(Self {
            n,
            mean_um: sorted.iter().sum::<f64>() / n as f64,
            p95_um: sorted[rank.max(1) - 1],
            max_um: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub description_checksum: String,
    pub config: SolverConfig,
    pub theta: ParameterVector,
    /// Joint sensitivity scales `l_1..l_6` (µm/rad) of the training set.
    pub scaling: [f64; NUM_JOINTS],
    pub train: ErrorSummary,
    pub trace: SolverTrace,
}

impl CalibrationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `l_i`: mean norm of the nominal joint sensitivities (µm/rad).
pub fn sensitivity_scale(desc: &RobotDescription, samples: &[MeasurementSample]) -> Result<[f64; NUM_JOINTS]> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut l = [0.0; NUM_JOINTS];
    for s in samples {
        for (i, li) in l.iter_mut().enumerate() {
            *li += nominal_joint_sensitivity(desc, &s.q, i).norm();
        }
    }
    Ok(l.map(|v| LOSS_UNIT * v / samples.len() as f64))
}

/// Diagonal `D` with `θ_s = D·θ` for every flat index of `layout`.
pub fn solver_scaling(layout: &ParamLayout) -> DVector<f64> {
    let mut d = DVector::from_element(layout.len(), 1.0);
    for index in 0..=NUM_JOINTS {
        let count = if index == 0 { 6 } else { 5 };
        for k in 0..count {
            d[layout.geo_index(index, k)] = if k < 3 { ROTATION_UNIT } else { TRANSLATION_UNIT };
        }
    }
    if let Some(r) = layout.block_range(Block::Compliance) {
        for i in r.start..r.start + FREE_MASSES {
            d[i] = MASS_UNIT;
        }
        for i in r.start + FREE_MASSES..r.end {
            d[i] = COMPLIANCE_UNIT;
        }
    }
    if let Some(r) = layout.block_range(Block::Thermal) {
        for i in r {
            d[i] = THERMAL_UNIT;
        }
    }
    if layout.variant.joint {
        for i in 0..NUM_JOINTS {
            for k in layout.joint_range(i).unwrap() {
                d[k] = JOINT_UNIT;
            }
        }
    }
    d
}

/// Loss value, gradient and Gauss-Newton matrix at one iterate, in solver
/// coordinates.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub loss: f64,
    pub data_loss: f64,
    pub gradient: DVector<f64>,
    pub gauss_newton: DMatrix<f64>,
}

/// Everything fixed during one calibration.
pub struct Problem<'a> {
    desc: &'a RobotDescription,
    samples: &'a [MeasurementSample],
    pub layout: ParamLayout,
    pub scaling: [f64; NUM_JOINTS],
    pub coords: DVector<f64>,
    config: SolverConfig,
    template: ParameterVector,
}

impl<'a> Problem<'a> {
    /// `theta` fixes the parameters outside the variant and the curve sizes.
    pub fn new(
        desc: &'a RobotDescription,
        dataset: &'a Dataset,
        theta: &ParameterVector,
        config: &SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let layout = ParamLayout::new(config.variant, theta)?;
        let scaling = sensitivity_scale(desc, dataset.samples())?;
        let coords = solver_scaling(&layout);
        Ok(Self {
            desc,
            samples: dataset.samples(),
            layout,
            scaling,
            coords,
            config: config.clone(),
            template: theta.clone(),
        })
    }

    /// Overrides the `l_i` scales (by default from this problem's samples).
    pub fn with_scaling(mut self, scaling: [f64; NUM_JOINTS]) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn unpack(&self, flat: &DVector<f64>) -> Result<ParameterVector> {
        self.layout.unpack(flat.as_slice(), &self.template)
    }

    /// Per-joint regulariser weights `λ_J / l_i²` on `θ_J²`.
    fn reg_weights(&self) -> [f64; NUM_JOINTS] {
        self.scaling.map(|l| self.config.lambda_j / (l * l))
    }

    fn regularizer(&self, theta: &ParameterVector) -> f64 {
        if !self.layout.variant.joint {
            return 0.0;
        }
        let w = self.reg_weights();
        theta
            .joint_correction
            .iter()
            .zip(w)
            .map(|(c, w)| w * c.values.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    fn chunk_size(&self) -> usize {
        MIN_CHUNK.max(self.samples.len().div_ceil(MAX_CHUNKS))
    }

    /// `L(θ)` in µm².
    pub fn loss(&self, theta: &ParameterVector) -> f64 {
        let partials: Vec<f64> = self
            .samples
            .par_chunks(self.chunk_size())
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|s| {
                        let r = self.desc.fk_augmented(&s.q, &s.env(), theta).translation - s.t_meas;
                        (r * LOSS_UNIT).norm_squared()
                    })
                    .sum::<f64>()
            })
            .collect();
        let m = self.samples.len() as f64;
        partials.iter().sum::<f64>() / (2.0 * m) + self.regularizer(theta)
    }

    /// Loss, gradient and `B` in solver coordinates.
    pub fn linearize(&self, theta: &ParameterVector) -> Linearization {
        let n = self.layout.len();
        let partials: Vec<(f64, DVector<f64>, DMatrix<f64>)> = self
            .samples
            .par_chunks(self.chunk_size())
            .map(|chunk| {
                let mut sq = 0.0;
                let mut g = DVector::zeros(n);
                let mut b = DMatrix::zeros(n, n);
                let mut cols: Vec<(usize, [f64; 3])> = Vec::with_capacity(96);
                for s in chunk {
                    let sj = sample_jacobian(self.desc, &s.q, &s.env(), theta, &self.layout);
                    let r = (sj.position - s.t_meas) * LOSS_UNIT;
                    sq += r.norm_squared();
                    cols.clear();
                    cols.extend(sj.columns.iter().map(|(c, v)| {
                        let f = LOSS_UNIT / self.coords[*c];
                        (*c, [v.x * f, v.y * f, v.z * f])
                    }));
                    for (a, va) in &cols {
                        g[*a] += va[0] * r.x + va[1] * r.y + va[2] * r.z;
                        for (c, vc) in &cols {
                            if c >= a {
                                b[(*a, *c)] += va[0] * vc[0] + va[1] * vc[1] + va[2] * vc[2];
                            }
                        }
                    }
                }
                (sq, g, b)
            })
            .collect();
        let m = self.samples.len() as f64;
        let mut sq = 0.0;
        let mut g = DVector::zeros(n);
        let mut b = DMatrix::zeros(n, n);
        for (s, gp, bp) in partials {
            sq += s;
            g += gp;
            b += bp;
        }
        g /= m;
        b /= m;
        for a in 0..n {
            for c in 0..a {
                b[(a, c)] = b[(c, a)];
            }
        }
        let data_loss = sq / (2.0 * m);
        let mut loss = data_loss;
        if self.layout.variant.joint {
            let w = self.reg_weights();
            for (i, curve) in theta.joint_correction.iter().enumerate() {
                let r = self.layout.joint_range(i).expect("joint block");
                for (k, v) in r.zip(&curve.values) {
                    g[k] += 2.0 * w[i] * v;
                    b[(k, k)] += 2.0 * w[i];
                    loss += w[i] * v * v;
                }
            }
        }
        Linearization {
            loss,
            data_loss,
            gradient: g,
            gauss_newton: b,
        }
    }
}

/// Solves `(B + λ I)·s = ∇L` by Cholesky. When round-off leaves the damped
/// matrix numerically indefinite (exact null directions with tiny `λ`), the
/// step falls back to an eigen-decomposition pseudo-inverse that drops
/// eigenvalues below `n·ε·max|μ|`.
pub fn gauss_newton_step(lin: &Linearization, lambda_gn: f64) -> Option<DVector<f64>> {
    let mut a = lin.gauss_newton.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda_gn;
    }
    let step = match a.clone().cholesky() {
        Some(c) => c.solve(&lin.gradient),
        None => {
            let n = a.nrows() as f64;
            let eig = a.symmetric_eigen();
            let cutoff = eig.eigenvalues.amax() * f64::EPSILON * n;
            let proj = eig.eigenvectors.transpose() * &lin.gradient;
            let scaled = proj.zip_map(&eig.eigenvalues, |p, mu| if mu > cutoff { p / mu } else { 0.0 });
            eig.eigenvectors * scaled
        }
    };
    step.iter().all(|v| v.is_finite()).then_some(step)
}

pub fn loss(desc: &RobotDescription, ds: &Dataset, theta: &ParameterVector, config: &SolverConfig) -> Result<f64> {
    Ok(Problem::new(desc, ds, theta, config)?.loss(theta))
}

/// `(∇L, B)` with respect to the solver coordinates of the variant's layout.
pub fn gradient_and_gauss_newton_matrix(
    desc: &RobotDescription,
    ds: &Dataset,
    theta: &ParameterVector,
    config: &SolverConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let lin = Problem::new(desc, ds, theta, config)?.linearize(theta);
    Ok((lin.gradient, lin.gauss_newton))
}

/// Damped Gauss-Newton from `theta0`.
///
/// Parameters outside `config.variant` keep their values in `theta0`.
/// Stops on `|L_k − L_{k−1}| / L_{k−1} < rel_tol` or after `max_iters`
/// steps, and returns the lowest-loss iterate seen.
pub fn solve(
    desc: &RobotDescription,
    ds: &Dataset,
    theta0: &ParameterVector,
    config: &SolverConfig,
) -> Result<CalibrationResult> {
    let problem = Problem::new(desc, ds, theta0, config)?;
    solve_problem(&problem, theta0)
}

pub fn solve_problem(problem: &Problem<'_>, theta0: &ParameterVector) -> Result<CalibrationResult> {
    let config = &problem.config;
    let start = Instant::now();
    let mut x = problem.layout.pack(theta0);
    let mut trace = SolverTrace {
        iterations: Vec::new(),
        stop: StopReason::MaxIterations,
        best_iteration: 0,
    };
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut prev: Option<f64> = None;
    for k in 0..=config.max_iters {
        let theta = problem.unpack(&x)?;
        let lin = problem.linearize(&theta);
        let record = |step_norm: f64| IterationRecord {
            iteration: k,
            loss: lin.loss,
            grad_norm: lin.gradient.norm(),
            step_norm,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        if !lin.loss.is_finite() || !lin.gradient.iter().all(|v| v.is_finite()) {
            trace.iterations.push(record(0.0));
            trace.stop = StopReason::Aborted;
            return Err(Error::Diverged {
                iteration: k,
                loss: lin.loss,
                trace: Box::new(trace),
            });
        }
        if best.as_ref().is_none_or(|(l, _)| lin.loss < *l) {
            best = Some((lin.loss, x.clone()));
            trace.best_iteration = k;
        }
        let converged = prev.is_some_and(|p| (p - lin.loss).abs() / p.max(f64::MIN_POSITIVE) < config.rel_tol);
        if converged || k == config.max_iters {
            trace.iterations.push(record(0.0));
            trace.stop = if converged {
                StopReason::Converged
            } else {
                StopReason::MaxIterations
            };
            break;
        }
        let Some(step) = gauss_newton_step(&lin, config.lambda_gn) else {
            trace.iterations.push(record(0.0));
            trace.stop = StopReason::Aborted;
            return Err(Error::Singular {
                iteration: k,
                trace: Box::new(trace),
            });
        };
        trace.iterations.push(record(step.norm()));
        x -= step.component_div(&problem.coords);
        prev = Some(lin.loss);
    }
    let (_, x_best) = best.expect("at least one iterate");
    let theta = problem.unpack(&x_best)?;
    let train = ErrorSummary::from_errors(&position_errors_um(problem.desc, problem.samples, &theta))?;
    Ok(CalibrationResult {
        description_checksum: problem.desc.checksum(),
        config: config.clone(),
        theta,
        scaling: problem.scaling,
        train,
        trace,
    })
}

/// `‖t_meas − t_pred‖` per sample, in µm.
pub fn position_errors_um(desc: &RobotDescription, samples: &[MeasurementSample], theta: &ParameterVector) -> Vec<f64> {
    samples
        .par_iter()
        .map(|s| (s.t_meas - desc.fk_augmented(&s.q, &s.env(), theta).translation).norm() * 1e3)
        .collect()
}

pub fn evaluate(desc: &RobotDescription, ds: &Dataset, theta: &ParameterVector) -> Result<ErrorSummary> {
    ErrorSummary::from_errors(&position_errors_um(desc, ds.samples(), theta))
}
