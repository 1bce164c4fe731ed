//! Measurement datasets: CSV I/O, quality and support-density filters,
//! temporal folds and the synthetic ground-truth generator.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robot::{EnvState, JointState, RobotDescription, NUM_JOINTS};
use crate::submodels::{JointCorrectionCurve, ParameterVector, DEFAULT_D_SUPP};

pub const COLUMNS: [&str; 12] = [
    "timestamp_s",
    "q1",
    "q2",
    "q3",
    "q4",
    "q5",
    "q6",
    "kappa_c",
    "x_mm",
    "y_mm",
    "z_mm",
    "sigma_um",
];

/// Minimum samples per support segment.
pub const DEFAULT_MIN_COUNT: usize = 10;
/// Default σ threshold (µm).
pub const DEFAULT_SIGMA_THRESHOLD_UM: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub timestamp: f64,
    pub q: JointState,
    /// Ambient temperature (°C).
    pub kappa: f64,
    /// Measured tool position (mm).
    pub t_meas: Vector3<f64>,
    /// Within-sample variability (µm).
    pub sigma: Option<f64>,
}

impl MeasurementSample {
    pub fn env(&self) -> EnvState {
        EnvState::new(self.kappa)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let finite = self.timestamp.is_finite()
            && self.q.q.iter().all(|v| v.is_finite())
            && self.kappa.is_finite()
            && self.t_meas.iter().all(|v| v.is_finite());
        if !finite {
            return Err("non-finite value".into());
        }
        match self.sigma {
            Some(s) if !(s.is_finite() && s >= 0.0) => Err(format!("sigma must be finite and >= 0, got {s}")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub filters: Vec<String>,
    pub seed: Option<u64>,
}

/// Time-ordered measurement samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<MeasurementSample>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Validates every sample and sorts by timestamp (stable).
    pub fn new(mut samples: Vec<MeasurementSample>, provenance: Provenance) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            s.check().map_err(|message| Error::DatasetRow { row: i + 1, message })?;
        }
        samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Ok(Self { samples, provenance })
    }

    pub fn samples(&self) -> &[MeasurementSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MeasurementSample> {
        self.samples.iter()
    }

    /// Samples at `indices` (kept in the given order, which callers keep sorted).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    fn filtered(&self, keep: impl Fn(&MeasurementSample) -> bool, note: String) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.filters.push(note);
        Self {
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
            provenance,
        }
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::DatasetHeader(e.to_string()))?
            .clone();
        let cols = resolve_columns(&headers)?;
        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            // line 1 is the header
            let row = i + 2;
            let rec = rec.map_err(|e| Error::DatasetRow { row, message: e.to_string() })?;
            let field = |c: usize| -> Result<f64> {
                let text = rec.get(cols[c].expect("required column")).unwrap_or("");
                text.parse::<f64>().map_err(|_| Error::DatasetRow {
                    row,
                    message: format!("column `{}`: cannot parse {text:?} as a number", COLUMNS[c]),
                })
            };
            let sigma = match cols[11].and_then(|c| rec.get(c)) {
                None | Some("") => None,
                Some(text) => Some(text.parse::<f64>().map_err(|_| Error::DatasetRow {
                    row,
                    message: format!("column `sigma_um`: cannot parse {text:?} as a number"),
                })?),
            };
            let sample = MeasurementSample {
                timestamp: field(0)?,
                q: JointState::new([field(1)?, field(2)?, field(3)?, field(4)?, field(5)?, field(6)?]),
                kappa: field(7)?,
                t_meas: Vector3::new(field(8)?, field(9)?, field(10)?),
                sigma,
            };
            sample.check().map_err(|message| Error::DatasetRow { row, message })?;
            samples.push(sample);
        }
        Self::new(samples, Provenance::default())
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::InvalidArgument(format!("writing dataset: {e}"));
        w.write_record(COLUMNS).map_err(err)?;
        for s in &self.samples {
            let mut rec: Vec<String> = Vec::with_capacity(COLUMNS.len());
            rec.push(s.timestamp.to_string());
            rec.extend(s.q.q.iter().map(f64::to_string));
            rec.push(s.kappa.to_string());
            rec.extend(s.t_meas.iter().map(f64::to_string));
            rec.push(s.sigma.map(|v| v.to_string()).unwrap_or_default());
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("writing dataset: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ds = Dataset::read_csv(std::io::BufReader::new(file))?;
    ds.provenance.source = Some(path.display().to_string());
    Ok(ds)
}

/// Maps each documented column to its header position. A column whose stem
/// matches but whose unit suffix differs (`x_m`, `kappa_k`, `q1_deg`) is a
/// unit mismatch rather than a missing column.
fn resolve_columns(headers: &csv::StringRecord) -> Result<[Option<usize>; 12]> {
    let mut out = [None; 12];
    for (c, name) in COLUMNS.iter().enumerate() {
        if let Some(pos) = headers.iter().position(|h| h == *name) {
            out[c] = Some(pos);
            continue;
        }
        let stem = name.split('_').next().expect("non-empty");
        let lookalike = headers
            .iter()
            .find(|h| *h == stem || h.split('_').next() == Some(stem) && h.contains('_'));
        if let Some(found) = lookalike {
            return Err(Error::DatasetHeader(format!(
                "unit mismatch: expected column `{name}`, found `{found}`"
            )));
        }
        if c != 11 {
            return Err(Error::DatasetHeader(format!("missing column `{name}`")));
        }
    }
    Ok(out)
}

/// Outcome counts of [`filter_sigma`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaFilterStats {
    pub removed: usize,
    pub without_sigma: usize,
}

/// Keeps samples with `sigma ≤ threshold_um`; samples without a σ are kept.
pub fn filter_sigma(ds: &Dataset, threshold_um: f64) -> (Dataset, SigmaFilterStats) {
    let keep = |s: &MeasurementSample| s.sigma.is_none_or(|v| v <= threshold_um);
    let removed = ds.iter().filter(|s| !keep(s)).count();
    let without_sigma = ds.iter().filter(|s| s.sigma.is_none()).count();
    let note = format!("sigma <= {threshold_um} um: removed {removed}, {without_sigma} without sigma");
    (ds.filtered(keep, note), SigmaFilterStats { removed, without_sigma })
}

/// Support bin of angle `q` at density `d_supp`; bins are anchored at 0 rad.
pub fn support_bin(q: f64, d_supp: f64) -> i64 {
    (q * d_supp).floor() as i64
}

/// Longest run of consecutive bins holding at least `min_count` samples
/// each. Ties go to the run with more samples, then the lower one.
fn best_run(counts: &BTreeMap<i64, usize>, min_count: usize) -> Option<(i64, i64)> {
    let mut best: Option<(i64, i64, usize)> = None;
    let mut current: Option<(i64, i64, usize)> = None;
    for (&b, &n) in counts {
        if n < min_count {
            current = None;
            continue;
        }
        current = match current {
            Some((lo, hi, total)) if hi + 1 == b => Some((lo, b, total + n)),
            _ => Some((b, b, n)),
        };
        let (lo, hi, total) = current.expect("just set");
        let better = match best {
            None => true,
            Some((blo, bhi, btotal)) => {
                let (len, blen) = (hi - lo, bhi - blo);
                len > blen || (len == blen && total > btotal)
            }
        };
        if better {
            best = Some((lo, hi, total));
        }
    }
    best.map(|(lo, hi, _)| (lo, hi))
}

/// Per-joint retained bin runs for a sample set (one pass, no fixpoint).
fn density_runs(samples: &[MeasurementSample], d_supp: f64, min_count: usize) -> Result<[(i64, i64); NUM_JOINTS]> {
    let mut runs = [(0, 0); NUM_JOINTS];
    for (i, run) in runs.iter_mut().enumerate() {
        let mut counts = BTreeMap::new();
        for s in samples {
            *counts.entry(support_bin(s.q.q[i], d_supp)).or_insert(0usize) += 1;
        }
        *run = best_run(&counts, min_count).ok_or_else(|| {
            Error::UnusableDataset(format!(
                "joint {} has no support segment with at least {min_count} samples",
                i + 1
            ))
        })?;
    }
    Ok(runs)
}

/// Drops samples outside densely populated support segments.
///
/// Per joint, the longest contiguous run of bins of width `1/d_supp` with at
/// least `min_count` samples each defines the supported range
/// `[b_lo/d_supp, (b_hi + 1)/d_supp]`. Dropping samples for one joint can
/// thin another joint's bins, so the pass repeats until nothing changes.
pub fn filter_support_density(
    ds: &Dataset,
    d_supp: f64,
    min_count: usize,
) -> Result<(Dataset, [(f64, f64); NUM_JOINTS])> {
    if !(d_supp.is_finite() && d_supp > 0.0) {
        return Err(Error::InvalidArgument(format!("d_supp must be positive, got {d_supp}")));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut samples = ds.samples.clone();
    let mut passes = 0;
    let runs = loop {
        passes += 1;
        let runs = density_runs(&samples, d_supp, min_count)?;
        let before = samples.len();
        samples.retain(|s| {
            (0..NUM_JOINTS).all(|i| {
                let b = support_bin(s.q.q[i], d_supp);
                b >= runs[i].0 && b <= runs[i].1
            })
        });
        if samples.len() == before {
            break runs;
        }
        if samples.is_empty() {
            return Err(Error::UnusableDataset("density filter removed every sample".into()));
        }
    };
    let ranges = runs.map(|(lo, hi)| (lo as f64 / d_supp, (hi + 1) as f64 / d_supp));
    let mut provenance = ds.provenance.clone();
    provenance.filters.push(format!(
        "support density d_supp={d_supp} min_count={min_count}: removed {} in {passes} passes",
        ds.len() - samples.len()
    ));
    Ok((Dataset { samples, provenance }, ranges))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Splits `n` time-ordered samples into `k` contiguous chunks; fold `i`
/// validates on chunk `i`. The first `n % k` chunks hold one extra sample.
pub fn temporal_folds(n: usize, k: usize) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("{n} samples cannot form {k} folds")));
    }
    let (base, extra) = (n / k, n % k);
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    for i in 0..k {
        bounds.push(bounds[i] + base + usize::from(i < extra));
    }
    Ok((0..k)
        .map(|i| Fold {
            train: (0..bounds[i]).chain(bounds[i + 1]..n).collect(),
            validation: (bounds[i]..bounds[i + 1]).collect(),
        })
        .collect())
}

/// Uniform random subset of size `k`, returned in time order.
pub fn subsample_training(train: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    if k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {k} samples from a training set of {}",
            train.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, train.len(), k).into_vec();
    idx.sort_unstable();
    let mut out = train.subset(&idx);
    out.provenance.filters.push(format!("subsample k={k} seed={seed}"));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Compliance masses `m_2..m_5` (kg, relative to a 1 kg tool) used as default
/// ground truth.
pub const TABLE_MASSES: [f64; 4] = [67.0, -13.2, 34.6, -26.5];
/// `k_2..k_6` in rad/(N·mm).
pub const TABLE_COMPLIANCES: [f64; 5] = [3.87e-9, 4.26e-9, 20.3e-9, 47.8e-9, 70.1e-9];
/// `α_1..α_6` in 1/K.
pub const TABLE_ALPHA: [f64; 6] = [28.85e-6, 32.43e-6, 13.45e-6, 18.98e-6, 21.36e-6, 30.33e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureProfile {
    pub mean_c: f64,
    pub amplitude_c: f64,
    pub period_s: f64,
}

impl Default for TemperatureProfile {
    fn default() -> Self {
        Self {
            mean_c: 21.0,
            amplitude_c: 1.5,
            period_s: 86_400.0,
        }
    }
}

impl TemperatureProfile {
    pub fn at(&self, t: f64) -> f64 {
        self.mean_c + self.amplitude_c * (TAU * t / self.period_s).sin()
    }
}

/// How the ground-truth parameters are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruthSpec {
    /// Half-width of the uniform geometric rotation offsets (rad).
    pub geometry_rot_rad: f64,
    /// Half-width of the uniform geometric translation offsets (mm).
    pub geometry_trans_mm: f64,
    pub masses: [f64; 4],
    pub compliances: [f64; 5],
    pub alpha: [f64; 6],
    /// Multiplier on `alpha` (the α̃ knob of the identifiability study).
    pub alpha_scale: f64,
    /// Peak amplitude of the injected joint-error curves (rad); 0 disables.
    pub joint_amplitude_rad: f64,
    pub d_supp: f64,
}

impl Default for GroundTruthSpec {
    fn default() -> Self {
        Self {
            geometry_rot_rad: 1e-3,
            geometry_trans_mm: 0.5,
            masses: TABLE_MASSES,
            compliances: TABLE_COMPLIANCES,
            alpha: TABLE_ALPHA,
            alpha_scale: 1.0,
            joint_amplitude_rad: 1.5e-4,
            d_supp: DEFAULT_D_SUPP,
        }
    }
}

impl GroundTruthSpec {
    /// Draws ground-truth parameters for a sampling box.
    ///
    /// Joint curves are `A(0.6 sin(2πu + φ1) + 0.4 sin(6πu + φ2))` with
    /// `u` the position across the box, so each harmonic completes whole
    /// periods and the curve has (nearly) zero mean over the box. Its nodes
    /// sit on multiples of `1/d_supp`, matching the calibration grid.
    pub fn draw(&self, joint_box: &JointBox, rng: &mut impl Rng) -> Result<ParameterVector> {
        let mut theta = ParameterVector::initial(Vec::new());
        let (r, t) = (self.geometry_rot_rad, self.geometry_trans_mm);
        let draw = |c: usize, rng: &mut dyn rand::RngCore| {
            let half = if c < 3 { r } else { t };
            if half > 0.0 {
                rng.random_range(-half..=half)
            } else {
                0.0
            }
        };
        theta.geometry.base = std::array::from_fn(|c| draw(c, rng));
        for g in &mut theta.geometry.joints {
            *g = std::array::from_fn(|c| draw(c, rng));
        }
        theta.compliance.masses = self.masses;
        theta.compliance.compliances = self.compliances;
        theta.thermal.alpha = self.alpha.map(|a| a * self.alpha_scale);
        if self.joint_amplitude_rad != 0.0 {
            let mut curves = Vec::with_capacity(NUM_JOINTS);
            for i in 0..NUM_JOINTS {
                let (lo, hi) = (joint_box.lower[i], joint_box.upper[i]);
                let q_min = (lo * self.d_supp).floor() / self.d_supp;
                let q_max = (hi * self.d_supp).ceil() / self.d_supp;
                let (p1, p2) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
                let a = self.joint_amplitude_rad;
                let width = hi - lo;
                curves.push(JointCorrectionCurve::from_fn(q_min, q_max, self.d_supp, |q| {
                    let u = (q - lo) / width;
                    a * (0.6 * (TAU * u + p1).sin() + 0.4 * (3.0 * TAU * u + p2).sin())
                })?);
            }
            theta.joint_correction = curves;
        }
        Ok(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointBox {
    pub lower: [f64; NUM_JOINTS],
    pub upper: [f64; NUM_JOINTS],
}

impl Default for JointBox {
    fn default() -> Self {
        Self {
            lower: [-0.6, -0.4, -0.5, -0.6, -0.6, -0.6],
            upper: [0.6, 0.6, 0.5, 0.6, 0.6, 0.6],
        }
    }
}

impl JointBox {
    fn validate(&self) -> Result<()> {
        for i in 0..NUM_JOINTS {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config {
                    path: format!("joint_box.lower[{i}]"),
                    message: format!("need lower < upper, got [{lo}, {hi}]"),
                });
            }
        }
        Ok(())
    }
}

/// Recipe for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_samples: usize,
    /// Per-axis Gaussian noise (µm).
    #[serde(default)]
    pub noise_sigma_um: f64,
    /// Samples are spread evenly over `[0, duration_s]`.
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    /// When set, per-sample σ values are drawn from an exponential with this
    /// mean (µm); otherwise the σ column is left empty.
    #[serde(default)]
    pub sigma_mean_um: Option<f64>,
    #[serde(default)]
    pub joint_box: JointBox,
    #[serde(default)]
    pub temperature: TemperatureProfile,
    #[serde(default)]
    pub ground_truth: GroundTruthSpec,
}

fn default_duration() -> f64 {
    2.0 * 86_400.0
}

impl SynthSpec {
    pub fn new(seed: u64, n_samples: usize) -> Self {
        Self {
            seed,
            n_samples,
            noise_sigma_um: 0.0,
            duration_s: default_duration(),
            sigma_mean_um: None,
            joint_box: JointBox::default(),
            temperature: TemperatureProfile::default(),
            ground_truth: GroundTruthSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = crate::config::parse_toml(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Error::Config { path: path.into(), message };
        if self.n_samples < 1 {
            return Err(bad("n_samples", "must be at least 1".into()));
        }
        if !(self.noise_sigma_um.is_finite() && self.noise_sigma_um >= 0.0) {
            return Err(bad("noise_sigma_um", format!("must be >= 0, got {}", self.noise_sigma_um)));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(bad("duration_s", format!("must be >= 0, got {}", self.duration_s)));
        }
        if let Some(s) = self.sigma_mean_um {
            if !(s.is_finite() && s > 0.0) {
                return Err(bad("sigma_mean_um", format!("must be > 0, got {s}")));
            }
        }
        if !(self.ground_truth.d_supp.is_finite() && self.ground_truth.d_supp > 0.0) {
            return Err(bad("ground_truth.d_supp", "must be > 0".into()));
        }
        self.joint_box.validate()
    }

    /// Draws the ground truth from this spec's seed.
    pub fn ground_truth(&self) -> Result<ParameterVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.ground_truth.draw(&self.joint_box, &mut rng)
    }
}

/// Synthesizes a dataset with the spec's own ground truth.
pub fn synthesize(desc: &RobotDescription, spec: &SynthSpec) -> Result<(Dataset, ParameterVector)> {
    let theta = spec.ground_truth()?;
    let ds = synthesize_with(desc, spec, &theta)?;
    Ok((ds, theta))
}

/// Samples poses uniformly in the joint box and records
/// `fk_augmented(q, κ, θ_gt)` plus Gaussian noise.
pub fn synthesize_with(desc: &RobotDescription, spec: &SynthSpec, theta: &ParameterVector) -> Result<Dataset> {
    spec.validate()?;
    // separate stream from the ground-truth draw
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let noise = Normal::new(0.0, spec.noise_sigma_um * 1e-3)
        .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let sigma_dist = spec
        .sigma_mean_um
        .map(|m| Exp::new(1.0 / m).map_err(|e| Error::InvalidArgument(format!("sigma: {e}"))))
        .transpose()?;
    let n = spec.n_samples;
    let samples = (0..n)
        .map(|m| {
            let timestamp = if n > 1 {
                spec.duration_s * m as f64 / (n - 1) as f64
            } else {
                0.0
            };
            let q = JointState::new(std::array::from_fn(|i| {
                rng.random_range(spec.joint_box.lower[i]..spec.joint_box.upper[i])
            }));
            let kappa = spec.temperature.at(timestamp);
            let exact = desc.fk_augmented(&q, &EnvState::new(kappa), theta).translation;
            let t_meas = if spec.noise_sigma_um > 0.0 {
                exact + Vector3::from_fn(|_, _| noise.sample(&mut rng))
            } else {
                exact
            };
            let sigma = sigma_dist.as_ref().map(|d| d.sample(&mut rng));
            MeasurementSample {
                timestamp,
                q,
                kappa,
                t_meas,
                sigma,
            }
        })
        .collect();
    Dataset::new(
        samples,
        Provenance {
            source: Some("synthetic".into()),
            filters: Vec::new(),
            seed: Some(spec.seed),
        },
    )
}
