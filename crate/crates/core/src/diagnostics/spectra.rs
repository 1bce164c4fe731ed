//! Singular-value spectra of the per-sample loss gradients, one per submodel.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{Problem, SolverConfig};
use crate::jacobian::sample_jacobian;
use crate::robot::RobotDescription;
use crate::submodels::{Block, ModelVariant, ParameterVector};

/// Descending singular values of `G_θ̃` for each submodel in the variant.
/// Blocks outside the variant are empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub geometry: Vec<f64>,
    pub compliance: Vec<f64>,
    pub thermal: Vec<f64>,
    pub joint: Vec<f64>,
}

impl SpectrumReport {
    pub fn block(&self, block: Block) -> &[f64] {
        match block {
            Block::Geometry => &self.geometry,
            Block::Compliance => &self.compliance,
            Block::Thermal => &self.thermal,
            Block::JointCorrection => &self.joint,
        }
    }

    fn block_mut(&mut self, block: Block) -> &mut Vec<f64> {
        match block {
            Block::Geometry => &mut self.geometry,
            Block::Compliance => &mut self.compliance,
            Block::Thermal => &mut self.thermal,
            Block::JointCorrection => &mut self.joint,
        }
    }

    /// `k`-th smallest over the median singular value of one block (`k`
    /// counts from 1). `None` when the block has fewer than `k` values or a
    /// zero median.
    pub fn tail_ratio(&self, block: Block, k: usize) -> Option<f64> {
        let s = self.block(block);
        if k == 0 || s.len() < k {
            return None;
        }
        let median = median_of_descending(s);
        (median > 0.0).then(|| s[s.len() - k] / median)
    }

    /// One `block,index,sigma` row per singular value.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("block,index,sigma\n");
        for block in Block::ALL {
            for (i, s) in self.block(block).iter().enumerate() {
                out.push_str(&format!("{},{},{:e}\n", block.letter(), i + 1, s));
            }
        }
        out
    }
}

fn median_of_descending(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Spectra of `G_θ̃ = [g_1; …; g_m̂]` with `g_m = (t_pred − t_meas)ᵀ ∂t_pred/∂θ̃`,
/// in the solver's coordinates.
///
/// Only meaningful near a converged `theta`: at the optimum the rows are
/// driven by the residual noise, and `GᵀG/m̂` approximates the empirical
/// Fisher information.
pub fn submodel_spectra(
    desc: &RobotDescription,
    ds: &Dataset,
    theta: &ParameterVector,
    variant: ModelVariant,
) -> Result<SpectrumReport> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let config = SolverConfig::with_variant(variant);
    let problem = Problem::new(desc, ds, theta, &config)?;
    let n = problem.layout.len();
    let rows: Vec<Vec<f64>> = ds
        .samples()
        .par_iter()
        .map(|s| {
            let sj = sample_jacobian(desc, &s.q, &s.env(), theta, &problem.layout);
            let r = sj.position - s.t_meas;
            let mut g = vec![0.0; n];
            for (c, v) in &sj.columns {
                g[*c] += v.dot(&r) / problem.coords[*c];
            }
            g
        })
        .collect();
    let mut report = SpectrumReport::default();
    for block in Block::ALL {
        let Some(range) = problem.layout.block_range(block) else {
            continue;
        };
        let g = DMatrix::from_fn(rows.len(), range.len(), |m, c| rows[m][range.start + c]);
        *report.block_mut(block) = singular_values(g);
    }
    Ok(report)
}

/// Descending singular values of a dense matrix.
pub fn singular_values(m: DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::data::{synthesize, synthesize_with, SynthSpec};

    #[test]
    fn zero_residuals_give_zero_spectra() {
        let d = RobotDescription::kr30_like();
        let mut spec = SynthSpec::new(3, 60);
        spec.ground_truth.joint_amplitude_rad = 0.0;
        let theta = spec.ground_truth().unwrap();
        let ds = synthesize_with(&d, &spec, &theta).unwrap();
        let report = submodel_spectra(&d, &ds, &theta, ModelVariant::GCT).unwrap();
        assert_eq!(report.geometry.len(), 36);
        assert_eq!(report.compliance.len(), 9);
        assert_eq!(report.thermal.len(), 6);
        assert!(report.joint.is_empty());
        for block in Block::ALL {
            assert!(report.block(block).iter().all(|&s| s == 0.0), "{block:?}");
        }
    }

    #[test]
    fn spectra_are_sorted_and_nonnegative() {
        let d = RobotDescription::kr30_like();
        let mut spec = SynthSpec::new(4, 200);
        spec.noise_sigma_um = 5.0;
        let (ds, truth) = synthesize(&d, &spec).unwrap();
        let report = submodel_spectra(&d, &ds, &truth, ModelVariant::FULL).unwrap();
        for block in Block::ALL {
            let s = report.block(block);
            assert!(!s.is_empty());
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
            assert!(s.iter().all(|&v| v >= 0.0));
        }
        let joint_params: usize = truth.joint_correction.iter().map(|c| c.len()).sum();
        assert_eq!(report.joint.len(), joint_params.min(ds.len()));
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        // Two geometric parameters made to act identically: copy one
        // column of G onto another.
        let d = RobotDescription::kr30_like();
        let mut spec = SynthSpec::new(5, 150);
        spec.noise_sigma_um = 5.0;
        spec.ground_truth.joint_amplitude_rad = 0.0;
        let (ds, truth) = synthesize(&d, &spec).unwrap();
        let config = SolverConfig::with_variant(ModelVariant::G);
        let problem = Problem::new(&d, &ds, &truth, &config).unwrap();
        let n = problem.layout.len();
        let mut g = DMatrix::zeros(ds.len(), n);
        for (m, s) in ds.iter().enumerate() {
            let sj = sample_jacobian(&d, &s.q, &s.env(), &truth, &problem.layout);
            let r = sj.position - s.t_meas;
            for (c, v) in &sj.columns {
                g[(m, *c)] += v.dot(&r);
            }
        }
        let col: DVector<f64> = g.column(7).into();
        g.set_column(20, &col);
        let dup = singular_values(g);
        assert!(dup[dup.len() - 1] < 1e-10 * dup[0], "{:e}", dup[dup.len() - 1] / dup[0]);
    }

    #[test]
    fn tail_ratio_counts_from_the_end() {
        let r = SpectrumReport {
            geometry: vec![8.0, 4.0, 2.0, 1.0, 0.5],
            ..Default::default()
        };
        assert_eq!(r.tail_ratio(Block::Geometry, 1), Some(0.25));
        assert_eq!(r.tail_ratio(Block::Geometry, 5), Some(4.0));
        assert_eq!(r.tail_ratio(Block::Geometry, 6), None);
        assert_eq!(r.tail_ratio(Block::Thermal, 1), None);
    }
}
