//! Identifiability spectra, residual projection, repeatability and the
//! cross-validation reports used to validate a calibration.

pub mod crossval;
pub mod projection;
pub mod repeatability;
pub mod spectra;

pub use crossval::{
    data_reduction_study, run_crossval, AblationReport, CrossvalConfig, FoldResult, ReductionPoint, ReductionReport,
    VariantSummary,
};
pub use projection::{binned_curve, moving_average, project_residuals_to_joints, projected_joint_curve, CurvePoint};
pub use repeatability::{repeatability, rp_from_stats, RepeatabilityPoint, RepeatabilityReport};
pub use spectra::{submodel_spectra, SpectrumReport};
