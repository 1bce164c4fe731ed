//! Unified static calibration of six-axis articulated robots.
//!
//! The nominal kinematic chain is augmented with virtual joints per real
//! joint (joint correction, compliance, geometry, thermal) and all of their
//! parameters are identified together from tool position measurements by
//! damped Gauss-Newton with analytic gradients.

pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod jacobian;
pub mod robot;
pub mod submodels;
pub mod transform;
pub mod validation;

pub use error::{Error, Result};
pub use estimator::{CalibrationResult, ErrorSummary, SolverConfig, SolverTrace};
pub use data::{Dataset, MeasurementSample, SynthSpec};

pub use robot::{ChainParams, EnvState, JointState, RobotDescription};
pub use submodels::{JointCorrectionCurve, ModelVariant, ParamLayout, ParameterVector};
pub use transform::{Transform, VirtualJointParams};
