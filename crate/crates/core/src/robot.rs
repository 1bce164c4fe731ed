//! Robot description, nominal forward kinematics and the augmented chain.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::submodels::ParameterVector;
use crate::transform::{self, from_params, Transform, VirtualJointParams, AXIS_NORM_TOL};

pub const NUM_JOINTS: usize = 6;

/// Default gravitational acceleration in the global frame (m/s²).
///
/// The sign is kept positive along z; a flipped sign is absorbed by the
/// sign of the identified compliances.
pub const DEFAULT_GRAVITY: [f64; 3] = [0.0, 0.0, 9.81];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub axis: Vector3<f64>,
    /// Hardware limits `(q_min, q_max)` in rad.
    pub limits: (f64, f64),
}

impl JointSpec {
    /// Index (0..3) of the largest-magnitude axis component.
    pub fn dominant_axis(&self) -> usize {
        self.axis.iamax()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDescription {
    pub name: String,
    pub base: Transform,
    pub tcp_local: Transform,
    pub joints: Vec<JointSpec>,
    /// Link translations `t_1..t_6` in mm, each in the frame of its joint.
    pub links: Vec<Vector3<f64>>,
    /// Gravity in the global frame (m/s²).
    pub gravity: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: [f64; NUM_JOINTS],
}

impl JointState {
    pub fn new(q: [f64; NUM_JOINTS]) -> Self {
        Self { q }
    }
}

impl From<[f64; NUM_JOINTS]> for JointState {
    fn from(q: [f64; NUM_JOINTS]) -> Self {
        Self { q }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// Ambient temperature in °C.
    pub kappa: f64,
}

impl EnvState {
    pub fn new(kappa: f64) -> Self {
        Self { kappa }
    }
}

/// Explicit parameters of every virtual joint in the augmented chain.
///
/// The per-joint order is joint rotation, then J, C, G, T, then the link.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChainParams {
    pub base_geo: VirtualJointParams,
    pub joints: [JointVirtuals; NUM_JOINTS],
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointVirtuals {
    pub joint_corr: VirtualJointParams,
    pub compliance: VirtualJointParams,
    pub geo: VirtualJointParams,
    pub thermal: VirtualJointParams,
}

impl RobotDescription {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: String, message: String| Err(Error::Description { path, message });
        if self.joints.len() != NUM_JOINTS {
            return bad(
                "joints".into(),
                format!("expected {NUM_JOINTS} joints, found {}", self.joints.len()),
            );
        }
        if self.links.len() != NUM_JOINTS {
            return bad(
                "links".into(),
                format!("expected {NUM_JOINTS} links, found {}", self.links.len()),
            );
        }
        for (i, j) in self.joints.iter().enumerate() {
            let norm = j.axis.norm();
            if !((norm - 1.0).abs() <= AXIS_NORM_TOL) {
                return bad(
                    format!("joints[{i}].axis"),
                    format!("axis must be unit length (norm {norm})"),
                );
            }
            if !(j.limits.0 < j.limits.1) {
                return bad(
                    format!("joints[{i}].limits"),
                    format!("q_min {} must be below q_max {}", j.limits.0, j.limits.1),
                );
            }
        }
        for (name, t) in [("base", &self.base), ("tcp", &self.tcp_local)] {
            if t.orthonormality_error() > 1e-9 {
                return bad(format!("{name}.euler"), "rotation is not orthonormal".into());
            }
        }
        if self.links.iter().flatten().any(|v| !v.is_finite()) {
            return bad("links".into(), "non-finite link translation".into());
        }
        Ok(())
    }

    pub fn joint_rotation(&self, i: usize, angle: f64) -> Matrix3<f64> {
        transform::rodrigues(&self.joints[i].axis, angle)
    }

    /// Nominal product `base · Π(joint_i · link_i) · tcp`.
    pub fn fk_nominal(&self, q: &JointState) -> Transform {
        let mut t = self.base;
        for i in 0..NUM_JOINTS {
            t = t.compose(&Transform::from_rotation(self.joint_rotation(i, q.q[i])));
            t = t.compose(&Transform::from_translation(self.links[i]));
        }
        t.compose(&self.tcp_local)
    }

    /// Forward kinematics with explicit virtual-joint parameters.
    pub fn fk_chain(&self, q: &JointState, chain: &ChainParams) -> Transform {
        let mut t = self.base.compose(&from_params(&chain.base_geo));
        for (i, v) in chain.joints.iter().enumerate() {
            t = t.compose(&Transform::from_rotation(self.joint_rotation(i, q.q[i])));
            for p in [&v.joint_corr, &v.compliance, &v.geo, &v.thermal] {
                t = t.compose(&from_params(p));
            }
            t = t.compose(&Transform::from_translation(self.links[i]));
        }
        t.compose(&self.tcp_local)
    }

    /// Augmented forward kinematics. Joint angles outside the supported
    /// range of a joint-correction curve are clamped; use
    /// [`ParameterVector::chain_params`] to see the out-of-support flags.
    pub fn fk_augmented(&self, q: &JointState, env: &EnvState, theta: &ParameterVector) -> Transform {
        let (chain, _) = theta.chain_params(self, q, env);
        self.fk_chain(q, &chain)
    }

    /// Global-frame quantities of the nominal chain at `q`.
    pub fn nominal_frames(&self, q: &JointState) -> NominalFrames {
        let mut origins = [Vector3::zeros(); NUM_JOINTS + 1];
        let mut axes = [Vector3::zeros(); NUM_JOINTS];
        let mut t = self.base;
        for i in 0..NUM_JOINTS {
            origins[i] = t.translation;
            axes[i] = t.rotation * self.joints[i].axis;
            t = t.compose(&Transform::from_rotation(self.joint_rotation(i, q.q[i])));
            t = t.compose(&Transform::from_translation(self.links[i]));
        }
        origins[NUM_JOINTS] = t.translation;
        let tcp = t.compose(&self.tcp_local).translation;
        NominalFrames { origins, axes, tcp }
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn checksum(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("description serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawDescription = crate::config::parse_toml(text).map_err(|e| match e {
            Error::Config { path, message } => Error::Description { path, message },
            other => other,
        })?;
        raw.into_description()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawDescription::from(self);
        toml::to_string_pretty(&raw).expect("description serializes to TOML")
    }

    /// Bundled KR30-like description. Reach to the wrist is about 2033 mm;
    /// values are fixtures, not claims about the real robot.
    pub fn kr30_like() -> Self {
        Self::from_toml_str(KR30_LIKE_TOML).expect("bundled description is valid")
    }
}

pub const KR30_LIKE_TOML: &str = include_str!("../fixtures/kr30_like.toml");

/// Joint origins, global joint axes and the TCP position of the nominal chain.
#[derive(Debug, Clone, Copy)]
pub struct NominalFrames {
    /// `origins[i]` is where joint `i` rotates; `origins[6]` is the end of link 6.
    pub origins: [Vector3<f64>; NUM_JOINTS + 1],
    pub axes: [Vector3<f64>; NUM_JOINTS],
    pub tcp: Vector3<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransform {
    translation: [f64; 3],
    #[serde(default)]
    euler: [f64; 3],
}

impl RawTransform {
    fn to_transform(&self) -> Transform {
        let [zeta, xi, chi] = self.euler;
        let [x, y, z] = self.translation;
        from_params(&VirtualJointParams {
            zeta,
            xi,
            chi,
            x,
            y,
            z,
        })
    }

    fn from_transform(t: &Transform) -> Self {
        let p = transform::to_params(t);
        Self {
            translation: [p.x, p.y, p.z],
            euler: [p.zeta, p.xi, p.chi],
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    axis: [f64; 3],
    limits: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDescription {
    name: String,
    #[serde(default = "default_gravity")]
    gravity: [f64; 3],
    base: RawTransform,
    tcp: RawTransform,
    joints: Vec<RawJoint>,
    links: Vec<[f64; 3]>,
}

fn default_gravity() -> [f64; 3] {
    DEFAULT_GRAVITY
}

impl RawDescription {
    fn into_description(self) -> Result<RobotDescription> {
        let desc = RobotDescription {
            name: self.name,
            base: self.base.to_transform(),
            tcp_local: self.tcp.to_transform(),
            joints: self
                .joints
                .iter()
                .map(|j| JointSpec {
                    axis: Vector3::from(j.axis),
                    limits: (j.limits[0], j.limits[1]),
                })
                .collect(),
            links: self.links.iter().map(|l| Vector3::from(*l)).collect(),
            gravity: Vector3::from(self.gravity),
        };
        desc.validate()?;
        Ok(desc)
    }
}

impl From<&RobotDescription> for RawDescription {
    fn from(d: &RobotDescription) -> Self {
        Self {
            name: d.name.clone(),
            gravity: d.gravity.into(),
            base: RawTransform::from_transform(&d.base),
            tcp: RawTransform::from_transform(&d.tcp_local),
            joints: d
                .joints
                .iter()
                .map(|j| RawJoint {
                    axis: j.axis.into(),
                    limits: [j.limits.0, j.limits.1],
                })
                .collect(),
            links: d.links.iter().map(|l| (*l).into()).collect(),
        }
    }
}
