//! Elastostatic joint model: lumped link masses load one rotational spring
//! per joint. Torques use the nominal (uncalibrated) chain.

use nalgebra::Vector3;

use super::ParameterVector;
use crate::robot::{JointState, NominalFrames, RobotDescription, NUM_JOINTS};

/// Number of identified masses (`m_2..m_5`).
pub const FREE_MASSES: usize = 4;
/// Number of identified compliances (`k_2..k_6`).
pub const FREE_COMPLIANCES: usize = 5;

/// Torques (N·mm) about every joint origin in the global frame, from link
/// masses (kg) placed at `o_j + r_j t_j`.
pub fn link_torques(
    desc: &RobotDescription,
    q: &JointState,
    masses: &[f64; NUM_JOINTS],
    r: &[f64; NUM_JOINTS],
) -> [Vector3<f64>; NUM_JOINTS] {
    let frames = desc.nominal_frames(q);
    torques_from_frames(&frames, &desc.gravity, masses, r)
}

pub(crate) fn centers_of_mass(frames: &NominalFrames, r: &[f64; NUM_JOINTS]) -> [Vector3<f64>; NUM_JOINTS] {
    std::array::from_fn(|j| {
        let o = frames.origins[j];
        o + r[j] * (frames.origins[j + 1] - o)
    })
}

pub(crate) fn torques_from_frames(
    frames: &NominalFrames,
    g: &Vector3<f64>,
    masses: &[f64; NUM_JOINTS],
    r: &[f64; NUM_JOINTS],
) -> [Vector3<f64>; NUM_JOINTS] {
    let com = centers_of_mass(frames, r);
    std::array::from_fn(|i| {
        (i..NUM_JOINTS).fold(Vector3::zeros(), |acc, j| {
            acc + masses[j] * (com[j] - frames.origins[i]).cross(g)
        })
    })
}

/// Everything the chain and its derivatives need from the compliance model
/// at one pose.
#[derive(Debug, Clone)]
pub struct ComplianceState {
    pub frames: NominalFrames,
    pub com: [Vector3<f64>; NUM_JOINTS],
    /// Torque about each joint axis, `τ*_i` (N·mm).
    pub projected: [f64; NUM_JOINTS],
    /// Spring deflection `p*_C,i = k_i τ*_i` (rad); always zero for joint 1.
    pub deflections: [f64; NUM_JOINTS],
}

impl ComplianceState {
    pub fn new(desc: &RobotDescription, q: &JointState, theta: &ParameterVector) -> Self {
        let frames = desc.nominal_frames(q);
        Self::from_frames(desc, frames, theta)
    }

    pub fn from_frames(desc: &RobotDescription, frames: NominalFrames, theta: &ParameterVector) -> Self {
        let masses = theta.link_masses();
        let k = theta.link_compliances();
        let r = theta.compliance.com_ratio;
        let com = centers_of_mass(&frames, &r);
        let torques = torques_from_frames(&frames, &desc.gravity, &masses, &r);
        let projected: [f64; NUM_JOINTS] = std::array::from_fn(|i| frames.axes[i].dot(&torques[i]));
        let deflections = std::array::from_fn(|i| k[i] * projected[i]);
        Self {
            frames,
            com,
            projected,
            deflections,
        }
    }

    /// `∂τ*_i/∂m_j` for any link mass `j` (zero when `j < i`).
    pub fn torque_mass_partial(&self, g: &Vector3<f64>, i: usize, j: usize) -> f64 {
        if j < i {
            return 0.0;
        }
        self.frames.axes[i].dot(&(self.com[j] - self.frames.origins[i]).cross(g))
    }

    /// `∂τ*_k/∂q_i` of the nominal-chain torque about joint `k`.
    pub fn torque_joint_partial(&self, g: &Vector3<f64>, masses: &[f64; NUM_JOINTS], k: usize, i: usize) -> f64 {
        let w = self.frames.axes[i];
        let a = self.frames.axes[k];
        let o_k = self.frames.origins[k];
        if i > k {
            // joints k..i-1 stay put, everything from link i on swings about axis i
            let o_i = self.frames.origins[i];
            (i..NUM_JOINTS)
                .map(|j| masses[j] * a.dot(&w.cross(&(self.com[j] - o_i)).cross(g)))
                .sum()
        } else {
            // the whole loaded subchain and the axis of joint k rotate rigidly
            let mut v = Vector3::zeros();
            let mut dv = 0.0;
            for j in k..NUM_JOINTS {
                let lever = self.com[j] - o_k;
                v += masses[j] * lever.cross(g);
                dv += masses[j] * a.dot(&w.cross(&lever).cross(g));
            }
            w.cross(&a).dot(&v) + dv
        }
    }
}

/// Deflections `p*_C,i` (rad) for all six joints.
pub fn compliance_deflections(desc: &RobotDescription, q: &JointState, theta: &ParameterVector) -> [f64; NUM_JOINTS] {
    ComplianceState::new(desc, q, theta).deflections
}

/// Analytic partials of the deflections.
#[derive(Debug, Clone, PartialEq)]
pub struct CompliancePartials {
    /// `d_mass[i][j]` = `∂p*_C,i/∂m_{j+2}` for the free masses `m_2..m_5`.
    pub d_mass: [[f64; FREE_MASSES]; NUM_JOINTS],
    /// `∂p*_C,i/∂k_i = τ*_i`; the cross terms vanish.
    pub d_compliance: [f64; NUM_JOINTS],
}

pub fn compliance_partials(desc: &RobotDescription, q: &JointState, theta: &ParameterVector) -> CompliancePartials {
    let state = ComplianceState::new(desc, q, theta);
    let k = theta.link_compliances();
    let mut d_mass = [[0.0; FREE_MASSES]; NUM_JOINTS];
    for (i, row) in d_mass.iter_mut().enumerate() {
        for (jj, v) in row.iter_mut().enumerate() {
            *v = k[i] * state.torque_mass_partial(&desc.gravity, i, jj + 1);
        }
    }
    let mut d_compliance = state.projected;
    d_compliance[0] = 0.0;
    CompliancePartials { d_mass, d_compliance }
}
