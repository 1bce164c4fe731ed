//! The four virtual-joint submodels, the parameter vector that holds them
//! and its flat optimisation layout.
//!
//! Flat order is geometry (base 6 + 6 × 5), compliance (`m_2..m_5`, then
//! `k_2..k_6`), thermal (`α_1..α_6`), joint correction (joint 1 support
//! values first). Blocks absent from the [`ModelVariant`] are left out of
//! the flat vector and held at their stored values.

pub mod compliance;
pub mod joint_correction;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

pub use compliance::{
    compliance_deflections, compliance_partials, link_torques, CompliancePartials, ComplianceState,
    FREE_COMPLIANCES, FREE_MASSES,
};
pub use joint_correction::{CurveSample, JointCorrectionCurve};

use crate::error::{Error, Result};
use crate::robot::{ChainParams, EnvState, JointState, RobotDescription, NUM_JOINTS};
use crate::transform::VirtualJointParams;

/// Frozen tool mass `m_6` (kg); identified masses are in units of it.
pub const TOOL_MASS: f64 = 1.0;
/// Centre-of-mass ratio along every link.
pub const COM_RATIO: f64 = 0.5;
/// Temperature baseline `κ0` (°C).
pub const KAPPA0: f64 = 25.0;
/// Default joint-correction support density (1/rad).
pub const DEFAULT_D_SUPP: f64 = 80.0;

pub const GEO_LEN: usize = 6 + NUM_JOINTS * 5;
pub const COMPLIANCE_LEN: usize = FREE_MASSES + FREE_COMPLIANCES;
pub const THERMAL_LEN: usize = NUM_JOINTS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryBlock {
    /// Full six-parameter base transform `T_0^G`.
    pub base: [f64; 6],
    /// Per joint: the five parameters left after dropping the axial
    /// translation.
    pub joints: [[f64; 5]; NUM_JOINTS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceBlock {
    /// `m_2..m_5` (kg).
    pub masses: [f64; FREE_MASSES],
    /// `m_6`, never optimised.
    pub tool_mass: f64,
    /// `k_2..k_6` in rad/(N·mm).
    pub compliances: [f64; FREE_COMPLIANCES],
    pub com_ratio: [f64; NUM_JOINTS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalBlock {
    /// Expansion coefficients `α_1..α_6` (1/K).
    pub alpha: [f64; NUM_JOINTS],
    pub kappa0: f64,
}

/// Calibration parameters `θ = [θ_G, θ_C, θ_T, θ_J]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub geometry: GeometryBlock,
    pub compliance: ComplianceBlock,
    pub thermal: ThermalBlock,
    /// Empty, or one curve per joint.
    pub joint_correction: Vec<JointCorrectionCurve>,
}

impl ParameterVector {
    /// Initial guess: unit masses, every other free parameter zero.
    pub fn initial(joint_correction: Vec<JointCorrectionCurve>) -> Self {
        Self {
            geometry: GeometryBlock {
                base: [0.0; 6],
                joints: [[0.0; 5]; NUM_JOINTS],
            },
            compliance: ComplianceBlock {
                masses: [1.0; FREE_MASSES],
                tool_mass: TOOL_MASS,
                compliances: [0.0; FREE_COMPLIANCES],
                com_ratio: [COM_RATIO; NUM_JOINTS],
            },
            thermal: ThermalBlock {
                alpha: [0.0; NUM_JOINTS],
                kappa0: KAPPA0,
            },
            joint_correction,
        }
    }

    /// Initial guess with zeroed joint-correction curves over `ranges`.
    pub fn initial_with_support(ranges: &[(f64, f64); NUM_JOINTS], d_supp: f64) -> Result<Self> {
        let curves = ranges
            .iter()
            .map(|&(lo, hi)| JointCorrectionCurve::zeros(lo, hi, d_supp))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::initial(curves))
    }

    pub fn has_joint_correction(&self) -> bool {
        !self.joint_correction.is_empty()
    }

    /// Link masses `m_1..m_6`; `m_1` only loads joint 1 and is set to zero.
    pub fn link_masses(&self) -> [f64; NUM_JOINTS] {
        let m = &self.compliance.masses;
        [0.0, m[0], m[1], m[2], m[3], self.compliance.tool_mass]
    }

    /// Compliances `k_1..k_6`; `k_1` does not exist and reads as zero.
    pub fn link_compliances(&self) -> [f64; NUM_JOINTS] {
        let k = &self.compliance.compliances;
        [0.0, k[0], k[1], k[2], k[3], k[4]]
    }

    /// The same predictions with masses scaled by `c` and compliances by `1/c`.
    pub fn scale_compliance(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.compliance.masses.iter_mut().for_each(|m| *m *= c);
        out.compliance.tool_mass *= c;
        out.compliance.compliances.iter_mut().for_each(|k| *k /= c);
        out
    }

    /// Copy with the blocks outside `variant` reset to their initial values.
    pub fn restricted_to(&self, variant: ModelVariant) -> Self {
        let init = Self::initial(Vec::new());
        let mut out = self.clone();
        if !variant.compliance {
            out.compliance.masses = init.compliance.masses;
            out.compliance.compliances = init.compliance.compliances;
        }
        if !variant.thermal {
            out.thermal.alpha = init.thermal.alpha;
        }
        if !variant.joint {
            for c in &mut out.joint_correction {
                c.values.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        out
    }

    /// Parameters of the thermal virtual joint after joint `i`.
    pub fn thermal_params(&self, desc: &RobotDescription, env: &EnvState, i: usize) -> VirtualJointParams {
        let dk = env.kappa - self.thermal.kappa0;
        VirtualJointParams::translational(&(self.thermal.alpha[i] * dk * desc.links[i]))
    }

    /// `∂p_T,i/∂α_i`: the translation `(κ − κ0) t_i`.
    pub fn thermal_partial(&self, desc: &RobotDescription, env: &EnvState, i: usize) -> Vector3<f64> {
        (env.kappa - self.thermal.kappa0) * desc.links[i]
    }

    /// Geometric virtual-joint parameters; `index` 0 is the base, `1..=6`
    /// the joints.
    pub fn geo_params(&self, desc: &RobotDescription, index: usize) -> VirtualJointParams {
        if index == 0 {
            return VirtualJointParams::from_array(self.geometry.base);
        }
        let slot = geo_axial_slot(desc, index - 1);
        let free = &self.geometry.joints[index - 1];
        let mut p = [0.0; 6];
        let mut k = 0;
        for (s, v) in p.iter_mut().enumerate() {
            if s != slot {
                *v = free[k];
                k += 1;
            }
        }
        VirtualJointParams::from_array(p)
    }

    /// Virtual-joint parameters of the whole chain at one pose, and which
    /// joints fell outside their correction curve's support.
    pub fn chain_params(
        &self,
        desc: &RobotDescription,
        q: &JointState,
        env: &EnvState,
    ) -> (ChainParams, [bool; NUM_JOINTS]) {
        let state = ComplianceState::new(desc, q, self);
        self.chain_params_with(desc, q, env, &state)
    }

    pub(crate) fn chain_params_with(
        &self,
        desc: &RobotDescription,
        q: &JointState,
        env: &EnvState,
        state: &ComplianceState,
    ) -> (ChainParams, [bool; NUM_JOINTS]) {
        let mut chain = ChainParams {
            base_geo: self.geo_params(desc, 0),
            ..Default::default()
        };
        let mut flags = [false; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            let axis = &desc.joints[i].axis;
            let v = &mut chain.joints[i];
            if let Some(curve) = self.joint_correction.get(i) {
                let s = curve.evaluate(q.q[i]);
                flags[i] = s.out_of_support;
                v.joint_corr = VirtualJointParams::rotational(axis, s.value);
            }
            v.compliance = VirtualJointParams::rotational(axis, state.deflections[i]);
            v.geo = self.geo_params(desc, i + 1);
            v.thermal = self.thermal_params(desc, env, i);
        }
        (chain, flags)
    }
}

/// Slot (3..6) of the axial translation dropped from joint `joint`'s
/// geometric transform.
pub fn geo_axial_slot(desc: &RobotDescription, joint: usize) -> usize {
    3 + desc.joints[joint].dominant_axis()
}

/// Which submodels take part in a calibration. Geometry is mandatory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelVariant {
    pub compliance: bool,
    pub thermal: bool,
    pub joint: bool,
}

impl ModelVariant {
    pub const G: Self = Self {
        compliance: false,
        thermal: false,
        joint: false,
    };
    pub const GC: Self = Self {
        compliance: true,
        thermal: false,
        joint: false,
    };
    pub const GCT: Self = Self {
        compliance: true,
        thermal: true,
        joint: false,
    };
    pub const FULL: Self = Self {
        compliance: true,
        thermal: true,
        joint: true,
    };

    pub fn has(&self, block: Block) -> bool {
        match block {
            Block::Geometry => true,
            Block::Compliance => self.compliance,
            Block::Thermal => self.thermal,
            Block::JointCorrection => self.joint,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("G")?;
        for (on, c) in [(self.compliance, "C"), (self.thermal, "T"), (self.joint, "J")] {
            if on {
                f.write_str(c)?;
            }
        }
        Ok(())
    }
}

impl TryFrom<String> for ModelVariant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelVariant> for String {
    fn from(v: ModelVariant) -> String {
        v.to_string()
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(Self::FULL);
        }
        let mut v = Self::G;
        let mut geometry = false;
        for ch in s.chars() {
            match ch.to_ascii_uppercase() {
                'G' => geometry = true,
                'C' => v.compliance = true,
                'T' => v.thermal = true,
                'J' => v.joint = true,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown submodel `{other}` in variant `{s}`"
                    )))
                }
            }
        }
        if !geometry {
            return Err(Error::InvalidArgument(format!(
                "variant `{s}` must include the geometry submodel G"
            )));
        }
        Ok(v)
    }
}

/// Comma-separated list such as `G,GC,GCT,GCTJ`.
pub fn parse_variants(s: &str) -> Result<Vec<ModelVariant>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    Geometry,
    Compliance,
    Thermal,
    JointCorrection,
}

impl Block {
    pub const ALL: [Block; 4] = [
        Block::Geometry,
        Block::Compliance,
        Block::Thermal,
        Block::JointCorrection,
    ];

    pub fn letter(&self) -> char {
        match self {
            Block::Geometry => 'G',
            Block::Compliance => 'C',
            Block::Thermal => 'T',
            Block::JointCorrection => 'J',
        }
    }
}

/// Positions of the free parameters of a variant in the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub variant: ModelVariant,
    compliance: Option<usize>,
    thermal: Option<usize>,
    joint: Option<[usize; NUM_JOINTS]>,
    joint_lens: [usize; NUM_JOINTS],
    len: usize,
}

impl ParamLayout {
    pub fn new(variant: ModelVariant, theta: &ParameterVector) -> Result<Self> {
        let mut len = GEO_LEN;
        let mut take = |n: usize| {
            let at = len;
            len += n;
            at
        };
        let compliance = variant.compliance.then(|| take(COMPLIANCE_LEN));
        let thermal = variant.thermal.then(|| take(THERMAL_LEN));
        let mut joint_lens = [0; NUM_JOINTS];
        let joint = if variant.joint {
            if theta.joint_correction.len() != NUM_JOINTS {
                return Err(Error::Layout(format!(
                    "variant {variant} needs {NUM_JOINTS} joint-correction curves, found {}",
                    theta.joint_correction.len()
                )));
            }
            let mut offsets = [0; NUM_JOINTS];
            for (i, c) in theta.joint_correction.iter().enumerate() {
                joint_lens[i] = c.len();
                offsets[i] = take(c.len());
            }
            Some(offsets)
        } else {
            None
        };
        Ok(Self {
            variant,
            compliance,
            thermal,
            joint,
            joint_lens,
            len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn block_range(&self, block: Block) -> Option<Range<usize>> {
        match block {
            Block::Geometry => Some(0..GEO_LEN),
            Block::Compliance => self.compliance.map(|a| a..a + COMPLIANCE_LEN),
            Block::Thermal => self.thermal.map(|a| a..a + THERMAL_LEN),
            Block::JointCorrection => self.joint.map(|o| {
                let end = o[NUM_JOINTS - 1] + self.joint_lens[NUM_JOINTS - 1];
                o[0]..end
            }),
        }
    }

    /// Index of geometric parameter `k` of transform `index` (0 = base).
    pub fn geo_index(&self, index: usize, k: usize) -> usize {
        if index == 0 {
            k
        } else {
            6 + 5 * (index - 1) + k
        }
    }

    /// Index of the free mass `m_{j+2}`, `j` in `0..4`.
    pub fn mass_index(&self, j: usize) -> Option<usize> {
        self.compliance.map(|a| a + j)
    }

    /// Index of `k_{i+2}`, `i` in `0..5`.
    pub fn compliance_index(&self, i: usize) -> Option<usize> {
        self.compliance.map(|a| a + FREE_MASSES + i)
    }

    pub fn thermal_index(&self, i: usize) -> Option<usize> {
        self.thermal.map(|a| a + i)
    }

    pub fn joint_index(&self, joint: usize, node: usize) -> Option<usize> {
        self.joint.map(|o| o[joint] + node)
    }

    /// Range of joint `joint`'s curve values.
    pub fn joint_range(&self, joint: usize) -> Option<Range<usize>> {
        self.joint.map(|o| o[joint]..o[joint] + self.joint_lens[joint])
    }

    pub fn pack(&self, theta: &ParameterVector) -> DVector<f64> {
        let mut flat = DVector::zeros(self.len);
        flat.as_mut_slice()[..6].copy_from_slice(&theta.geometry.base);
        for (i, g) in theta.geometry.joints.iter().enumerate() {
            let at = self.geo_index(i + 1, 0);
            flat.as_mut_slice()[at..at + 5].copy_from_slice(g);
        }
        if let Some(a) = self.compliance {
            flat.as_mut_slice()[a..a + FREE_MASSES].copy_from_slice(&theta.compliance.masses);
            flat.as_mut_slice()[a + FREE_MASSES..a + COMPLIANCE_LEN]
                .copy_from_slice(&theta.compliance.compliances);
        }
        if let Some(a) = self.thermal {
            flat.as_mut_slice()[a..a + THERMAL_LEN].copy_from_slice(&theta.thermal.alpha);
        }
        if self.joint.is_some() {
            for (i, c) in theta.joint_correction.iter().enumerate() {
                let r = self.joint_range(i).expect("joint block present");
                flat.as_mut_slice()[r].copy_from_slice(&c.values);
            }
        }
        flat
    }

    /// Writes `flat` into a copy of `template`; parameters outside the
    /// layout keep the template's values.
    pub fn unpack(&self, flat: &[f64], template: &ParameterVector) -> Result<ParameterVector> {
        if flat.len() != self.len {
            return Err(Error::Layout(format!(
                "flat vector has {} entries, layout {} expects {}",
                flat.len(),
                self.variant,
                self.len
            )));
        }
        let mut theta = template.clone();
        if self.variant.joint {
            let lens: Vec<usize> = theta.joint_correction.iter().map(|c| c.len()).collect();
            if lens.as_slice() != self.joint_lens.as_slice() {
                return Err(Error::Layout(format!(
                    "template curve sizes {lens:?} differ from layout {:?}",
                    self.joint_lens
                )));
            }
        }
        theta.geometry.base.copy_from_slice(&flat[..6]);
        for (i, g) in theta.geometry.joints.iter_mut().enumerate() {
            let at = self.geo_index(i + 1, 0);
            g.copy_from_slice(&flat[at..at + 5]);
        }
        if let Some(a) = self.compliance {
            theta.compliance.masses.copy_from_slice(&flat[a..a + FREE_MASSES]);
            theta
                .compliance
                .compliances
                .copy_from_slice(&flat[a + FREE_MASSES..a + COMPLIANCE_LEN]);
        }
        if let Some(a) = self.thermal {
            theta.thermal.alpha.copy_from_slice(&flat[a..a + THERMAL_LEN]);
        }
        if self.joint.is_some() {
            for i in 0..NUM_JOINTS {
                let r = self.joint_range(i).expect("joint block present");
                theta.joint_correction[i].values.copy_from_slice(&flat[r]);
            }
        }
        Ok(theta)
    }
}
