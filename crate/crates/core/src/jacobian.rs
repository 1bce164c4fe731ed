//! Analytic position Jacobian of the augmented chain.
//!
//! The chain is flattened into 39 factors (base, base geometry, then per
//! joint: rotation, J, C, G, T, link; finally the TCP). Prefix products and
//! suffix points are cached once per sample so every parameter column costs
//! one small matrix-vector product:
//! `∂t/∂θ = R_prefix · (∂T_k/∂θ) · s_k`.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::Result;
use crate::robot::{ChainParams, EnvState, JointState, RobotDescription, NUM_JOINTS};
use crate::submodels::{ComplianceState, ParamLayout, ParameterVector, ModelVariant, FREE_MASSES};
use crate::transform::{self, d_from_params_all, from_params, Transform, VirtualJointParams};

pub const N_FACTORS: usize = 3 + 6 * NUM_JOINTS;
pub const BASE_GEO: usize = 1;
pub const TCP: usize = N_FACTORS - 1;

pub fn joint_factor(i: usize) -> usize {
    2 + 6 * i
}
pub fn joint_corr_factor(i: usize) -> usize {
    3 + 6 * i
}
pub fn compliance_factor(i: usize) -> usize {
    4 + 6 * i
}
pub fn geo_factor(i: usize) -> usize {
    5 + 6 * i
}
pub fn thermal_factor(i: usize) -> usize {
    6 + 6 * i
}
pub fn link_factor(i: usize) -> usize {
    7 + 6 * i
}

/// Per-sample factor list with prefix products and suffix points.
#[derive(Debug, Clone)]
pub struct ChainCache {
    pub factors: Vec<Transform>,
    /// `prefix[k]` is the product of `factors[..k]`.
    pub prefix: Vec<Transform>,
    /// `suffix[k]` is the origin mapped through `factors[k + 1..]`.
    pub suffix: Vec<Vector3<f64>>,
}

impl ChainCache {
    pub fn new(desc: &RobotDescription, q: &JointState, chain: &ChainParams) -> Self {
        let mut factors = Vec::with_capacity(N_FACTORS);
        factors.push(desc.base);
        factors.push(from_params(&chain.base_geo));
        for (i, v) in chain.joints.iter().enumerate() {
            factors.push(Transform::from_rotation(desc.joint_rotation(i, q.q[i])));
            for p in [&v.joint_corr, &v.compliance, &v.geo, &v.thermal] {
                factors.push(from_params(p));
            }
            factors.push(Transform::from_translation(desc.links[i]));
        }
        factors.push(desc.tcp_local);
        debug_assert_eq!(factors.len(), N_FACTORS);

        let mut prefix = Vec::with_capacity(N_FACTORS + 1);
        prefix.push(Transform::identity());
        for f in &factors {
            let next = prefix.last().expect("non-empty").compose(f);
            prefix.push(next);
        }
        let mut suffix = vec![Vector3::zeros(); N_FACTORS];
        for k in (0..N_FACTORS - 1).rev() {
            suffix[k] = factors[k + 1].transform_point(&suffix[k + 1]);
        }
        Self {
            factors,
            prefix,
            suffix,
        }
    }

    pub fn full(&self) -> Transform {
        self.prefix[N_FACTORS]
    }

    pub fn position(&self) -> Vector3<f64> {
        self.prefix[N_FACTORS].translation
    }

    /// `∂t/∂p_c` for the six parameters of virtual-joint factor `k`.
    pub fn d_position_d_params(&self, k: usize, p: &VirtualJointParams) -> [Vector3<f64>; 6] {
        let r = &self.prefix[k].rotation;
        let s = &self.suffix[k];
        let d = d_from_params_all(p);
        std::array::from_fn(|c| r * d[c].apply_to_point(s))
    }

    /// `∂t/∂x` when factor `k` has Euler angles `x · axis`.
    pub fn d_position_rotational(&self, k: usize, p: &VirtualJointParams, axis: &Vector3<f64>) -> Vector3<f64> {
        let d = self.d_position_d_params(k, p);
        d[0] * axis.x + d[1] * axis.y + d[2] * axis.z
    }

    /// `∂t/∂(translation of factor k)`, one column per axis.
    pub fn d_position_d_translation(&self, k: usize) -> &Matrix3<f64> {
        &self.prefix[k].rotation
    }
}

/// Sparse Jacobian of one sample: nonzero `(flat index, ∂t/∂θ)` columns.
#[derive(Debug, Clone)]
pub struct SampleJacobian {
    pub position: Vector3<f64>,
    pub columns: Vec<(usize, Vector3<f64>)>,
    pub out_of_support: [bool; NUM_JOINTS],
}

impl SampleJacobian {
    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(3, n);
        for (c, v) in &self.columns {
            for r in 0..3 {
                m[(r, *c)] += v[r];
            }
        }
        m
    }
}

/// Predicted position and its sparse Jacobian over `layout`.
pub fn sample_jacobian(
    desc: &RobotDescription,
    q: &JointState,
    env: &EnvState,
    theta: &ParameterVector,
    layout: &ParamLayout,
) -> SampleJacobian {
    let state = ComplianceState::new(desc, q, theta);
    let (chain, out_of_support) = theta.chain_params_with(desc, q, env, &state);
    let cache = ChainCache::new(desc, q, &chain);
    let mut columns = Vec::with_capacity(64);

    let base = cache.d_position_d_params(BASE_GEO, &chain.base_geo);
    for (c, v) in base.iter().enumerate() {
        columns.push((layout.geo_index(0, c), *v));
    }
    for i in 0..NUM_JOINTS {
        let d = cache.d_position_d_params(geo_factor(i), &chain.joints[i].geo);
        let slot = crate::submodels::geo_axial_slot(desc, i);
        let mut k = 0;
        for (c, v) in d.iter().enumerate() {
            if c != slot {
                columns.push((layout.geo_index(i + 1, k), *v));
                k += 1;
            }
        }
    }

    if layout.variant.compliance {
        let k = theta.link_compliances();
        let d_defl: [Vector3<f64>; NUM_JOINTS] = std::array::from_fn(|i| {
            cache.d_position_rotational(compliance_factor(i), &chain.joints[i].compliance, &desc.joints[i].axis)
        });
        for j in 0..FREE_MASSES {
            let link = j + 1;
            let col = (1..=link).fold(Vector3::zeros(), |acc, i| {
                acc + d_defl[i] * (k[i] * state.torque_mass_partial(&desc.gravity, i, link))
            });
            columns.push((layout.mass_index(j).expect("compliance block"), col));
        }
        for i in 1..NUM_JOINTS {
            columns.push((
                layout.compliance_index(i - 1).expect("compliance block"),
                d_defl[i] * state.projected[i],
            ));
        }
    }

    if layout.variant.thermal {
        for i in 0..NUM_JOINTS {
            let dt = theta.thermal_partial(desc, env, i);
            let col = cache.d_position_d_translation(thermal_factor(i)) * dt;
            columns.push((layout.thermal_index(i).expect("thermal block"), col));
        }
    }

    if layout.variant.joint {
        for (i, curve) in theta.joint_correction.iter().enumerate() {
            let s = curve.evaluate(q.q[i]);
            let d = cache.d_position_rotational(joint_corr_factor(i), &chain.joints[i].joint_corr, &desc.joints[i].axis);
            for (node, w) in s.gradient() {
                columns.push((layout.joint_index(i, node).expect("joint block"), d * w));
            }
        }
    }

    SampleJacobian {
        position: cache.position(),
        columns,
        out_of_support,
    }
}

/// Dense `3 × n_free` Jacobian of the predicted tool position.
pub fn position_jacobian(
    desc: &RobotDescription,
    q: &JointState,
    env: &EnvState,
    theta: &ParameterVector,
    variant: ModelVariant,
) -> Result<DMatrix<f64>> {
    let layout = ParamLayout::new(variant, theta)?;
    Ok(sample_jacobian(desc, q, env, theta, &layout).to_dense(layout.len()))
}

/// `∂t/∂q_i` of the nominal chain.
pub fn nominal_joint_sensitivity(desc: &RobotDescription, q: &JointState, joint: usize) -> Vector3<f64> {
    let f = desc.nominal_frames(q);
    f.axes[joint].cross(&(f.tcp - f.origins[joint]))
}

/// `∂t/∂q_i` of the augmented model for all joints, including the slope of
/// the correction curves and the pose dependence of the gravity load.
pub fn joint_space_jacobian(
    desc: &RobotDescription,
    q: &JointState,
    env: &EnvState,
    theta: &ParameterVector,
) -> [Vector3<f64>; NUM_JOINTS] {
    let state = ComplianceState::new(desc, q, theta);
    let (chain, _) = theta.chain_params_with(desc, q, env, &state);
    let cache = ChainCache::new(desc, q, &chain);
    let masses = theta.link_masses();
    let k = theta.link_compliances();
    let d_defl: [Vector3<f64>; NUM_JOINTS] = std::array::from_fn(|i| {
        cache.d_position_rotational(compliance_factor(i), &chain.joints[i].compliance, &desc.joints[i].axis)
    });
    std::array::from_fn(|i| {
        let axis = &desc.joints[i].axis;
        let f = joint_factor(i);
        let mut d = cache.prefix[f].rotation * (transform::d_rodrigues(axis, q.q[i]) * cache.suffix[f]);
        if let Some(curve) = theta.joint_correction.get(i) {
            let slope = curve.evaluate(q.q[i]).slope;
            if slope != 0.0 {
                d += cache.d_position_rotational(joint_corr_factor(i), &chain.joints[i].joint_corr, axis) * slope;
            }
        }
        for c in 1..NUM_JOINTS {
            if k[c] != 0.0 {
                d += d_defl[c] * (k[c] * state.torque_joint_partial(&desc.gravity, &masses, c, i));
            }
        }
        d
    })
}
