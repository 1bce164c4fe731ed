//! Rigid-body transforms and the six-parameter virtual-joint transform.
//!
//! All translations are in millimetres and all angles in radians. A
//! [`Transform`] maps a point `x` to `R x + t`, i.e. it is the homogeneous
//! matrix `[R t; 0 1]`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `||axis|| - 1` accepted by [`rot_about_axis`].
pub const AXIS_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let rt = self.rotation.transpose();
        Transform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Largest entry of `|RᵀR − I|` together with `|det R − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let det = (self.rotation.determinant() - 1.0).abs();
        gram.abs().max().max(det)
    }
}

impl Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl Mul<&Transform> for &Transform {
    type Output = Transform;

    fn mul(self, rhs: &Transform) -> Transform {
        self.compose(rhs)
    }
}

/// Derivative of a [`Transform`] with respect to a scalar parameter.
///
/// The homogeneous form is `[dR dt; 0 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformDerivative {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl TransformDerivative {
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Derivative of `T · p` for a point `p` held fixed.
    pub fn apply_to_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Parameters of a general virtual joint: three Euler angles followed by a
/// translation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VirtualJointParams {
    pub zeta: f64,
    pub xi: f64,
    pub chi: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl VirtualJointParams {
    pub const LEN: usize = 6;

    pub fn from_array(p: [f64; 6]) -> Self {
        Self {
            zeta: p[0],
            xi: p[1],
            chi: p[2],
            x: p[3],
            y: p[4],
            z: p[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.zeta, self.xi, self.chi, self.x, self.y, self.z]
    }

    /// Pure rotation whose Euler angles are `scale · axis`.
    pub fn rotational(axis: &Vector3<f64>, scale: f64) -> Self {
        Self::from_array([scale * axis.x, scale * axis.y, scale * axis.z, 0.0, 0.0, 0.0])
    }

    pub fn translational(t: &Vector3<f64>) -> Self {
        Self::from_array([0.0, 0.0, 0.0, t.x, t.y, t.z])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn d_rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn d_rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn d_rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Euler convention for virtual joints: `R = R_x(zeta) · R_y(xi) · R_z(chi)`.
pub fn euler_rotation(zeta: f64, xi: f64, chi: f64) -> Matrix3<f64> {
    rot_x(zeta) * rot_y(xi) * rot_z(chi)
}

pub fn from_params(p: &VirtualJointParams) -> Transform {
    Transform::new(
        euler_rotation(p.zeta, p.xi, p.chi),
        Vector3::new(p.x, p.y, p.z),
    )
}

/// Inverse of [`from_params`], valid away from `|xi| = π/2`.
pub fn to_params(t: &Transform) -> VirtualJointParams {
    let r = &t.rotation;
    let xi = r[(0, 2)].clamp(-1.0, 1.0).asin();
    let zeta = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let chi = (-r[(0, 1)]).atan2(r[(0, 0)]);
    VirtualJointParams {
        zeta,
        xi,
        chi,
        x: t.translation.x,
        y: t.translation.y,
        z: t.translation.z,
    }
}

/// Analytic `∂T/∂p_k` where `k` indexes `[zeta, xi, chi, x, y, z]`.
///
/// # Panics
/// If `component` is not in `0..6`.
pub fn d_from_params(p: &VirtualJointParams, component: usize) -> TransformDerivative {
    let mut d = TransformDerivative {
        rotation: Matrix3::zeros(),
        translation: Vector3::zeros(),
    };
    match component {
        0 => d.rotation = d_rot_x(p.zeta) * rot_y(p.xi) * rot_z(p.chi),
        1 => d.rotation = rot_x(p.zeta) * d_rot_y(p.xi) * rot_z(p.chi),
        2 => d.rotation = rot_x(p.zeta) * rot_y(p.xi) * d_rot_z(p.chi),
        3..=5 => d.translation[component - 3] = 1.0,
        _ => panic!("virtual joint parameter index {component} out of range"),
    }
    d
}

/// All six partials at once, sharing the trigonometry.
pub fn d_from_params_all(p: &VirtualJointParams) -> [TransformDerivative; 6] {
    let (rx, ry, rz) = (rot_x(p.zeta), rot_y(p.xi), rot_z(p.chi));
    let zero_t = Vector3::zeros();
    let rot = |m: Matrix3<f64>| TransformDerivative {
        rotation: m,
        translation: zero_t,
    };
    let trans = |k: usize| {
        let mut t = Vector3::zeros();
        t[k] = 1.0;
        TransformDerivative {
            rotation: Matrix3::zeros(),
            translation: t,
        }
    };
    [
        rot(d_rot_x(p.zeta) * ry * rz),
        rot(rx * d_rot_y(p.xi) * rz),
        rot(rx * ry * d_rot_z(p.chi)),
        trans(0),
        trans(1),
        trans(2),
    ]
}

/// Rodrigues rotation about a unit axis.
pub fn rot_about_axis(axis: &Vector3<f64>, angle: f64) -> Result<Transform> {
    let norm = axis.norm();
    if !((norm - 1.0).abs() <= AXIS_NORM_TOL) {
        return Err(Error::NonUnitAxis { norm });
    }
    Ok(Transform::from_rotation(rodrigues(axis, angle)))
}

pub(crate) fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    let k = axis.cross_matrix();
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

/// `∂/∂angle` of [`rodrigues`].
pub(crate) fn d_rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    let k = axis.cross_matrix();
    k * c + k * k * s
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    fn random_transform(v: &[f64]) -> Transform {
        from_params(&VirtualJointParams::from_array([
            v[0], v[1], v[2], v[3], v[4], v[5],
        ]))
    }

    #[test]
    fn identity_is_unit() {
        let t = random_transform(&[0.3, -0.2, 1.1, 4.0, -5.0, 6.0]);
        assert_eq!(Transform::identity() * t, t);
        assert_eq!(t * Transform::identity(), t);
    }

    #[test]
    fn quarter_turn_then_translate() {
        let rz = rot_about_axis(&Vector3::z(), FRAC_PI_2).unwrap();
        let tx = Transform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let p = (rz * tx).transform_point(&Vector3::zeros());
        assert_relative_eq!(p, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = random_transform(&[0.7, -1.2, 2.5, 100.0, -30.0, 8.0]);
        let id = t * t.inverse();
        assert!((id.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
    }

    #[test]
    fn zero_params_are_identity() {
        assert_eq!(
            from_params(&VirtualJointParams::default()),
            Transform::identity()
        );
    }

    #[test]
    fn translation_only_params() {
        let t = from_params(&VirtualJointParams::from_array([0., 0., 0., 1., 2., 3.]));
        assert_eq!(t.rotation, Matrix3::identity());
        assert_eq!(t.translation, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn euler_matches_hand_composed_axis_rotations() {
        // Oracle: primitive rotations written out independently.
        let (a, b, c) = (0.1_f64, -0.2_f64, 0.3_f64);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos());
        let ry = Matrix3::new(b.cos(), 0.0, b.sin(), 0.0, 1.0, 0.0, -b.sin(), 0.0, b.cos());
        let rz = Matrix3::new(c.cos(), -c.sin(), 0.0, c.sin(), c.cos(), 0.0, 0.0, 0.0, 1.0);
        let expected = rx * ry * rz;
        let t = from_params(&VirtualJointParams::from_array([a, b, c, 0., 0., 0.]));
        assert_relative_eq!(t.rotation, expected, epsilon = 1e-15);
        // Frozen values of the same product.
        assert_relative_eq!(t.rotation[(0, 0)], 0.936_293_363_584_199_2, epsilon = 1e-12);
        assert_relative_eq!(t.rotation[(0, 2)], -0.198_669_330_795_061_2, epsilon = 1e-12);
        assert_relative_eq!(t.rotation[(2, 2)], 0.975_170_327_201_816, epsilon = 1e-12);
    }

    #[test]
    fn translation_derivatives_are_unit_columns() {
        let p = VirtualJointParams::from_array([0.2, 0.1, -0.4, 1.0, 2.0, 3.0]);
        for k in 3..6 {
            let d = d_from_params(&p, k);
            assert_eq!(d.rotation, Matrix3::zeros());
            assert_eq!(d.translation.sum(), 1.0);
            assert_eq!(d.translation[k - 3], 1.0);
        }
    }

    #[test]
    fn zeta_derivative_at_zero_is_x_generator() {
        let d = d_from_params(&VirtualJointParams::default(), 0);
        assert_eq!(d.rotation, Vector3::x().cross_matrix());
        let d = d_from_params(&VirtualJointParams::default(), 2);
        assert_eq!(d.rotation, Vector3::z().cross_matrix());
    }

    #[test]
    fn rodrigues_special_cases() {
        assert_eq!(
            rot_about_axis(&Vector3::z(), 0.0).unwrap(),
            Transform::identity()
        );
        let t = rot_about_axis(&Vector3::z(), PI).unwrap();
        assert_relative_eq!(
            t.rotation,
            Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)),
            epsilon = 1e-15
        );
        assert!(matches!(
            rot_about_axis(&Vector3::new(1.0, 1.0, 0.0), 0.3),
            Err(Error::NonUnitAxis { .. })
        ));
    }

    #[test]
    fn euler_round_trip() {
        let p = VirtualJointParams::from_array([0.3, -0.5, 2.0, 1.0, -2.0, 3.0]);
        let back = to_params(&from_params(&p));
        for (a, b) in p.to_array().iter().zip(back.to_array()) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn derivative_matches_central_differences(
            v in prop::array::uniform6(-1.5f64..1.5),
            k in 0usize..6,
        ) {
            let p = VirtualJointParams::from_array(v);
            let d = d_from_params(&p, k).to_homogeneous();
            let h = 1e-6;
            let mut plus = v;
            let mut minus = v;
            plus[k] += h;
            minus[k] -= h;
            let fd = (from_params(&VirtualJointParams::from_array(plus)).to_homogeneous()
                - from_params(&VirtualJointParams::from_array(minus)).to_homogeneous())
                / (2.0 * h);
            let err = (d - fd).abs().max();
            let scale = d.abs().max().max(1.0);
            prop_assert!(err / scale < 1e-7, "k={k} err={err}");
            let all = d_from_params_all(&p);
            prop_assert_eq!(all[k].to_homogeneous(), d);
        }

        #[test]
        fn rodrigues_trace_identity(
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in -6.0f64..6.0,
        ) {
            let a = Vector3::from(axis);
            prop_assume!(a.norm() > 1e-3);
            let a = a.normalize();
            let t = rot_about_axis(&a, angle).unwrap();
            prop_assert!(t.orthonormality_error() < 1e-12);
            prop_assert!((t.rotation.trace() - (1.0 + 2.0 * angle.cos())).abs() < 1e-12);
            prop_assert!((t.rotation * a - a).norm() < 1e-12);
        }

        #[test]
        fn long_chains_stay_orthonormal(seed in prop::collection::vec(-3.0f64..3.0, 600)) {
            let chain = seed
                .chunks(6)
                .map(random_transform)
                .fold(Transform::identity(), |acc, t| acc * t);
            prop_assert!(chain.orthonormality_error() < 1e-12);
        }

        #[test]
        fn composition_is_associative(
            a in prop::array::uniform6(-2.0f64..2.0),
            b in prop::array::uniform6(-2.0f64..2.0),
            c in prop::array::uniform6(-2.0f64..2.0),
        ) {
            let (a, b, c) = (random_transform(&a), random_transform(&b), random_transform(&c));
            let l = (a * b) * c;
            let r = a * (b * c);
            prop_assert!((l.to_homogeneous() - r.to_homogeneous()).abs().max() < 1e-12);
        }
    }
}
