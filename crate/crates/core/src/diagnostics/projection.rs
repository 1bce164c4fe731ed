//! Residuals projected onto single joints, and binned curves of the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::jacobian::joint_space_jacobian;
use crate::robot::{RobotDescription, NUM_JOINTS};
use crate::submodels::ParameterVector;

/// `‖∂t/∂q_i‖` (mm/rad) below which the projection onto joint `i` is
/// undefined.
pub const MIN_JOINT_SENSITIVITY: f64 = 1e-6;

/// Per sample and joint, the angle `Δq_i = J_iᵀ r / (J_iᵀ J_i)` that best
/// explains the residual `r = t_meas − t_pred` (rad). `None` where the tool
/// position does not depend on the joint.
pub fn project_residuals_to_joints(
    desc: &RobotDescription,
    ds: &Dataset,
    theta: &ParameterVector,
) -> Vec<[Option<f64>; NUM_JOINTS]> {
    ds.samples()
        .par_iter()
        .map(|s| {
            let env = s.env();
            let r = s.t_meas - desc.fk_augmented(&s.q, &env, theta).translation;
            let jac = joint_space_jacobian(desc, &s.q, &env, theta);
            jac.map(|j| {
                let nn = j.norm_squared();
                (nn.sqrt() >= MIN_JOINT_SENSITIVITY).then(|| j.dot(&r) / nn)
            })
        })
        .collect()
}

/// One bin of a [`binned_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Bin centre (rad).
    pub q: f64,
    /// Mean of the values in the bin.
    pub value: f64,
    pub count: usize,
}

/// Bins `(q, value)` pairs at width `1/d_supp` (bins anchored at 0 rad) and
/// averages each bin. Bins with fewer than `min_count` pairs are dropped;
/// `None` values are skipped.
pub fn binned_curve(pairs: impl IntoIterator<Item = (f64, Option<f64>)>, d_supp: f64, min_count: usize) -> Vec<CurvePoint> {
    let mut bins = std::collections::BTreeMap::<i64, (f64, usize)>::new();
    for (q, v) in pairs {
        if let Some(v) = v {
            let e = bins.entry(crate::data::support_bin(q, d_supp)).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    bins.into_iter()
        .filter(|(_, (_, n))| *n >= min_count.max(1))
        .map(|(b, (sum, n))| CurvePoint {
            q: (b as f64 + 0.5) / d_supp,
            value: sum / n as f64,
            count: n,
        })
        .collect()
}

/// Centered moving average over `half_width` neighbours on each side
/// (shrinking at the ends).
pub fn moving_average(points: &[CurvePoint], half_width: usize) -> Vec<CurvePoint> {
    (0..points.len())
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(points.len());
            let window = &points[lo..hi];
            let count: usize = window.iter().map(|p| p.count).sum();
            let value = window.iter().map(|p| p.value * p.count as f64).sum::<f64>() / count as f64;
            CurvePoint {
                q: points[i].q,
                value,
                count,
            }
        })
        .collect()
}

/// Binned projection of every sample onto joint `joint`.
pub fn projected_joint_curve(
    projections: &[[Option<f64>; NUM_JOINTS]],
    ds: &Dataset,
    joint: usize,
    d_supp: f64,
    min_count: usize,
) -> Vec<CurvePoint> {
    binned_curve(
        ds.iter().zip(projections).map(|(s, p)| (s.q.q[joint], p[joint])),
        d_supp,
        min_count,
    )
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    use super::*;
    use crate::data::{MeasurementSample, Provenance};
    use crate::robot::{EnvState, JointState};

    fn single(desc: &RobotDescription, q: [f64; 6], offset: impl Fn(&[Vector3<f64>; 6]) -> Vector3<f64>) -> (Dataset, [Vector3<f64>; 6]) {
        let theta = ParameterVector::initial(Vec::new());
        let q = JointState::new(q);
        let env = EnvState::new(20.0);
        let jac = joint_space_jacobian(desc, &q, &env, &theta);
        let t = desc.fk_augmented(&q, &env, &theta).translation + offset(&jac);
        let s = MeasurementSample {
            timestamp: 0.0,
            q,
            kappa: 20.0,
            t_meas: t,
            sigma: None,
        };
        (Dataset::new(vec![s], Provenance::default()).unwrap(), jac)
    }

    #[test]
    fn residual_along_joint_direction_projects_exactly() {
        let d = RobotDescription::kr30_like();
        let q = [0.3, -0.2, 0.4, 0.1, 0.5, -0.3];
        let delta = 2.5e-4;
        for i in 0..6 {
            let (ds, _) = single(&d, q, |j| j[i] * delta);
            let p = project_residuals_to_joints(&d, &ds, &ParameterVector::initial(Vec::new()));
            assert_relative_eq!(p[0][i].unwrap(), delta, max_relative = 1e-9);
        }
    }

    #[test]
    fn orthogonal_residual_projects_to_zero() {
        let d = RobotDescription::kr30_like();
        let q = [0.3, -0.2, 0.4, 0.1, 0.5, -0.3];
        let (_, jac) = single(&d, q, |_| Vector3::zeros());
        let n = jac[2].cross(&Vector3::new(0.3, -1.0, 0.2)).normalize() * 0.01;
        let (ds, _) = single(&d, q, |_| n);
        let p = project_residuals_to_joints(&d, &ds, &ParameterVector::initial(Vec::new()));
        assert!(p[0][2].unwrap().abs() < 1e-15);
    }

    #[test]
    fn joint_on_its_own_axis_is_undefined() {
        // With the tool on the joint 6 axis, q6 cannot move it.
        let mut d = RobotDescription::kr30_like();
        d.links[5] = Vector3::new(300.0, 0.0, 0.0);
        d.tcp_local.translation = Vector3::new(95.0, 0.0, 0.0);
        let (ds, _) = single(&d, [0.0; 6], |_| Vector3::new(0.01, 0.0, 0.0));
        let p = project_residuals_to_joints(&d, &ds, &ParameterVector::initial(Vec::new()));
        assert!(p[0][5].is_none());
        assert!(p[0][1].is_some());
    }

    #[test]
    fn binning_and_smoothing() {
        let pairs = [(0.01, Some(1.0)), (0.02, Some(3.0)), (0.11, Some(5.0)), (0.12, None), (0.25, Some(7.0))];
        let c = binned_curve(pairs, 10.0, 1);
        assert_eq!(c.len(), 3);
        assert_relative_eq!(c[0].q, 0.05);
        assert_eq!((c[0].value, c[0].count), (2.0, 2));
        assert_eq!((c[1].value, c[1].count), (5.0, 1));
        assert_eq!(binned_curve(pairs, 10.0, 2).len(), 1);
        let m = moving_average(&c, 1);
        assert_relative_eq!(m[0].value, 3.0);
        assert_relative_eq!(m[1].value, 4.0);
        assert_relative_eq!(m[2].value, 6.0);
    }
}
