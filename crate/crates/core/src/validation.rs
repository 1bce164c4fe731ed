//! Finite-difference reference for the analytic Jacobian. Used by tests and
//! the acceptance suite only; the solver never calls into this module.

use nalgebra::{DMatrix, Vector3};

use crate::robot::{EnvState, JointState, RobotDescription};
use crate::submodels::{Block, ParamLayout, ParameterVector, FREE_MASSES};

/// Probe step for flat index `idx`: `1e-6` times a per-kind scale.
pub fn fd_step(layout: &ParamLayout, idx: usize) -> f64 {
    let in_block = |b: Block| layout.block_range(b).filter(|r| r.contains(&idx));
    let scale = if in_block(Block::Geometry).is_some() {
        1.0
    } else if let Some(r) = in_block(Block::Compliance) {
        if idx - r.start < FREE_MASSES {
            100.0
        } else {
            1e-4
        }
    } else if in_block(Block::Thermal).is_some() {
        1.0
    } else {
        1.0
    };
    1e-6 * scale
}

const TARGET_MM: f64 = 1e-2;

/// `3 × n` central-difference Jacobian of `fk_augmented` over `layout`.
///
/// Each column is probed once, then recomputed with a step that moves the
/// tool by about 10 µm, keeping both roundoff and curvature error near
/// `1e-10` relative whatever the parameter's units.
pub fn finite_difference_jacobian(
    desc: &RobotDescription,
    q: &JointState,
    env: &EnvState,
    theta: &ParameterVector,
    layout: &ParamLayout,
) -> DMatrix<f64> {
    let flat = layout.pack(theta);
    let mut out = DMatrix::zeros(3, layout.len());
    let eval = |v: &[f64]| -> Vector3<f64> {
        let t = layout.unpack(v, theta).expect("layout matches template");
        desc.fk_augmented(q, env, &t).translation
    };
    let mut work = flat.as_slice().to_vec();
    let mut central = |c: usize, h: f64| {
        work[c] = flat[c] + h;
        let p = eval(&work);
        work[c] = flat[c] - h;
        let m = eval(&work);
        work[c] = flat[c];
        (p - m) / (2.0 * h)
    };
    for c in 0..layout.len() {
        let probe = central(c, fd_step(layout, c));
        // rescale so the perturbation moves the tool by about TARGET_MM
        let norm = probe.norm();
        let col = if norm > 0.0 { central(c, TARGET_MM / norm) } else { probe };
        out.set_column(c, &col);
    }
    out
}

/// Largest per-column relative error `‖a − f‖ / max(‖a‖, ‖f‖)`; columns
/// where both are exactly zero are skipped.
pub fn max_column_relative_error(analytic: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    analytic
        .column_iter()
        .zip(reference.column_iter())
        .filter_map(|(a, f)| {
            let denom = a.norm().max(f.norm());
            (denom > 0.0).then(|| (a - f).norm() / denom)
        })
        .fold(0.0, f64::max)
}
