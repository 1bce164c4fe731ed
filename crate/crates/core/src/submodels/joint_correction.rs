//! Piecewise-linear correction of the commanded joint angle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack (rad) below which a joint angle outside the supported range still
/// counts as supported.
pub const SUPPORT_SLACK: f64 = 1e-12;

/// Correction curve over evenly spaced support points `q_min + j / d_supp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCorrectionCurve {
    pub q_min: f64,
    pub q_max: f64,
    /// Support points per radian.
    pub d_supp: f64,
    /// Correction angle (rad) at each support point.
    pub values: Vec<f64>,
}

/// Result of evaluating a curve at one joint angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub value: f64,
    /// Index of the left support point `j−`; `j+ = lower + 1`.
    pub lower: usize,
    /// Interpolation weight of `j+`; `j−` carries `1 − weight`.
    pub weight: f64,
    /// `∂value/∂q`, zero when clamped.
    pub slope: f64,
    pub out_of_support: bool,
}

impl CurveSample {
    /// Sparse `∂value/∂values`: exactly two `(index, weight)` entries.
    pub fn gradient(&self) -> [(usize, f64); 2] {
        [
            (self.lower, 1.0 - self.weight),
            (self.lower + 1, self.weight),
        ]
    }
}

impl JointCorrectionCurve {
    pub fn support_count(q_min: f64, q_max: f64, d_supp: f64) -> usize {
        // slack absorbs round-off when the range is a whole number of steps
        ((q_max - q_min) * d_supp + 1e-9).floor().max(0.0) as usize + 1
    }

    pub fn zeros(q_min: f64, q_max: f64, d_supp: f64) -> Result<Self> {
        if !(d_supp > 0.0) || !d_supp.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "support density must be positive, got {d_supp}"
            )));
        }
        if !(q_min.is_finite() && q_max.is_finite() && q_min < q_max) {
            return Err(Error::InvalidArgument(format!(
                "invalid support range [{q_min}, {q_max}]"
            )));
        }
        let n = Self::support_count(q_min, q_max, d_supp);
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "range [{q_min}, {q_max}] holds {n} support point(s) at density {d_supp}; need 2"
            )));
        }
        Ok(Self {
            q_min,
            q_max,
            d_supp,
            values: vec![0.0; n],
        })
    }

    /// Curve whose support values are `f(node)`.
    pub fn from_fn(q_min: f64, q_max: f64, d_supp: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut c = Self::zeros(q_min, q_max, d_supp)?;
        for j in 0..c.values.len() {
            c.values[j] = f(c.node(j));
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        1.0 / self.d_supp
    }

    pub fn node(&self, j: usize) -> f64 {
        self.q_min + j as f64 * self.step()
    }

    /// Last support point; equals `q_max` when the range is a whole number
    /// of steps.
    pub fn supported_max(&self) -> f64 {
        self.node(self.values.len() - 1)
    }

    pub fn evaluate(&self, q: f64) -> CurveSample {
        let n = self.values.len();
        let step = self.step();
        let last = (n - 1) as f64;
        let mut u = (q - self.q_min) / step;
        let slack = SUPPORT_SLACK / step;
        let mut out_of_support = false;
        let mut clamped = false;
        if !(u >= 0.0) {
            out_of_support = u < -slack || u.is_nan();
            clamped = true;
            u = 0.0;
        } else if u > last {
            out_of_support = u > last + slack;
            clamped = true;
            u = last;
        }
        let lower = (u.floor() as usize).min(n - 2);
        let weight = u - lower as f64;
        let (a, b) = (self.values[lower], self.values[lower + 1]);
        CurveSample {
            value: a + weight * (b - a),
            lower,
            weight,
            slope: if clamped { 0.0 } else { (b - a) / step },
            out_of_support,
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn curve() -> JointCorrectionCurve {
        let mut c = JointCorrectionCurve::zeros(-0.5, 0.5, 80.0).unwrap();
        for (j, v) in c.values.iter_mut().enumerate() {
            *v = ((j * 37 % 11) as f64 - 5.0) * 1e-5;
        }
        c
    }

    /// Oracle: scan every segment for the one containing `q`.
    fn brute_force(c: &JointCorrectionCurve, q: f64) -> f64 {
        for j in 0..c.values.len() - 1 {
            let (x0, x1) = (c.node(j), c.node(j + 1));
            if q >= x0 && q <= x1 {
                let t = (q - x0) / (x1 - x0);
                return c.values[j] * (1.0 - t) + c.values[j + 1] * t;
            }
        }
        panic!("q outside curve");
    }

    #[test]
    fn layout_arithmetic() {
        let c = JointCorrectionCurve::zeros(-0.5, 0.5, 80.0).unwrap();
        assert_eq!(c.len(), 81);
        assert!((c.supported_max() - 0.5).abs() < 1e-12);
        assert!(JointCorrectionCurve::zeros(0.0, 0.001, 80.0).is_err());
        assert!(JointCorrectionCurve::zeros(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn at_support_point_is_one_hot() {
        let c = curve();
        let s = c.evaluate(c.node(17));
        assert!((s.value - c.values[17]).abs() < 1e-15);
        let g = s.gradient();
        let dense: Vec<f64> = (0..c.len())
            .map(|j| g.iter().filter(|e| e.0 == j).map(|e| e.1).sum())
            .collect();
        assert!((dense[17] - 1.0).abs() < 1e-9);
        assert!(dense.iter().enumerate().all(|(j, w)| j == 17 || w.abs() < 1e-9));
    }

    #[test]
    fn midpoint_averages_neighbors() {
        let c = curve();
        let q = 0.5 * (c.node(30) + c.node(31));
        let s = c.evaluate(q);
        assert!((s.value - 0.5 * (c.values[30] + c.values[31])).abs() < 1e-15);
        assert_eq!(s.lower, 30);
        assert!((s.weight - 0.5).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_is_clamped_and_flagged() {
        let c = curve();
        let s = c.evaluate(-0.9);
        assert!(s.out_of_support);
        assert_eq!(s.value, c.values[0]);
        assert_eq!(s.slope, 0.0);
        let s = c.evaluate(0.7);
        assert!(s.out_of_support);
        assert_eq!(s.value, *c.values.last().unwrap());
        assert!(!c.evaluate(c.q_min - 1e-14).out_of_support);
    }

    #[test]
    fn continuous_across_segment_boundaries() {
        let c = curve();
        for j in 1..c.len() - 1 {
            let x = c.node(j);
            let left = c.values[j - 1] + (c.values[j] - c.values[j - 1]) * ((x - c.node(j - 1)) * c.d_supp);
            let right = c.evaluate(x).value;
            assert!((left - right).abs() < 1e-15, "node {j}");
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force_interpolation(q in -0.5f64..0.5) {
            let c = curve();
            let s = c.evaluate(q);
            prop_assert!(!s.out_of_support);
            prop_assert!((s.value - brute_force(&c, q)).abs() < 1e-15);
            let [(_, a), (_, b)] = s.gradient();
            prop_assert!((a + b - 1.0).abs() < 1e-15);
        }

        #[test]
        fn slope_matches_finite_difference(q in -0.49f64..0.49) {
            let c = curve();
            let s = c.evaluate(q);
            let h = 1e-7;
            // stay inside one segment
            prop_assume!(((q - c.q_min) * c.d_supp).fract() > 0.01 && ((q - c.q_min) * c.d_supp).fract() < 0.99);
            let fd = (c.evaluate(q + h).value - c.evaluate(q - h).value) / (2.0 * h);
            prop_assert!((fd - s.slope).abs() <= 1e-7 * s.slope.abs().max(1e-3));
        }
    }
}
