//! Pose repeatability from clusters of repeated approaches to the same pose.
//!
//! Slow drift (mostly thermal) is removed per coordinate with a centered
//! rolling mean over `window` seconds; points closer than half a window to
//! either end of their cluster are discarded because their rolling mean is
//! one-sided. The remaining distances `l_ij = ‖t_ij − t̄_ij‖` give
//! `RP = l̄ + 3·S_l`, with `S_l` the sample standard deviation over all
//! points.

use std::io::Read;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default rolling-mean window (s).
pub const DEFAULT_DRIFT_WINDOW_S: f64 = 1800.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityPoint {
    pub timestamp: f64,
    /// Measured position (mm).
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    /// Mean distance to the (drift-corrected) cluster centre (µm).
    pub l_bar: f64,
    /// Sample standard deviation of those distances (µm).
    pub s_l: f64,
    /// `l_bar + 3 s_l` (µm).
    pub rp: f64,
    /// Points used after trimming.
    pub n_points: usize,
    /// Mean position of every cluster over its retained points (mm).
    pub cluster_means: Vec<Vector3<f64>>,
    /// Largest peak-to-peak excursion of a rolling mean over the retained
    /// points of any cluster (µm); zero without drift removal.
    pub drift_um: f64,
    pub window_s: Option<f64>,
}

/// `l̄ + 3·S_l`.
pub fn rp_from_stats(l_bar: f64, s_l: f64) -> f64 {
    l_bar + 3.0 * s_l
}

/// Repeatability of `clusters`. `window` of `None` uses the plain cluster
/// mean as the centre.
pub fn repeatability(clusters: &[Vec<RepeatabilityPoint>], window: Option<f64>) -> Result<RepeatabilityReport> {
    if clusters.is_empty() {
        return Err(Error::InvalidArgument("no repeatability clusters".into()));
    }
    if let Some(w) = window {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidArgument(format!("drift window must be positive, got {w}")));
        }
    }
    let mut distances = Vec::new();
    let mut cluster_means = Vec::with_capacity(clusters.len());
    let mut drift_um: f64 = 0.0;
    for (c, points) in clusters.iter().enumerate() {
        let mut points = points.clone();
        points.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let (kept, centres) = match window {
            Some(w) => drift_corrected(&points, w),
            None => {
                let mean = mean_position(points.iter());
                (points.clone(), vec![mean; points.len()])
            }
        };
        if kept.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "cluster {c} keeps {} point(s) after trimming; need at least 2",
                kept.len()
            )));
        }
        cluster_means.push(mean_position(kept.iter()));
        if window.is_some() {
            for axis in 0..3 {
                let (lo, hi) = centres
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[axis]), hi.max(v[axis])));
                drift_um = drift_um.max((hi - lo) * 1e3);
            }
        }
        distances.extend(kept.iter().zip(&centres).map(|(p, m)| (p.position - m).norm() * 1e3));
    }
    let n = distances.len();
    let l_bar = distances.iter().sum::<f64>() / n as f64;
    let s_l = (distances.iter().map(|l| (l - l_bar).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    Ok(RepeatabilityReport {
        l_bar,
        s_l,
        rp: rp_from_stats(l_bar, s_l),
        n_points: n,
        cluster_means,
        drift_um,
        window_s: window,
    })
}

fn mean_position<'a>(points: impl Iterator<Item = &'a RepeatabilityPoint>) -> Vector3<f64> {
    let (sum, n) = points.fold((Vector3::zeros(), 0usize), |(s, n), p| (s + p.position, n + 1));
    sum / n as f64
}

/// Retained points (time-sorted input) and their centered rolling means.
fn drift_corrected(points: &[RepeatabilityPoint], window: f64) -> (Vec<RepeatabilityPoint>, Vec<Vector3<f64>>) {
    let half = 0.5 * window;
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return (Vec::new(), Vec::new());
    };
    let (t0, t1) = (first.timestamp, last.timestamp);
    let mut kept = Vec::new();
    let mut centres = Vec::new();
    let (mut lo, mut hi) = (0, 0);
    for p in points {
        while points[lo].timestamp < p.timestamp - half {
            lo += 1;
        }
        while hi < points.len() && points[hi].timestamp <= p.timestamp + half {
            hi += 1;
        }
        if p.timestamp - t0 >= half && t1 - p.timestamp >= half {
            kept.push(*p);
            centres.push(mean_position(points[lo..hi].iter()));
        }
    }
    (kept, centres)
}

/// Reads `cluster,timestamp,x,y,z` rows (header required, mm and s) into
/// clusters ordered by first appearance of their id.
pub fn read_clusters_csv(reader: impl Read) -> Result<Vec<Vec<RepeatabilityPoint>>> {
    #[derive(Deserialize)]
    struct Row {
        cluster: String,
        timestamp: f64,
        x: f64,
        y: f64,
        z: f64,
    }
    let mut ids: Vec<String> = Vec::new();
    let mut clusters: Vec<Vec<RepeatabilityPoint>> = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::DatasetRow {
            row: i + 1,
            message: e.to_string(),
        })?;
        let point = RepeatabilityPoint {
            timestamp: row.timestamp,
            position: Vector3::new(row.x, row.y, row.z),
        };
        if !(point.timestamp.is_finite() && point.position.iter().all(|v| v.is_finite())) {
            return Err(Error::DatasetRow {
                row: i + 1,
                message: "non-finite value".into(),
            });
        }
        match ids.iter().position(|c| *c == row.cluster) {
            Some(k) => clusters[k].push(point),
            None => {
                ids.push(row.cluster);
                clusters.push(vec![point]);
            }
        }
    }
    Ok(clusters)
}

pub fn load_clusters(path: impl AsRef<Path>) -> Result<Vec<Vec<RepeatabilityPoint>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_clusters_csv(std::io::BufReader::new(file))
}
