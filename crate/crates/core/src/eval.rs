//! Trajectory alignment and absolute error statistics.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{quat_yaw, rotation_geodesic, Pose, Quaternion};

/// Default association tolerance, half the period of a 100 Hz stream.
pub const DEFAULT_MAX_DT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentMode {
    None,
    #[default]
    Se3,
    /// Yaw plus translation (4 DoF).
    YawOnly,
}

impl FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AlignmentMode::None),
            "se3" => Ok(AlignmentMode::Se3),
            "yaw" | "yaw-only" | "4dof" => Ok(AlignmentMode::YawOnly),
            other => Err(Error::InvalidParameter(format!("unknown alignment mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePair {
    pub est: Pose,
    pub gt: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub pairs: Vec<PosePair>,
    /// Estimates with no ground truth within tolerance.
    pub dropped: usize,
}

/// Pairs each estimate with the nearest ground-truth sample within `max_dt`.
pub fn associate(est: &[Pose], gt: &[Pose], max_dt: f64) -> Result<Association> {
    let mut pairs = Vec::with_capacity(est.len());
    let mut dropped = 0;
    let mut j = 0;
    for e in est {
        if gt.is_empty() {
            dropped += 1;
            continue;
        }
        while j + 1 < gt.len()
            && (gt[j + 1].timestamp - e.timestamp).abs() <= (gt[j].timestamp - e.timestamp).abs()
        {
            j += 1;
        }
        if (gt[j].timestamp - e.timestamp).abs() <= max_dt {
            pairs.push(PosePair { est: *e, gt: gt[j] });
        } else {
            dropped += 1;
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyAssociation);
    }
    Ok(Association { pairs, dropped })
}

/// Rigid transform applied to estimates: `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Quaternion,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Quaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Pose) -> Pose {
        Pose {
            translation: self.rotation.rotate(&p.translation) + self.translation,
            rotation: self.rotation * p.rotation,
            ..*p
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }
}

fn centroids(pairs: &[PosePair]) -> (Vector3<f64>, Vector3<f64>) {
    let n = pairs.len() as f64;
    let me = pairs.iter().map(|p| p.est.translation).sum::<Vector3<f64>>() / n;
    let mg = pairs.iter().map(|p| p.gt.translation).sum::<Vector3<f64>>() / n;
    (me, mg)
}

/// Least-squares rigid transform taking estimate positions onto ground truth.
pub fn align(pairs: &[PosePair], mode: AlignmentMode) -> Result<RigidTransform> {
    match mode {
        AlignmentMode::None => Ok(RigidTransform::identity()),
        AlignmentMode::Se3 => align_se3(pairs),
        AlignmentMode::YawOnly => align_yaw(pairs),
    }
}

fn align_se3(pairs: &[PosePair]) -> Result<RigidTransform> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "SE3 alignment needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    let (me, mg) = centroids(pairs);
    let mut cross = Matrix3::zeros();
    for p in pairs {
        cross += (p.gt.translation - mg) * (p.est.translation - me).transpose();
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateGeometry("SVD failed".into())),
    };
    let s = svd.singular_values;
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted[0] <= f64::EPSILON || sorted[1] <= 1e-10 * sorted[0] {
        return Err(Error::DegenerateGeometry(
            "points are collinear or coincident".into(),
        ));
    }
    // the reflection fix goes on the smallest singular direction
    let kmin = (0..3).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(2);
    let mut d = Matrix3::identity();
    d[(kmin, kmin)] = (u * v_t).determinant().signum();
    let r = u * d * v_t;
    let rotation = Quaternion::from_rotation_matrix(&r);
    Ok(RigidTransform {
        rotation,
        translation: mg - r * me,
    })
}

fn align_yaw(pairs: &[PosePair]) -> Result<RigidTransform> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateGeometry(format!(
            "yaw alignment needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let (me, mg) = centroids(pairs);
    let (mut sin_sum, mut cos_sum) = (0.0, 0.0);
    for p in pairs {
        let e = p.est.translation - me;
        let g = p.gt.translation - mg;
        sin_sum += e.x * g.y - e.y * g.x;
        cos_sum += e.x * g.x + e.y * g.y;
    }
    if sin_sum.hypot(cos_sum) <= f64::EPSILON {
        return Err(Error::DegenerateGeometry(
            "no horizontal extent to fix yaw".into(),
        ));
    }
    let rotation = quat_yaw(sin_sum.atan2(cos_sum));
    Ok(RigidTransform {
        rotation,
        translation: mg - rotation.rotate(&me),
    })
}

pub fn apply_alignment(pairs: &[PosePair], t: &RigidTransform) -> Vec<PosePair> {
    pairs
        .iter()
        .map(|p| PosePair {
            est: t.apply(&p.est),
            gt: p.gt,
        })
        .collect()
}

/// Sum of squared position residuals after applying `t`.
pub fn alignment_cost(pairs: &[PosePair], t: &RigidTransform) -> f64 {
    pairs
        .iter()
        .map(|p| (t.apply_point(&p.est.translation) - p.gt.translation).norm_squared())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl ErrorSummary {
    pub fn from_samples(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        Self {
            rmse: (xs.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
            mean: xs.iter().sum::<f64>() / n,
            median,
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub t: f64,
    /// Metres.
    pub translation: f64,
    /// Degrees.
    pub orientation: f64,
}

/// Translation errors in metres, orientation errors in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub translation: ErrorSummary,
    pub orientation: ErrorSummary,
    pub n_samples: usize,
    #[serde(skip)]
    pub per_sample: Vec<SampleError>,
}

pub fn compute_errors(pairs: &[PosePair]) -> ErrorStats {
    let per_sample: Vec<SampleError> = pairs
        .iter()
        .map(|p| SampleError {
            t: p.est.timestamp,
            translation: (p.est.translation - p.gt.translation).norm(),
            orientation: rotation_geodesic(&p.est.rotation, &p.gt.rotation).to_degrees(),
        })
        .collect();
    let trans: Vec<f64> = per_sample.iter().map(|s| s.translation).collect();
    let rot: Vec<f64> = per_sample.iter().map(|s| s.orientation).collect();
    ErrorStats {
        translation: ErrorSummary::from_samples(&trans),
        orientation: ErrorSummary::from_samples(&rot),
        n_samples: per_sample.len(),
        per_sample,
    }
}

/// Associate, align and summarize in one call.
pub fn evaluate(est: &[Pose], gt: &[Pose], mode: AlignmentMode, max_dt: f64) -> Result<ErrorStats> {
    let assoc = associate(est, gt, max_dt)?;
    if mode == AlignmentMode::None {
        return Ok(compute_errors(&assoc.pairs));
    }
    let t = align(&assoc.pairs, mode)?;
    Ok(compute_errors(&apply_alignment(&assoc.pairs, &t)))
}

/// Per-sample series as `t,e_trans_m,e_rot_deg`.
pub fn render_error_series(stats: &ErrorStats) -> String {
    let mut out = String::from("t,e_trans_m,e_rot_deg\n");
    for s in &stats.per_sample {
        let _ = writeln!(out, "{},{},{}", s.t, s.translation, s.orientation);
    }
    out
}
