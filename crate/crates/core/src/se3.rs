//! Rigid-body poses, quaternion algebra and frame bookkeeping.
//!
//! A [`Pose`] with parent `P` and child `C` maps coordinates of a point
//! expressed in `C` into `P`; equivalently it is the pose of `C` observed in
//! `P`. Composition chains parent-to-child: `compose(P→A, A→B) = P→B`.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vehicle identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Smart,
    Adas,
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Agent::Smart => f.write_str("smart"),
            Agent::Adas => f.write_str("adas"),
        }
    }
}

impl std::str::FromStr for Agent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smart" => Ok(Agent::Smart),
            "adas" => Ok(Agent::Adas),
            other => Err(Error::InvalidParameter(format!("unknown agent `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameId {
    World,
    Local,
    Body(Agent),
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameId::World => f.write_str("world"),
            FrameId::Local => f.write_str("local"),
            FrameId::Body(a) => write!(f, "body({a})"),
        }
    }
}

/// Unit quaternion stored in `(x, y, z, w)` order.
///
/// Every constructor and product renormalizes. The sign is left alone; use
/// [`Quaternion::canonical`] when comparing rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    /// Builds a quaternion and normalizes it. A zero quaternion yields identity.
    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        let n = (x * x + y * y + z * z + w * w).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Self::identity();
        }
        Self {
            x: x / n,
            y: y / n,
            z: z / n,
            w: w / n,
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            w: 1.0,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z + self.w * other.w
    }

    pub fn conjugate(&self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
            w: self.w,
        }
    }

    /// Same rotation with `w >= 0`.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            Self {
                x: -self.x,
                y: -self.y,
                z: -self.z,
                w: -self.w,
            }
        } else {
            *self
        }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let (s, c) = (angle * 0.5).sin_cos();
        let a = axis / n;
        Self::new(a.x * s, a.y * s, a.z * s, c)
    }

    /// Exponential map from a rotation vector (axis times angle, radians).
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            return Self::new(0.5 * v.x, 0.5 * v.y, 0.5 * v.z, 1.0);
        }
        Self::from_axis_angle(v, angle)
    }

    /// Logarithm map; returns the rotation vector with angle in `[0, π]`.
    pub fn to_rotation_vector(&self) -> Vector3<f64> {
        let q = self.canonical();
        let v = Vector3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    /// ZYX Euler angles: `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (roll * 0.5).sin_cos();
        let (sp, cp) = (pitch * 0.5).sin_cos();
        let (sy, cy) = (yaw * 0.5).sin_cos();
        Self::new(
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
            cr * cp * cy + sr * sp * sy,
        )
    }

    /// Inverse of [`Quaternion::from_rpy`]; returns `(roll, pitch, yaw)`.
    pub fn to_rpy(&self) -> (f64, f64, f64) {
        let Quaternion { x, y, z, w } = *self;
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        (roll, pitch, yaw)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let Quaternion { x, y, z, w } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Self::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
                0.25 * s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Self::new(
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(2, 1)] - m[(1, 2)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Self::new(
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Self::new(
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        }
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        // v' = v + 2w(u × v) + 2u × (u × v)
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// Rotation by half the angle of `self`, about the same axis.
    pub fn half(&self) -> Self {
        Self::from_rotation_vector(&(0.5 * self.to_rotation_vector()))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.w.is_finite()
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product, renormalized.
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        )
    }
}

/// Rotation about +z by `theta` radians: `(0, 0, sin θ/2, cos θ/2)`.
pub fn quat_yaw(theta: f64) -> Quaternion {
    let (s, c) = (theta * 0.5).sin_cos();
    Quaternion::new(0.0, 0.0, s, c)
}

/// Angle of the relative rotation between `a` and `b`, in `[0, π]`.
pub fn rotation_geodesic(a: &Quaternion, b: &Quaternion) -> f64 {
    // 2·atan2(|v|, |w|) of conj(a)·b, expanded without renormalizing so that
    // equal inputs cancel exactly
    let x = a.w * b.x - a.x * b.w - a.y * b.z + a.z * b.y;
    let y = a.w * b.y - a.y * b.w - a.z * b.x + a.x * b.z;
    let z = a.w * b.z - a.z * b.w - a.x * b.y + a.y * b.x;
    let w = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
    2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub timestamp: f64,
    pub translation: Vector3<f64>,
    pub rotation: Quaternion,
    pub parent: FrameId,
    pub child: FrameId,
}

impl Pose {
    /// Validated constructor.
    pub fn new(
        timestamp: f64,
        translation: Vector3<f64>,
        rotation: Quaternion,
        parent: FrameId,
        child: FrameId,
    ) -> Result<Self> {
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(Error::InvalidPose(format!("timestamp {timestamp}")));
        }
        if !translation.iter().all(|v| v.is_finite()) || !rotation.is_finite() {
            return Err(Error::InvalidPose("non-finite component".into()));
        }
        if parent == child {
            return Err(Error::InvalidPose(format!("parent and child are both {parent}")));
        }
        Ok(Self {
            timestamp,
            translation,
            rotation: Quaternion::new(rotation.x, rotation.y, rotation.z, rotation.w),
            parent,
            child,
        })
    }

    /// Identity transform of `frame` onto itself.
    pub fn identity(frame: FrameId, timestamp: f64) -> Self {
        Self {
            timestamp,
            translation: Vector3::zeros(),
            rotation: Quaternion::identity(),
            parent: frame,
            child: frame,
        }
    }

    /// Unchecked constructor for trusted internal values.
    pub fn from_parts(
        timestamp: f64,
        translation: Vector3<f64>,
        rotation: Quaternion,
        parent: FrameId,
        child: FrameId,
    ) -> Self {
        Self {
            timestamp,
            translation,
            rotation,
            parent,
            child,
        }
    }

    /// Maps a point expressed in the child frame into the parent frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn with_frames(mut self, parent: FrameId, child: FrameId) -> Self {
        self.parent = parent;
        self.child = child;
        self
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn yaw(&self) -> f64 {
        self.rotation.to_rpy().2
    }
}

/// `a · b` as homogeneous transforms. Requires `a.child == b.parent`.
pub fn compose(a: &Pose, b: &Pose) -> Result<Pose> {
    if a.child != b.parent {
        return Err(Error::FrameMismatch {
            expected: a.child,
            found: b.parent,
        });
    }
    Ok(Pose {
        timestamp: b.timestamp,
        translation: a.translation + a.rotation.rotate(&b.translation),
        rotation: a.rotation * b.rotation,
        parent: a.parent,
        child: b.child,
    })
}

pub fn invert(p: &Pose) -> Pose {
    let r = p.rotation.conjugate();
    Pose {
        timestamp: p.timestamp,
        translation: -r.rotate(&p.translation),
        rotation: r,
        parent: p.child,
        child: p.parent,
    }
}

/// Pose of the ADAS body in the smart vehicle's body frame.
pub fn relative_pose(world_smart: &Pose, world_adas: &Pose) -> Result<Pose> {
    for p in [world_smart, world_adas] {
        if p.parent != FrameId::World {
            return Err(Error::FrameMismatch {
                expected: FrameId::World,
                found: p.parent,
            });
        }
    }
    compose(&invert(world_smart), world_adas)
}

// NED→ENU axis map: (n, e, d) → (e, n, -d). Its quaternion is a half turn about (1, 1, 0)/√2.
const WORLD_SWAP: Quaternion = Quaternion {
    x: std::f64::consts::FRAC_1_SQRT_2,
    y: std::f64::consts::FRAC_1_SQRT_2,
    z: 0.0,
    w: 0.0,
};

// Body forward-right-down → forward-left-up: half turn about x.
const BODY_SWAP: Quaternion = Quaternion {
    x: 1.0,
    y: 0.0,
    z: 0.0,
    w: 0.0,
};

/// Converts a NED world pose (FRD body) into ENU (FLU body).
///
/// The map is its own inverse, so [`enu_to_ned`] is the same function.
pub fn ned_to_enu(p: &Pose) -> Pose {
    let t = p.translation;
    Pose {
        translation: Vector3::new(t.y, t.x, -t.z),
        rotation: WORLD_SWAP * p.rotation * BODY_SWAP,
        ..*p
    }
}

pub fn enu_to_ned(p: &Pose) -> Pose {
    ned_to_enu(p)
}
