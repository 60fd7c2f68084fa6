//! 15-state extended Kalman filter and the two filter nodes.
//!
//! State layout: position (3), roll/pitch/yaw (3), body-frame linear velocity
//! (3), body angular velocity (3), linear acceleration (3). Acceleration is
//! the time derivative of the body-frame velocity.

use nalgebra::{Matrix3, Matrix6, SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::se3::{compose, invert, wrap_angle, FrameId, Pose, Quaternion};

pub const STATE_DIM: usize = 15;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
type MeasurementMatrix = SMatrix<f64, 6, STATE_DIM>;

/// Offsets of each block in the state vector.
pub mod idx {
    pub const POS: usize = 0;
    pub const ROLL: usize = 3;
    pub const PITCH: usize = 4;
    pub const YAW: usize = 5;
    pub const VEL: usize = 6;
    pub const ANG_VEL: usize = 9;
    pub const ACC: usize = 12;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub x: StateVector,
    pub p: StateMatrix,
    pub timestamp: f64,
}

impl StateEstimate {
    pub fn new(x: StateVector, p: StateMatrix, timestamp: f64) -> Self {
        Self { x, p, timestamp }
    }

    /// State at rest at `pose`, with a diagonal covariance.
    pub fn from_pose(pose: &Pose, p_diag: &[f64; STATE_DIM]) -> Self {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<3>(idx::POS).copy_from(&pose.translation);
        let (r, p, y) = pose.rotation.to_rpy();
        x[idx::ROLL] = r;
        x[idx::PITCH] = p;
        x[idx::YAW] = y;
        Self {
            x,
            p: StateMatrix::from_diagonal(&StateVector::from_column_slice(p_diag)),
            timestamp: pose.timestamp,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(idx::POS).into()
    }

    pub fn rpy(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(idx::ROLL).into()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(idx::VEL).into()
    }

    pub fn rotation(&self) -> Quaternion {
        Quaternion::from_rpy(self.x[idx::ROLL], self.x[idx::PITCH], self.x[idx::YAW])
    }

    pub fn pose(&self, parent: FrameId, child: FrameId) -> Pose {
        Pose::from_parts(self.timestamp, self.position(), self.rotation(), parent, child)
    }

    /// 1σ of x, y, z and yaw.
    pub fn pose_sigma(&self) -> [f64; 4] {
        [
            self.p[(0, 0)].max(0.0).sqrt(),
            self.p[(1, 1)].max(0.0).sqrt(),
            self.p[(2, 2)].max(0.0).sqrt(),
            self.p[(idx::YAW, idx::YAW)].max(0.0).sqrt(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.p.iter().all(|v| v.is_finite())
    }

    /// Largest asymmetry `|P - Pᵀ|` and smallest eigenvalue of `P`.
    pub fn covariance_health(&self) -> (f64, f64) {
        let asym = (self.p - self.p.transpose()).abs().max();
        let sym = 0.5 * (self.p + self.p.transpose());
        let min_eig = sym.symmetric_eigenvalues().min();
        (asym, min_eig)
    }
}

/// Process noise (per second) for the rigid-body motion model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessModel {
    pub q: StateMatrix,
}

impl ProcessModel {
    pub fn diagonal(q: &[f64; STATE_DIM]) -> Self {
        Self {
            q: StateMatrix::from_diagonal(&StateVector::from_column_slice(q)),
        }
    }

    /// Propagates `x` by `dt` seconds.
    pub fn transition(&self, x: &StateVector, dt: f64) -> StateVector {
        let e = Vector3::new(x[idx::ROLL], x[idx::PITCH], x[idx::YAW]);
        let w: Vector3<f64> = x.fixed_rows::<3>(idx::ANG_VEL).into();
        let v: Vector3<f64> = x.fixed_rows::<3>(idx::VEL).into();
        let a: Vector3<f64> = x.fixed_rows::<3>(idx::ACC).into();

        let e_rate = euler_rate_matrix(&e) * w;
        let e_mid = e + 0.5 * dt * e_rate;
        let disp = v * dt + 0.5 * dt * dt * a;

        let mut out = *x;
        let p: Vector3<f64> = x.fixed_rows::<3>(idx::POS).into();
        out.fixed_rows_mut::<3>(idx::POS)
            .copy_from(&(p + rpy_matrix(&e_mid) * disp));
        let e_new = e + dt * e_rate;
        out[idx::ROLL] = wrap_angle(e_new.x);
        out[idx::PITCH] = wrap_angle(e_new.y);
        out[idx::YAW] = wrap_angle(e_new.z);
        out.fixed_rows_mut::<3>(idx::VEL).copy_from(&(v + a * dt));
        out
    }

    /// Analytic Jacobian of [`ProcessModel::transition`] with respect to the state.
    pub fn jacobian(&self, x: &StateVector, dt: f64) -> StateMatrix {
        let e = Vector3::new(x[idx::ROLL], x[idx::PITCH], x[idx::YAW]);
        let w: Vector3<f64> = x.fixed_rows::<3>(idx::ANG_VEL).into();
        let v: Vector3<f64> = x.fixed_rows::<3>(idx::VEL).into();
        let a: Vector3<f64> = x.fixed_rows::<3>(idx::ACC).into();

        let t = euler_rate_matrix(&e);
        let dtw_de = euler_rate_jacobian(&e, &w);
        let e_mid = e + 0.5 * dt * (t * w);
        let disp = v * dt + 0.5 * dt * dt * a;
        let r_mid = rpy_matrix(&e_mid);

        // columns: d(R(e_mid) · disp) / d(e_mid)
        let dr = rpy_matrix_derivatives(&e_mid);
        let g = Matrix3::from_columns(&[dr[0] * disp, dr[1] * disp, dr[2] * disp]);
        let demid_de = Matrix3::identity() + 0.5 * dt * dtw_de;
        let demid_dw = 0.5 * dt * t;

        let mut j = StateMatrix::identity();
        let mut set = |row: usize, col: usize, m: &Matrix3<f64>| {
            j.fixed_view_mut::<3, 3>(row, col).copy_from(m);
        };
        set(idx::POS, idx::ROLL, &(g * demid_de));
        set(idx::POS, idx::VEL, &(r_mid * dt));
        set(idx::POS, idx::ANG_VEL, &(g * demid_dw));
        set(idx::POS, idx::ACC, &(r_mid * (0.5 * dt * dt)));
        set(idx::ROLL, idx::ROLL, &(Matrix3::identity() + dt * dtw_de));
        set(idx::ROLL, idx::ANG_VEL, &(dt * t));
        set(idx::VEL, idx::ACC, &(Matrix3::identity() * dt));
        j
    }
}

/// `R = Rz(yaw) Ry(pitch) Rx(roll)`.
fn rpy_matrix(e: &Vector3<f64>) -> Matrix3<f64> {
    let (rx, ry, rz) = axis_rotations(e);
    rz * ry * rx
}

fn axis_rotations(e: &Vector3<f64>) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let (sr, cr) = e.x.sin_cos();
    let (sp, cp) = e.y.sin_cos();
    let (sy, cy) = e.z.sin_cos();
    (
        Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr),
        Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp),
        Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0),
    )
}

/// `[∂R/∂roll, ∂R/∂pitch, ∂R/∂yaw]`.
fn rpy_matrix_derivatives(e: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (rx, ry, rz) = axis_rotations(e);
    let (sr, cr) = e.x.sin_cos();
    let (sp, cp) = e.y.sin_cos();
    let (sy, cy) = e.z.sin_cos();
    let drx = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sr, -cr, 0.0, cr, -sr);
    let dry = Matrix3::new(-sp, 0.0, cp, 0.0, 0.0, 0.0, -cp, 0.0, -sp);
    let drz = Matrix3::new(-sy, -cy, 0.0, cy, -sy, 0.0, 0.0, 0.0, 0.0);
    [rz * ry * drx, rz * dry * rx, drz * ry * rx]
}

/// Maps body angular velocity to Euler-angle rates.
fn euler_rate_matrix(e: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = e.x.sin_cos();
    let cp = e.y.cos();
    let tp = e.y.tan();
    Matrix3::new(
        1.0,
        sr * tp,
        cr * tp,
        0.0,
        cr,
        -sr,
        0.0,
        sr / cp,
        cr / cp,
    )
}

/// `∂(T(e) ω)/∂e`.
fn euler_rate_jacobian(e: &Vector3<f64>, w: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = e.x.sin_cos();
    let (sp, cp) = e.y.sin_cos();
    let tp = sp / cp;
    let a = sr * w.y + cr * w.z;
    let b = cr * w.y - sr * w.z;
    Matrix3::new(
        tp * b,
        a / (cp * cp),
        0.0,
        -a,
        0.0,
        0.0,
        b / cp,
        a * sp / (cp * cp),
        0.0,
    )
}

fn symmetrize(p: &mut StateMatrix) {
    *p = 0.5 * (*p + p.transpose());
}

/// Propagates the estimate through the motion model. `dt == 0` is a no-op.
pub fn predict(s: &StateEstimate, model: &ProcessModel, dt: f64) -> Result<StateEstimate> {
    if !dt.is_finite() {
        return Err(Error::NonFinite("time step"));
    }
    if dt < 0.0 {
        return Err(Error::NegativeTimeStep(dt));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("state"));
    }
    if dt == 0.0 {
        return Ok(s.clone());
    }
    let a = model.jacobian(&s.x, dt);
    let x = model.transition(&s.x, dt);
    let mut p = a * s.p * a.transpose() + model.q * dt;
    symmetrize(&mut p);
    Ok(StateEstimate {
        x,
        p,
        timestamp: s.timestamp + dt,
    })
}

/// Channel semantics of a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementKind {
    /// Consecutive poses are differenced into a twist.
    OdometryDifferential,
    /// Pose fused directly.
    PerceptionAbsolute,
}

/// A timestamped pose measurement.
///
/// For absolute fusion `covariance` is the pose covariance (x, y, z, roll,
/// pitch, yaw). For differential fusion it is the covariance of the twist
/// derived from consecutive poses (m²/s², rad²/s²).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEvent {
    pub timestamp: f64,
    pub kind: MeasurementKind,
    pub pose: Pose,
    pub covariance: Matrix6<f64>,
    pub source: String,
}

impl MeasurementEvent {
    pub fn new(
        kind: MeasurementKind,
        pose: Pose,
        covariance: Matrix6<f64>,
        source: impl Into<String>,
    ) -> Self {
        Self {
            timestamp: pose.timestamp,
            kind,
            pose,
            covariance,
            source: source.into(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        let p = &self.pose;
        if !self.timestamp.is_finite()
            || !p.translation.iter().all(|v| v.is_finite())
            || !p.rotation.is_finite()
            || !self.covariance.iter().all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("measurement"));
        }
        Ok(())
    }
}

/// Variance floors applied to pose channels that carry no injected noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceFloor {
    /// m²
    pub translation: f64,
    /// rad²
    pub angle: f64,
}

impl Default for CovarianceFloor {
    fn default() -> Self {
        Self {
            translation: 1e-8,
            angle: 1e-10,
        }
    }
}

/// Diagonal pose covariance matching a [`NoiseSpec`]: σ² on x and y, γ² on
/// yaw, the floor elsewhere.
pub fn pose_covariance(noise: &NoiseSpec, floor: &CovarianceFloor) -> Matrix6<f64> {
    let s2 = (noise.sigma_trans * noise.sigma_trans).max(floor.translation);
    let g = noise.gamma_yaw_rad();
    let g2 = (g * g).max(floor.angle);
    Matrix6::from_diagonal(&Vector6::new(
        s2,
        s2,
        floor.translation,
        floor.angle,
        floor.angle,
        g2,
    ))
}

fn linear_update(
    s: &StateEstimate,
    h: &MeasurementMatrix,
    innovation: &Vector6<f64>,
    r: &Matrix6<f64>,
) -> Result<StateEstimate> {
    let pht = s.p * h.transpose();
    let innov_cov = h * pht + r;
    let chol = innov_cov
        .cholesky()
        .ok_or(Error::SingularInnovation)?;
    // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
    let k = chol.solve(&pht.transpose()).transpose();
    let mut x = s.x + k * innovation;
    for i in [idx::ROLL, idx::PITCH, idx::YAW] {
        x[i] = wrap_angle(x[i]);
    }
    let i_kh = StateMatrix::identity() - k * h;
    let mut p = i_kh * s.p * i_kh.transpose() + k * r * k.transpose();
    symmetrize(&mut p);
    let out = StateEstimate {
        x,
        p,
        timestamp: s.timestamp,
    };
    if !out.is_finite() {
        return Err(Error::NonFinite("posterior"));
    }
    Ok(out)
}

/// Fuses a pose directly into the six pose states (identity measurement model).
pub fn update_absolute(s: &StateEstimate, m: &MeasurementEvent) -> Result<StateEstimate> {
    m.check_finite()?;
    let mut h = MeasurementMatrix::zeros();
    h.fixed_view_mut::<6, 6>(0, 0).copy_from(&Matrix6::identity());
    let (r, p, y) = m.pose.rotation.to_rpy();
    let pos = m.pose.translation - s.position();
    let innovation = Vector6::new(
        pos.x,
        pos.y,
        pos.z,
        wrap_angle(r - s.x[idx::ROLL]),
        wrap_angle(p - s.x[idx::PITCH]),
        wrap_angle(y - s.x[idx::YAW]),
    );
    linear_update(s, &h, &innovation, &m.covariance)
}

/// Body-frame twist implied by moving from `prev` to `cur` over `dt`.
///
/// The linear part is the chord expressed in the body frame halfway through
/// the rotation, i.e. the mean body velocity over the interval.
pub fn pose_delta_twist(prev: &Pose, cur: &Pose, dt: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let delta = compose(&invert(prev), cur)?;
    let half = delta.rotation.half();
    let linear = half.conjugate().rotate(&delta.translation) / dt;
    let angular = delta.rotation.to_rotation_vector() / dt;
    Ok((linear, angular))
}

/// Fuses two consecutive poses from one source as a velocity pseudo-measurement.
pub fn update_differential(
    s: &StateEstimate,
    prev: &MeasurementEvent,
    cur: &MeasurementEvent,
) -> Result<StateEstimate> {
    for m in [prev, cur] {
        if m.kind != MeasurementKind::OdometryDifferential {
            return Err(Error::WrongKind(m.kind));
        }
        m.check_finite()?;
    }
    if prev.source != cur.source {
        return Err(Error::SourceMismatch(prev.source.clone(), cur.source.clone()));
    }
    let dt = cur.timestamp - prev.timestamp;
    if dt <= 0.0 {
        return Err(Error::NonPositiveInterval(dt));
    }
    let (linear, angular) = pose_delta_twist(&prev.pose, &cur.pose, dt)?;

    // the chord velocity is the state velocity half an interval ago
    let mut h = MeasurementMatrix::zeros();
    h.fixed_view_mut::<3, 3>(0, idx::VEL)
        .copy_from(&Matrix3::identity());
    h.fixed_view_mut::<3, 3>(0, idx::ACC)
        .copy_from(&(Matrix3::identity() * (-0.5 * dt)));
    h.fixed_view_mut::<3, 3>(3, idx::ANG_VEL)
        .copy_from(&Matrix3::identity());
    let mut z = Vector6::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(&linear);
    z.fixed_rows_mut::<3>(3).copy_from(&angular);
    let innovation = z - h * s.x;
    linear_update(s, &h, &innovation, &cur.covariance)
}

/// Which of the two chained filters a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeId {
    /// Filters raw odometry in the local frame.
    Node1,
    /// Fuses odometry deltas and perception in the world frame.
    Node2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterNodeConfig {
    pub node: NodeId,
    /// Diagonal of the initial covariance.
    pub initial_covariance: [f64; STATE_DIM],
    /// Diagonal of the per-second process noise.
    pub process_noise: [f64; STATE_DIM],
    /// Floor on the differential twist standard deviations: vx, vy, vz (m/s),
    /// wx, wy, wz (rad/s).
    pub differential_sigma: [f64; 6],
    /// Multiplies the standard deviation of the twist covariance carried by
    /// odometry events.
    pub twist_scale: f64,
    pub floor: CovarianceFloor,
    /// Start pose in the world; required for node 2.
    #[serde(skip)]
    pub world_to_local: Option<Pose>,
    /// Gaps longer than this are predicted in sub-steps.
    pub max_gap: f64,
    pub sub_step: f64,
}

const INITIAL_COVARIANCE: [f64; STATE_DIM] = [
    1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e3, 1e3, 1e3, 1e3, 1e3, 1e3, 1e3, 1e3, 1e3,
];

impl FilterNodeConfig {
    pub fn node1() -> Self {
        Self {
            node: NodeId::Node1,
            initial_covariance: INITIAL_COVARIANCE,
            process_noise: [
                1.0, 1.0, 1e-4, // position
                1e-6, 1e-6, 1e-5, // orientation
                1.0, 1.0, 1e-4, // velocity
                1e-6, 1e-6, 1e-4, // angular velocity
                10.0, 10.0, 1e-4, // acceleration
            ],
            differential_sigma: [3.0, 3.0, 3.0, 1e-4, 1e-4, 1e-4],
            twist_scale: 1.0,
            floor: CovarianceFloor::default(),
            world_to_local: None,
            max_gap: 1.0,
            sub_step: 0.1,
        }
    }

    pub fn node2(world_to_local: Pose) -> Self {
        Self {
            node: NodeId::Node2,
            process_noise: [
                1e-2, 1e-2, 1e-4, // position
                1e-6, 1e-6, 1e-4, // orientation
                1e-5, 1e-5, 1e-5, // velocity
                1e-6, 1e-6, 1e-3, // angular velocity
                1e-4, 1e-4, 1e-5, // acceleration
            ],
            world_to_local: Some(world_to_local),
            ..Self::node1()
        }
    }

    pub fn process_model(&self) -> ProcessModel {
        ProcessModel::diagonal(&self.process_noise)
    }

    pub fn differential_covariance(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&Vector6::from_iterator(
            self.differential_sigma.iter().map(|s| s * s),
        ))
    }

    pub fn validate(&self) -> Result<()> {
        let all_ok = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !all_ok(&self.initial_covariance) || !all_ok(&self.process_noise) {
            return Err(Error::InvalidParameter("covariances must be finite and >= 0".into()));
        }
        if !all_ok(&self.differential_sigma) {
            return Err(Error::InvalidParameter("differential sigmas must be finite and >= 0".into()));
        }
        if !(self.twist_scale >= 0.0 && self.twist_scale.is_finite()) {
            return Err(Error::InvalidParameter("twist_scale must be finite and >= 0".into()));
        }
        if !(self.max_gap > 0.0 && self.sub_step > 0.0) {
            return Err(Error::InvalidParameter("max_gap and sub_step must be > 0".into()));
        }
        if self.node == NodeId::Node2 && self.world_to_local.is_none() {
            return Err(Error::InvalidParameter("node 2 requires world_to_local".into()));
        }
        Ok(())
    }
}

impl Default for FilterNodeConfig {
    fn default() -> Self {
        Self::node1()
    }
}

/// Single filter with time bookkeeping.
#[derive(Debug, Clone)]
pub struct Ekf {
    state: StateEstimate,
    model: ProcessModel,
    max_gap: f64,
    sub_step: f64,
}

impl Ekf {
    pub fn new(state: StateEstimate, model: ProcessModel, max_gap: f64, sub_step: f64) -> Self {
        Self {
            state,
            model,
            max_gap,
            sub_step,
        }
    }

    pub fn state(&self) -> &StateEstimate {
        &self.state
    }

    /// Predicts forward to `t`; long gaps are split into sub-steps.
    pub fn predict_to(&mut self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("event time"));
        }
        let dt = t - self.state.timestamp;
        if dt < 0.0 {
            return Err(Error::OutOfOrder {
                event: t,
                filter: self.state.timestamp,
            });
        }
        if dt <= self.max_gap {
            let mut next = predict(&self.state, &self.model, dt)?;
            next.timestamp = t;
            self.state = next;
            return Ok(());
        }
        let n = (dt / self.sub_step).ceil() as usize;
        let h = dt / n as f64;
        let mut s = self.state.clone();
        for _ in 0..n {
            s = predict(&s, &self.model, h)?;
        }
        s.timestamp = t;
        self.state = s;
        Ok(())
    }

    /// Runs `f` on the state and commits only on success.
    fn apply(&mut self, f: impl FnOnce(&StateEstimate) -> Result<StateEstimate>) -> Result<()> {
        self.state = f(&self.state)?;
        Ok(())
    }
}

/// Filters raw odometry into the local→body transform.
#[derive(Debug, Clone)]
pub struct OdometryNode {
    ekf: Ekf,
    rejected: usize,
}

impl OdometryNode {
    pub fn new(cfg: &FilterNodeConfig, start_time: f64) -> Result<Self> {
        cfg.validate()?;
        let start = Pose::identity(FrameId::Local, start_time);
        Ok(Self {
            ekf: Ekf::new(
                StateEstimate::from_pose(&start, &cfg.initial_covariance),
                cfg.process_model(),
                cfg.max_gap,
                cfg.sub_step,
            ),
            rejected: 0,
        })
    }

    pub fn state(&self) -> &StateEstimate {
        self.ekf.state()
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    /// Covariance of the body velocity and angular velocity states.
    pub fn twist_covariance(&self) -> Matrix6<f64> {
        self.ekf.state().p.fixed_view::<6, 6>(idx::VEL, idx::VEL).into_owned()
    }

    pub fn local_to_body(&self, child: FrameId) -> Pose {
        self.ekf.state().pose(FrameId::Local, child)
    }

    /// Predict to the event, fuse its pose, and return the current local→body estimate.
    ///
    /// Out-of-order events are counted and returned as [`Error::OutOfOrder`]; the
    /// filter is left untouched.
    pub fn step(&mut self, event: &MeasurementEvent) -> Result<Pose> {
        if event.pose.parent != FrameId::Local {
            return Err(Error::FrameMismatch {
                expected: FrameId::Local,
                found: event.pose.parent,
            });
        }
        if event.timestamp < self.ekf.state().timestamp {
            self.rejected += 1;
            return Err(Error::OutOfOrder {
                event: event.timestamp,
                filter: self.ekf.state().timestamp,
            });
        }
        let saved = self.ekf.state.clone();
        let res = self
            .ekf
            .predict_to(event.timestamp)
            .and_then(|_| self.ekf.apply(|s| update_absolute(s, event)));
        if let Err(e) = res {
            self.ekf.state = saved;
            return Err(e);
        }
        Ok(self.local_to_body(event.pose.child))
    }
}

/// World-frame fusion of odometry deltas and absolute perception poses.
#[derive(Debug, Clone)]
pub struct FusionNode {
    ekf: Ekf,
    world_to_local: Pose,
    differential_covariance: Matrix6<f64>,
    twist_scale: f64,
    last_odometry: Option<MeasurementEvent>,
    rejected: usize,
}

impl FusionNode {
    pub fn new(cfg: &FilterNodeConfig) -> Result<Self> {
        cfg.validate()?;
        let world_to_local = cfg
            .world_to_local
            .ok_or_else(|| Error::InvalidParameter("node 2 requires world_to_local".into()))?;
        if world_to_local.parent != FrameId::World || world_to_local.child != FrameId::Local {
            return Err(Error::FrameMismatch {
                expected: FrameId::World,
                found: world_to_local.parent,
            });
        }
        Ok(Self {
            ekf: Ekf::new(
                StateEstimate::from_pose(&world_to_local, &cfg.initial_covariance),
                cfg.process_model(),
                cfg.max_gap,
                cfg.sub_step,
            ),
            world_to_local,
            differential_covariance: cfg.differential_covariance(),
            twist_scale: cfg.twist_scale,
            last_odometry: None,
            rejected: 0,
        })
    }

    pub fn state(&self) -> &StateEstimate {
        self.ekf.state()
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn world_to_local(&self) -> &Pose {
        &self.world_to_local
    }

    /// Feeds one event.
    ///
    /// Odometry events carry the local→body pose produced by node 1; they are
    /// lifted into the world frame and fused differentially against the
    /// previous odometry event. Perception events carry a world→body pose and
    /// are fused absolutely.
    pub fn step(&mut self, event: &MeasurementEvent) -> Result<&StateEstimate> {
        if event.timestamp < self.ekf.state().timestamp {
            self.rejected += 1;
            return Err(Error::OutOfOrder {
                event: event.timestamp,
                filter: self.ekf.state().timestamp,
            });
        }
        let saved = self.ekf.state.clone();
        let res = self.fuse(event);
        if let Err(e) = res {
            self.ekf.state = saved;
            return Err(e);
        }
        Ok(self.ekf.state())
    }

    fn fuse_delta(&mut self, prev: &MeasurementEvent, cur: &MeasurementEvent) -> Result<()> {
        self.ekf.predict_to(cur.timestamp)?;
        self.ekf.apply(|s| update_differential(s, prev, cur))
    }

    fn fuse(&mut self, event: &MeasurementEvent) -> Result<()> {
        match event.kind {
            MeasurementKind::OdometryDifferential => {
                let world_pose = compose(&self.world_to_local, &event.pose)?;
                let lifted = MeasurementEvent {
                    pose: world_pose,
                    covariance: event.covariance * self.twist_scale.powi(2) + self.differential_covariance,
                    ..event.clone()
                };
                if let Some(prev) = &self.last_odometry {
                    if prev.source != lifted.source {
                        return Err(Error::SourceMismatch(prev.source.clone(), lifted.source.clone()));
                    }
                }
                match self.last_odometry.take() {
                    Some(prev) if lifted.timestamp > prev.timestamp => {
                        let res = self.fuse_delta(&prev, &lifted);
                        if let Err(e) = res {
                            self.last_odometry = Some(prev);
                            return Err(e);
                        }
                    }
                    _ => self.ekf.predict_to(event.timestamp)?,
                }
                self.last_odometry = Some(lifted);
                Ok(())
            }
            MeasurementKind::PerceptionAbsolute => {
                if event.pose.parent != FrameId::World {
                    return Err(Error::FrameMismatch {
                        expected: FrameId::World,
                        found: event.pose.parent,
                    });
                }
                self.ekf.predict_to(event.timestamp)?;
                self.ekf.apply(|s| update_absolute(s, event))
            }
        }
    }
}
