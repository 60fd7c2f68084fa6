//! Collaborative two-vehicle localization.
//!
//! A follower ("ADAS") vehicle with low-grade odometry improves its world
//! pose by observing a leader ("smart") vehicle whose accurate world pose is
//! shared over a link. The crate provides the rigid-body algebra, a simulated
//! perception channel, a two-node 15-state EKF chain, trajectory I/O and
//! evaluation, and an experiment harness for noise and rate sweeps.

pub mod ekf;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod noise;
pub mod perception;
pub mod se3;

pub use ekf::{
    FilterNodeConfig, FusionNode, MeasurementEvent, MeasurementKind, OdometryNode, ProcessModel,
    StateEstimate,
};
pub use error::{Error, ErrorClass, Result};
pub use eval::{AlignmentMode, ErrorStats};
pub use io::{PathKind, SyncSpec, SyntheticSpec, TrajectoryLog};
pub use noise::{NoiseSpec, RandomStream};
pub use perception::PerceptionConfig;
pub use se3::{Agent, FrameId, Pose, Quaternion};
