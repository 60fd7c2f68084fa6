//! Simulated perception channel.
//!
//! The follower observes the leader: the ground-truth relative pose is
//! perturbed in the leader's frame and recomposed with the leader's shared
//! world pose, giving an absolute world-frame measurement of the follower.

use serde::{Deserialize, Serialize};

use crate::ekf::{pose_covariance, CovarianceFloor, MeasurementEvent, MeasurementKind};
use crate::error::{Error, Result};
use crate::noise::{perturb_pose, ChannelStreams, NoiseSpec};
use crate::se3::{compose, relative_pose, Pose};

pub const DEFAULT_GATE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub noise: NoiseSpec,
    /// Maximum smart/ADAS timestamp difference (s), exclusive.
    pub gate_threshold: f64,
    /// Output rate cap in Hz; `None` emits every gated pair.
    pub output_rate: Option<f64>,
    pub floor: CovarianceFloor,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            noise: NoiseSpec::zero(),
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            output_rate: None,
            floor: CovarianceFloor::default(),
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(self.gate_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gate_threshold must be > 0, got {}",
                self.gate_threshold
            )));
        }
        if let Some(r) = self.output_rate {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("output_rate must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

/// Ground-truth poses of both vehicles close enough in time to be paired.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub smart_pose: Pose,
    pub adas_pose: Pose,
    /// ADAS-side timestamp.
    pub pair_time: f64,
}

pub trait Timestamped {
    fn timestamp(&self) -> f64;
}

impl<T: Timestamped> Timestamped for &T {
    fn timestamp(&self) -> f64 {
        (**self).timestamp()
    }
}

impl Timestamped for Pose {
    fn timestamp(&self) -> f64 {
        self.timestamp
    }
}

impl Timestamped for MeasurementEvent {
    fn timestamp(&self) -> f64 {
        self.timestamp
    }
}

impl Timestamped for PairedSample {
    fn timestamp(&self) -> f64 {
        self.pair_time
    }
}

const GATE_EPS: f64 = 1e-9;

/// True iff the two timestamps differ by strictly less than `threshold`.
/// A difference within 1e-9 s of the threshold counts as equal.
pub fn gate_pair(smart_t: f64, adas_t: f64, threshold: f64) -> bool {
    // decimal timestamps like 10.1 - 10.0 land a few ulps under the boundary
    (smart_t - adas_t).abs() < threshold - GATE_EPS
}

/// Pairs every ADAS sample with the nearest-in-time smart sample, keeping
/// only pairs that pass the gate. Both inputs must be time-ordered.
pub fn pair_nearest(smart: &[Pose], adas: &[Pose], threshold: f64) -> Vec<PairedSample> {
    let mut out = Vec::with_capacity(adas.len());
    if smart.is_empty() {
        return out;
    }
    let mut j = 0;
    for a in adas {
        while j + 1 < smart.len()
            && (smart[j + 1].timestamp - a.timestamp).abs() <= (smart[j].timestamp - a.timestamp).abs()
        {
            j += 1;
        }
        let s = &smart[j];
        if gate_pair(s.timestamp, a.timestamp, threshold) {
            out.push(PairedSample {
                smart_pose: *s,
                adas_pose: *a,
                pair_time: a.timestamp,
            });
        }
    }
    out
}

/// Noisy absolute world pose of the follower from one gated pair.
pub fn make_measurement(
    pair: &PairedSample,
    cfg: &PerceptionConfig,
    streams: &mut ChannelStreams,
) -> Result<MeasurementEvent> {
    let rel = relative_pose(&pair.smart_pose, &pair.adas_pose)?;
    let noisy = perturb_pose(&rel, &cfg.noise, streams);
    let world = compose(&pair.smart_pose, &noisy)?.with_timestamp(pair.pair_time);
    Ok(MeasurementEvent::new(
        MeasurementKind::PerceptionAbsolute,
        world,
        pose_covariance(&cfg.noise, &cfg.floor),
        "perception",
    ))
}

/// Deterministic decimation: keep an item iff it is at least one period after
/// the last kept item (within 1e-9 s). The first item is always kept.
pub fn rate_limit<T: Timestamped>(items: impl IntoIterator<Item = T>, target_hz: f64) -> Vec<T> {
    const EPS: f64 = 1e-9;
    let period = 1.0 / target_hz;
    let mut last: Option<f64> = None;
    items
        .into_iter()
        .filter(|item| {
            let t = item.timestamp();
            match last {
                Some(l) if t < l + period - EPS => false,
                _ => {
                    last = Some(t);
                    true
                }
            }
        })
        .collect()
}
