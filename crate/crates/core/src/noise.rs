//! Seeded perturbation of translations and yaw.
//!
//! Each noise channel (x, y, yaw) draws from its own labelled stream so that
//! changing one channel's level never shifts another channel's sequence.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::se3::{quat_yaw, Pose, Quaternion};

/// Zero-mean Gaussian perturbation levels. `gamma_yaw` is in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Translation standard deviation on x and y, metres.
    pub sigma_trans: f64,
    /// Yaw standard deviation, degrees.
    pub gamma_yaw: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::zero()
    }
}

impl NoiseSpec {
    pub fn new(sigma_trans: f64, gamma_yaw: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            sigma_trans,
            gamma_yaw,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub const fn zero() -> Self {
        Self {
            sigma_trans: 0.0,
            gamma_yaw: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_trans >= 0.0 && self.sigma_trans.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_trans must be finite and >= 0, got {}",
                self.sigma_trans
            )));
        }
        if !(self.gamma_yaw >= 0.0 && self.gamma_yaw.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma_yaw must be finite and >= 0, got {}",
                self.gamma_yaw
            )));
        }
        Ok(())
    }

    pub fn gamma_yaw_rad(&self) -> f64 {
        self.gamma_yaw.to_radians()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Deterministic pseudorandom stream keyed by `(seed, label)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        Self {
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// One standard-normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// A draw from N(0, std²). Always consumes one sample, even when `std == 0`.
    pub fn gaussian(&mut self, std: f64) -> f64 {
        std * self.standard_normal()
    }
}

/// Hashes a base seed together with integer coordinates into a new seed.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"coloc/derive");
    h.update(base.to_le_bytes());
    for c in coords {
        h.update(c.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// The three independent streams used to perturb one pose channel.
#[derive(Debug, Clone)]
pub struct ChannelStreams {
    pub x: RandomStream,
    pub y: RandomStream,
    pub yaw: RandomStream,
}

impl ChannelStreams {
    pub fn new(seed: u64, label: &str) -> Self {
        Self {
            x: RandomStream::new(seed, &format!("{label}/x")),
            y: RandomStream::new(seed, &format!("{label}/y")),
            yaw: RandomStream::new(seed, &format!("{label}/yaw")),
        }
    }
}

/// Adds independent Gaussian noise to x and y. z is left untouched.
pub fn perturb_translation(
    t: &Vector3<f64>,
    spec: &NoiseSpec,
    rng_x: &mut RandomStream,
    rng_y: &mut RandomStream,
) -> Vector3<f64> {
    Vector3::new(
        t.x + rng_x.gaussian(spec.sigma_trans),
        t.y + rng_y.gaussian(spec.sigma_trans),
        t.z,
    )
}

/// Right-multiplies `q` by a yaw rotation drawn from N(0, γ²).
pub fn perturb_yaw(q: &Quaternion, spec: &NoiseSpec, rng: &mut RandomStream) -> Quaternion {
    let theta = rng.gaussian(spec.gamma_yaw_rad());
    if theta == 0.0 {
        return *q;
    }
    *q * quat_yaw(theta)
}

pub fn perturb_pose(p: &Pose, spec: &NoiseSpec, streams: &mut ChannelStreams) -> Pose {
    Pose {
        translation: perturb_translation(&p.translation, spec, &mut streams.x, &mut streams.y),
        rotation: perturb_yaw(&p.rotation, spec, &mut streams.yaw),
        ..*p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{rotation_geodesic, wrap_angle, Agent, FrameId};

    fn sample_stats(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn zero_noise_is_exact() {
        let spec = NoiseSpec::zero();
        let mut s = ChannelStreams::new(7, "t");
        let t = Vector3::new(1.25, -3.5, 9.0);
        assert_eq!(perturb_translation(&t, &spec, &mut s.x, &mut s.y), t);
        let q = Quaternion::new(0.1, 0.2, 0.3, 0.9);
        assert_eq!(perturb_yaw(&q, &spec, &mut s.yaw), q);
        let p = Pose::from_parts(3.0, t, q, FrameId::World, FrameId::Body(Agent::Adas));
        assert_eq!(perturb_pose(&p, &spec, &mut s), p);
    }

    #[test]
    fn z_is_never_perturbed() {
        let spec = NoiseSpec::new(3.0, 0.0, 0).unwrap();
        let mut s = ChannelStreams::new(1, "z");
        for _ in 0..100 {
            let out = perturb_translation(&Vector3::new(0.0, 0.0, 5.0), &spec, &mut s.x, &mut s.y);
            assert_eq!(out.z, 5.0);
        }
    }

    #[test]
    fn translation_std_matches() {
        let spec = NoiseSpec::new(2.5, 0.0, 0).unwrap();
        let mut s = ChannelStreams::new(11, "mc");
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| perturb_translation(&Vector3::zeros(), &spec, &mut s.x, &mut s.y).x)
            .collect();
        let (mean, std) = sample_stats(&xs);
        assert!((2.45..=2.55).contains(&std), "std {std}");
        assert!(mean.abs() < 3.0 * 2.5 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn yaw_std_matches_and_geodesic_equals_draw() {
        let spec = NoiseSpec::new(0.0, 10.0, 0).unwrap();
        let mut rng = RandomStream::new(5, "yaw");
        let base = quat_yaw(0.4);
        let mut deltas = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let mut peek = rng.clone();
            let theta = peek.gaussian(spec.gamma_yaw_rad());
            let out = perturb_yaw(&base, &spec, &mut rng);
            assert!((out.norm() - 1.0).abs() < 1e-9);
            let geo = rotation_geodesic(&base, &out);
            assert!((geo - wrap_angle(theta).abs()).abs() < 1e-9);
            deltas.push(wrap_angle(out.to_rpy().2 - 0.4).to_degrees());
        }
        let (mean, std) = sample_stats(&deltas);
        assert!((9.8..=10.2).contains(&std), "std {std}");
        assert!(mean.abs() < 3.0 * 10.0 / (1e5f64).sqrt());
    }

    #[test]
    fn pose_channels_match_at_table_point() {
        let spec = NoiseSpec::new(0.3, 15.0, 0).unwrap();
        let mut s = ChannelStreams::new(3, "pose");
        let p = Pose::from_parts(2.0, Vector3::new(1.0, 2.0, 3.0), quat_yaw(-1.0), FrameId::World, FrameId::Body(Agent::Adas));
        let mut dx = vec![];
        let mut dy = vec![];
        let mut dyaw = vec![];
        for _ in 0..100_000 {
            let o = perturb_pose(&p, &spec, &mut s);
            assert_eq!((o.timestamp, o.parent, o.child), (p.timestamp, p.parent, p.child));
            dx.push(o.translation.x - 1.0);
            dy.push(o.translation.y - 2.0);
            dyaw.push(wrap_angle(o.yaw() + 1.0).to_degrees());
        }
        // 3 standard errors of a sample std: sigma * 3 / sqrt(2n)
        for (xs, sigma) in [(&dx, 0.3), (&dy, 0.3), (&dyaw, 15.0)] {
            let (mean, std) = sample_stats(xs);
            let se = sigma / (2.0 * 1e5f64).sqrt();
            assert!((std - sigma).abs() < 3.0 * se, "std {std} vs {sigma}");
            assert!(mean.abs() < 3.0 * sigma / 1e5f64.sqrt());
        }
    }

    #[test]
    fn determinism_and_channel_independence() {
        let p = Pose::from_parts(0.0, Vector3::new(1.0, 2.0, 3.0), Quaternion::identity(), FrameId::World, FrameId::Body(Agent::Adas));
        let a = NoiseSpec::new(1.0, 5.0, 42).unwrap();
        let b = NoiseSpec::new(1.0, 20.0, 42).unwrap();
        let mut sa = ChannelStreams::new(a.seed, "adas/raw");
        let mut sa2 = ChannelStreams::new(a.seed, "adas/raw");
        let mut sb = ChannelStreams::new(b.seed, "adas/raw");
        for _ in 0..50 {
            let oa = perturb_pose(&p, &a, &mut sa);
            let oa2 = perturb_pose(&p, &a, &mut sa2);
            let ob = perturb_pose(&p, &b, &mut sb);
            assert_eq!(oa.translation.x.to_bits(), oa2.translation.x.to_bits());
            assert_eq!(oa.translation.x.to_bits(), ob.translation.x.to_bits());
            assert_eq!(oa.translation.y.to_bits(), ob.translation.y.to_bits());
            assert_ne!(oa.rotation, ob.rotation);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 0]), derive_seed(1, &[0, 1]));
        assert_eq!(derive_seed(9, &[3]), derive_seed(9, &[3]));
    }

    #[test]
    fn spec_rejects_negative() {
        assert!(NoiseSpec::new(-1.0, 0.0, 0).is_err());
        assert!(NoiseSpec::new(0.0, f64::NAN, 0).is_err());
    }
}
