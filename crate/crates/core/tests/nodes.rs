use nalgebra::{Matrix6, Vector3};

use coloc::ekf::{pose_covariance, update_absolute, CovarianceFloor, StateMatrix, StateVector, STATE_DIM};
use coloc::noise::{perturb_pose, ChannelStreams};
use coloc::se3::quat_yaw;
use coloc::{
    Agent, FilterNodeConfig, FrameId, FusionNode, MeasurementEvent, MeasurementKind, NoiseSpec, OdometryNode, Pose,
    Quaternion, RandomStream, StateEstimate,
};

const ADAS: FrameId = FrameId::Body(Agent::Adas);

fn raw(t: f64, p: Vector3<f64>, yaw: f64, cov: Matrix6<f64>) -> MeasurementEvent {
    MeasurementEvent::new(
        MeasurementKind::OdometryDifferential,
        Pose::from_parts(t, p, quat_yaw(yaw), FrameId::Local, ADAS),
        cov,
        "odometry",
    )
}

#[test]
fn updates_never_increase_trace() {
    let mut rng = RandomStream::new(2, "trace");
    for _ in 0..200 {
        let mut l = StateMatrix::zeros();
        for i in 0..STATE_DIM {
            for j in 0..=i {
                l[(i, j)] = rng.uniform(-1.0, 1.0);
            }
        }
        let mut x = StateVector::zeros();
        for i in 0..6 {
            x[i] = rng.uniform(-1.0, 1.0);
        }
        let prior = StateEstimate::new(x, l * l.transpose(), 0.0);
        let mut r = Matrix6::zeros();
        for i in 0..6 {
            r[(i, i)] = rng.uniform(1e-3, 10.0);
        }
        let m = MeasurementEvent::new(
            MeasurementKind::PerceptionAbsolute,
            Pose::from_parts(0.0, Vector3::new(1.0, -2.0, 0.5), quat_yaw(rng.uniform(-3.0, 3.0)), FrameId::World, ADAS),
            r,
            "p",
        );
        let post = update_absolute(&prior, &m).unwrap();
        assert!(post.p.trace() <= prior.p.trace() + 1e-9);
    }
}

#[test]
fn node1_tracks_noiseless_straight_line() {
    let cov = pose_covariance(&NoiseSpec::zero(), &CovarianceFloor::default());
    let mut node = OdometryNode::new(&FilterNodeConfig::node1(), 0.0).unwrap();
    let heading = 0.4;
    let dir = quat_yaw(heading).rotate(&Vector3::x());
    let mut last = None;
    for k in 0..2000 {
        let t = k as f64 * 0.005;
        last = Some(node.step(&raw(t, dir * 8.0 * t, heading, cov)).unwrap());
    }
    let est = last.unwrap();
    let truth = dir * 8.0 * 1999.0 * 0.005;
    assert!((est.translation - truth).norm() < 1e-6, "{}", (est.translation - truth).norm());
    assert!((est.yaw() - heading).abs() < 1e-9);
}

#[test]
fn node1_smooths_stationary_noise() {
    let spec = NoiseSpec::new(2.5, 0.0, 0).unwrap();
    let cov = pose_covariance(&spec, &CovarianceFloor::default());
    let truth = Pose::from_parts(0.0, Vector3::zeros(), Quaternion::identity(), FrameId::Local, ADAS);
    let mut xs = Vec::new();
    for seed in 0..20 {
        let mut node = OdometryNode::new(&FilterNodeConfig::node1(), 0.0).unwrap();
        let mut streams = ChannelStreams::new(seed, "stationary");
        for k in 0..1000 {
            let p = perturb_pose(&truth.with_timestamp(k as f64 * 0.005), &spec, &mut streams);
            let est = node.step(&MeasurementEvent::new(MeasurementKind::OdometryDifferential, p, cov, "odometry")).unwrap();
            if k >= 200 {
                xs.push(est.translation.x);
            }
        }
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(std < 2.5, "filtered std {std}");
}

#[test]
fn node2_tracks_precise_perception_alone() {
    let start = Pose::from_parts(0.0, Vector3::new(5.0, 5.0, 0.0), Quaternion::identity(), FrameId::World, FrameId::Local);
    let mut node = FusionNode::new(&FilterNodeConfig::node2(start)).unwrap();
    let r = Matrix6::identity() * 1e-8;
    let mut worst: f64 = 0.0;
    for k in 0..400 {
        let t = k as f64 * 0.05;
        let p = Vector3::new(5.0 + 3.0 * t, 5.0 + (0.3 * t).sin(), 0.0);
        let m = MeasurementEvent::new(
            MeasurementKind::PerceptionAbsolute,
            Pose::from_parts(t, p, quat_yaw(0.1 * t), FrameId::World, ADAS),
            r,
            "perception",
        );
        let s = node.step(&m).unwrap();
        worst = worst.max((s.position() - p).norm());
    }
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn node2_without_perception_dead_reckons_node1_output() {
    let start = Pose::from_parts(0.0, Vector3::new(-20.0, 7.0, 0.0), quat_yaw(-0.8), FrameId::World, FrameId::Local);
    let mut node = FusionNode::new(&FilterNodeConfig::node2(start)).unwrap();
    let cov = Matrix6::identity() * 1e-6;
    let (radius, rate) = (30.0, 0.2);
    let mut last = None;
    for k in 0..=2000 {
        let t = k as f64 * 0.005;
        let a = rate * t;
        let p = Vector3::new(radius * a.sin(), radius * (1.0 - a.cos()), 0.0);
        node.step(&raw(t, p, a, cov)).unwrap();
        last = Some((t, p, a));
    }
    let (_, p, a) = last.unwrap();
    let expected = start.transform_point(&p);
    let s = node.state();
    assert!((s.position() - expected).norm() < 0.05, "{}", (s.position() - expected).norm());
    assert!(coloc::se3::wrap_angle(s.rpy().z - (a - 0.8)).abs() < 1e-3);
}
