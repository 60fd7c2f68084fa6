use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::{Matrix6, Vector3};

use coloc::ekf::{predict, update_absolute, update_differential, ProcessModel, StateEstimate};
use coloc::eval::{align, PosePair};
use coloc::experiment::{run_single, ExperimentConfig, InputSpec};
use coloc::se3::{compose, quat_yaw};
use coloc::{Agent, AlignmentMode, FilterNodeConfig, FrameId, MeasurementEvent, MeasurementKind, NoiseSpec, Pose, Quaternion, SyntheticSpec};

fn body(t: f64, x: f64, yaw: f64, parent: FrameId) -> Pose {
    Pose::from_parts(t, Vector3::new(x, 0.5 * x, 0.0), quat_yaw(yaw), parent, FrameId::Body(Agent::Adas))
}

fn se3(c: &mut Criterion) {
    let a = Pose::from_parts(0.0, Vector3::new(1.0, 2.0, 3.0), Quaternion::new(0.1, 0.2, 0.3, 0.9), FrameId::World, FrameId::Local);
    let b = body(0.0, 4.0, 0.7, FrameId::Local);
    c.bench_function("se3 compose", |bench| bench.iter(|| compose(black_box(&a), black_box(&b))));
}

fn ekf(c: &mut Criterion) {
    let cfg = FilterNodeConfig::node1();
    let model = ProcessModel::diagonal(&cfg.process_noise);
    let s = StateEstimate::from_pose(&body(0.0, 0.0, 0.3, FrameId::Local), &cfg.initial_covariance);
    c.bench_function("ekf predict", |bench| bench.iter(|| predict(black_box(&s), &model, 0.005)));

    let m = MeasurementEvent::new(MeasurementKind::PerceptionAbsolute, body(0.0, 0.2, 0.31, FrameId::Local), Matrix6::identity() * 0.1, "p");
    c.bench_function("ekf absolute update", |bench| bench.iter(|| update_absolute(black_box(&s), &m)));

    let prev = MeasurementEvent::new(MeasurementKind::OdometryDifferential, body(0.0, 0.0, 0.3, FrameId::Local), Matrix6::identity() * 0.1, "o");
    let cur = MeasurementEvent::new(MeasurementKind::OdometryDifferential, body(0.005, 0.04, 0.301, FrameId::Local), Matrix6::identity() * 0.1, "o");
    c.bench_function("ekf differential update", |bench| bench.iter(|| update_differential(black_box(&s), &prev, &cur)));
}

fn alignment(c: &mut Criterion) {
    let pairs: Vec<PosePair> = (0..24_000)
        .map(|i| {
            let t = i as f64 * 0.005;
            let est = Pose::from_parts(t, Vector3::new(t.cos() * 60.0, (2.0 * t).sin() * 30.0, 0.0), Quaternion::identity(), FrameId::World, FrameId::Body(Agent::Adas));
            let gt = Pose { translation: est.translation + Vector3::new(0.1, -0.2, 0.0), ..est };
            PosePair { est, gt }
        })
        .collect();
    c.bench_function("se3 align 24k pairs", |bench| bench.iter(|| align(black_box(&pairs), AlignmentMode::Se3)));
}

fn pipeline(c: &mut Criterion) {
    let mut cfg = ExperimentConfig {
        input: InputSpec::Synthetic(SyntheticSpec {
            duration: 20.0,
            ..Default::default()
        }),
        raw_noise: NoiseSpec::new(2.5, 0.5, 0).unwrap(),
        ..Default::default()
    };
    cfg.perception.noise = NoiseSpec::new(0.3, 10.0, 0).unwrap();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("single run 20 s @ 200 Hz", |bench| {
        bench.iter_batched(|| cfg.clone(), |cfg| run_single(&cfg, 0).unwrap(), BatchSize::SmallInput)
    });
    g.finish();
}

criterion_group!(benches, se3, ekf, alignment, pipeline);
criterion_main!(benches);
