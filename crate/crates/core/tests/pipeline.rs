use nalgebra::{Matrix6, Vector3};

use coloc::experiment::{
    run_seeds, run_single, run_sweep, write_run_outputs, write_sweep_outputs, ExperimentConfig, InputSpec,
    SweepGrid,
};
use coloc::io::{export_trajectory, generate_synthetic, load_trajectory};
use coloc::{
    Agent, Error, ErrorClass, FilterNodeConfig, FrameId, FusionNode, MeasurementEvent, MeasurementKind, NoiseSpec,
    OdometryNode, PathKind, Pose, Quaternion, SyntheticSpec,
};

fn short(kind: PathKind) -> SyntheticSpec {
    SyntheticSpec {
        kind,
        duration: 20.0,
        rate: 50.0,
        ..Default::default()
    }
}

fn noisy(kind: PathKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        input: InputSpec::Synthetic(short(kind)),
        raw_noise: NoiseSpec::new(2.5, 0.5, 0).unwrap(),
        seeds: vec![0, 1],
        ..Default::default()
    };
    cfg.perception.noise = NoiseSpec::new(0.3, 10.0, 0).unwrap();
    cfg
}

#[test]
fn perception_beats_odometry_alone() {
    let run = run_single(&noisy(PathKind::FigureEight), 4).unwrap();
    assert!(
        run.fused.translation.rmse < 0.5 * run.baseline.translation.rmse,
        "fused {} baseline {}",
        run.fused.translation.rmse,
        run.baseline.translation.rmse
    );
    assert_eq!(run.fused_trajectory.len(), run.baseline_trajectory.len());
    assert!(run
        .fused_trajectory
        .iter()
        .all(|p| p.parent == FrameId::World && p.child == FrameId::Body(Agent::Adas)));
}

#[test]
fn file_input_matches_synthetic_input() {
    let dir = tempfile::tempdir().unwrap();
    let spec = short(PathKind::Circle);
    let (smart, adas) = generate_synthetic(&spec).unwrap();
    let (sp, ap) = (dir.path().join("smart.csv"), dir.path().join("adas.csv"));
    export_trajectory(&smart, &sp).unwrap();
    export_trajectory(&adas, &ap).unwrap();

    let synth = noisy(PathKind::Circle);
    let files = ExperimentConfig {
        input: InputSpec::Files { smart: sp, adas: ap },
        ..synth.clone()
    };
    let a = run_single(&synth, 0).unwrap();
    let b = run_single(&files, 0).unwrap();
    assert_eq!(a.fused.translation.rmse, b.fused.translation.rmse);
    assert_eq!(a.baseline.translation.rmse, b.baseline.translation.rmse);
}

#[test]
fn run_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noisy(PathKind::WaypointSpline);
    let (report, runs) = run_seeds(&cfg).unwrap();
    assert_eq!(report.seeds.len(), 2);
    write_run_outputs(dir.path(), &report, &runs).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(json["fused_translation_rmse_mean"].as_f64().unwrap() > 0.0);
    let fused = load_trajectory(dir.path().join("fused.csv")).unwrap();
    assert_eq!(fused.len(), runs[0].fused_trajectory.len());
    let errors = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(errors.starts_with("t,e_trans_m,e_rot_deg"));
}

#[test]
fn sweep_outputs_have_one_directory_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        seeds: vec![0],
        sweep: Some(SweepGrid {
            sigma: vec![0.3],
            gamma: vec![10.0, 15.0],
        }),
        ..noisy(PathKind::Circle)
    };
    let report = run_sweep(&cfg, false).unwrap();
    write_sweep_outputs(dir.path(), &report).unwrap();
    for cell in &report.cells {
        assert!(dir.path().join(&cell.label).join("cell.json").is_file(), "{}", cell.label);
    }
    let table = std::fs::read_to_string(dir.path().join("table.txt")).unwrap();
    assert!(table.contains("w/o perception"));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let cfg = noisy(PathKind::Circle);
    std::fs::write(&path, cfg.to_json()).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);

    std::fs::write(&path, r#"{"seeds": [1], "bogus": 3}"#).unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Usage, "{err}");
}

fn local(t: f64, x: f64) -> MeasurementEvent {
    let pose = Pose::from_parts(t, Vector3::new(x, 0.0, 0.0), Quaternion::identity(), FrameId::Local, FrameId::Body(Agent::Adas));
    MeasurementEvent::new(MeasurementKind::OdometryDifferential, pose, Matrix6::identity() * 0.01, "odometry")
}

#[test]
fn nodes_reject_out_of_order_events_and_keep_state() {
    let mut node1 = OdometryNode::new(&FilterNodeConfig::node1(), 0.0).unwrap();
    node1.step(&local(1.0, 1.0)).unwrap();
    let before = node1.state().clone();
    assert!(matches!(node1.step(&local(0.5, 0.5)), Err(Error::OutOfOrder { .. })));
    assert_eq!(node1.rejected(), 1);
    assert_eq!(node1.state(), &before);

    let start = Pose::identity(FrameId::World, 0.0).with_frames(FrameId::World, FrameId::Local);
    let mut node2 = FusionNode::new(&FilterNodeConfig::node2(start)).unwrap();
    node2.step(&local(0.0, 0.0)).unwrap();
    node2.step(&local(1.0, 1.0)).unwrap();
    let before = node2.state().clone();
    assert!(node2.step(&local(0.5, 0.5)).is_err());
    assert_eq!(node2.rejected(), 1);
    assert_eq!(node2.state(), &before);
}

#[test]
fn node2_needs_a_world_anchor() {
    let cfg = FilterNodeConfig::node1();
    assert!(FusionNode::new(&cfg).is_err());
}

#[test]
fn node2_follows_constant_velocity_odometry_from_an_offset_start() {
    let start = Pose::from_parts(0.0, Vector3::new(100.0, -50.0, 0.0), coloc::se3::quat_yaw(1.0), FrameId::World, FrameId::Local);
    let mut node2 = FusionNode::new(&FilterNodeConfig::node2(start)).unwrap();
    for k in 0..=500 {
        let t = k as f64 * 0.01;
        node2.step(&local(t, 2.0 * t)).unwrap();
    }
    let s = node2.state();
    let expected = start.transform_point(&Vector3::new(10.0, 0.0, 0.0));
    assert!((s.position() - expected).norm() < 1e-3, "{} vs {}", s.position(), expected);
    assert!((s.velocity().x - 2.0).abs() < 1e-3);
}
