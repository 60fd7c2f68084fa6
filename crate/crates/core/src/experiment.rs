//! Experiment runner: single runs and noise sweeps over the two-node chain.
//!
//! One run drives the whole pipeline for a seed: ingest or generate ground
//! truth, synchronize, decimate and perturb the follower's raw odometry,
//! filter it locally (node 1), simulate perception, fuse both channels in the
//! world frame (node 2) and evaluate against ground truth. The odometry-only
//! baseline is the same chain with the perception channel switched off.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ekf::{
    pose_covariance, FilterNodeConfig, FusionNode, MeasurementEvent, MeasurementKind,
    OdometryNode, STATE_DIM,
};
use crate::error::{Error, Result, StageContext};
use crate::eval::{evaluate, render_error_series, AlignmentMode, ErrorStats, DEFAULT_MAX_DT};
use crate::io::{
    generate_synthetic, load_trajectory, render_trajectory, synchronize, SyncSpec, SyntheticSpec,
    TrajectoryLog,
};
use crate::noise::{derive_seed, perturb_pose, ChannelStreams, NoiseSpec};
use crate::perception::{make_measurement, pair_nearest, rate_limit, PerceptionConfig};
use crate::se3::{compose, invert, Agent, FrameId, Pose};

const ADAS: FrameId = FrameId::Body(Agent::Adas);
const RAW_STREAM: u64 = 0;
const PERCEPTION_STREAM: u64 = 1;

/// Where ground truth comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSpec {
    Synthetic(SyntheticSpec),
    Files { smart: PathBuf, adas: PathBuf },
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Synthetic(SyntheticSpec::default())
    }
}

/// Optional replacements for one node's filter parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_covariance: Option<[f64; STATE_DIM]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process_noise: Option<[f64; STATE_DIM]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub differential_sigma: Option<[f64; 6]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twist_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub_step: Option<f64>,
}

impl NodeOverrides {
    pub fn apply(&self, mut cfg: FilterNodeConfig) -> FilterNodeConfig {
        if let Some(v) = self.initial_covariance {
            cfg.initial_covariance = v;
        }
        if let Some(v) = self.process_noise {
            cfg.process_noise = v;
        }
        if let Some(v) = self.differential_sigma {
            cfg.differential_sigma = v;
        }
        if let Some(v) = self.twist_scale {
            cfg.twist_scale = v;
        }
        if let Some(v) = self.max_gap {
            cfg.max_gap = v;
        }
        if let Some(v) = self.sub_step {
            cfg.sub_step = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkfOverrides {
    pub node1: NodeOverrides,
    pub node2: NodeOverrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub align: AlignmentMode,
    pub max_dt: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            align: AlignmentMode::Se3,
            max_dt: DEFAULT_MAX_DT,
        }
    }
}

/// Perception noise levels to sweep: σ in metres, γ in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl SweepGrid {
    pub fn cell_count(&self) -> usize {
        self.sigma.len() * self.gamma.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputSpec,
    pub sync: SyncSpec,
    /// Noise on the follower's raw odometry poses.
    pub raw_noise: NoiseSpec,
    pub perception: PerceptionConfig,
    /// Raw odometry rate in Hz; `None` keeps every ground-truth sample.
    pub raw_rate: Option<f64>,
    pub ekf: EkfOverrides,
    pub eval: EvalConfig,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: InputSpec::default(),
            sync: SyncSpec::default(),
            raw_noise: NoiseSpec::zero(),
            perception: PerceptionConfig::default(),
            raw_rate: None,
            ekf: EkfOverrides::default(),
            eval: EvalConfig::default(),
            seeds: vec![0],
            output_dir: None,
            sweep: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("at least one seed is required"));
        }
        if let InputSpec::Synthetic(s) = &self.input {
            s.validate()?;
        }
        if !self.sync.offset_seconds.is_finite() {
            return Err(config_err("sync offset must be finite"));
        }
        self.raw_noise.validate()?;
        self.perception.validate()?;
        if let Some(r) = self.raw_rate {
            if !(r > 0.0 && r.is_finite()) {
                return Err(config_err(format!("raw_rate must be > 0, got {r}")));
            }
        }
        if !(self.eval.max_dt > 0.0) {
            return Err(config_err("eval.max_dt must be > 0"));
        }
        self.node1_config().validate()?;
        self.node2_config(Pose::identity(FrameId::World, 0.0)).validate()?;
        if let Some(g) = &self.sweep {
            if g.sigma.is_empty() || g.gamma.is_empty() {
                return Err(config_err("sweep grid must have at least one σ and one γ"));
            }
            for &s in &g.sigma {
                NoiseSpec::new(s, 0.0, 0)?;
            }
            for &y in &g.gamma {
                NoiseSpec::new(0.0, y, 0)?;
            }
        }
        Ok(())
    }

    pub fn node1_config(&self) -> FilterNodeConfig {
        self.ekf.node1.apply(FilterNodeConfig::node1())
    }

    pub fn node2_config(&self, world_to_local: Pose) -> FilterNodeConfig {
        self.ekf.node2.apply(FilterNodeConfig::node2(world_to_local))
    }
}

/// Synchronized ground truth for both vehicles.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub smart: Vec<Pose>,
    pub adas: Vec<Pose>,
}

impl Scenario {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let (a, b) = match &cfg.input {
            InputSpec::Synthetic(spec) => generate_synthetic(spec).stage("ingest")?,
            InputSpec::Files { smart, adas } => {
                let s = load_trajectory(smart).stage("ingest")?;
                let a = load_trajectory(adas).stage("ingest")?;
                (s, a)
            }
        };
        let (a, b) = synchronize(a, b, &cfg.sync);
        let (smart, adas) = if a.agent == Agent::Smart { (a, b) } else { (b, a) };
        if smart.agent == adas.agent {
            return Err(Error::Config(format!("both logs are tagged `{}`", smart.agent))).stage("ingest");
        }
        let retag = |log: TrajectoryLog, agent: Agent| -> Vec<Pose> {
            log.samples
                .into_iter()
                .map(|p| p.with_frames(FrameId::World, FrameId::Body(agent)))
                .collect()
        };
        let smart = retag(smart, Agent::Smart);
        let adas = retag(adas, Agent::Adas);
        if adas.len() < 2 {
            return Err(Error::Config("follower log needs at least two samples".into())).stage("ingest");
        }
        Ok(Self { smart, adas })
    }

    /// The follower's start pose, anchoring the local frame in the world.
    pub fn world_to_local(&self) -> Pose {
        self.adas[0].with_frames(FrameId::World, FrameId::Local)
    }
}

/// Node 1 output for one seed: local→body poses ready for node 2.
#[derive(Debug, Clone)]
pub struct Odometry {
    pub world_to_local: Pose,
    pub events: Vec<MeasurementEvent>,
}

pub fn raw_seed(seed: u64) -> u64 {
    derive_seed(seed, &[RAW_STREAM])
}

pub fn perception_seed(seed: u64, sigma_index: usize, gamma_index: usize) -> u64 {
    derive_seed(seed, &[PERCEPTION_STREAM, sigma_index as u64, gamma_index as u64])
}

/// Decimates, perturbs and locally filters the follower's raw odometry.
pub fn run_odometry(cfg: &ExperimentConfig, scenario: &Scenario, seed: u64) -> Result<Odometry> {
    let world_to_local = scenario.world_to_local();
    let local_from_world = invert(&world_to_local);
    let raw: Vec<&Pose> = match cfg.raw_rate {
        Some(hz) => rate_limit(scenario.adas.iter(), hz),
        None => scenario.adas.iter().collect(),
    };
    let mut streams = ChannelStreams::new(raw_seed(seed), "adas/raw");
    let covariance = pose_covariance(&cfg.raw_noise, &cfg.perception.floor);
    let node1_cfg = cfg.node1_config();
    let mut node1 = OdometryNode::new(&node1_cfg, raw[0].timestamp).stage("node1")?;
    let mut events = Vec::with_capacity(raw.len());
    for p in raw {
        let noisy = perturb_pose(p, &cfg.raw_noise, &mut streams);
        let local = compose(&local_from_world, &noisy).stage("odometry")?;
        let event = MeasurementEvent::new(MeasurementKind::OdometryDifferential, local, covariance, "odometry");
        let filtered = node1.step(&event).stage("node1")?;
        events.push(MeasurementEvent {
            pose: filtered,
            covariance: node1.twist_covariance(),
            ..event
        });
    }
    Ok(Odometry { world_to_local, events })
}

/// Simulated perception events for one noise setting.
pub fn run_perception(perception: &PerceptionConfig, scenario: &Scenario, stream_seed: u64) -> Result<Vec<MeasurementEvent>> {
    let pairs = pair_nearest(&scenario.smart, &scenario.adas, perception.gate_threshold);
    let pairs = match perception.output_rate {
        Some(hz) => rate_limit(pairs, hz),
        None => pairs,
    };
    let mut streams = ChannelStreams::new(stream_seed, "perception");
    pairs
        .iter()
        .map(|p| make_measurement(p, perception, &mut streams))
        .collect::<Result<Vec<_>>>()
        .stage("perception")
}

/// Runs node 2 over the merged event stream and returns one world pose per
/// distinct event time.
pub fn run_fusion(
    cfg: &ExperimentConfig,
    odometry: &Odometry,
    perception: &[MeasurementEvent],
) -> Result<Vec<Pose>> {
    let mut events: Vec<&MeasurementEvent> = odometry.events.iter().chain(perception).collect();
    // stable: odometry precedes perception at equal times
    events.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then_with(|| kind_rank(a.kind).cmp(&kind_rank(b.kind)))
    });
    let mut node2 = FusionNode::new(&cfg.node2_config(odometry.world_to_local)).stage("node2")?;
    let mut out: Vec<Pose> = Vec::with_capacity(odometry.events.len());
    for e in events {
        let s = node2.step(e).stage("node2")?;
        let pose = s.pose(FrameId::World, ADAS);
        match out.last_mut() {
            Some(last) if last.timestamp == pose.timestamp => *last = pose,
            _ => out.push(pose),
        }
    }
    Ok(out)
}

fn kind_rank(k: MeasurementKind) -> u8 {
    match k {
        MeasurementKind::OdometryDifferential => 0,
        MeasurementKind::PerceptionAbsolute => 1,
    }
}

fn evaluate_series(cfg: &ExperimentConfig, est: &[Pose], scenario: &Scenario) -> Result<ErrorStats> {
    evaluate(est, &scenario.adas, cfg.eval.align, cfg.eval.max_dt).stage("eval")
}

/// Trajectories and errors of one seed.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub seed: u64,
    pub fused: ErrorStats,
    pub baseline: ErrorStats,
    pub fused_trajectory: Vec<Pose>,
    pub baseline_trajectory: Vec<Pose>,
}

/// Full pipeline for one seed, with the configured perception noise.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<SingleRun> {
    cfg.validate()?;
    let scenario = Scenario::load(cfg)?;
    run_single_on(cfg, &scenario, seed)
}

pub fn run_single_on(cfg: &ExperimentConfig, scenario: &Scenario, seed: u64) -> Result<SingleRun> {
    let odometry = run_odometry(cfg, scenario, seed)?;
    let perception = run_perception(&cfg.perception, scenario, perception_seed(seed, 0, 0))?;
    let fused_trajectory = run_fusion(cfg, &odometry, &perception)?;
    let baseline_trajectory = run_fusion(cfg, &odometry, &[])?;
    Ok(SingleRun {
        seed,
        fused: evaluate_series(cfg, &fused_trajectory, scenario)?,
        baseline: evaluate_series(cfg, &baseline_trajectory, scenario)?,
        fused_trajectory,
        baseline_trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedStats {
    pub seed: u64,
    pub fused: ErrorStats,
    pub baseline: ErrorStats,
}

/// Report of `run`: per-seed errors for the fused and odometry-only chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedStats>,
    pub fused_translation_rmse_mean: f64,
    pub baseline_translation_rmse_mean: f64,
}

pub fn run_seeds(cfg: &ExperimentConfig) -> Result<(SingleReport, Vec<SingleRun>)> {
    cfg.validate()?;
    let scenario = Scenario::load(cfg)?;
    let runs = cfg
        .seeds
        .iter()
        .map(|&s| run_single_on(cfg, &scenario, s))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let report = SingleReport {
        config: cfg.clone(),
        seeds: runs
            .iter()
            .map(|r| SeedStats {
                seed: r.seed,
                fused: r.fused.clone(),
                baseline: r.baseline.clone(),
            })
            .collect(),
        fused_translation_rmse_mean: runs.iter().map(|r| r.fused.translation.rmse).sum::<f64>() / n,
        baseline_translation_rmse_mean: runs.iter().map(|r| r.baseline.translation.rmse).sum::<f64>() / n,
    };
    Ok((report, runs))
}

fn trajectory_csv(poses: &[Pose]) -> String {
    render_trajectory(&TrajectoryLog::new(Agent::Adas, poses.to_vec()))
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `fused.csv`, `baseline.csv` and `errors.csv`. The
/// trajectories and error series are those of the first seed.
pub fn write_run_outputs(dir: &Path, report: &SingleReport, runs: &[SingleRun]) -> Result<()> {
    create_dir(dir)?;
    write(dir.join("report.json"), to_json(report))?;
    if let Some(first) = runs.first() {
        write(dir.join("fused.csv"), trajectory_csv(&first.fused_trajectory))?;
        write(dir.join("baseline.csv"), trajectory_csv(&first.baseline_trajectory))?;
        write(dir.join("errors.csv"), render_error_series(&first.fused))?;
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Result of one seed in one cell; failures are kept instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSeed {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<ErrorStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    /// Seeds that completed.
    pub n_seeds: usize,
    pub translation_rmse: f64,
    pub orientation_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub label: String,
    /// `None` for the odometry-only baseline.
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub seeds: Vec<CellSeed>,
    pub aggregate: Option<CellAggregate>,
}

impl CellReport {
    pub fn is_baseline(&self) -> bool {
        self.sigma.is_none()
    }

    fn new(label: String, sigma: Option<f64>, gamma: Option<f64>, seeds: Vec<CellSeed>) -> Self {
        let ok: Vec<&ErrorStats> = seeds.iter().filter_map(|s| s.stats.as_ref()).collect();
        let aggregate = (!ok.is_empty()).then(|| {
            let n = ok.len() as f64;
            CellAggregate {
                n_seeds: ok.len(),
                translation_rmse: ok.iter().map(|s| s.translation.rmse).sum::<f64>() / n,
                orientation_rmse: ok.iter().map(|s| s.orientation.rmse).sum::<f64>() / n,
            }
        });
        Self {
            label,
            sigma,
            gamma,
            seeds,
            aggregate,
        }
    }
}

/// Report of `sweep`. The baseline cell comes last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub series: BTreeMap<String, ErrorStats>,
}

impl RunReport {
    pub fn baseline(&self) -> &CellReport {
        self.cells.last().expect("sweep always has a baseline cell")
    }

    pub fn cell(&self, sigma: f64, gamma: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.sigma == Some(sigma) && c.gamma == Some(gamma))
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

pub fn cell_label(sigma: f64, gamma: f64) -> String {
    format!("sigma{sigma}_gamma{gamma}")
}

pub const BASELINE_LABEL: &str = "baseline";

enum Job {
    Baseline,
    Cell { si: usize, gi: usize },
}

/// Runs every grid cell plus the baseline for every seed.
///
/// Cells run in parallel when `parallel` is set; the report is identical
/// either way.
pub fn run_sweep(cfg: &ExperimentConfig, parallel: bool) -> Result<RunReport> {
    let started = std::time::Instant::now();
    cfg.validate()?;
    let grid = cfg
        .sweep
        .clone()
        .ok_or_else(|| config_err("sweep requires a `sweep` grid"))?;
    let scenario = Scenario::load(cfg)?;

    let odometry: Vec<std::result::Result<Odometry, String>> = map_maybe_par(&cfg.seeds, parallel, |&seed| {
        run_odometry(cfg, &scenario, seed).map_err(|e| e.to_string())
    });

    let mut jobs = Vec::with_capacity(grid.cell_count());
    for gi in 0..grid.gamma.len() {
        for si in 0..grid.sigma.len() {
            jobs.push(Job::Cell { si, gi });
        }
    }
    jobs.push(Job::Baseline);

    let results: Vec<(CellReport, Option<ErrorStats>)> = map_maybe_par(&jobs, parallel, |job| {
        let (label, sigma, gamma, perception) = match *job {
            Job::Baseline => (BASELINE_LABEL.to_string(), None, None, None),
            Job::Cell { si, gi } => {
                let (s, g) = (grid.sigma[si], grid.gamma[gi]);
                let mut p = cfg.perception.clone();
                p.noise = NoiseSpec { sigma_trans: s, gamma_yaw: g, ..p.noise };
                (cell_label(s, g), Some(s), Some(g), Some((p, si, gi)))
            }
        };
        let mut first_series = None;
        let seeds = cfg
            .seeds
            .iter()
            .zip(&odometry)
            .map(|(&seed, odo)| {
                let res = odo.as_ref().map_err(|e| e.clone()).and_then(|odo| {
                    let events = match &perception {
                        Some((p, si, gi)) => run_perception(p, &scenario, perception_seed(seed, *si, *gi))
                            .map_err(|e| e.to_string())?,
                        None => Vec::new(),
                    };
                    let est = run_fusion(cfg, odo, &events).map_err(|e| e.to_string())?;
                    evaluate_series(cfg, &est, &scenario).map_err(|e| e.to_string())
                });
                match res {
                    Ok(stats) => {
                        if first_series.is_none() {
                            first_series = Some(stats.clone());
                        }
                        CellSeed { seed, stats: Some(stats), error: None }
                    }
                    Err(e) => CellSeed { seed, stats: None, error: Some(e) },
                }
            })
            .collect();
        (CellReport::new(label, sigma, gamma, seeds), first_series)
    });

    let mut series = BTreeMap::new();
    let mut cells = Vec::with_capacity(results.len());
    for (cell, s) in results {
        if let Some(s) = s {
            series.insert(cell.label.clone(), s);
        }
        cells.push(cell);
    }
    Ok(RunReport {
        config: cfg.clone(),
        cells,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        series,
    })
}

fn map_maybe_par<T: Sync, R: Send>(items: &[T], parallel: bool, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn fmt_cell(c: Option<&CellReport>) -> String {
    match c.and_then(|c| c.aggregate) {
        Some(a) => format!("{:.3}", a.translation_rmse),
        None => "failed".to_string(),
    }
}

/// Text table: γ rows, σ columns, baseline row last.
pub fn render_table(report: &RunReport) -> String {
    let cfg = &report.config;
    let Some(grid) = &cfg.sweep else {
        return String::new();
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Translation RMSE (m) for sigma_raw = {} m, gamma_raw = {} deg, {} seed(s)",
        cfg.raw_noise.sigma_trans,
        cfg.raw_noise.gamma_yaw,
        cfg.seeds.len()
    );
    let head: Vec<String> = grid.sigma.iter().map(|s| format!("sigma = {s}m")).collect();
    let width = head.iter().map(String::len).max().unwrap_or(0).max(6);
    let _ = write!(out, "{:<16}", "");
    for h in &head {
        let _ = write!(out, "  {h:>width$}");
    }
    out.push('\n');
    for &g in &grid.gamma {
        let _ = write!(out, "{:<16}", format!("gamma = {g} deg"));
        for &s in &grid.sigma {
            let _ = write!(out, "  {:>width$}", fmt_cell(report.cell(s, g)));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{:<16}  {:>width$}", "w/o perception", fmt_cell(Some(report.baseline())));
    out
}

/// Writes `report.json`, `table.txt` and one subdirectory per cell holding
/// `cell.json` and the first seed's `errors.csv`.
pub fn write_sweep_outputs(dir: &Path, report: &RunReport) -> Result<()> {
    create_dir(dir)?;
    write(dir.join("report.json"), report.to_json())?;
    write(dir.join("table.txt"), render_table(report))?;
    for cell in &report.cells {
        let sub = dir.join(&cell.label);
        create_dir(&sub)?;
        write(sub.join("cell.json"), to_json(cell))?;
        if let Some(s) = report.series.get(&cell.label) {
            write(sub.join("errors.csv"), render_error_series(s))?;
        }
    }
    Ok(())
}
