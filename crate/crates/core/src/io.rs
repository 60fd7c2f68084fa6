//! Trajectory logs: CSV ingestion and export, clock synchronization and
//! synthetic two-vehicle trajectories.
//!
//! File format (UTF-8):
//!
//! ```text
//! # agent=adas
//! # convention=ENU
//! # key=value ...
//! t,x,y,z,qx,qy,qz,qw[,sx,sy,sz,syaw]
//! 0,1.5,2,0,0,0,0,1
//! ```

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::RandomStream;
use crate::se3::{ned_to_enu, quat_yaw, Agent, FrameId, Pose, Quaternion};

pub const POSE_HEADER: &str = "t,x,y,z,qx,qy,qz,qw";
pub const SIGMA_HEADER: &str = "sx,sy,sz,syaw";

/// Quaternions further than this from unit norm are rejected; closer ones are renormalized.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    #[serde(rename = "NED")]
    Ned,
    #[serde(rename = "ENU")]
    Enu,
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NED" => Ok(Convention::Ned),
            "ENU" => Ok(Convention::Enu),
            other => Err(Error::InvalidParameter(format!("unknown convention `{other}`"))),
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convention::Ned => "NED",
            Convention::Enu => "ENU",
        })
    }
}

/// Time-ordered world→body poses of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub agent: Agent,
    pub convention: Convention,
    pub samples: Vec<Pose>,
    /// Per-sample 1σ of x, y, z, yaw; empty for plain trajectories.
    pub sigma: Vec<[f64; 4]>,
    pub metadata: BTreeMap<String, String>,
}

impl TrajectoryLog {
    pub fn new(agent: Agent, samples: Vec<Pose>) -> Self {
        Self {
            agent,
            convention: Convention::Enu,
            samples,
            sigma: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|p| p.timestamp)
    }
}

fn parse_field(s: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column `{column}`: cannot parse `{}` as a number", s.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteField {
            line,
            column: column.to_string(),
        });
    }
    Ok(v)
}

/// Parses trajectory text. NED data is converted to ENU.
pub fn parse_trajectory(text: &str) -> Result<TrajectoryLog> {
    let mut metadata = BTreeMap::new();
    let mut columns: Option<Vec<String>> = None;
    let mut samples = Vec::new();
    let mut sigma = Vec::new();
    let mut rows = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(comment) = l.strip_prefix('#') {
            if columns.is_none() {
                if let Some((k, v)) = comment.split_once('=') {
                    metadata.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
            continue;
        }
        let Some(cols) = &columns else {
            let header: Vec<String> = l.split(',').map(|c| c.trim().to_string()).collect();
            let joined = header.join(",");
            if joined != POSE_HEADER && joined != format!("{POSE_HEADER},{SIGMA_HEADER}") {
                return Err(Error::Parse {
                    line,
                    message: format!("unexpected header `{l}`"),
                });
            }
            columns = Some(header);
            continue;
        };

        rows += 1;
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::ColumnCount {
                line,
                expected: cols.len(),
                found: fields.len(),
            });
        }
        let mut v = [0.0; 12];
        for (k, (f, c)) in fields.iter().zip(cols).enumerate() {
            v[k] = parse_field(f, line, c)?;
        }
        let t = v[0];
        if t < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("negative timestamp {t}"),
            });
        }
        if let Some(prev) = samples.last().map(|p: &Pose| p.timestamp) {
            if t == prev {
                return Err(Error::DuplicateTimestamp { line, t });
            }
            if t < prev {
                return Err(Error::NonMonotonic { line, row: rows, t });
            }
        }
        let norm = (v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]).sqrt();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(Error::QuaternionNorm { line, norm });
        }
        samples.push(Pose::from_parts(
            t,
            Vector3::new(v[1], v[2], v[3]),
            Quaternion::new(v[4], v[5], v[6], v[7]),
            FrameId::World,
            FrameId::Body(Agent::Adas),
        ));
        if cols.len() == 12 {
            sigma.push([v[8], v[9], v[10], v[11]]);
        }
    }

    if columns.is_none() {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            message: "missing header".into(),
        });
    }
    let agent = match metadata.get("agent") {
        Some(a) => a.parse()?,
        None => Agent::Adas,
    };
    let convention = match metadata.get("convention") {
        Some(c) => c.parse()?,
        None => Convention::Enu,
    };
    for p in &mut samples {
        p.child = FrameId::Body(agent);
        if convention == Convention::Ned {
            *p = ned_to_enu(p);
        }
    }
    metadata.remove("convention");
    metadata.remove("agent");
    Ok(TrajectoryLog {
        agent,
        convention: Convention::Enu,
        samples,
        sigma,
        metadata,
    })
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<TrajectoryLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text)
}

/// Renders a log in the normative CSV format. Numbers use the shortest
/// representation that round-trips exactly.
pub fn render_trajectory(log: &TrajectoryLog) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# agent={}", log.agent);
    let _ = writeln!(out, "# convention={}", log.convention);
    for (k, v) in &log.metadata {
        if k != "agent" && k != "convention" {
            let _ = writeln!(out, "# {k}={v}");
        }
    }
    let with_sigma = !log.sigma.is_empty();
    if with_sigma {
        let _ = writeln!(out, "{POSE_HEADER},{SIGMA_HEADER}");
    } else {
        let _ = writeln!(out, "{POSE_HEADER}");
    }
    for (i, p) in log.samples.iter().enumerate() {
        let t = &p.translation;
        let q = &p.rotation;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.timestamp, t.x, t.y, t.z, q.x, q.y, q.z, q.w
        );
        if with_sigma {
            let s = log.sigma[i];
            let _ = write!(out, ",{},{},{},{}", s[0], s[1], s[2], s[3]);
        }
        out.push('\n');
    }
    out
}

pub fn export_trajectory(log: &TrajectoryLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_trajectory(log)).map_err(|e| Error::io(path, e))
}

/// Constant clock offset between the two vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncSpec {
    /// Added to the non-reference vehicle's timestamps.
    pub offset_seconds: f64,
    /// Vehicle whose clock is authoritative.
    pub reference: Agent,
}

impl Default for SyncSpec {
    fn default() -> Self {
        Self {
            offset_seconds: 0.0,
            reference: Agent::Smart,
        }
    }
}

/// Shifts the non-reference log by the configured offset.
pub fn synchronize(
    a: TrajectoryLog,
    b: TrajectoryLog,
    spec: &SyncSpec,
) -> (TrajectoryLog, TrajectoryLog) {
    let shift = |mut log: TrajectoryLog| {
        if spec.offset_seconds != 0.0 {
            for p in &mut log.samples {
                p.timestamp += spec.offset_seconds;
            }
        }
        log
    };
    if a.agent == spec.reference {
        (a, shift(b))
    } else {
        (shift(a), b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Straight,
    Circle,
    FigureEight,
    WaypointSpline,
}

impl FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(PathKind::Straight),
            "circle" => Ok(PathKind::Circle),
            "figure-eight" => Ok(PathKind::FigureEight),
            "waypoint-spline" => Ok(PathKind::WaypointSpline),
            other => Err(Error::InvalidParameter(format!("unknown path kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for PathKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PathKind::Straight => "straight",
            PathKind::Circle => "circle",
            PathKind::FigureEight => "figure-eight",
            PathKind::WaypointSpline => "waypoint-spline",
        })
    }
}

/// Parameters for a synthetic leader/follower pair driving the same path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub kind: PathKind,
    /// Seconds.
    pub duration: f64,
    /// Hz.
    pub rate: f64,
    /// m/s, constant along the path.
    pub speed: f64,
    pub seed: u64,
    /// Arc-length distance by which the follower trails the leader, metres.
    pub gap: f64,
    /// Circle radius, figure-eight half-width or spline mean radius, metres.
    pub size: f64,
    pub altitude: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            kind: PathKind::FigureEight,
            duration: 120.0,
            rate: 200.0,
            speed: 8.0,
            seed: 0,
            gap: 10.0,
            size: 60.0,
            altitude: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("duration", self.duration),
            ("rate", self.rate),
            ("speed", self.speed),
            ("size", self.size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.gap >= 0.0 && self.gap.is_finite()) || !self.altitude.is_finite() {
            return Err(Error::InvalidParameter("gap must be >= 0 and altitude finite".into()));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.rate + 1e-9).floor() as usize
    }
}

/// A planar curve parametrized by arc length.
trait ArcPath {
    /// Position and unit tangent at arc length `s` (any real).
    fn at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>);
}

struct Line;

impl ArcPath for Line {
    fn at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        (Vector2::new(s, 0.0), Vector2::new(1.0, 0.0))
    }
}

struct Circle {
    radius: f64,
}

impl ArcPath for Circle {
    fn at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        let a = s / self.radius;
        let (sa, ca) = a.sin_cos();
        (
            Vector2::new(self.radius * sa, self.radius * (1.0 - ca)),
            Vector2::new(ca, sa),
        )
    }
}

type CurveFn = Box<dyn Fn(f64) -> (Vector2<f64>, Vector2<f64>) + Send + Sync>;

/// Closed curve `c(φ)`, `φ ∈ [0, 2π)`, reparametrized by arc length.
struct Reparametrized {
    curve: CurveFn,
    knots: Vec<f64>,
    length: f64,
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];
const KNOTS: usize = 4096;

impl Reparametrized {
    fn new(curve: CurveFn) -> Self {
        let h = TAU / KNOTS as f64;
        let mut knots = Vec::with_capacity(KNOTS + 1);
        let mut acc = 0.0;
        knots.push(0.0);
        for k in 0..KNOTS {
            acc += Self::speed_integral(&curve, k as f64 * h, (k + 1) as f64 * h);
            knots.push(acc);
        }
        Self {
            curve,
            length: acc,
            knots,
        }
    }

    fn speed_integral(curve: &CurveFn, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * curve(mid + half * x).1.norm())
            .sum::<f64>()
            * half
    }

    fn param_at(&self, s: f64) -> f64 {
        let s = s.rem_euclid(self.length);
        let k = match self.knots.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(k) => k.min(KNOTS - 1),
            Err(k) => (k - 1).min(KNOTS - 1),
        };
        let h = TAU / KNOTS as f64;
        let lo = k as f64 * h;
        let mut phi = lo + h * (s - self.knots[k]) / (self.knots[k + 1] - self.knots[k]);
        for _ in 0..4 {
            let f = self.knots[k] + Self::speed_integral(&self.curve, lo, phi) - s;
            let d = (self.curve)(phi).1.norm();
            phi -= f / d;
        }
        phi
    }
}

impl ArcPath for Reparametrized {
    fn at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        let (p, d) = (self.curve)(self.param_at(s));
        (p, d.normalize())
    }
}

fn figure_eight(half_width: f64) -> Reparametrized {
    // lemniscate of Gerono
    let a = half_width;
    Reparametrized::new(Box::new(move |phi: f64| {
        let (s, c) = phi.sin_cos();
        let (s2, c2) = (2.0 * phi).sin_cos();
        (
            Vector2::new(a * s, 0.5 * a * s2),
            Vector2::new(a * c, a * c2),
        )
    }))
}

/// Closed uniform cubic B-spline through jittered points on a circle.
fn waypoint_spline(radius: f64, seed: u64) -> Reparametrized {
    const N: usize = 8;
    let mut rng = RandomStream::new(seed, "synthetic/waypoints");
    let pts: Vec<Vector2<f64>> = (0..N)
        .map(|k| {
            let ang = TAU * k as f64 / N as f64;
            let r = radius * (1.0 + 0.3 * rng.uniform(-1.0, 1.0));
            Vector2::new(r * ang.cos(), r * ang.sin())
        })
        .collect();
    Reparametrized::new(Box::new(move |phi: f64| {
        let u = phi / TAU * N as f64;
        let i = (u.floor() as isize).rem_euclid(N as isize) as usize;
        let t = u - u.floor();
        let p = |j: usize| pts[(i + j + N - 1) % N];
        let (p0, p1, p2, p3) = (p(0), p(1), p(2), p(3));
        let t2 = t * t;
        let t3 = t2 * t;
        let pos = (p0 * (1.0 - t).powi(3)
            + p1 * (3.0 * t3 - 6.0 * t2 + 4.0)
            + p2 * (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0)
            + p3 * t3)
            / 6.0;
        let dpos = (p0 * (-3.0 * (1.0 - t).powi(2))
            + p1 * (9.0 * t2 - 12.0 * t)
            + p2 * (-9.0 * t2 + 6.0 * t + 3.0)
            + p3 * (3.0 * t2))
            / 6.0
            * (N as f64 / TAU);
        (pos, dpos)
    }))
}

/// Ground truth for a leader (smart) and a follower (ADAS) on the same path.
///
/// Samples are at `t = i / rate` for `i < ⌊duration · rate⌋`; the follower
/// trails by `gap` metres of arc length.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(TrajectoryLog, TrajectoryLog)> {
    spec.validate()?;
    let path: Box<dyn ArcPath> = match spec.kind {
        PathKind::Straight => Box::new(Line),
        PathKind::Circle => Box::new(Circle { radius: spec.size }),
        PathKind::FigureEight => Box::new(figure_eight(spec.size)),
        PathKind::WaypointSpline => Box::new(waypoint_spline(spec.size, spec.seed)),
    };
    let n = spec.sample_count();
    let make = |agent: Agent, offset: f64| {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / spec.rate;
                let (p, d) = path.at(spec.speed * t - offset);
                Pose::from_parts(
                    t,
                    Vector3::new(p.x, p.y, spec.altitude),
                    quat_yaw(d.y.atan2(d.x)),
                    FrameId::World,
                    FrameId::Body(agent),
                )
            })
            .collect();
        let mut log = TrajectoryLog::new(agent, samples);
        log.metadata = BTreeMap::from([
            ("source".to_string(), "synthetic".to_string()),
            ("kind".to_string(), spec.kind.to_string()),
            ("rate".to_string(), spec.rate.to_string()),
            ("speed".to_string(), spec.speed.to_string()),
            ("gap".to_string(), spec.gap.to_string()),
            ("seed".to_string(), spec.seed.to_string()),
        ]);
        log
    };
    Ok((make(Agent::Smart, 0.0), make(Agent::Adas, spec.gap)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{relative_pose, wrap_angle};

    const GOOD: &str = "# agent=smart\n# convention=ENU\nt,x,y,z,qx,qy,qz,qw\n0,0,0,0,0,0,0,1\n0.1,1,0,0,0,0,0,1\n0.2,2,0,0,0,0,0.7071067811865476,0.7071067811865476\n";

    #[test]
    fn parses_well_formed_file() {
        let log = parse_trajectory(GOOD).unwrap();
        assert_eq!(log.len(), 3);
        assert_eq!(log.agent, Agent::Smart);
        assert_eq!(log.convention, Convention::Enu);
        assert_eq!(log.samples[1].translation, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(log.samples[2].child, FrameId::Body(Agent::Smart));
    }

    #[test]
    fn ned_rows_become_enu() {
        let log = parse_trajectory("# convention=NED\nt,x,y,z,qx,qy,qz,qw\n0,1,2,3,0,0,0,1\n").unwrap();
        assert_eq!(log.samples[0].translation, Vector3::new(2.0, 1.0, -3.0));
        assert_eq!(log.convention, Convention::Enu);
        assert!(render_trajectory(&log).contains("# convention=ENU\n"));
    }

    #[test]
    fn enu_input_is_not_converted() {
        let text = "# convention=ENU\nt,x,y,z,qx,qy,qz,qw\n0,1,2,3,0,0,0,1\n";
        let log = parse_trajectory(text).unwrap();
        assert_eq!(log.samples[0].translation, Vector3::new(1.0, 2.0, 3.0));
        let again = parse_trajectory(&render_trajectory(&log)).unwrap();
        assert_eq!(again, log);
    }

    #[test]
    fn bad_inputs_get_distinct_errors() {
        let h = "t,x,y,z,qx,qy,qz,qw\n";
        let cases: Vec<(String, fn(&Error) -> bool)> = vec![
            (format!("{h}0,0,0,0,0,0,1\n"), |e| matches!(e, Error::ColumnCount { line: 2, .. })),
            (format!("{h}0,NaN,0,0,0,0,0,1\n"), |e| matches!(e, Error::NonFiniteField { line: 2, .. })),
            (format!("{h}0,0,0,0,0,0,0,1.1\n"), |e| matches!(e, Error::QuaternionNorm { line: 2, .. })),
            (format!("{h}0,0,0,0,0,0,0,1\n0,0,0,0,0,0,0,1\n"), |e| matches!(e, Error::DuplicateTimestamp { line: 3, .. })),
            (format!("{h}1,0,0,0,0,0,0,1\n0.5,0,0,0,0,0,0,1\n"), |e| matches!(e, Error::NonMonotonic { row: 2, .. })),
            (format!("{h}0,abc,0,0,0,0,0,1\n"), |e| matches!(e, Error::Parse { line: 2, .. })),
            ("0,0,0,0,0,0,0,1\n".to_string(), |e| matches!(e, Error::Parse { line: 1, .. })),
        ];
        for (text, check) in cases {
            let err = parse_trajectory(&text).unwrap_err();
            assert!(check(&err), "{text:?} -> {err:?}");
        }
    }

    #[test]
    fn near_unit_quaternion_is_renormalized() {
        let log = parse_trajectory("t,x,y,z,qx,qy,qz,qw\n0,0,0,0,0,0,0,1.0000005\n").unwrap();
        assert!((log.samples[0].rotation.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_series_exports_header_only() {
        let log = TrajectoryLog::new(Agent::Adas, vec![]);
        let text = render_trajectory(&log);
        assert_eq!(text, format!("# agent=adas\n# convention=ENU\n{POSE_HEADER}\n"));
        assert!(parse_trajectory(&text).unwrap().is_empty());
    }

    #[test]
    fn load_reports_missing_file() {
        let err = load_trajectory("/nonexistent/x.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn sync_shifts_only_non_reference() {
        let (s, a) = generate_synthetic(&SyntheticSpec { duration: 1.0, rate: 10.0, ..Default::default() }).unwrap();
        let (s0, a0) = synchronize(s.clone(), a.clone(), &SyncSpec::default());
        assert_eq!((&s0, &a0), (&s, &a));
        let spec = SyncSpec { offset_seconds: 1.5, reference: Agent::Smart };
        let (s1, a1) = synchronize(s.clone(), a.clone(), &spec);
        assert_eq!(s1, s);
        for (x, y) in a1.samples.iter().zip(&a.samples) {
            assert_eq!(x.timestamp, y.timestamp + 1.5);
        }
        // order of arguments does not matter
        let (a2, s2) = synchronize(a.clone(), s.clone(), &spec);
        assert_eq!(s2, s);
        assert_eq!(a2, a1);
    }

    #[test]
    fn sync_brings_pairs_under_gate() {
        use crate::perception::pair_nearest;
        let (s, mut a) = generate_synthetic(&SyntheticSpec { duration: 2.0, rate: 10.0, ..Default::default() }).unwrap();
        for p in &mut a.samples {
            p.timestamp += 3.25;
        }
        assert!(pair_nearest(&s.samples, &a.samples, 0.1).len() < 5);
        let spec = SyncSpec { offset_seconds: -3.25, reference: Agent::Smart };
        let (s, a) = synchronize(s, a, &spec);
        let pairs = pair_nearest(&s.samples, &a.samples, 0.1);
        assert_eq!(pairs.len(), a.len());
        assert!(pairs.iter().all(|p| (p.smart_pose.timestamp - p.adas_pose.timestamp).abs() < 1e-9));
    }

    #[test]
    fn straight_path() {
        let spec = SyntheticSpec {
            kind: PathKind::Straight,
            duration: 10.0,
            rate: 10.0,
            speed: 1.0,
            gap: 4.0,
            ..Default::default()
        };
        let (s, a) = generate_synthetic(&spec).unwrap();
        assert_eq!(s.len(), 100);
        let travelled = (s.samples[99].translation - s.samples[0].translation).norm();
        // last sample is at t = 9.9 s; one more step reaches 10 m
        assert!((travelled + spec.speed / spec.rate - 10.0).abs() < 1e-9);
        for (ps, pa) in s.samples.iter().zip(&a.samples) {
            let r = relative_pose(ps, pa).unwrap();
            assert!((r.translation - Vector3::new(-4.0, 0.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn circle_lap_closes() {
        let radius = 20.0;
        let speed = 5.0;
        let rate = 50.0;
        let spec = SyntheticSpec {
            kind: PathKind::Circle,
            duration: TAU * radius / speed,
            rate,
            speed,
            size: radius,
            ..Default::default()
        };
        let (s, _) = generate_synthetic(&spec).unwrap();
        let wound: f64 = s
            .samples
            .windows(2)
            .map(|w| wrap_angle(w[1].yaw() - w[0].yaw()))
            .sum();
        // the lap time is not a whole number of samples, so allow up to two steps short
        assert!((wound - TAU).abs() < 2.0 * speed / rate / radius, "{wound}");
        let gap = (s.samples.last().unwrap().translation - s.samples[0].translation).norm();
        assert!(gap <= 2.0 * speed / rate);
    }

    #[test]
    fn closed_paths_have_constant_speed_and_tangent_heading() {
        for kind in [PathKind::FigureEight, PathKind::WaypointSpline] {
            let spec = SyntheticSpec { kind, duration: 60.0, rate: 50.0, seed: 3, ..Default::default() };
            let (s, a) = generate_synthetic(&spec).unwrap();
            assert_eq!(s.len(), 3000);
            for w in s.samples.windows(2) {
                let d = w[1].translation - w[0].translation;
                let step = d.norm();
                // chord of an arc of length speed/rate
                assert!((step - spec.speed / spec.rate).abs() < 1e-4, "{kind}: {step}");
                let heading = d.y.atan2(d.x);
                let mid = w[0].yaw() + 0.5 * wrap_angle(w[1].yaw() - w[0].yaw());
                assert!(wrap_angle(heading - mid).abs() < 1e-4);
            }
            for (ps, pa) in s.samples.iter().zip(&a.samples) {
                let dist = (ps.translation - pa.translation).norm();
                assert!(dist <= spec.gap + 1e-9);
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec { kind: PathKind::WaypointSpline, duration: 5.0, rate: 20.0, seed: 9, ..Default::default() };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 10, ..spec.clone() };
        assert_ne!(generate_synthetic(&spec).unwrap().0, generate_synthetic(&other).unwrap().0);
    }

    #[test]
    fn synthetic_rejects_bad_parameters() {
        for bad in [
            SyntheticSpec { duration: 0.0, ..Default::default() },
            SyntheticSpec { rate: -1.0, ..Default::default() },
            SyntheticSpec { speed: f64::NAN, ..Default::default() },
        ] {
            assert!(generate_synthetic(&bad).is_err());
        }
    }
}
