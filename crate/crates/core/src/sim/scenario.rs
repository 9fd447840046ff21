use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector6;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::posegraph::{ConstraintKind, Information, NodeId, Pose, PoseGraph, PoseNode, RelativeConstraint};

/// Node ids are `robot_id * NODE_ID_STRIDE + sample index`.
pub const NODE_ID_STRIDE: u64 = 1_000_000;

/// A polyline driven at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub waypoints: Vec<[f64; 3]>,
    /// Meters per second.
    pub speed: f64,
    /// Start over from the first waypoint after the last one.
    #[serde(default)]
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFault {
    pub time_s: f64,
    /// Body-frame jump added to the odometry increment, meters.
    pub translation: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftModel {
    /// Per-axis translational random walk, m/√s.
    pub translation_sigma: [f64; 3],
    /// Heading random walk, rad/√s.
    pub yaw_sigma: f64,
    #[serde(default)]
    pub step_fault: Option<StepFault>,
}

impl DriftModel {
    pub fn is_zero(&self) -> bool {
        self.translation_sigma.iter().all(|&s| s == 0.0) && self.yaw_sigma == 0.0 && self.step_fault.is_none()
    }
}

/// Standard deviations behind an isotropic information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sigmas {
    pub translation: f64,
    pub rotation: f64,
}

impl Sigmas {
    pub fn information(&self) -> Information {
        Information::isotropic(self.translation, self.rotation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Replaced by the seed given to [`Scenario::load`].
    #[serde(default)]
    pub seed: u64,
    /// One trajectory per robot; robot ids follow the list order.
    pub robots: Vec<Trajectory>,
    pub odometry_rate_hz: f64,
    pub duration_s: f64,
    pub drift: DriftModel,
    /// Uncertainty the robots assign to each odometry edge.
    pub odometry_sigma: Sigmas,
    #[serde(default = "default_submap_period")]
    pub submap_period_s: f64,
    pub epoch_period_s: f64,
    /// Chance that a single upload or broadcast delivery is lost.
    #[serde(default)]
    pub drop_probability: f64,
}

fn default_submap_period() -> f64 {
    10.0
}

pub const PRESETS: [&str; 3] = ["euroc-like", "tunnel", "indoor-outdoor"];

impl Scenario {
    /// A named preset, or `None` for an unknown name.
    pub fn preset(name: &str, seed: u64) -> Option<Scenario> {
        match name {
            "euroc-like" => Some(euroc_like(seed)),
            "tunnel" => Some(tunnel(seed)),
            "indoor-outdoor" => Some(indoor_outdoor(seed)),
            _ => None,
        }
    }

    /// A preset name or the path of a TOML scenario file.
    pub fn load(name_or_path: &str, seed: u64) -> Result<Scenario, SimError> {
        if let Some(s) = Self::preset(name_or_path, seed) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(SimError::InvalidSpec(format!(
                "unknown scenario {name_or_path:?}; presets are {}",
                PRESETS.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(e.to_string()))?;
        let mut s: Scenario = toml::from_str(&text).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        s.seed = seed;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.robots.is_empty() {
            return bad("no robots".into());
        }
        if self.robots.len() as u64 > u32::MAX as u64 {
            return bad("too many robots".into());
        }
        for (r, t) in self.robots.iter().enumerate() {
            if t.waypoints.is_empty() {
                return bad(format!("robot {r} has no waypoints"));
            }
            if !(t.speed.is_finite() && t.speed >= 0.0) {
                return bad(format!("robot {r} has invalid speed {}", t.speed));
            }
            if t.waypoints.iter().flatten().any(|v| !v.is_finite()) {
                return bad(format!("robot {r} has a non-finite waypoint"));
            }
        }
        let positive = [
            ("odometry_rate_hz", self.odometry_rate_hz),
            ("duration_s", self.duration_s),
            ("submap_period_s", self.submap_period_s),
            ("epoch_period_s", self.epoch_period_s),
            ("odometry_sigma.translation", self.odometry_sigma.translation),
            ("odometry_sigma.rotation", self.odometry_sigma.rotation),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if (self.duration_s * self.odometry_rate_hz) as u64 >= NODE_ID_STRIDE {
            return bad("too many samples per robot".into());
        }
        let d = &self.drift;
        if d.translation_sigma.iter().chain([&d.yaw_sigma]).any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("drift sigmas must be finite and nonnegative".into());
        }
        if !(0.0..1.0).contains(&self.drop_probability) {
            return bad(format!("drop_probability must be in [0, 1), got {}", self.drop_probability));
        }
        Ok(())
    }

    /// The same scenario without drift or faults.
    pub fn drift_free(&self) -> Scenario {
        Scenario {
            drift: DriftModel::default(),
            ..self.clone()
        }
    }

    pub fn epoch_count(&self) -> usize {
        (self.duration_s / self.epoch_period_s).ceil() as usize
    }
}

/// Ground truth and odometry of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotData {
    pub robot_id: u32,
    pub ground_truth: PoseGraph,
    /// Dead-reckoned poses with one odometry edge per consecutive pair.
    pub odometry: PoseGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioData {
    pub scenario: Scenario,
    pub robots: Vec<RobotData>,
}

impl ScenarioData {
    pub fn node_count(&self) -> usize {
        self.robots.iter().map(|r| r.ground_truth.len()).sum()
    }
}

/// Samples every robot's trajectory at the odometry rate and integrates
/// drifting odometry. Deterministic in the scenario, including its seed.
pub fn generate_scenario(spec: &Scenario) -> Result<ScenarioData, SimError> {
    spec.validate()?;
    let robots = spec
        .robots
        .iter()
        .enumerate()
        .map(|(r, t)| generate_robot(spec, r as u32, t))
        .collect();
    Ok(ScenarioData {
        scenario: spec.clone(),
        robots,
    })
}

fn generate_robot(spec: &Scenario, robot_id: u32, traj: &Trajectory) -> RobotData {
    let samples = (spec.duration_s * spec.odometry_rate_hz).round() as u64 + 1;
    let dt = 1.0 / spec.odometry_rate_hz;
    let path = Polyline::new(traj);

    let mut gt = PoseGraph::new("world");
    let mut odo = PoseGraph::new("world");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(robot_id as u64);
    let info = spec.odometry_sigma.information();
    let mut prev: Option<(Pose, Pose)> = None;
    for k in 0..samples {
        let t = k as f64 * dt;
        let node_id = robot_id as u64 * NODE_ID_STRIDE + k;
        let truth = path.pose_at(traj.speed * t);
        let node = |pose| PoseNode {
            node_id,
            robot_id,
            submap_id: (t / spec.submap_period_s).floor() as u32,
            timestamp: (k as f64 * 1e9 / spec.odometry_rate_hz).round() as i64,
            pose,
        };
        gt.add_node(node(truth)).expect("fresh ids, increasing time");

        let mut edge = None;
        let pose = match prev {
            None => truth,
            Some((prev_truth, prev_odo)) => {
                let mut delta = prev_truth.relative_to(&truth);
                let noise = sample_drift(&spec.drift, dt, t - dt, t, &mut rng);
                let pose = if spec.drift.is_zero() {
                    truth
                } else {
                    delta = delta.retract(&noise);
                    prev_odo.compose(&delta)
                };
                edge = Some(
                    RelativeConstraint::new(node_id - 1, node_id, delta, info, ConstraintKind::Odometry)
                        .expect("distinct ids"),
                );
                pose
            }
        };
        odo.add_node(node(pose)).expect("fresh ids, increasing time");
        if let Some(e) = edge {
            odo.add_edge(e).expect("endpoints exist");
        }
        prev = Some((truth, pose));
    }
    RobotData {
        robot_id,
        ground_truth: gt,
        odometry: odo,
    }
}

/// Tangent-space increment error `[ρ; φ]` for one odometry step ending at `t`.
fn sample_drift(d: &DriftModel, dt: f64, t0: f64, t: f64, rng: &mut ChaCha8Rng) -> Vector6<f64> {
    let mut draw = |s: f64| {
        let z: f64 = StandardNormal.sample(rng);
        z * s * dt.sqrt()
    };
    let mut v = Vector6::new(
        draw(d.translation_sigma[0]),
        draw(d.translation_sigma[1]),
        draw(d.translation_sigma[2]),
        0.0,
        0.0,
        draw(d.yaw_sigma),
    );
    if let Some(f) = d.step_fault {
        if t0 < f.time_s && f.time_s <= t {
            v[0] += f.translation[0];
            v[1] += f.translation[1];
            v[2] += f.translation[2];
            v[5] += f.yaw;
        }
    }
    v
}

struct Polyline {
    points: Vec<[f64; 3]>,
    cumulative: Vec<f64>,
    closed: bool,
}

impl Polyline {
    fn new(t: &Trajectory) -> Self {
        let mut points = t.waypoints.clone();
        if t.closed && points.len() > 1 {
            points.push(points[0]);
        }
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let d = dist(w[0], w[1]);
            cumulative.push(cumulative.last().unwrap() + d);
        }
        Self {
            points,
            cumulative,
            closed: t.closed,
        }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Pose at arc length `s`, heading along the current segment.
    fn pose_at(&self, s: f64) -> Pose {
        let total = self.length();
        if self.points.len() == 1 || total == 0.0 {
            let p = self.points[0];
            return Pose::from_xyz_yaw(p[0], p[1], p[2], 0.0);
        }
        let s = if self.closed { s.rem_euclid(total) } else { s.min(total) };
        let seg = match self.cumulative.iter().position(|&c| c > s) {
            Some(i) => i - 1,
            None => self.points.len() - 2,
        };
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        let u = if len > 0.0 { ((s - self.cumulative[seg]) / len).min(1.0) } else { 0.0 };
        let p = [0, 1, 2].map(|i| a[i] + u * (b[i] - a[i]));
        let yaw = (b[1] - a[1]).atan2(b[0] - a[0]);
        Pose::from_xyz_yaw(p[0], p[1], p[2], yaw)
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Waypoints of a corridor that starts at `start` with `heading` and runs
/// through `(length, turn)` legs, bending by `turn` radians over each leg.
pub fn corridor(start: [f64; 2], heading: f64, legs: &[(f64, f64)]) -> Vec<[f64; 3]> {
    const STEP: f64 = 5.0;
    let mut out = vec![[start[0], start[1], 0.0]];
    let (mut x, mut y, mut h) = (start[0], start[1], heading);
    for &(length, turn) in legs {
        let steps = (length / STEP).ceil().max(1.0) as usize;
        let ds = length / steps as f64;
        for _ in 0..steps {
            h += turn / steps as f64;
            x += ds * h.cos();
            y += ds * h.sin();
            out.push([x, y, 0.0]);
        }
    }
    out
}

/// Closed rounded rectangle centered at `center`.
pub fn rounded_loop(center: [f64; 2], width: f64, height: f64, corner: f64) -> Vec<[f64; 3]> {
    let (cx, cy) = (center[0], center[1]);
    let (hx, hy) = (width / 2.0 - corner, height / 2.0 - corner);
    let corners = [(hx, hy, 0.0), (-hx, hy, 0.5 * PI), (-hx, -hy, PI), (hx, -hy, 1.5 * PI)];
    let mut out = Vec::new();
    for (ox, oy, a0) in corners {
        for k in 0..=6 {
            let a = a0 + 0.5 * PI * k as f64 / 6.0;
            out.push([cx + ox + corner * a.cos(), cy + oy + corner * a.sin(), 0.0]);
        }
    }
    out
}

fn euroc_like(seed: u64) -> Scenario {
    let robots = [([0.0, 0.0], 16.0, 10.0), ([4.0, 3.0], 14.0, 12.0), ([-3.0, 2.0], 18.0, 8.0)]
        .into_iter()
        .map(|(c, w, h)| Trajectory {
            waypoints: rounded_loop(c, w, h, 2.0),
            speed: 0.8,
            closed: true,
        })
        .collect();
    Scenario {
        name: "euroc-like".into(),
        seed,
        robots,
        odometry_rate_hz: 10.0,
        duration_s: 120.0,
        drift: DriftModel {
            translation_sigma: [0.02, 0.02, 0.005],
            yaw_sigma: 0.002,
            step_fault: None,
        },
        odometry_sigma: Sigmas {
            translation: 0.05,
            rotation: 0.01,
        },
        submap_period_s: 10.0,
        epoch_period_s: 20.0,
        drop_probability: 0.0,
    }
}

fn tunnel(seed: u64) -> Scenario {
    // a shared gallery that splits into two branches
    let shared = [(60.0, 0.2), (60.0, -0.3), (40.0, 0.1)];
    let branch = |sign: f64| -> Vec<(f64, f64)> {
        shared
            .iter()
            .copied()
            .chain([
                (60.0, sign * 0.6),
                (80.0, sign * -0.4),
                (100.0, sign * 0.5),
                (80.0, sign * 0.3),
                (120.0, sign * -0.6),
            ])
            .collect()
    };
    let robots = [1.0, -1.0]
        .into_iter()
        .map(|s| Trajectory {
            waypoints: corridor([0.0, 0.0], 0.0, &branch(s)),
            speed: 3.0,
            closed: false,
        })
        .collect();
    Scenario {
        name: "tunnel".into(),
        seed,
        robots,
        odometry_rate_hz: 10.0,
        duration_s: 200.0,
        drift: DriftModel {
            translation_sigma: [0.03, 0.03, 0.01],
            yaw_sigma: 0.002,
            step_fault: None,
        },
        odometry_sigma: Sigmas {
            translation: 0.05,
            rotation: 0.01,
        },
        submap_period_s: 10.0,
        epoch_period_s: 20.0,
        drop_probability: 0.0,
    }
}

fn indoor_outdoor(seed: u64) -> Scenario {
    Scenario {
        name: "indoor-outdoor".into(),
        seed,
        robots: vec![Trajectory {
            waypoints: rounded_loop([0.0, 0.0], 60.0, 40.0, 6.0),
            speed: 1.5,
            closed: true,
        }],
        odometry_rate_hz: 10.0,
        duration_s: 200.0,
        drift: DriftModel {
            translation_sigma: [0.01, 0.01, 0.002],
            yaw_sigma: 0.0005,
            step_fault: Some(StepFault {
                time_s: 95.05,
                translation: [1.5, 1.5, 0.0],
                yaw: 0.05,
            }),
        },
        odometry_sigma: Sigmas {
            translation: 0.05,
            rotation: 0.01,
        },
        submap_period_s: 10.0,
        epoch_period_s: 20.0,
        drop_probability: 0.0,
    }
}

/// Node id of sample `k` of `robot_id`.
pub fn node_id(robot_id: u32, k: u64) -> NodeId {
    robot_id as u64 * NODE_ID_STRIDE + k
}
