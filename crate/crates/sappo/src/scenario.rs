//! TOML scenario files: schema, defaults, validation and the conversion
//! into built rings and simulation parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{AirModel, NoiseModel, RfModel};
use crate::filters::FilterConfig;
use crate::geometry::{Room, Vec2};
use crate::protocol::{
    BeaconNode, Pacing, DEFAULT_ACK_OVERHEAD_S, DEFAULT_REPORT_LATENCY_S,
};
use crate::ring::{
    build_beacon_quarter, build_ring, BuiltRing, Pose2, RingSpec, DEFAULT_APERTURE, DEFAULT_RANGE,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoomConfig {
    /// Counter-clockwise polygon, meters.
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RfConfig {
    pub sync: RfModel,
    #[serde(default = "default_report_latency")]
    pub report_latency_s: f64,
    #[serde(default = "default_ack_overhead")]
    pub ack_overhead_s: f64,
}

fn default_report_latency() -> f64 {
    DEFAULT_REPORT_LATENCY_S
}
fn default_ack_overhead() -> f64 {
    DEFAULT_ACK_OVERHEAD_S
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            sync: RfModel::simple_ook(),
            report_latency_s: DEFAULT_REPORT_LATENCY_S,
            ack_overhead_s: DEFAULT_ACK_OVERHEAD_S,
        }
    }
}

/// A timed position the robot passes through; poses between waypoints are
/// interpolated linearly and the heading follows the direction of travel.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotConfig {
    #[serde(default = "default_robot_sides")]
    pub n_sides: usize,
    #[serde(default = "default_robot_side")]
    pub side_length_m: f64,
    #[serde(default)]
    pub split_gap_m: f64,
    #[serde(default = "default_robot_height")]
    pub height_m: f64,
    /// Upper bound on the platform speed, used by the echo filter.
    #[serde(default = "default_speed_bound")]
    pub speed_bound_mps: f64,
    pub waypoints: Vec<Waypoint>,
}

fn default_robot_sides() -> usize {
    12
}
fn default_robot_side() -> f64 {
    // 12-gon side for a 3 cm apothem
    RingSpec::side_for_apothem(0.03, 12)
}
fn default_robot_height() -> f64 {
    0.30
}
fn default_speed_bound() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeaconConfig {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Boresight of the receiver array, degrees CCW from +x.
    pub orientation_deg: f64,
    #[serde(default = "default_beacon_height")]
    pub height_m: f64,
    #[serde(default = "default_beacon_side")]
    pub side_length_m: f64,
    #[serde(default = "default_aperture_deg")]
    pub aperture_deg: f64,
    #[serde(default = "default_range")]
    pub range_m: f64,
    #[serde(default)]
    pub low_power: bool,
}

fn default_beacon_height() -> f64 {
    2.10
}
fn default_beacon_side() -> f64 {
    // octagon side for a 3 cm apothem
    RingSpec::side_for_apothem(0.03, 8)
}
fn default_aperture_deg() -> f64 {
    DEFAULT_APERTURE.to_degrees()
}
fn default_range() -> f64 {
    DEFAULT_RANGE
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_cycles")]
    pub cycles: u64,
    /// 0 disables wall echoes, 1 enables single-bounce multipath.
    #[serde(default = "default_multipath")]
    pub multipath_order: u8,
    #[serde(default = "default_true")]
    pub ghost_filter: bool,
}

fn default_cycles() -> u64 {
    200
}
fn default_multipath() -> u8 {
    1
}
fn default_true() -> bool {
    true
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { cycles: 200, multipath_order: 1, ghost_filter: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub room: RoomConfig,
    pub air: AirModel,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub rf: RfConfig,
    #[serde(default = "default_pacing")]
    pub pacing: Pacing,
    #[serde(default = "default_filter")]
    pub filter: FilterConfig,
    pub robot: RobotConfig,
    pub beacons: Vec<BeaconConfig>,
    #[serde(default)]
    pub sim: SimConfig,
}

fn default_seed() -> u64 {
    42
}
// attenuation-wait is the robust default: the 30 ms guard lets each pulse
// fade before the next burst, so stale echoes rarely survive into the next
// listening window. ack_gated trades that safety for cycle rate.
fn default_pacing() -> Pacing {
    Pacing::AttenuationWait
}
// r matches the ~8.6 mm distance jitter (25 us ToF at 343 m/s) squared;
// q admits the per-cycle motion of a slow platform so the filter tracks
// a moving robot instead of lagging it.
fn default_filter() -> FilterConfig {
    FilterConfig::Kalman { r: 7.5e-5, q: 4e-5, p0: 1.0 }
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.room.vertices.len() < 3 {
            return Err(invalid("room.vertices", "a room needs at least 3 vertices"));
        }
        self.build_room()?;
        crate::channel::sound_speed(self.air.temperature_c)
            .map_err(|e| invalid("air.temperature_c", e.to_string()))?;
        if self.noise.tof_sigma_s < 0.0 {
            return Err(invalid("noise.tof_sigma_s", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.noise.outlier_rate) {
            return Err(invalid("noise.outlier_rate", "must be in [0, 1]"));
        }
        if self.rf.report_latency_s < 0.0 {
            return Err(invalid("rf.report_latency_s", "must be non-negative"));
        }
        if let RfModel::PacketRadio { min_latency_s, max_latency_s } = self.rf.sync {
            if min_latency_s < 0.0 || max_latency_s < min_latency_s {
                return Err(invalid("rf.sync", "latency range must satisfy 0 <= min <= max"));
            }
        }
        self.filter
            .validate()
            .map_err(|m| invalid("filter", m))?;
        if self.robot.n_sides < 3 {
            return Err(invalid("robot.n_sides", "need at least 3"));
        }
        if self.robot.side_length_m <= 0.0 {
            return Err(invalid("robot.side_length_m", "must be positive"));
        }
        if self.robot.split_gap_m < 0.0 {
            return Err(invalid("robot.split_gap_m", "must be non-negative"));
        }
        if self.robot.speed_bound_mps <= 0.0 {
            return Err(invalid("robot.speed_bound_mps", "must be positive"));
        }
        if self.robot.waypoints.is_empty() {
            return Err(invalid("robot.waypoints", "need at least one waypoint"));
        }
        for w in self.robot.waypoints.windows(2) {
            if w[1].t <= w[0].t {
                return Err(invalid("robot.waypoints", "timestamps must strictly increase"));
            }
        }
        if self.beacons.is_empty() {
            return Err(invalid("beacons", "need at least one beacon"));
        }
        let mut ids: Vec<u32> = self.beacons.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.beacons.len() {
            return Err(invalid("beacons.id", "beacon ids must be unique"));
        }
        for b in &self.beacons {
            if b.range_m <= 0.0 {
                return Err(invalid("beacons.range_m", "must be positive"));
            }
            if !(0.0..180.0).contains(&b.aperture_deg) || b.aperture_deg == 0.0 {
                return Err(invalid("beacons.aperture_deg", "must be in (0, 180)"));
            }
            if b.side_length_m <= 0.0 {
                return Err(invalid("beacons.side_length_m", "must be positive"));
            }
        }
        if self.sim.cycles == 0 {
            return Err(invalid("sim.cycles", "must be at least 1"));
        }
        if self.sim.multipath_order > 1 {
            return Err(invalid("sim.multipath_order", "only orders 0 and 1 are modeled"));
        }
        Ok(())
    }

    pub fn build_room(&self) -> Result<Room, ScenarioError> {
        let verts: Vec<Vec2> = self.room.vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
        Room::new(verts).map_err(|e| invalid("room.vertices", e.to_string()))
    }

    pub fn build_beacons(&self) -> Result<Vec<BeaconNode>, ScenarioError> {
        self.beacons
            .iter()
            .map(|b| {
                let ring = build_beacon_quarter(
                    b.side_length_m,
                    Pose2::new(Vec2::new(b.x, b.y), b.orientation_deg.to_radians()),
                    b.aperture_deg.to_radians(),
                    b.range_m,
                )
                .map_err(|e| invalid("beacons", e.to_string()))?;
                Ok(BeaconNode { id: b.id, ring, height: b.height_m })
            })
            .collect()
    }

    /// Robot ring at a given pose, using the scenario's ring dimensions.
    pub fn build_robot(&self, pose: Pose2) -> Result<BuiltRing, ScenarioError> {
        build_ring(&RingSpec::new(
            self.robot.n_sides,
            self.robot.side_length_m,
            self.robot.split_gap_m,
            pose,
        ))
        .map_err(|e| invalid("robot", e.to_string()))
    }

    /// Interpolated robot pose at time `t` (clamped to the path's ends);
    /// heading follows the travel direction of the active segment.
    pub fn robot_pose_at(&self, t: f64) -> Pose2 {
        let wps = &self.robot.waypoints;
        if wps.len() == 1 || t <= wps[0].t {
            let h = if wps.len() > 1 {
                segment_heading(&wps[0], &wps[1])
            } else {
                0.0
            };
            return Pose2::new(Vec2::new(wps[0].x, wps[0].y), h);
        }
        for w in wps.windows(2) {
            if t <= w[1].t {
                let f = (t - w[0].t) / (w[1].t - w[0].t);
                let p = Vec2::new(w[0].x + f * (w[1].x - w[0].x), w[0].y + f * (w[1].y - w[0].y));
                return Pose2::new(p, segment_heading(&w[0], &w[1]));
            }
        }
        let last = wps.last().unwrap();
        let h = segment_heading(&wps[wps.len() - 2], last);
        Pose2::new(Vec2::new(last.x, last.y), h)
    }
}

fn segment_heading(a: &Waypoint, b: &Waypoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dy.atan2(dx)
    }
}

/// A small ready-to-run scenario: rectangular room, three wall beacons, a
/// straight robot pass down the middle.
pub fn default_scenario() -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        seed: default_seed(),
        room: RoomConfig {
            vertices: vec![[0.0, 0.0], [6.0, 0.0], [6.0, 5.0], [0.0, 5.0]],
        },
        air: AirModel::new(20.0),
        noise: NoiseModel::default(),
        rf: RfConfig::default(),
        pacing: default_pacing(),
        filter: default_filter(),
        robot: RobotConfig {
            n_sides: default_robot_sides(),
            side_length_m: default_robot_side(),
            split_gap_m: 0.0,
            height_m: default_robot_height(),
            speed_bound_mps: default_speed_bound(),
            waypoints: vec![
                Waypoint { t: 0.0, x: 1.0, y: 2.5 },
                Waypoint { t: 20.0, x: 5.0, y: 2.5 },
            ],
        },
        beacons: vec![
            BeaconConfig {
                id: 1,
                x: 0.05,
                y: 2.5,
                orientation_deg: 0.0,
                height_m: default_beacon_height(),
                side_length_m: default_beacon_side(),
                aperture_deg: default_aperture_deg(),
                range_m: default_range(),
                low_power: false,
            },
            BeaconConfig {
                id: 2,
                x: 1.5,
                y: 4.95,
                orientation_deg: -90.0,
                height_m: default_beacon_height(),
                side_length_m: default_beacon_side(),
                aperture_deg: default_aperture_deg(),
                range_m: default_range(),
                low_power: false,
            },
            BeaconConfig {
                id: 3,
                x: 4.5,
                y: 0.05,
                orientation_deg: 90.0,
                height_m: default_beacon_height(),
                side_length_m: default_beacon_side(),
                aperture_deg: default_aperture_deg(),
                range_m: default_range(),
                low_power: false,
            },
        ],
        sim: SimConfig::default(),
    }
}
