//! Acoustic and RF propagation: temperature-dependent sound speed, cone and
//! range gating, first-order image-source reflections, time-of-flight noise
//! and RF sync decode latency.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, mirror_across_wall, Segment, Vec2};
use crate::ring::BuiltRing;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("temperature {0} C outside the model's -40..60 C range")]
    TemperatureOutOfRange(f64),
}

/// Linear sound-speed model in air: c = 331.4 + 0.606*T (T in Celsius).
pub fn sound_speed(temperature_c: f64) -> Result<f64, ChannelError> {
    if !(-40.0..=60.0).contains(&temperature_c) {
        return Err(ChannelError::TemperatureOutOfRange(temperature_c));
    }
    Ok(331.4 + 0.606 * temperature_c)
}

/// Ambient air state. Humidity is carried for configuration completeness but
/// the default speed model ignores it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AirModel {
    pub temperature_c: f64,
    #[serde(default)]
    pub humidity: Option<f64>,
}

impl AirModel {
    pub fn new(temperature_c: f64) -> Self {
        AirModel { temperature_c, humidity: None }
    }

    pub fn sound_speed(&self) -> Result<f64, ChannelError> {
        sound_speed(self.temperature_c)
    }
}

/// Time-of-flight measurement noise: Gaussian jitter plus occasional positive
/// outliers of a few centimeters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Std of the Gaussian ToF jitter in seconds.
    pub tof_sigma_s: f64,
    /// Probability that a measure picks up an extra echo-like delay.
    pub outlier_rate: f64,
    /// Uniform range (meters) of the extra path length of an outlier.
    pub outlier_extra_m: (f64, f64),
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            tof_sigma_s: 25e-6,
            outlier_rate: 0.10,
            outlier_extra_m: (0.01, 0.05),
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel { tof_sigma_s: 0.0, outlier_rate: 0.0, outlier_extra_m: (0.0, 0.0) }
    }

    /// Apply jitter and the occasional outlier delay to a clean ToF.
    pub fn apply<R: Rng>(&self, tof: f64, sound_speed: f64, rng: &mut R) -> f64 {
        let mut t = tof;
        if self.tof_sigma_s > 0.0 {
            let n = Normal::new(0.0, self.tof_sigma_s).expect("sigma >= 0");
            t += n.sample(rng);
        }
        if self.outlier_rate > 0.0 && rng.gen::<f64>() < self.outlier_rate {
            let (lo, hi) = self.outlier_extra_m;
            let extra = if hi > lo {
                Uniform::new_inclusive(lo, hi).sample(rng)
            } else {
                lo
            };
            t += extra / sound_speed;
        }
        t
    }
}

/// Sync-link hardware model: a bare OOK carrier detector has an essentially
/// constant decode latency; a packet radio's protocol stack adds a wide,
/// variable one.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RfModel {
    SimpleOok {
        latency_s: f64,
    },
    PacketRadio {
        min_latency_s: f64,
        max_latency_s: f64,
    },
}

impl RfModel {
    pub fn simple_ook() -> Self {
        RfModel::SimpleOok { latency_s: 5e-6 }
    }

    pub fn packet_radio() -> Self {
        RfModel::PacketRadio { min_latency_s: 50e-6, max_latency_s: 500e-6 }
    }

    pub fn decode_latency<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            RfModel::SimpleOok { latency_s } => latency_s,
            RfModel::PacketRadio { min_latency_s, max_latency_s } => {
                if max_latency_s > min_latency_s {
                    Uniform::new_inclusive(min_latency_s, max_latency_s).sample(rng)
                } else {
                    min_latency_s
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    Direct,
    /// First-order reflection off the indexed wall.
    Reflected(usize),
}

impl PathKind {
    pub fn label(&self) -> String {
        match self {
            PathKind::Direct => "direct".to_string(),
            PathKind::Reflected(w) => format!("reflected_wall_{w}"),
        }
    }
}

/// One ultrasonic wavefront reaching a receiving transducer.
#[derive(Debug, Clone, Copy)]
pub struct Arrival {
    pub emitter_index: usize,
    pub receiver_index: usize,
    pub tof: f64,
    pub path: PathKind,
    pub path_length: f64,
}

fn cone_admits(ring: &BuiltRing, site_index: usize, toward: Vec2) -> bool {
    let site = &ring.sites[site_index];
    let v = toward - site.position;
    if v.norm() == 0.0 {
        return false;
    }
    angle_diff(v.angle(), site.outward_normal).abs() <= ring.aperture / 2.0 + 1e-9
}

fn unblocked(a: Vec2, b: Vec2, walls: &[Segment], skip: Option<usize>) -> bool {
    let ray = Segment::new(a, b);
    walls
        .iter()
        .enumerate()
        .all(|(i, w)| Some(i) == skip || !w.crosses(&ray, 1e-9))
}

/// Enumerate every wavefront from the emitter ring's transducers that can
/// reach the receiver ring's transducers: direct paths, plus (when
/// `max_order >= 1`) single-bounce reflections off each wall. Both the
/// emission and the arrival direction must fall inside the respective cones
/// and the total path must stay within both transducers' reach.
pub fn propagate(
    emitter: &BuiltRing,
    receiver: &BuiltRing,
    walls: &[Segment],
    sound_speed: f64,
    max_order: u8,
) -> Vec<Arrival> {
    let reach = emitter.range.min(receiver.range);
    let mut arrivals = Vec::new();
    for es in &emitter.sites {
        for rs in &receiver.sites {
            let d = es.position.distance(rs.position);
            if d > 0.0
                && d <= reach
                && cone_admits(emitter, es.index, rs.position)
                && cone_admits(receiver, rs.index, es.position)
                && unblocked(es.position, rs.position, walls, None)
            {
                arrivals.push(Arrival {
                    emitter_index: es.index,
                    receiver_index: rs.index,
                    tof: d / sound_speed,
                    path: PathKind::Direct,
                    path_length: d,
                });
            }
            if max_order == 0 {
                continue;
            }
            for (wi, wall) in walls.iter().enumerate() {
                let Ok(image) = mirror_across_wall(es.position, wall) else {
                    continue;
                };
                let image_ray = Segment::new(image, rs.position);
                // reflection point must land on the wall segment itself
                let Some((_, u)) = wall.intersect_params(&image_ray, 1e-9) else {
                    continue;
                };
                if !(0.0..=1.0).contains(&u) {
                    continue;
                }
                let bounce = image_ray.point_at(u);
                let len = es.position.distance(bounce) + bounce.distance(rs.position);
                if len > reach || len <= 0.0 {
                    continue;
                }
                if !cone_admits(emitter, es.index, bounce) || !cone_admits(receiver, rs.index, bounce) {
                    continue;
                }
                if !unblocked(es.position, bounce, walls, Some(wi))
                    || !unblocked(bounce, rs.position, walls, Some(wi))
                {
                    continue;
                }
                arrivals.push(Arrival {
                    emitter_index: es.index,
                    receiver_index: rs.index,
                    tof: len / sound_speed,
                    path: PathKind::Reflected(wi),
                    path_length: len,
                });
            }
        }
    }
    arrivals
}

/// The single earliest arrival across all transducer pairs, if any. A beacon
/// stops its timer on the first detection, so this is what it records.
pub fn earliest_arrival(arrivals: &[Arrival]) -> Option<Arrival> {
    arrivals
        .iter()
        .copied()
        .min_by(|a, b| a.tof.total_cmp(&b.tof))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{build_beacon_quarter, build_ring, Pose2, RingSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn omni_ring(center: Vec2, heading: f64) -> BuiltRing {
        build_ring(&RingSpec::new(12, 0.016, 0.0, Pose2::new(center, heading))).unwrap()
    }

    #[test]
    fn sound_speed_model() {
        close(sound_speed(20.0).unwrap(), 343.52, 0.03);
        close(sound_speed(0.0).unwrap(), 331.4, 1e-12);
        close(sound_speed(25.0).unwrap(), 346.55, 1e-9);
        assert!(sound_speed(-41.0).is_err());
        assert!(sound_speed(61.0).is_err());
    }

    #[test]
    fn facing_pair_tof() {
        // centers 3.435 m apart at 20 C: transducer path is a hair shorter
        // than the center distance, so compare the transducer path directly
        let c = sound_speed(20.0).unwrap();
        let a = omni_ring(Vec2::new(0.0, 0.0), 0.0);
        let b = build_beacon_quarter(0.0249, Pose2::new(Vec2::new(3.435, 0.0), PI), PI / 6.0, 9.0).unwrap();
        let arrivals = propagate(&a, &b, &[], c, 0);
        let first = earliest_arrival(&arrivals).unwrap();
        close(first.tof, first.path_length / c, 1e-15);
        close(first.tof * c, first.path_length, 1e-12);
        // a 3.435 m transducer separation gives exactly 10 ms at 343.5 m/s
        close(3.435 / 343.5, 10.0e-3, 1e-12);
    }

    #[test]
    fn image_source_reflection() {
        // emitter near (1,1), receiver near (4,1), wall along y=0: direct
        // ~3 m plus a reflected path ~sqrt(13) m
        let wall = Segment::new(Vec2::new(-10.0, 0.0), Vec2::new(20.0, 0.0));
        let a = omni_ring(Vec2::new(1.0, 1.0), 0.0);
        let b = omni_ring(Vec2::new(4.0, 1.0), 0.0);
        let c = 343.0;
        let arrivals = propagate(&a, &b, &[wall], c, 1);
        let direct: Vec<_> = arrivals.iter().filter(|x| x.path == PathKind::Direct).collect();
        let refl: Vec<_> = arrivals
            .iter()
            .filter(|x| matches!(x.path, PathKind::Reflected(_)))
            .collect();
        assert!(!direct.is_empty());
        assert!(!refl.is_empty());
        let best_direct = direct.iter().map(|x| x.path_length).fold(f64::INFINITY, f64::min);
        let best_refl = refl.iter().map(|x| x.path_length).fold(f64::INFINITY, f64::min);
        // paths run transducer-to-transducer, so allow the ~3 cm apothems
        close(best_direct, 3.0, 0.1);
        close(best_refl, 13.0_f64.sqrt(), 0.1);
    }

    #[test]
    fn direct_always_earliest_when_present() {
        let wall = Segment::new(Vec2::new(-10.0, 0.0), Vec2::new(20.0, 0.0));
        let a = omni_ring(Vec2::new(1.0, 1.5), 0.3);
        let b = omni_ring(Vec2::new(5.0, 2.0), -0.7);
        let arrivals = propagate(&a, &b, &[wall], 343.0, 1);
        let first = earliest_arrival(&arrivals).unwrap();
        assert_eq!(first.path, PathKind::Direct);
    }

    #[test]
    fn out_of_range_yields_nothing() {
        let a = omni_ring(Vec2::new(0.0, 0.0), 0.0);
        let b = omni_ring(Vec2::new(9.5, 0.0), 0.0);
        assert!(propagate(&a, &b, &[], 343.0, 1).is_empty());
    }

    #[test]
    fn wall_blocks_direct_path() {
        let wall = Segment::new(Vec2::new(2.0, -1.0), Vec2::new(2.0, 3.0));
        let a = omni_ring(Vec2::new(0.0, 1.0), 0.0);
        let b = omni_ring(Vec2::new(4.0, 1.0), 0.0);
        let arrivals = propagate(&a, &b, &[wall], 343.0, 1);
        assert!(arrivals.iter().all(|x| x.path != PathKind::Direct));
    }

    #[test]
    fn noise_identity_when_disabled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nm = NoiseModel::noiseless();
        assert_eq!(nm.apply(0.01, 343.0, &mut rng), 0.01);
    }

    #[test]
    fn noise_constant_outlier() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nm = NoiseModel { tof_sigma_s: 0.0, outlier_rate: 1.0, outlier_extra_m: (0.03, 0.03) };
        let t = nm.apply(0.01, 343.0, &mut rng);
        close(t, 0.01 + 0.03 / 343.0, 1e-12);
    }

    #[test]
    fn noise_distance_std_matches_8_575mm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nm = NoiseModel { tof_sigma_s: 25e-6, outlier_rate: 0.0, outlier_extra_m: (0.0, 0.0) };
        let c = 343.0;
        let n = 10_000;
        let errors: Vec<f64> = (0..n).map(|_| (nm.apply(0.01, c, &mut rng) - 0.01) * c).collect();
        let mean = errors.iter().sum::<f64>() / n as f64;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        let expect = 25e-6 * c; // 8.575 mm
        assert!((std - expect).abs() / expect < 0.05, "std {std} vs {expect}");
    }

    #[test]
    fn noise_reproducible_under_seed() {
        let nm = NoiseModel::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..100).map(|_| nm.apply(0.01, 343.0, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rf_latency_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(RfModel::simple_ook().decode_latency(&mut rng), 5e-6);
        for _ in 0..100 {
            let l = RfModel::packet_radio().decode_latency(&mut rng);
            assert!((50e-6..=500e-6).contains(&l));
        }
    }
}
