//! Polygonal transducer arrays: the mobile robot's split emitter ring and the
//! beacons' quarter-polygon receiver arrays, with apothem corrections and the
//! orientation-dependent measurement error they introduce.
//!
//! Transducers sit at the midpoints of the polygon sides, facing outward.
//! Ranging measures transducer-to-transducer; adding both effective apothems
//! approximates the center-to-center distance. The approximation is exact
//! only when the chosen transducers are collinear with both centers, so the
//! correction over-estimates by an amount that depends on the relative
//! orientation (and weakly on distance).

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{angle_diff, Vec2};

/// Default transducer cone aperture (radians): 30 degrees.
pub const DEFAULT_APERTURE: f64 = 30.0 * PI / 180.0;
/// Linear reach of the cheap transducer class (meters).
pub const DEFAULT_RANGE: f64 = 9.0;
/// Angular pitch of the 4 transducers on a quarter-of-an-octagon beacon:
/// 90 deg / 4. (Sometimes quoted as 22.25 deg; 22.5 is what the geometry gives.)
pub const BEACON_TRANSDUCER_PITCH: f64 = 90.0 * PI / 180.0 / 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum RingError {
    #[error("polygon needs at least 3 sides, got {0}")]
    TooFewSides(usize),
    #[error("side length must be positive, got {0}")]
    BadSideLength(f64),
    #[error("split gap must be non-negative, got {0}")]
    BadGap(f64),
    #[error("no mutually visible transducer pair between the two rings")]
    NoVisiblePair,
}

/// Planar pose: position plus heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Pose2 { position, heading }
    }
}

/// Regular polygon transducer ring, optionally split into two half-rings
/// displaced `split_gap` apart along the heading axis.
#[derive(Debug, Clone, Copy)]
pub struct RingSpec {
    pub n_sides: usize,
    pub side_length: f64,
    pub split_gap: f64,
    pub pose: Pose2,
    pub aperture: f64,
    pub range: f64,
}

impl RingSpec {
    pub fn new(n_sides: usize, side_length: f64, split_gap: f64, pose: Pose2) -> Self {
        RingSpec {
            n_sides,
            side_length,
            split_gap,
            pose,
            aperture: DEFAULT_APERTURE,
            range: DEFAULT_RANGE,
        }
    }

    /// Side length that yields the requested apothem for an `n`-gon.
    pub fn side_for_apothem(apothem: f64, n: usize) -> f64 {
        2.0 * apothem * (PI / n as f64).tan()
    }
}

/// One transducer: world position, outward facing direction and its distance
/// from the (combined) ring center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransducerSite {
    pub index: usize,
    pub position: Vec2,
    pub outward_normal: f64,
    pub effective_apothem: f64,
}

/// A ring with its sites laid out in world coordinates.
#[derive(Debug, Clone)]
pub struct BuiltRing {
    pub center: Vec2,
    pub heading: f64,
    pub sites: Vec<TransducerSite>,
    pub aperture: f64,
    pub range: f64,
}

/// Circumradius of a regular `n`-gon with side `l`: l / (2 sin(pi/n)).
pub fn circumradius_from_side(l: f64, n: usize) -> Result<f64, RingError> {
    if n < 3 {
        return Err(RingError::TooFewSides(n));
    }
    if l <= 0.0 {
        return Err(RingError::BadSideLength(l));
    }
    Ok(l / (2.0 * (PI / n as f64).sin()))
}

/// Apothem of a regular `n`-gon with side `l`: sqrt(r^2 - (l/2)^2).
pub fn apothem(l: f64, n: usize) -> Result<f64, RingError> {
    let r = circumradius_from_side(l, n)?;
    Ok((r * r - l * l / 4.0).sqrt())
}

/// Lay out every transducer of a (possibly split) ring.
///
/// Sites sit at side midpoints, i.e. at angle `heading + 2*pi*k/n` and radius
/// `apothem` before the split. When `split_gap > 0` the two half-rings are
/// displaced +/- gap/2 along the heading axis; a site whose normal lies on
/// that axis gains exactly gap/2 of effective apothem. Sites exactly on the
/// split plane join the half on their own +y/-y side (local frame).
pub fn build_ring(spec: &RingSpec) -> Result<BuiltRing, RingError> {
    if spec.n_sides < 3 {
        return Err(RingError::TooFewSides(spec.n_sides));
    }
    if spec.side_length <= 0.0 {
        return Err(RingError::BadSideLength(spec.side_length));
    }
    if spec.split_gap < 0.0 {
        return Err(RingError::BadGap(spec.split_gap));
    }
    let a = apothem(spec.side_length, spec.n_sides)?;
    let n = spec.n_sides;
    let mut sites = Vec::with_capacity(n);
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let mut local = Vec2::from_angle(theta) * a;
        if spec.split_gap > 0.0 {
            let sign = if local.x.abs() > 1e-12 {
                local.x.signum()
            } else {
                local.y.signum()
            };
            local.x += sign * spec.split_gap / 2.0;
        }
        let effective_apothem = local.norm();
        let position = spec.pose.position + local.rotated(spec.pose.heading);
        sites.push(TransducerSite {
            index: k,
            position,
            outward_normal: spec.pose.heading + theta,
            effective_apothem,
        });
    }
    Ok(BuiltRing {
        center: spec.pose.position,
        heading: spec.pose.heading,
        sites,
        aperture: spec.aperture,
        range: spec.range,
    })
}

/// Beacon array: a quarter of an 8-sided polygon, 4 receive transducers
/// spanning 90 degrees around the heading, all at the octagon apothem.
pub fn build_beacon_quarter(
    side_length: f64,
    pose: Pose2,
    aperture: f64,
    range: f64,
) -> Result<BuiltRing, RingError> {
    let a = apothem(side_length, 8)?;
    let offsets = [-1.5, -0.5, 0.5, 1.5];
    let sites = offsets
        .iter()
        .enumerate()
        .map(|(index, &m)| {
            let normal = pose.heading + m * BEACON_TRANSDUCER_PITCH;
            TransducerSite {
                index,
                position: pose.position + Vec2::from_angle(normal) * a,
                outward_normal: normal,
                effective_apothem: a,
            }
        })
        .collect();
    Ok(BuiltRing {
        center: pose.position,
        heading: pose.heading,
        sites,
        aperture,
        range,
    })
}

/// One transducer-to-transducer distance measurement between two rings.
#[derive(Debug, Clone, Copy)]
pub struct Measured {
    /// Transducer-to-transducer distance of the closest visible pair.
    pub raw: f64,
    /// Raw plus both effective apothems: the center-to-center estimate.
    pub corrected: f64,
    pub site_a: usize,
    pub site_b: usize,
}

fn mutually_visible(a: &BuiltRing, sa: &TransducerSite, b: &BuiltRing, sb: &TransducerSite) -> bool {
    let v = sb.position - sa.position;
    let d = v.norm();
    if d > a.range.min(b.range) || d == 0.0 {
        return false;
    }
    angle_diff(v.angle(), sa.outward_normal).abs() <= a.aperture / 2.0 + 1e-9
        && angle_diff((Vec2::new(0.0, 0.0) - v).angle(), sb.outward_normal).abs()
            <= b.aperture / 2.0 + 1e-9
}

/// Distance as the ranging hardware sees it: shortest transducer-to-transducer
/// path among mutually visible pairs, plus both apothem corrections.
pub fn measured_distance(a: &BuiltRing, b: &BuiltRing) -> Result<Measured, RingError> {
    let mut best: Option<Measured> = None;
    for sa in &a.sites {
        for sb in &b.sites {
            if !mutually_visible(a, sa, b, sb) {
                continue;
            }
            let raw = sa.position.distance(sb.position);
            if best.map_or(true, |m| raw < m.raw) {
                best = Some(Measured {
                    raw,
                    corrected: raw + sa.effective_apothem + sb.effective_apothem,
                    site_a: sa.index,
                    site_b: sb.index,
                });
            }
        }
    }
    best.ok_or(RingError::NoVisiblePair)
}

/// Which quantity an error curve sweeps.
#[derive(Debug, Clone, Copy)]
pub enum ErrorSweep {
    /// Sweep relative orientation (radians) at a fixed center distance (m).
    Angle { distance: f64 },
    /// Sweep center distance (m) at a fixed relative orientation (radians).
    Distance { angle: f64 },
}

/// Geometry used for the ring-error curves: a 12-sided robot ring and a
/// quarter-octagon beacon, both with the given apothems, boresight-aligned at
/// w = 0 and yawed together by the relative orientation w.
#[derive(Debug, Clone, Copy)]
pub struct ErrorCurveConfig {
    pub robot_apothem: f64,
    pub beacon_apothem: f64,
    pub robot_sides: usize,
    pub aperture: f64,
    pub range: f64,
}

impl Default for ErrorCurveConfig {
    fn default() -> Self {
        // 3 cm per array reproduces the reported 2 mm error at w = 15 deg.
        ErrorCurveConfig {
            robot_apothem: 0.03,
            beacon_apothem: 0.03,
            robot_sides: 12,
            aperture: DEFAULT_APERTURE,
            range: DEFAULT_RANGE,
        }
    }
}

/// Measurement error (corrected - true center distance) for one pose pair.
///
/// The beacon sits at the origin with one transducer boresighted on the robot
/// at w = 0; both arrays are yawed by `w`. Ground truth is the exact center
/// distance.
pub fn orientation_error(cfg: &ErrorCurveConfig, distance: f64, w: f64) -> Result<f64, RingError> {
    let beacon = build_beacon_quarter(
        RingSpec::side_for_apothem(cfg.beacon_apothem, 8),
        // +pitch/2 puts site 1's normal exactly on the +x boresight at w = 0
        Pose2::new(Vec2::new(0.0, 0.0), BEACON_TRANSDUCER_PITCH / 2.0 + w),
        cfg.aperture,
        cfg.range,
    )?;
    let mut robot_spec = RingSpec::new(
        cfg.robot_sides,
        RingSpec::side_for_apothem(cfg.robot_apothem, cfg.robot_sides),
        0.0,
        Pose2::new(Vec2::new(distance, 0.0), w),
    );
    robot_spec.aperture = cfg.aperture;
    robot_spec.range = cfg.range;
    let robot = build_ring(&robot_spec)?;
    let m = measured_distance(&robot, &beacon)?;
    Ok(m.corrected - distance)
}

/// Tabulate (sweep value, corrected - true) over an inclusive sweep.
pub fn error_curve(
    cfg: &ErrorCurveConfig,
    sweep: ErrorSweep,
    start: f64,
    end: f64,
    steps: usize,
) -> Result<Vec<(f64, f64)>, RingError> {
    let mut rows = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let v = start + (end - start) * i as f64 / steps.max(1) as f64;
        let err = match sweep {
            ErrorSweep::Angle { distance } => orientation_error(cfg, distance, v)?,
            ErrorSweep::Distance { angle } => orientation_error(cfg, v, angle)?,
        };
        rows.push((v, err));
    }
    Ok(rows)
}
