//! Deterministic end-to-end simulation: robot path -> measurement cycles ->
//! echo filtering -> distance smoothing -> position fixes, plus run summary
//! statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::filters::FilterState;
use crate::geometry::{Vec2, Vec3};
use crate::protocol::{
    lowpower_session, next_cycle_delay, run_cycle, CycleContext, GhostFilter, LowPowerConfig,
    LowPowerStimuli, PendingEcho, PowerMode, PowerProfile, RejectReason, WakeRequest,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::solver::{fix_pipeline, RangeObservation, SolveMode};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("sound speed: {0}")]
    Channel(#[from] crate::channel::ChannelError),
}

/// One beacon measurement as logged: raw sensing plus processing verdicts.
#[derive(Debug, Clone)]
pub struct MeasureRow {
    pub cycle_id: u64,
    pub emission_time: f64,
    pub beacon_id: u32,
    pub transducer_index: usize,
    pub tof_s: f64,
    /// Transducer-to-transducer distance the ToF converts to.
    pub raw_distance_m: f64,
    /// Raw plus both effective apothems: the center-to-center estimate.
    pub corrected_m: f64,
    /// Smoothed corrected distance, when the measurement was accepted.
    pub filtered_m: Option<f64>,
    pub path: String,
    pub accepted: bool,
    pub reject_reason: Option<&'static str>,
    /// Ground-truth center-to-center slant distance.
    pub true_distance_m: f64,
}

/// One position fix with its ground truth.
#[derive(Debug, Clone)]
pub struct FixRow {
    pub cycle_id: u64,
    pub emission_time: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub true_x: f64,
    pub true_y: f64,
    pub error_m: f64,
    pub chosen_by: &'static str,
    pub n_beacons: usize,
}

#[derive(Debug, Clone)]
pub struct BeaconStats {
    pub beacon_id: u32,
    pub measures: usize,
    pub accepted: usize,
    pub ghost_rejections: usize,
    /// Charge drawn over the run at the always-on receiver current.
    pub energy_mah: f64,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub cycles_run: u64,
    pub elapsed_s: f64,
    pub cycle_rate_hz: f64,
    pub fixes: usize,
    pub median_fix_error_m: f64,
    pub p95_fix_error_m: f64,
    pub ghost_rejections: usize,
    pub beacons: Vec<BeaconStats>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub measures: Vec<MeasureRow>,
    pub fixes: Vec<FixRow>,
    pub summary: Summary,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

/// Run a scenario to completion. Identical scenarios and seeds produce
/// identical outputs, byte for byte once serialized.
pub fn run(scenario: &Scenario) -> Result<SimOutput, SimError> {
    scenario.validate()?;
    let room = scenario.build_room()?;
    let beacons = scenario.build_beacons()?;
    let walls = room.walls();
    let c = scenario.air.sound_speed()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut ghost = GhostFilter::for_noise(scenario.robot.speed_bound_mps, &scenario.noise, c);
    let mut filters: Vec<FilterState> = beacons
        .iter()
        .map(|_| FilterState::new(scenario.filter))
        .collect();
    // emission time of each beacon's last accepted measure; a filter is only
    // reset after a real dropout, not a one-cycle ghost gap
    const REACQUIRE_RESET_S: f64 = 1.0;
    let mut last_seen: Vec<Option<f64>> = vec![None; beacons.len()];
    let mut stats: Vec<BeaconStats> = beacons
        .iter()
        .map(|b| BeaconStats {
            beacon_id: b.id,
            measures: 0,
            accepted: 0,
            ghost_rejections: 0,
            energy_mah: 0.0,
        })
        .collect();

    let max_range = beacons.iter().map(|b| b.ring.range).fold(0.0, f64::max);
    let mut pending: Vec<PendingEcho> = Vec::new();
    let mut measures = Vec::new();
    let mut fixes = Vec::new();
    let mut previous_fix: Option<Vec2> = None;
    let mut t = 0.0;

    for cycle_id in 0..scenario.sim.cycles {
        let pose = scenario.robot_pose_at(t);
        let robot = scenario.build_robot(pose)?;
        let ctx = CycleContext {
            beacons: &beacons,
            robot: &robot,
            robot_height: scenario.robot.height_m,
            walls: &walls,
            sound_speed: c,
            noise: &scenario.noise,
            sync_rf: &scenario.rf.sync,
            report_latency_s: scenario.rf.report_latency_s,
            max_order: scenario.sim.multipath_order,
        };
        let cycle = run_cycle(&ctx, cycle_id, t, &mut pending, &mut rng);

        let mut observations: Vec<RangeObservation> = Vec::new();
        for rec in &cycle.records {
            let bi = beacons
                .iter()
                .position(|b| b.id == rec.beacon_id)
                .expect("record refers to a scenario beacon");
            let beacon = &beacons[bi];
            let raw = rec.tof_s * c;
            let a_robot = robot.sites[rec.emitter_index].effective_apothem;
            let a_beacon = beacon.ring.sites[rec.transducer_index].effective_apothem;
            let dh = beacon.height - scenario.robot.height_m;
            // the apothem offsets are horizontal, so correct in the plane:
            // slant -> planar transducer gap -> add apothems -> back to slant
            let planar_raw_sq = raw * raw - dh * dh;
            let corrected = if planar_raw_sq > 0.0 {
                let p = planar_raw_sq.sqrt() + a_robot + a_beacon;
                (p * p + dh * dh).sqrt()
            } else {
                raw + a_robot + a_beacon
            };
            let planar = pose.position.distance(beacon.ring.center);
            let true_distance = (planar * planar + dh * dh).sqrt();

            stats[bi].measures += 1;
            let verdict = if scenario.sim.ghost_filter {
                ghost.evaluate(rec.beacon_id, rec.detect_time, corrected, rec.transducer_index)
            } else {
                Ok(())
            };
            let (accepted, reject_reason) = match verdict {
                Ok(()) => (true, None),
                Err(RejectReason::SpeedBound) => (false, Some("speed_bound")),
                Err(RejectReason::EchoAngle) => (false, Some("echo_angle")),
            };
            let filtered = if accepted {
                if last_seen[bi].map_or(false, |t0| t - t0 > REACQUIRE_RESET_S) {
                    // beacon was out of contact long enough for its state
                    // to go stale: start the filter over on reacquisition
                    filters[bi].reset();
                }
                last_seen[bi] = Some(t);
                stats[bi].accepted += 1;
                let f = filters[bi].step(corrected);
                observations.push(RangeObservation {
                    beacon_id: rec.beacon_id,
                    beacon_position: Vec3::new(
                        beacon.ring.center.x,
                        beacon.ring.center.y,
                        beacon.height,
                    ),
                    distance: f,
                });
                Some(f)
            } else {
                stats[bi].ghost_rejections += 1;
                None
            };
            measures.push(MeasureRow {
                cycle_id,
                emission_time: cycle.emission_time,
                beacon_id: rec.beacon_id,
                transducer_index: rec.transducer_index,
                tof_s: rec.tof_s,
                raw_distance_m: raw,
                corrected_m: corrected,
                filtered_m: filtered,
                path: rec.path.label(),
                accepted,
                reject_reason,
                true_distance_m: true_distance,
            });
        }

        if observations.len() >= 2 {
            if let Ok(fix) = fix_pipeline(
                &observations,
                scenario.robot.height_m,
                SolveMode::Planar,
                Some(&room),
                previous_fix,
            ) {
                let err = fix.position.xy().distance(pose.position);
                fixes.push(FixRow {
                    cycle_id,
                    emission_time: cycle.emission_time,
                    x: fix.position.x,
                    y: fix.position.y,
                    z: fix.position.z,
                    true_x: pose.position.x,
                    true_y: pose.position.y,
                    error_m: err,
                    chosen_by: fix.chosen_by.label(),
                    n_beacons: fix.n_beacons,
                });
                previous_fix = Some(fix.position.xy());
            }
        }

        let delay = next_cycle_delay(
            scenario.pacing,
            max_range,
            c,
            &cycle,
            scenario.rf.ack_overhead_s,
        )
        .max(cycle.completion_time - cycle.emission_time);
        t += delay;
    }

    let elapsed = t;
    let profile = PowerProfile::default();
    for (s, b) in stats.iter_mut().zip(beacons.iter()) {
        let cfg = &scenario.beacons[beacons.iter().position(|x| x.id == b.id).unwrap()];
        s.energy_mah = if cfg.low_power {
            // one wake at t=0, measurement traffic for the whole run
            let stimuli = LowPowerStimuli {
                wake_requests: vec![WakeRequest::broadcast(0.0, &LowPowerConfig::default(), vec![b.id])],
                measurement_requests: vec![elapsed.min(1.0)],
                releases: vec![elapsed],
            };
            let trace = lowpower_session(b.id, &LowPowerConfig::default(), &stimuli, elapsed.max(1.0));
            crate::protocol::energy_used_mah(&trace.intervals, &profile)
        } else {
            elapsed / 3600.0 * profile.current_ma(PowerMode::Idle16MHz)
        };
    }

    let mut errs: Vec<f64> = fixes.iter().map(|f| f.error_m).collect();
    errs.sort_by(f64::total_cmp);
    let ghost_rejections = stats.iter().map(|s| s.ghost_rejections).sum();
    let summary = Summary {
        cycles_run: scenario.sim.cycles,
        elapsed_s: elapsed,
        cycle_rate_hz: if elapsed > 0.0 {
            scenario.sim.cycles as f64 / elapsed
        } else {
            0.0
        },
        fixes: fixes.len(),
        median_fix_error_m: percentile(&errs, 0.5),
        p95_fix_error_m: percentile(&errs, 0.95),
        ghost_rejections,
        beacons: stats,
    };
    Ok(SimOutput { measures, fixes, summary })
}
