//! Measurement-cycle state machines and energy accounting: RF sync, ToF
//! timing, serialized report collection, the two cycle-pacing algorithms,
//! ghost-echo rejection and the low-power beacon wake/sleep protocol.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::channel::{propagate, Arrival, NoiseModel, PathKind, RfModel};
use crate::geometry::Segment;
use crate::ring::BuiltRing;

/// Minimum wait between ultrasonic bursts so the previous pulse's energy
/// dissipates: 3 hundredths of a second.
pub const MIN_CYCLE_GUARD_S: f64 = 0.030;

/// Default time a beacon report occupies the shared packet radio.
pub const DEFAULT_REPORT_LATENCY_S: f64 = 2e-3;
/// Default radio overhead added after the last report before re-triggering.
pub const DEFAULT_ACK_OVERHEAD_S: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("battery capacity must be positive, got {0}")]
    BadCapacity(f64),
    #[error("average current is zero; battery life is unbounded")]
    ZeroCurrent,
}

// ---------------------------------------------------------------------------
// Power accounting
// ---------------------------------------------------------------------------

/// Microcontroller sleep/run modes with measured supply currents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PowerMode {
    PowerDownExternalCrystal,
    Idle16MHz,
    AdcNoiseReduction,
    PowerSave,
    Standby,
}

/// Current draw per mode (mA) plus pack capacity (mAh).
#[derive(Debug, Clone, Copy)]
pub struct PowerProfile {
    pub power_down_ma: f64,
    pub idle_ma: f64,
    pub adc_nr_ma: f64,
    pub power_save_ma: f64,
    pub standby_ma: f64,
    pub battery_capacity_mah: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        PowerProfile {
            power_down_ma: 0.03,
            idle_ma: 12.0,
            adc_nr_ma: 10.9,
            power_save_ma: 2.9,
            standby_ma: 1.3,
            battery_capacity_mah: 2000.0,
        }
    }
}

impl PowerProfile {
    pub fn current_ma(&self, mode: PowerMode) -> f64 {
        match mode {
            PowerMode::PowerDownExternalCrystal => self.power_down_ma,
            PowerMode::Idle16MHz => self.idle_ma,
            PowerMode::AdcNoiseReduction => self.adc_nr_ma,
            PowerMode::PowerSave => self.power_save_ma,
            PowerMode::Standby => self.standby_ma,
        }
    }
}

/// A contiguous stretch spent in one power mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeInterval {
    pub start: f64,
    pub end: f64,
    pub mode: PowerMode,
}

impl ModeInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Charge drawn over a duty trace: sum of duration x mode current.
pub fn energy_used_mah(intervals: &[ModeInterval], profile: &PowerProfile) -> f64 {
    intervals
        .iter()
        .map(|iv| iv.duration() / 3600.0 * profile.current_ma(iv.mode))
        .sum()
}

/// Battery life in hours at a constant current.
pub fn battery_life_constant(capacity_mah: f64, current_ma: f64) -> Result<f64, ProtocolError> {
    if capacity_mah <= 0.0 {
        return Err(ProtocolError::BadCapacity(capacity_mah));
    }
    if current_ma <= 0.0 {
        return Err(ProtocolError::ZeroCurrent);
    }
    Ok(capacity_mah / current_ma)
}

/// Battery life in hours over a repeating duty trace: capacity divided by
/// the time-weighted average current.
pub fn battery_life_duty(
    capacity_mah: f64,
    intervals: &[ModeInterval],
    profile: &PowerProfile,
) -> Result<f64, ProtocolError> {
    let total: f64 = intervals.iter().map(ModeInterval::duration).sum();
    if total <= 0.0 {
        return Err(ProtocolError::ZeroCurrent);
    }
    let avg = energy_used_mah(intervals, profile) / (total / 3600.0);
    battery_life_constant(capacity_mah, avg)
}

// ---------------------------------------------------------------------------
// Measurement cycles
// ---------------------------------------------------------------------------

/// Cycle-pacing algorithm: wait out the pulse, or re-trigger on the last
/// beacon confirmation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    AttenuationWait,
    AckGated,
}

/// One beacon as the simulator sees it: receiver array at a known pose and
/// mounting height.
#[derive(Debug, Clone)]
pub struct BeaconNode {
    pub id: u32,
    pub ring: BuiltRing,
    pub height: f64,
}

/// Everything a measurement cycle needs from the scenario.
pub struct CycleContext<'a> {
    pub beacons: &'a [BeaconNode],
    pub robot: &'a BuiltRing,
    pub robot_height: f64,
    pub walls: &'a [Segment],
    pub sound_speed: f64,
    pub noise: &'a NoiseModel,
    pub sync_rf: &'a RfModel,
    pub report_latency_s: f64,
    /// 0 disables multipath, 1 enables single-bounce echoes.
    pub max_order: u8,
}

/// What one beacon recorded during a cycle.
#[derive(Debug, Clone)]
pub struct BeaconRecord {
    pub beacon_id: u32,
    /// ToF as the beacon measured it: detection minus its own timer start,
    /// so the sync decode latency enters as a negative offset, plus noise.
    pub tof_s: f64,
    pub transducer_index: usize,
    /// Which robot ring transducer the detected wavefront left from.
    pub emitter_index: usize,
    pub path: PathKind,
    /// Absolute detection instant (noise-free, simulator ground truth).
    pub detect_time: f64,
    /// When the beacon's report cleared the shared packet radio.
    pub report_time: f64,
    /// True slant path length of the detected wavefront (ground truth).
    pub true_slant_m: f64,
}

#[derive(Debug, Clone)]
pub struct MeasurementCycle {
    pub cycle_id: u64,
    /// The single emission instant all beacon ToFs are measured against.
    pub emission_time: f64,
    pub records: Vec<BeaconRecord>,
    /// Absolute time the last report finished (= emission when empty).
    pub completion_time: f64,
}

/// A reflected wavefront still traveling when the cycle ended; it may be the
/// first thing a beacon hears next cycle.
#[derive(Debug, Clone, Copy)]
pub struct PendingEcho {
    pub beacon_index: usize,
    pub arrival_abs: f64,
    pub transducer_index: usize,
    pub emitter_index: usize,
    pub path: PathKind,
    pub slant_m: f64,
}

fn slant(path_2d: f64, dh: f64) -> f64 {
    (path_2d * path_2d + dh * dh).sqrt()
}

/// Run one sync -> pulse -> detect -> report round.
///
/// The robot broadcasts the sync and emits the ultrasonic burst from all ring
/// transducers at `emission_time`. Each beacon starts its timer after its own
/// RF decode latency, stops on the first wavefront it hears (which may be a
/// leftover echo from the previous burst in `pending_echoes`), and reports
/// back over the serialized packet radio. Planar propagation distances are
/// converted to slant paths with the beacon/robot mounting heights.
pub fn run_cycle<R: Rng>(
    ctx: &CycleContext<'_>,
    cycle_id: u64,
    emission_time: f64,
    pending_echoes: &mut Vec<PendingEcho>,
    rng: &mut R,
) -> MeasurementCycle {
    let mut detections: Vec<(usize, f64, Arrival, f64)> = Vec::new(); // (beacon idx, timer_start, arrival-as-slant, detect_abs)
    let mut next_echoes: Vec<PendingEcho> = Vec::new();

    for (bi, beacon) in ctx.beacons.iter().enumerate() {
        let decode = ctx.sync_rf.decode_latency(rng);
        let timer_start = emission_time + decode;
        let dh = beacon.height - ctx.robot_height;

        let arrivals = propagate(ctx.robot, &beacon.ring, ctx.walls, ctx.sound_speed, ctx.max_order);

        // (abs, transducer, emitter, path, slant)
        let mut best: Option<(f64, usize, usize, PathKind, f64)> = None;
        for a in &arrivals {
            let s = slant(a.path_length, dh);
            let abs = emission_time + s / ctx.sound_speed;
            if abs >= timer_start && best.map_or(true, |(t, ..)| abs < t) {
                best = Some((abs, a.receiver_index, a.emitter_index, a.path, s));
            }
            if let PathKind::Reflected(_) = a.path {
                next_echoes.push(PendingEcho {
                    beacon_index: bi,
                    arrival_abs: abs,
                    transducer_index: a.receiver_index,
                    emitter_index: a.emitter_index,
                    path: a.path,
                    slant_m: s,
                });
            }
        }
        for echo in pending_echoes.iter().filter(|e| e.beacon_index == bi) {
            if echo.arrival_abs >= timer_start && best.map_or(true, |(t, ..)| echo.arrival_abs < t) {
                best = Some((
                    echo.arrival_abs,
                    echo.transducer_index,
                    echo.emitter_index,
                    echo.path,
                    echo.slant_m,
                ));
            }
        }
        if let Some((abs, trans, emit, path, s)) = best {
            detections.push((
                bi,
                timer_start,
                Arrival {
                    emitter_index: emit,
                    receiver_index: trans,
                    tof: s / ctx.sound_speed,
                    path,
                    path_length: s,
                },
                abs,
            ));
        }
    }
    *pending_echoes = next_echoes;

    // reports go out in detection order over the shared medium
    detections.sort_by(|a, b| a.3.total_cmp(&b.3));
    let mut medium_free = emission_time;
    let mut records = Vec::with_capacity(detections.len());
    for (bi, timer_start, arrival, detect_abs) in detections {
        let clean_tof = detect_abs - timer_start;
        let tof_s = ctx.noise.apply(clean_tof, ctx.sound_speed, rng);
        let report_time = medium_free.max(detect_abs) + ctx.report_latency_s;
        medium_free = report_time;
        records.push(BeaconRecord {
            beacon_id: ctx.beacons[bi].id,
            tof_s,
            transducer_index: arrival.receiver_index,
            emitter_index: arrival.emitter_index,
            path: arrival.path,
            detect_time: detect_abs,
            report_time,
            true_slant_m: arrival.path_length,
        });
    }
    let completion_time = records
        .iter()
        .map(|r| r.report_time)
        .fold(emission_time, f64::max);
    MeasurementCycle { cycle_id, emission_time, records, completion_time }
}

/// Time to wait after a cycle before the next burst.
///
/// Attenuation-wait pacing always waits for the pulse to fade over its full
/// reach (never less than the 30 ms guard); ack-gated pacing re-triggers as
/// soon as the last confirmation is in, plus a small radio overhead.
pub fn next_cycle_delay(
    pacing: Pacing,
    max_range: f64,
    sound_speed: f64,
    cycle: &MeasurementCycle,
    ack_overhead_s: f64,
) -> f64 {
    let guard = (max_range / sound_speed).max(MIN_CYCLE_GUARD_S);
    match pacing {
        Pacing::AttenuationWait => guard,
        Pacing::AckGated => {
            if cycle.records.is_empty() {
                guard
            } else {
                (cycle.completion_time - cycle.emission_time) + ack_overhead_s
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Ghost-echo rejection
// ---------------------------------------------------------------------------

/// Why a measurement was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Distance change inconsistent with the robot's speed bound.
    SpeedBound,
    /// Speed-bound violation together with a >= 2-sector transducer jump:
    /// the signature of a reflected arrival from a different direction.
    EchoAngle,
}

#[derive(Debug, Clone, Copy)]
struct LastAccepted {
    time: f64,
    distance: f64,
    transducer: usize,
}

/// Per-beacon consistency filter over consecutive accepted distances.
///
/// A measurement is rejected when the distance change since the last
/// accepted one exceeds `speed_bound * elapsed + tolerance`. The elapsed
/// term is capped at `max_gap_s` so a persistent echo cannot ride the
/// growing window back into acceptance while the history is stale. A
/// simultaneous transducer jump of >= 2 sectors marks the rejection as an
/// angle-flagged echo. Rejected measurements never update the history.
#[derive(Debug, Clone)]
pub struct GhostFilter {
    pub speed_bound_mps: f64,
    /// Fixed distance tolerance covering measurement noise (and, if modeled,
    /// the occasional positive echo-delay outlier).
    pub tolerance_m: f64,
    /// Cap on the elapsed-time widening of the acceptance window.
    pub max_gap_s: f64,
    last: HashMap<u32, LastAccepted>,
}

impl GhostFilter {
    pub fn new(speed_bound_mps: f64, tolerance_m: f64) -> Self {
        GhostFilter { speed_bound_mps, tolerance_m, max_gap_s: 0.5, last: HashMap::new() }
    }

    /// Tolerance sized for a noise model: 3 sigma of a consecutive-measure
    /// difference (sqrt(2) * sigma each) plus the worst modeled outlier, so
    /// direct measurements are virtually never rejected.
    pub fn for_noise(speed_bound_mps: f64, noise: &NoiseModel, sound_speed: f64) -> Self {
        let sigma_d = noise.tof_sigma_s * sound_speed;
        let mut tol = 3.0 * 2.0_f64.sqrt() * sigma_d;
        if noise.outlier_rate > 0.0 {
            tol += noise.outlier_extra_m.1;
        }
        Self::new(speed_bound_mps, tol)
    }

    pub fn evaluate(
        &mut self,
        beacon_id: u32,
        time: f64,
        distance: f64,
        transducer: usize,
    ) -> Result<(), RejectReason> {
        let verdict = match self.last.get(&beacon_id) {
            None => Ok(()), // no history: accept
            Some(prev) => {
                let elapsed = (time - prev.time).clamp(0.0, self.max_gap_s);
                let allowed = self.speed_bound_mps * elapsed + self.tolerance_m;
                if (distance - prev.distance).abs() > allowed {
                    let jump = transducer.abs_diff(prev.transducer);
                    if jump >= 2 {
                        Err(RejectReason::EchoAngle)
                    } else {
                        Err(RejectReason::SpeedBound)
                    }
                } else {
                    Ok(())
                }
            }
        };
        if verdict.is_ok() {
            self.last.insert(beacon_id, LastAccepted { time, distance, transducer });
        }
        verdict
    }

    pub fn forget(&mut self, beacon_id: u32) {
        self.last.remove(&beacon_id);
    }
}

// ---------------------------------------------------------------------------
// Low-power wake/sleep protocol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct LowPowerConfig {
    /// Power-down quantum between listen windows.
    pub sleep_quantum_s: f64,
    /// Radio-on listen window at the end of each quantum.
    pub listen_window_s: f64,
    /// Back to sleep after this long without a measurement request.
    pub inactivity_timeout_s: f64,
    /// How long the robot keeps broadcasting a wake request.
    pub wake_broadcast_s: f64,
}

impl Default for LowPowerConfig {
    fn default() -> Self {
        LowPowerConfig {
            sleep_quantum_s: 5.0,
            listen_window_s: 0.1,
            inactivity_timeout_s: 60.0,
            wake_broadcast_s: 5.0,
        }
    }
}

/// A wake broadcast naming the beacons it addresses.
#[derive(Debug, Clone)]
pub struct WakeRequest {
    pub start: f64,
    pub duration: f64,
    pub target_ids: Vec<u32>,
}

impl WakeRequest {
    pub fn broadcast(start: f64, cfg: &LowPowerConfig, target_ids: Vec<u32>) -> Self {
        WakeRequest { start, duration: cfg.wake_broadcast_s, target_ids }
    }
}

/// Stimuli for one low-power session.
#[derive(Debug, Clone, Default)]
pub struct LowPowerStimuli {
    pub wake_requests: Vec<WakeRequest>,
    /// Times at which a measurement involving this beacon was requested.
    pub measurement_requests: Vec<f64>,
    /// Times of explicit "no more readings" packets.
    pub releases: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LowPowerTrace {
    pub intervals: Vec<ModeInterval>,
    /// Instants the beacon left sleep for active duty.
    pub wake_times: Vec<f64>,
    /// Instants the beacon returned to the sleep loop.
    pub sleep_times: Vec<f64>,
}

impl LowPowerTrace {
    pub fn awake_at(&self, t: f64) -> bool {
        // awake = an Idle interval not part of the 100 ms listen scan
        self.wake_times
            .iter()
            .zip(self.sleep_times.iter().map(Some).chain(std::iter::repeat(None)))
            .any(|(w, s)| *w <= t && s.map_or(true, |s| t < *s))
    }
}

/// Simulate a battery beacon's wake/sleep loop up to `horizon`.
///
/// Sleeping beacons cycle power-down quanta with a short listen window; a
/// wake request that names this beacon and overlaps a listen window brings
/// it up. It stays up while measurement requests keep arriving, and drops
/// back to the sleep loop on an explicit release or after the inactivity
/// timeout. The listen window and awake time are modeled at Idle current.
pub fn lowpower_session(
    beacon_id: u32,
    cfg: &LowPowerConfig,
    stimuli: &LowPowerStimuli,
    horizon: f64,
) -> LowPowerTrace {
    let mut intervals = Vec::new();
    let mut wake_times = Vec::new();
    let mut sleep_times = Vec::new();
    let mut meas: Vec<f64> = stimuli.measurement_requests.clone();
    meas.sort_by(f64::total_cmp);
    let mut releases: Vec<f64> = stimuli.releases.clone();
    releases.sort_by(f64::total_cmp);

    let mut t = 0.0;
    let mut awake = false;
    let mut last_activity = 0.0;
    while t < horizon {
        if !awake {
            let sleep_end = (t + cfg.sleep_quantum_s - cfg.listen_window_s).min(horizon);
            intervals.push(ModeInterval {
                start: t,
                end: sleep_end,
                mode: PowerMode::PowerDownExternalCrystal,
            });
            if sleep_end >= horizon {
                break;
            }
            let listen_end = (sleep_end + cfg.listen_window_s).min(horizon);
            intervals.push(ModeInterval { start: sleep_end, end: listen_end, mode: PowerMode::Idle16MHz });
            let heard = stimuli.wake_requests.iter().any(|w| {
                w.target_ids.contains(&beacon_id)
                    && w.start < listen_end
                    && w.start + w.duration > sleep_end
            });
            t = listen_end;
            if heard {
                awake = true;
                last_activity = listen_end;
                wake_times.push(listen_end);
            }
        } else {
            let awake_start = t;
            let sleep_at = loop {
                let timeout_at = last_activity + cfg.inactivity_timeout_s;
                let next_release = releases.iter().copied().find(|r| *r >= awake_start && *r >= t);
                let next_meas = meas
                    .iter()
                    .copied()
                    .find(|m| *m > last_activity && *m < timeout_at && *m >= awake_start);
                match (next_release, next_meas) {
                    (Some(r), Some(m)) if r <= m => break r,
                    (Some(r), None) if r <= timeout_at => break r,
                    (_, Some(m)) => {
                        last_activity = m;
                        t = m;
                    }
                    (_, None) => break timeout_at,
                }
            };
            let end = sleep_at.min(horizon);
            intervals.push(ModeInterval { start: awake_start, end, mode: PowerMode::Idle16MHz });
            if end >= horizon {
                break;
            }
            sleep_times.push(end);
            awake = false;
            t = end;
        }
    }
    LowPowerTrace { intervals, wake_times, sleep_times }
}
