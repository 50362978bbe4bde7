//! Simulator and positioning engine for an ultrasonic beacon localization
//! system (SAPPO-style): wall-mounted receive-only beacon arrays, a mobile
//! emitter ring, RF sync, time-of-flight ranging and planar/spherical
//! trilateration.
//!
//! The crate is organized around the measurement pipeline:
//!
//! - [`geometry`] — planar primitives, coverage-area formulas, wall mirroring
//! - [`ring`] — polygonal transducer arrays, apothem corrections and the
//!   orientation-dependent measurement error model
//! - [`coverage`] — grid-sampling coverage estimator for rooms with walls
//! - [`channel`] — sound speed, directivity/range gating, first-order
//!   multipath echoes, measurement noise, RF sync latency
//! - [`protocol`] — measurement cycles, cycle pacing, ghost-echo rejection,
//!   low-power beacon sessions and energy accounting
//! - [`solver`] — spherical trilateration, height correction, two-circle
//!   intersection and root disambiguation
//! - [`filters`] — moving-average / EMA / Kalman distance filters
//! - [`scenario`] — the scenario file schema
//! - [`sim`] — the deterministic end-to-end simulation loop
//! - [`output`] — CSV / PGM / SVG emitters

pub mod channel;
pub mod coverage;
pub mod filters;
pub mod geometry;
pub mod output;
pub mod protocol;
pub mod ring;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use geometry::{Cone2, Room, Segment, Vec2, Vec3};
pub use ring::{BuiltRing, Pose2, RingSpec, TransducerSite};
