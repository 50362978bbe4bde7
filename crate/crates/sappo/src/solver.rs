//! Position fixes from beacon distances: spherical trilateration, height
//! correction down to the navigation plane, planar two-circle intersection
//! and root disambiguation.

use thiserror::Error;

use crate::geometry::{Room, Vec2, Vec3};

/// Radicand values in [-RADICAND_TOL, 0] m^2 are treated as tangency and
/// clamped to zero; anything more negative is a no-solution.
pub const RADICAND_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("need at least {needed} ranges, got {got}")]
    NotEnoughRanges { needed: usize, got: usize },
    #[error("circles/spheres do not intersect (radicand {0})")]
    NoIntersection(f64),
    #[error("degenerate geometry: beacons are collinear or coincident")]
    DegenerateGeometry,
    #[error("slant range {slant} shorter than the height difference {dh}")]
    InconsistentSlant { slant: f64, dh: f64 },
    #[error("two candidates survive and no history to pick one")]
    Ambiguous,
    #[error("every candidate falls outside the room")]
    NoFixInRoom,
}

/// One usable beacon range: apothem-corrected, noise-filtered, in meters.
#[derive(Debug, Clone, Copy)]
pub struct RangeObservation {
    pub beacon_id: u32,
    pub beacon_position: Vec3,
    pub distance: f64,
}

/// How the surviving root was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChosenBy {
    Unique,
    RoomBounds,
    Proximity,
}

impl ChosenBy {
    pub fn label(&self) -> &'static str {
        match self {
            ChosenBy::Unique => "unique",
            ChosenBy::RoomBounds => "room_bounds",
            ChosenBy::Proximity => "proximity",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixResult {
    pub position: Vec3,
    /// Every root the solver produced, before disambiguation.
    pub candidates: Vec<Vec3>,
    pub chosen_by: ChosenBy,
    /// RMS of | |p - beacon| - distance | over the observations used.
    pub residual: f64,
    pub n_beacons: usize,
}

/// Spherical trilateration in the canonical frame: beacons at (0,0,0),
/// (d,0,0) and (i,j,0). Returns 0, 1 or 2 candidate points.
pub fn trilaterate3_canonical(
    r1: f64,
    r2: f64,
    r3: f64,
    d: f64,
    i: f64,
    j: f64,
) -> Result<Vec<Vec3>, SolverError> {
    if d <= 0.0 || j.abs() < 1e-12 {
        return Err(SolverError::DegenerateGeometry);
    }
    let x = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let y = (r1 * r1 - r3 * r3 + i * i + j * j) / (2.0 * j) - i / j * x;
    let zz = r1 * r1 - x * x - y * y;
    if zz < -RADICAND_TOL {
        return Err(SolverError::NoIntersection(zz));
    }
    let z = zz.max(0.0).sqrt();
    if z == 0.0 {
        Ok(vec![Vec3::new(x, y, 0.0)])
    } else {
        Ok(vec![Vec3::new(x, y, z), Vec3::new(x, y, -z)])
    }
}

/// Spherical trilateration for beacons at arbitrary positions: builds an
/// orthonormal frame from the three beacons, solves in the canonical frame,
/// maps candidates back to world coordinates.
pub fn trilaterate3(obs: &[RangeObservation; 3]) -> Result<Vec<Vec3>, SolverError> {
    let p1 = obs[0].beacon_position;
    let p2 = obs[1].beacon_position;
    let p3 = obs[2].beacon_position;
    let ex_raw = p2 - p1;
    let d = ex_raw.norm();
    if d < 1e-12 {
        return Err(SolverError::DegenerateGeometry);
    }
    let ex = ex_raw.scaled(1.0 / d);
    let p31 = p3 - p1;
    let ez_raw = ex.cross(p31);
    let ez_norm = ez_raw.norm();
    if ez_norm < 1e-12 {
        return Err(SolverError::DegenerateGeometry);
    }
    let ez = ez_raw.scaled(1.0 / ez_norm);
    let ey = ez.cross(ex);
    let i = p31.dot(ex);
    let j = p31.dot(ey);
    let local = trilaterate3_canonical(obs[0].distance, obs[1].distance, obs[2].distance, d, i, j)?;
    Ok(local
        .into_iter()
        .map(|q| p1 + ex.scaled(q.x) + ey.scaled(q.y) + ez.scaled(q.z))
        .collect())
}

/// Project a slant range onto the navigation plane given the two mounting
/// heights: sqrt(slant^2 - dh^2).
pub fn height_correct(slant: f64, beacon_h: f64, emitter_h: f64) -> Result<f64, SolverError> {
    let dh = beacon_h - emitter_h;
    let rad = slant * slant - dh * dh;
    if rad < -RADICAND_TOL {
        return Err(SolverError::InconsistentSlant { slant, dh: dh.abs() });
    }
    Ok(rad.max(0.0).sqrt())
}

/// Planar two-circle intersection via the radical line. Returns 0, 1 or 2
/// roots; separation outside [ |r1-r2|, r1+r2 ] (beyond tolerance) is a
/// no-solution, coincident centers are degenerate.
pub fn bilaterate2(c1: Vec2, r1: f64, c2: Vec2, r2: f64) -> Result<Vec<Vec2>, SolverError> {
    let axis = c2 - c1;
    let d = axis.norm();
    if d < 1e-12 {
        return Err(SolverError::DegenerateGeometry);
    }
    // distance from c1 to the radical line along the center axis
    let t = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let hh = r1 * r1 - t * t;
    if hh < -RADICAND_TOL {
        return Err(SolverError::NoIntersection(hh));
    }
    let h = hh.max(0.0).sqrt();
    let ex = axis * (1.0 / d);
    let ey = Vec2::new(-ex.y, ex.x);
    let foot = c1 + ex * t;
    if h == 0.0 {
        Ok(vec![foot])
    } else {
        Ok(vec![foot + ey * h, foot + ey * (-h)])
    }
}

/// Drop candidates outside the room, then pick the survivor nearest the
/// previous fix. Both surviving with no history is an ambiguity error.
pub fn disambiguate(
    candidates: &[Vec2],
    room: Option<&Room>,
    previous: Option<Vec2>,
) -> Result<(Vec2, ChosenBy), SolverError> {
    if candidates.is_empty() {
        return Err(SolverError::NoFixInRoom);
    }
    let survivors: Vec<Vec2> = match room {
        Some(r) => candidates.iter().copied().filter(|p| r.contains(*p)).collect(),
        None => candidates.to_vec(),
    };
    let dropped_by_room = candidates.len() - survivors.len();
    match survivors.len() {
        0 => Err(SolverError::NoFixInRoom),
        1 => {
            let by = if candidates.len() == 1 {
                ChosenBy::Unique
            } else {
                ChosenBy::RoomBounds
            };
            let _ = dropped_by_room;
            Ok((survivors[0], by))
        }
        _ => match previous {
            Some(prev) => {
                let best = survivors
                    .iter()
                    .copied()
                    .min_by(|a, b| a.distance(prev).total_cmp(&b.distance(prev)))
                    .expect("non-empty");
                Ok((best, ChosenBy::Proximity))
            }
            None => Err(SolverError::Ambiguous),
        },
    }
}

/// Which solve path the pipeline takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Height-correct then intersect two circles in the plane.
    Planar,
    /// Spherical trilateration on three ranges.
    Spatial,
}

fn residual_rms(p: Vec3, obs: &[RangeObservation]) -> f64 {
    if obs.is_empty() {
        return 0.0;
    }
    let ss: f64 = obs
        .iter()
        .map(|o| {
            let e = p.distance(o.beacon_position) - o.distance;
            e * e
        })
        .sum();
    (ss / obs.len() as f64).sqrt()
}

/// Full solve from corrected beacon ranges. Distances are already
/// center-to-center (the apothem sums were added on the measurement side).
/// Planar mode height-corrects every range and intersects the two shortest;
/// spatial mode trilaterates the three shortest ranges, using the emitter
/// height as the proximity prior for the z-mirrored root when no previous
/// fix exists.
pub fn fix_pipeline(
    observations: &[RangeObservation],
    emitter_height: f64,
    mode: SolveMode,
    room: Option<&Room>,
    previous: Option<Vec2>,
) -> Result<FixResult, SolverError> {
    let needed = match mode {
        SolveMode::Planar => 2,
        SolveMode::Spatial => 3,
    };
    if observations.len() < needed {
        return Err(SolverError::NotEnoughRanges { needed, got: observations.len() });
    }
    let mut sorted: Vec<RangeObservation> = observations.to_vec();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance));

    match mode {
        SolveMode::Planar => {
            // shortest pair first; with a noisy near-tangent pair (e.g. the
            // two beacons sit nearly opposite the emitter) fall back to the
            // next-closest pair rather than dropping the fix
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            for i in 0..sorted.len() {
                for j in (i + 1)..sorted.len() {
                    pairs.push((i, j));
                }
            }
            pairs.sort_by(|p, q| {
                (sorted[p.0].distance + sorted[p.1].distance)
                    .total_cmp(&(sorted[q.0].distance + sorted[q.1].distance))
            });
            let mut last_err = SolverError::NotEnoughRanges { needed: 2, got: observations.len() };
            for (i, j) in pairs {
                let a = sorted[i];
                let b = sorted[j];
                let attempt = (|| {
                    let ra = height_correct(a.distance, a.beacon_position.z, emitter_height)?;
                    let rb = height_correct(b.distance, b.beacon_position.z, emitter_height)?;
                    let roots =
                        bilaterate2(a.beacon_position.xy(), ra, b.beacon_position.xy(), rb)?;
                    let (pick, chosen_by) = disambiguate(&roots, room, previous)?;
                    Ok::<_, SolverError>((roots, pick, chosen_by))
                })();
                match attempt {
                    Ok((roots, pick, chosen_by)) => {
                        let position = Vec3::new(pick.x, pick.y, emitter_height);
                        return Ok(FixResult {
                            position,
                            candidates: roots
                                .iter()
                                .map(|p| Vec3::new(p.x, p.y, emitter_height))
                                .collect(),
                            chosen_by,
                            residual: residual_rms(position, &[a, b]),
                            n_beacons: observations.len(),
                        });
                    }
                    Err(e) => last_err = e,
                }
            }
            Err(last_err)
        }
        SolveMode::Spatial => {
            let trio = [sorted[0], sorted[1], sorted[2]];
            let roots = trilaterate3(&trio)?;
            let planar: Vec<Vec2> = roots.iter().map(|p| p.xy()).collect();
            let (pick2, mut chosen_by) = match disambiguate(&planar, room, previous) {
                Ok(ok) => ok,
                // xy-identical mirror roots: fall back to the emitter height
                Err(SolverError::Ambiguous) => {
                    let best = roots
                        .iter()
                        .min_by(|a, b| {
                            (a.z - emitter_height)
                                .abs()
                                .total_cmp(&(b.z - emitter_height).abs())
                        })
                        .expect("non-empty");
                    (best.xy(), ChosenBy::Proximity)
                }
                Err(e) => return Err(e),
            };
            let position = roots
                .iter()
                .copied()
                .filter(|p| p.xy().distance(pick2) < 1e-9)
                .min_by(|a, b| {
                    (a.z - emitter_height)
                        .abs()
                        .total_cmp(&(b.z - emitter_height).abs())
                })
                .expect("picked root exists");
            if roots.len() == 1 {
                chosen_by = ChosenBy::Unique;
            }
            Ok(FixResult {
                position,
                candidates: roots,
                chosen_by,
                residual: residual_rms(position, &trio),
                n_beacons: observations.len(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn canonical_trilateration_recovers_known_point() {
        // beacons (0,0,0), (10,0,0), (5,10,0); point (5,5,3)
        let p = Vec3::new(5.0, 5.0, 3.0);
        let r1 = p.norm();
        let r2 = p.distance(Vec3::new(10.0, 0.0, 0.0));
        let r3 = p.distance(Vec3::new(5.0, 10.0, 0.0));
        close(r1, 59.0_f64.sqrt(), 1e-12);
        close(r3, 34.0_f64.sqrt(), 1e-12);
        let roots = trilaterate3_canonical(r1, r2, r3, 10.0, 5.0, 10.0).unwrap();
        assert_eq!(roots.len(), 2);
        close(roots[0].x, 5.0, 1e-9);
        close(roots[0].y, 5.0, 1e-9);
        close(roots[0].z, 3.0, 1e-9);
        close(roots[1].z, -3.0, 1e-9);
    }

    #[test]
    fn equal_first_two_ranges_put_x_at_half_d() {
        let roots = trilaterate3_canonical(5.0, 5.0, 4.0, 6.0, 3.0, 4.0).unwrap();
        for r in roots {
            close(r.x, 3.0, 1e-12);
        }
    }

    #[test]
    fn tiny_negative_radicand_clamps_to_single_root() {
        // construct ranges consistent with z = 0 exactly, then nudge
        let p = Vec3::new(2.0, 3.0, 0.0);
        let r1 = p.norm();
        let r2 = p.distance(Vec3::new(10.0, 0.0, 0.0));
        let r3 = p.distance(Vec3::new(5.0, 10.0, 0.0));
        let roots = trilaterate3_canonical(r1 - 1e-12, r2, r3, 10.0, 5.0, 10.0).unwrap();
        assert_eq!(roots.len(), 1);
        close(roots[0].z, 0.0, 0.0);
    }

    #[test]
    fn collinear_beacons_rejected() {
        let obs = [
            RangeObservation { beacon_id: 1, beacon_position: Vec3::new(0.0, 0.0, 0.0), distance: 1.0 },
            RangeObservation { beacon_id: 2, beacon_position: Vec3::new(1.0, 0.0, 0.0), distance: 1.0 },
            RangeObservation { beacon_id: 3, beacon_position: Vec3::new(2.0, 0.0, 0.0), distance: 1.0 },
        ];
        assert_eq!(trilaterate3(&obs).unwrap_err(), SolverError::DegenerateGeometry);
    }

    #[test]
    fn height_correction_cases() {
        // 1 m slant with the 1.70/1.45 mounting heights -> 0.96825 m
        close(height_correct(1.0, 1.70, 1.45).unwrap(), (1.0_f64 - 0.0625).sqrt(), 1e-12);
        close(height_correct(1.0, 1.70, 1.45).unwrap(), 0.96825, 1e-5);
        close(height_correct(3.3, 1.5, 1.5).unwrap(), 3.3, 0.0);
        close(height_correct(0.25, 1.70, 1.45).unwrap(), 0.0, 1e-9);
        assert!(matches!(
            height_correct(0.2, 1.70, 1.45),
            Err(SolverError::InconsistentSlant { .. })
        ));
    }

    #[test]
    fn bilateration_345_triangle() {
        let roots = bilaterate2(Vec2::new(0.0, 0.0), 5.0, Vec2::new(8.0, 0.0), 5.0).unwrap();
        assert_eq!(roots.len(), 2);
        close(roots[0].x, 4.0, 1e-12);
        close(roots[0].y.abs(), 3.0, 1e-12);
        close(roots[1].y, -roots[0].y, 1e-12);
    }

    #[test]
    fn bilateration_tangent_circles() {
        let roots = bilaterate2(Vec2::new(0.0, 0.0), 1.0, Vec2::new(2.0, 0.0), 1.0).unwrap();
        assert_eq!(roots.len(), 1);
        close(roots[0].x, 1.0, 1e-12);
        close(roots[0].y, 0.0, 1e-12);
    }

    #[test]
    fn bilateration_errors() {
        assert_eq!(
            bilaterate2(Vec2::new(0.0, 0.0), 1.0, Vec2::new(0.0, 0.0), 2.0).unwrap_err(),
            SolverError::DegenerateGeometry
        );
        assert!(matches!(
            bilaterate2(Vec2::new(0.0, 0.0), 1.0, Vec2::new(5.0, 0.0), 1.0),
            Err(SolverError::NoIntersection(_))
        ));
        assert!(matches!(
            bilaterate2(Vec2::new(0.0, 0.0), 5.0, Vec2::new(1.0, 0.0), 1.0),
            Err(SolverError::NoIntersection(_))
        ));
    }

    #[test]
    fn disambiguation_paths() {
        let room = Room::rectangle(9.0, 9.0).unwrap();
        let cands = [Vec2::new(4.0, 3.0), Vec2::new(4.0, -3.0)];
        let (p, by) = disambiguate(&cands, Some(&room), None).unwrap();
        close(p.y, 3.0, 0.0);
        assert_eq!(by, ChosenBy::RoomBounds);

        let both_in = [Vec2::new(4.0, 3.0), Vec2::new(4.0, 6.0)];
        let (p, by) = disambiguate(&both_in, Some(&room), Some(Vec2::new(4.0, 2.5))).unwrap();
        close(p.y, 3.0, 0.0);
        assert_eq!(by, ChosenBy::Proximity);

        assert_eq!(
            disambiguate(&both_in, Some(&room), None).unwrap_err(),
            SolverError::Ambiguous
        );
        let both_out = [Vec2::new(-4.0, 3.0), Vec2::new(4.0, -6.0)];
        assert_eq!(
            disambiguate(&both_out, Some(&room), None).unwrap_err(),
            SolverError::NoFixInRoom
        );
        let single = [Vec2::new(1.0, 1.0)];
        assert_eq!(disambiguate(&single, None, None).unwrap().1, ChosenBy::Unique);
    }

    #[test]
    fn pipeline_needs_two_ranges() {
        let obs = [RangeObservation {
            beacon_id: 1,
            beacon_position: Vec3::new(0.0, 0.0, 1.7),
            distance: 2.0,
        }];
        assert_eq!(
            fix_pipeline(&obs, 1.45, SolveMode::Planar, None, None).unwrap_err(),
            SolverError::NotEnoughRanges { needed: 2, got: 1 }
        );
    }

    #[test]
    fn planar_pipeline_round_trip() {
        let room = Room::rectangle(9.0, 9.0).unwrap();
        let truth = Vec2::new(3.2, 4.7);
        let emitter_h = 1.45;
        let beacons = [Vec3::new(0.0, 0.0, 1.70), Vec3::new(9.0, 0.0, 1.70)];
        let obs: Vec<RangeObservation> = beacons
            .iter()
            .enumerate()
            .map(|(i, b)| RangeObservation {
                beacon_id: i as u32,
                beacon_position: *b,
                distance: Vec3::new(truth.x, truth.y, emitter_h).distance(*b),
            })
            .collect();
        let fix = fix_pipeline(&obs, emitter_h, SolveMode::Planar, Some(&room), None).unwrap();
        close(fix.position.x, truth.x, 1e-9);
        close(fix.position.y, truth.y, 1e-9);
        assert!(fix.residual < 1e-9);
    }

    #[test]
    fn spatial_pipeline_round_trip() {
        let truth = Vec3::new(3.0, 4.0, 1.45);
        let beacons = [
            Vec3::new(0.0, 0.0, 1.7),
            Vec3::new(9.0, 0.5, 1.7),
            Vec3::new(4.0, 9.0, 1.7),
        ];
        let obs: Vec<RangeObservation> = beacons
            .iter()
            .enumerate()
            .map(|(i, b)| RangeObservation {
                beacon_id: i as u32,
                beacon_position: *b,
                distance: truth.distance(*b),
            })
            .collect();
        let fix = fix_pipeline(&obs, 1.45, SolveMode::Spatial, None, None).unwrap();
        close(fix.position.x, truth.x, 1e-9);
        close(fix.position.y, truth.y, 1e-9);
        close(fix.position.z, truth.z, 1e-6);
    }
}
