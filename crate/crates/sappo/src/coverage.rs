//! Grid-sampling coverage estimator: where inside a room can a robot obtain
//! enough beacon ranges to solve a fix, given beacon sectors and wall
//! occlusion.

use thiserror::Error;

use crate::geometry::{angle_diff, Room, Segment, Vec2};

/// Default sampling resolution (meters).
pub const DEFAULT_CELL_SIZE: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum CoverageError {
    #[error("cell size must be positive, got {0}")]
    BadCellSize(f64),
    #[error("room has no area to sample")]
    EmptyRoom,
}

/// A beacon's receive footprint: a circular sector from its mounting point.
#[derive(Debug, Clone, Copy)]
pub struct BeaconSector {
    pub position: Vec2,
    /// Direction of the sector bisector (radians).
    pub orientation: f64,
    /// Full sector arc (radians); 2*pi for an omnidirectional beacon.
    pub arc: f64,
    pub range: f64,
}

impl BeaconSector {
    pub fn covers(&self, p: Vec2, walls: &[Segment]) -> bool {
        let v = p - self.position;
        let d = v.norm();
        if d > self.range {
            return false;
        }
        if d > 1e-12 && self.arc < 2.0 * std::f64::consts::PI - 1e-12 {
            if angle_diff(v.angle(), self.orientation).abs() > self.arc / 2.0 + 1e-9 {
                return false;
            }
        }
        line_of_sight(self.position, p, walls)
    }
}

/// True if the open segment a-b crosses no wall. Touches at the endpoints
/// (a beacon mounted on a wall, a cell next to one) do not block.
pub fn line_of_sight(a: Vec2, b: Vec2, walls: &[Segment]) -> bool {
    let ray = Segment::new(a, b);
    walls.iter().all(|w| !w.crosses(&ray, 1e-9))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellState {
    OutsideRoom,
    Uncovered,
    /// Covered with line-of-sight range to k beacons (k >= min_beacons).
    CoveredBy(usize),
}

#[derive(Debug, Clone)]
pub struct CoverageGrid {
    pub origin: Vec2,
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
    pub min_beacons: usize,
    pub cells: Vec<CellState>,
}

impl CoverageGrid {
    pub fn cell(&self, row: usize, col: usize) -> CellState {
        self.cells[row * self.cols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Vec2 {
        self.origin
            + Vec2::new(
                (col as f64 + 0.5) * self.cell_size,
                (row as f64 + 0.5) * self.cell_size,
            )
    }
}

/// Sample the room at `cell_size` resolution. A cell is covered iff its
/// center is inside the room and has unobstructed in-sector range to at
/// least `min_beacons` beacons. With `min_beacons == 0` every in-room cell
/// is covered.
pub fn coverage_map(
    room: &Room,
    beacons: &[BeaconSector],
    min_beacons: usize,
    cell_size: f64,
) -> Result<CoverageGrid, CoverageError> {
    if cell_size <= 0.0 || !cell_size.is_finite() {
        return Err(CoverageError::BadCellSize(cell_size));
    }
    let (lo, hi) = room.bounding_box();
    let span = hi - lo;
    if span.x <= 0.0 || span.y <= 0.0 {
        return Err(CoverageError::EmptyRoom);
    }
    let cols = (span.x / cell_size).ceil() as usize;
    let rows = (span.y / cell_size).ceil() as usize;
    let walls = room.walls();
    let mut cells = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let c = lo + Vec2::new((col as f64 + 0.5) * cell_size, (row as f64 + 0.5) * cell_size);
            if !room.contains(c) {
                cells.push(CellState::OutsideRoom);
                continue;
            }
            let k = beacons.iter().filter(|b| b.covers(c, &walls)).count();
            if k >= min_beacons {
                cells.push(CellState::CoveredBy(k));
            } else {
                cells.push(CellState::Uncovered);
            }
        }
    }
    Ok(CoverageGrid {
        origin: lo,
        cell_size,
        rows,
        cols,
        min_beacons,
        cells,
    })
}

/// Covered-cell count times cell area.
pub fn covered_area(grid: &CoverageGrid) -> f64 {
    let covered = grid
        .cells
        .iter()
        .filter(|c| matches!(c, CellState::CoveredBy(_)))
        .count();
    covered as f64 * grid.cell_size * grid.cell_size
}
