//! Serialization of run artifacts: CSV logs, PGM coverage maps and an SVG
//! path plot. All writers format floats explicitly so identical runs give
//! byte-identical files.

use std::fmt::Write as _;

use crate::coverage::{CellState, CoverageGrid};
use crate::sim::{FixRow, MeasureRow, SimOutput, Summary};

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.9}")
    }
}

pub fn measures_csv(rows: &[MeasureRow]) -> String {
    let mut s = String::from(
        "cycle_id,emission_time_s,beacon_id,transducer,tof_s,raw_m,corrected_m,filtered_m,path,accepted,reject_reason,true_m\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cycle_id,
            num(r.emission_time),
            r.beacon_id,
            r.transducer_index,
            num(r.tof_s),
            num(r.raw_distance_m),
            num(r.corrected_m),
            r.filtered_m.map(num).unwrap_or_default(),
            r.path,
            r.accepted,
            r.reject_reason.unwrap_or(""),
            num(r.true_distance_m),
        );
    }
    s
}

pub fn fixes_csv(rows: &[FixRow]) -> String {
    let mut s = String::from(
        "cycle_id,emission_time_s,x_m,y_m,z_m,true_x_m,true_y_m,error_m,chosen_by,n_beacons\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.cycle_id,
            num(r.emission_time),
            num(r.x),
            num(r.y),
            num(r.z),
            num(r.true_x),
            num(r.true_y),
            num(r.error_m),
            r.chosen_by,
            r.n_beacons,
        );
    }
    s
}

pub fn summary_csv(s: &Summary) -> String {
    let mut out = String::from("metric,value\n");
    let _ = writeln!(out, "cycles_run,{}", s.cycles_run);
    let _ = writeln!(out, "elapsed_s,{}", num(s.elapsed_s));
    let _ = writeln!(out, "cycle_rate_hz,{}", num(s.cycle_rate_hz));
    let _ = writeln!(out, "fixes,{}", s.fixes);
    let _ = writeln!(out, "median_fix_error_m,{}", num(s.median_fix_error_m));
    let _ = writeln!(out, "p95_fix_error_m,{}", num(s.p95_fix_error_m));
    let _ = writeln!(out, "ghost_rejections,{}", s.ghost_rejections);
    for b in &s.beacons {
        let _ = writeln!(
            out,
            "beacon_{}_measures,{}",
            b.beacon_id, b.measures
        );
        let _ = writeln!(out, "beacon_{}_accepted,{}", b.beacon_id, b.accepted);
        let _ = writeln!(
            out,
            "beacon_{}_ghost_rejections,{}",
            b.beacon_id, b.ghost_rejections
        );
        let _ = writeln!(out, "beacon_{}_energy_mah,{}", b.beacon_id, num(b.energy_mah));
    }
    out
}

/// All three CSV artifacts of a run as (filename, contents).
pub fn run_artifacts(out: &SimOutput) -> Vec<(&'static str, String)> {
    vec![
        ("measures.csv", measures_csv(&out.measures)),
        ("fixes.csv", fixes_csv(&out.fixes)),
        ("summary.csv", summary_csv(&out.summary)),
    ]
}

/// Binary PGM (P5) image of a coverage grid, top row = max y. Outside cells
/// are black, uncovered cells dark gray, covered cells brighten with the
/// number of beacons in view.
pub fn coverage_pgm(grid: &CoverageGrid) -> Vec<u8> {
    let mut bytes = format!("P5\n{} {}\n255\n", grid.cols, grid.rows).into_bytes();
    for row in (0..grid.rows).rev() {
        for col in 0..grid.cols {
            bytes.push(match grid.cell(row, col) {
                CellState::OutsideRoom => 0u8,
                CellState::Uncovered => 64,
                CellState::CoveredBy(k) => 128u8.saturating_add((k as u8).saturating_mul(32)),
            });
        }
    }
    bytes
}

/// Per-cell CSV dump of a coverage grid.
pub fn coverage_csv(grid: &CoverageGrid) -> String {
    let mut s = String::from("row,col,x_m,y_m,state,beacons_in_view\n");
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let c = grid.cell_center(row, col);
            let (state, k) = match grid.cell(row, col) {
                CellState::OutsideRoom => ("outside", 0),
                CellState::Uncovered => ("uncovered", 0),
                CellState::CoveredBy(k) => ("covered", k),
            };
            let _ = writeln!(s, "{},{},{},{},{},{}", row, col, num(c.x), num(c.y), state, k);
        }
    }
    s
}

/// Minimal SVG: room outline, beacon markers, true path and fixes.
pub fn path_svg(
    room: &[(f64, f64)],
    fixes: &[FixRow],
    beacons: &[(f64, f64)],
) -> String {
    let scale = 100.0; // 1 m = 100 px
    let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
    for &(x, y) in room {
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let h = max_y * scale;
    let flip = |y: f64| h - y * scale;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n",
        max_x * scale,
        h,
        max_x * scale,
        h
    );
    let outline: Vec<String> = room
        .iter()
        .map(|&(x, y)| format!("{:.1},{:.1}", x * scale, flip(y)))
        .collect();
    let _ = writeln!(
        s,
        "<polygon points=\"{}\" fill=\"none\" stroke=\"black\"/>",
        outline.join(" ")
    );
    for &(x, y) in beacons {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"5\" fill=\"blue\"/>",
            x * scale,
            flip(y)
        );
    }
    if !fixes.is_empty() {
        let truth: Vec<String> = fixes
            .iter()
            .map(|f| format!("{:.1},{:.1}", f.true_x * scale, flip(f.true_y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"green\"/>",
            truth.join(" ")
        );
        let est: Vec<String> = fixes
            .iter()
            .map(|f| format!("{:.1},{:.1}", f.x * scale, flip(f.y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"red\"/>",
            est.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
