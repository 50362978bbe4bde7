//! Command-line front end: scenario validation, coverage maps, full
//! simulation runs and the ring-error curves.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sappo::coverage::{coverage_map, covered_area, BeaconSector, DEFAULT_CELL_SIZE};
use sappo::output;
use sappo::ring::{error_curve, ErrorCurveConfig, ErrorSweep};
use sappo::scenario::{default_scenario, Scenario};
use sappo::sim;
use sappo::Vec2;

const EXIT_SCHEMA: u8 = 2;
const EXIT_SIM: u8 = 3;

#[derive(Parser)]
#[command(name = "sappo", version, about = "Ultrasonic beacon localization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and report the first problem found.
    Validate {
        scenario: PathBuf,
    },
    /// Print a ready-to-edit example scenario to stdout.
    Example,
    /// Render beacon coverage maps (PGM + CSV) for 1, 2 and 3 required beacons.
    Coverage {
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Sampling resolution in meters.
        #[arg(long, default_value_t = DEFAULT_CELL_SIZE)]
        cell_size: f64,
    },
    /// Run the full measurement/positioning simulation.
    Simulate {
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's cycle count.
        #[arg(long)]
        cycles: Option<u64>,
    },
    /// Tabulate the ring-correction error versus orientation and distance.
    Curves {
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<Scenario, u8> {
    Scenario::from_path(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_SCHEMA
    })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), u8> {
    std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(name), bytes)).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", dir.join(name).display());
        EXIT_SIM
    })
}

fn cmd_validate(path: &Path) -> Result<(), u8> {
    let sc = load(path)?;
    println!(
        "ok: {} beacons, {} cycles, seed {}",
        sc.beacons.len(),
        sc.sim.cycles,
        sc.seed
    );
    Ok(())
}

fn cmd_coverage(path: &Path, out: &Path, cell_size: f64) -> Result<(), u8> {
    let sc = load(path)?;
    let room = sc.build_room().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_SCHEMA
    })?;
    let sectors: Vec<BeaconSector> = sc
        .beacons
        .iter()
        .map(|b| BeaconSector {
            position: Vec2::new(b.x, b.y),
            orientation: b.orientation_deg.to_radians(),
            arc: std::f64::consts::FRAC_PI_2,
            range: b.range_m,
        })
        .collect();
    for min in 1..=3usize {
        let grid = coverage_map(&room, &sectors, min, cell_size).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_SIM
        })?;
        write_file(out, &format!("coverage_min{min}.pgm"), &output::coverage_pgm(&grid))?;
        write_file(
            out,
            &format!("coverage_min{min}.csv"),
            output::coverage_csv(&grid).as_bytes(),
        )?;
        println!("min_beacons={min}: covered {:.2} m2", covered_area(&grid));
    }
    Ok(())
}

fn cmd_simulate(
    path: &Path,
    out: &Path,
    seed: Option<u64>,
    cycles: Option<u64>,
) -> Result<(), u8> {
    let mut sc = load(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(n) = cycles {
        sc.sim.cycles = n;
    }
    let result = sim::run(&sc).map_err(|e| match e {
        sim::SimError::Scenario(e) => {
            eprintln!("error: {e}");
            EXIT_SCHEMA
        }
        e => {
            eprintln!("error: {e}");
            EXIT_SIM
        }
    })?;
    for (name, contents) in output::run_artifacts(&result) {
        write_file(out, name, contents.as_bytes())?;
    }
    let room: Vec<(f64, f64)> = sc.room.vertices.iter().map(|v| (v[0], v[1])).collect();
    let beacons: Vec<(f64, f64)> = sc.beacons.iter().map(|b| (b.x, b.y)).collect();
    write_file(
        out,
        "path.svg",
        output::path_svg(&room, &result.fixes, &beacons).as_bytes(),
    )?;
    println!(
        "{} cycles in {:.2} s sim time ({:.1} Hz), {} fixes, median error {:.1} mm, {} ghost rejections",
        result.summary.cycles_run,
        result.summary.elapsed_s,
        result.summary.cycle_rate_hz,
        result.summary.fixes,
        result.summary.median_fix_error_m * 1000.0,
        result.summary.ghost_rejections,
    );
    Ok(())
}

fn cmd_curves(out: &Path) -> Result<(), u8> {
    let cfg = ErrorCurveConfig::default();
    let fail = |e: sappo::ring::RingError| {
        eprintln!("error: {e}");
        EXIT_SIM
    };
    let by_angle = error_curve(
        &cfg,
        ErrorSweep::Angle { distance: 4.0 },
        (-22.5f64).to_radians(),
        22.5f64.to_radians(),
        90,
    )
    .map_err(fail)?;
    let mut s = String::from("orientation_deg,error_mm\n");
    for (w, e) in by_angle {
        s.push_str(&format!("{:.3},{:.6}\n", w.to_degrees(), e * 1000.0));
    }
    write_file(out, "error_vs_orientation.csv", s.as_bytes())?;

    let by_distance = error_curve(
        &cfg,
        ErrorSweep::Distance { angle: 15f64.to_radians() },
        1.5,
        9.0,
        75,
    )
    .map_err(fail)?;
    let mut s = String::from("distance_m,error_mm\n");
    for (d, e) in by_distance {
        s.push_str(&format!("{:.3},{:.6}\n", d, e * 1000.0));
    }
    write_file(out, "error_vs_distance.csv", s.as_bytes())?;
    println!("wrote error_vs_orientation.csv and error_vs_distance.csv");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Example => {
            print!("{}", default_scenario().to_toml_string());
            Ok(())
        }
        Command::Coverage { scenario, out, cell_size } => cmd_coverage(&scenario, &out, cell_size),
        Command::Simulate { scenario, out, seed, cycles } => {
            cmd_simulate(&scenario, &out, seed, cycles)
        }
        Command::Curves { out } => cmd_curves(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
