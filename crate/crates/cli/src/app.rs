//! Subcommand execution and exit-code mapping.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 solver
//! non-convergence, 3 actuator saturation where it is fatal (a converged
//! grasp that only holds because the tension limit clipped the command).

use std::fs;
use std::path::{Path, PathBuf};
use tendon_hand_sim::{
    margin_report, payload_ramp, run_grasp, HandSpec, PayloadScenario, RampRow, SimError,
    KGF_TO_N,
};

use crate::scenario::{Mode, PayloadSection, Scenario};
use crate::telemetry::{self, TelemetryRow};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NON_CONVERGENCE: i32 = 2;
pub const EXIT_SATURATION: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type RunResult = Result<(), CliError>;

fn config_err(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_CONFIG, message: message.into() }
}

fn sim_err(e: SimError) -> CliError {
    let code = match e {
        SimError::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        _ => EXIT_CONFIG,
    };
    CliError { code, message: e.to_string() }
}

#[derive(Debug, Clone, Default)]
pub struct CommonFlags {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub quiet: bool,
}

impl CommonFlags {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

fn load(path: &Path, mode: Option<Mode>) -> Result<(Scenario, HandSpec), CliError> {
    let scenario = Scenario::load(path).map_err(config_err)?;
    if let Some(required) = mode {
        if scenario.mode != required {
            return Err(config_err(format!(
                "mode: this subcommand runs \"{required}\" scenarios, file declares \"{}\"",
                scenario.mode
            )));
        }
    }
    scenario.check_sections().map_err(config_err)?;
    let hand = scenario.hand().map_err(config_err)?;
    Ok((scenario, hand))
}

fn output_path(flags: &CommonFlags, scenario: &Scenario, default_name: &str) -> Result<PathBuf, CliError> {
    let dir = flags.out_dir();
    fs::create_dir_all(&dir)
        .map_err(|e| config_err(format!("output: cannot create {}: {e}", dir.display())))?;
    let name = scenario
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(default_name));
    Ok(dir.join(name))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes)
        .map_err(|e| config_err(format!("output: cannot write {}: {e}", path.display())))
}

/// Checks a scenario file without running it.
pub fn run_validate(path: &Path, flags: &CommonFlags) -> RunResult {
    let (scenario, hand) = load(path, None)?;
    if !flags.quiet {
        println!("ok: {} (mode = {}, {} actuators, {} obstacles)",
            path.display(), scenario.mode, hand.actuators.len(), scenario.obstacles.len());
    }
    Ok(())
}

/// Runs a grasp scenario and writes per-step telemetry CSV.
pub fn run_simulate(path: &Path, flags: &CommonFlags) -> RunResult {
    let (scenario, hand) = load(path, Some(Mode::Grasp))?;
    let section = scenario.controller.clone().expect("checked by load");
    let mut config = section.config();
    if let Some(tol) = flags.tol {
        config.tolerance = tol;
    }
    if let Some(max_steps) = flags.max_steps {
        config.max_steps = max_steps;
    }
    let options = section.options(hand.actuators.len()).map_err(config_err)?;

    let result = run_grasp(&hand, &scenario.obstacles, &config, &options).map_err(sim_err)?;

    let rows = result
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| TelemetryRow::from_state(i as u64, &step.state))
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;
    let out = output_path(flags, &scenario, "telemetry.csv")?;
    let mut buf = Vec::new();
    telemetry::write_rows(&mut buf, &rows).map_err(config_err)?;
    write_file(&out, &buf)?;

    let saturated = result
        .steps
        .last()
        .map(|s| s.state.any_saturated())
        .unwrap_or(false);
    if !flags.quiet {
        let peak = rows
            .iter()
            .flat_map(|r| [r.actuator_0_tension, r.actuator_1_tension, r.actuator_2_tension])
            .fold(0.0, f64::max);
        println!("mode = grasp");
        println!("seed = {}", flags.seed.unwrap_or(scenario.seed));
        println!("steps = {}", rows.len());
        println!("converged = {}", result.converged);
        println!("peak_tension_N = {:.3}", peak);
        println!("peak_tension_kgf = {:.3}", peak / KGF_TO_N);
        println!("saturated = {saturated}");
        println!("wrote {}", out.display());
    }

    if !result.converged {
        return Err(CliError {
            code: EXIT_NON_CONVERGENCE,
            message: format!("grasp did not converge within {} steps", config.max_steps),
        });
    }
    if saturated {
        return Err(CliError {
            code: EXIT_SATURATION,
            message: "actuator tension limit clipped the converged grasp".to_string(),
        });
    }
    Ok(())
}

/// Ramp parallelism cap: TENDON_SIM_THREADS, else the machine's parallelism.
fn ramp_threads(n_masses: usize) -> usize {
    let cap = std::env::var("TENDON_SIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        });
    cap.min(n_masses).max(1)
}

/// Sweeps payload masses under a frozen grasp and writes a ramp CSV.
pub fn run_ramp(path: &Path, flags: &CommonFlags) -> RunResult {
    let (scenario, hand) = load(path, Some(Mode::Ramp))?;
    let payload = scenario.payload.clone().expect("checked by load");

    // Masses are independent solves; chunk them across threads and stitch
    // the results back in input order so the CSV stays byte-stable.
    let threads = ramp_threads(payload.masses.len());
    let chunk_len = payload.masses.len().div_ceil(threads);
    let chunks: Vec<&[f64]> = payload.masses.chunks(chunk_len).collect();
    let results: Vec<Result<Vec<RampRow>, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                let hand = &hand;
                let payload = &payload;
                let obstacles = &scenario.obstacles;
                scope.spawn(move || {
                    payload_ramp(
                        hand,
                        obstacles,
                        &payload.grasp_excursions,
                        chunk,
                        payload.load_direction,
                        payload.hands_sharing,
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("ramp worker panicked")).collect()
    });

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r.map_err(sim_err)?);
    }

    let out = output_path(flags, &scenario, "ramp.csv")?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in &rows {
            w.serialize(row).map_err(|e| config_err(e.to_string()))?;
        }
        w.flush().map_err(|e| config_err(e.to_string()))?;
    }
    write_file(&out, &buf)?;

    let all_converged = rows.iter().all(|r| r.converged);
    if !flags.quiet {
        let peak_kgf = rows.iter().map(|r| r.tension_kgf).fold(0.0, f64::max);
        println!("mode = ramp");
        println!("seed = {}", flags.seed.unwrap_or(scenario.seed));
        println!("masses = {}", payload.masses.len());
        println!("threads = {threads}");
        println!("peak_tension_kgf = {:.3}", peak_kgf);
        println!("converged = {all_converged}");
        println!("wrote {}", out.display());
    }
    if !all_converged {
        return Err(CliError {
            code: EXIT_NON_CONVERGENCE,
            message: "ramp had non-converged masses (see converged column)".to_string(),
        });
    }
    Ok(())
}

fn payload_for_margin(payload: &PayloadSection) -> Result<PayloadScenario, CliError> {
    Ok(PayloadScenario {
        payload_mass: payload
            .payload_mass
            .ok_or_else(|| config_err("payload.payload_mass: required in margin mode"))?,
        hands_sharing: payload.hands_sharing,
        ramp: Vec::new(),
        grip_efficiency: payload.efficiency().map_err(config_err)?,
    })
}

/// Capacity/margin report from a calibrated grip efficiency.
pub fn run_margin(path: &Path, _flags: &CommonFlags) -> RunResult {
    let (scenario, hand) = load(path, Some(Mode::Margin))?;
    let payload = scenario.payload.as_ref().expect("checked by load");
    let report = margin_report(&hand, &payload_for_margin(payload)?);

    // The report is the product of this mode; it prints regardless of --quiet.
    println!("required_tension_kgf = {:.1}", report.required_tension_kgf);
    println!("required_tension_N = {:.1}", report.required_tension_n);
    println!("share_per_hand_kg = {:.1}", report.share_kg);
    println!(
        "capacity_per_hand_kg = {:.1}, {}",
        report.capacity_mass_kg,
        if report.pass { "pass" } else { "fail" }
    );
    println!("margin_ratio = {:.2}", report.margin_ratio);
    Ok(())
}

/// Grip efficiency from a measured (mass, peak tension) datapoint.
pub fn run_calibrate(path: &Path, _flags: &CommonFlags) -> RunResult {
    let scenario = Scenario::load(path).map_err(config_err)?;
    let hand = scenario.hand().map_err(config_err)?;
    let payload = scenario
        .payload
        .as_ref()
        .ok_or_else(|| config_err("payload: section required for calibrate"))?;
    let point = payload
        .calibration
        .ok_or_else(|| config_err("payload.calibration: datapoint required for calibrate"))?;
    let eta = tendon_hand_sim::calibrate_efficiency(point.mass_kg, point.tension_kgf)
        .map_err(sim_err)?;
    let max_kgf = hand
        .actuators
        .iter()
        .map(|a| a.max_tension / KGF_TO_N)
        .fold(0.0, f64::max);

    println!("calibration_mass_kg = {}", point.mass_kg);
    println!("calibration_tension_kgf = {}", point.tension_kgf);
    println!("grip_efficiency_kg_per_kgf = {eta}");
    println!("capacity_at_limit_kg = {:.1}", eta * max_kgf);
    Ok(())
}
