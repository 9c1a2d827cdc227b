//! `wgdelay`: scenario-driven driver for the stationary and time-dependent
//! delay computations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use wgdelay::exec::set_thread_count;
use wgdelay::oracles::{free_gaussian_sojourn, GaussianPacket};
use wgdelay::output::{
    coupling_rows, delay_rows, fiber_rows, residual_rows, smatrix_rows, sojourn_rows, trace_table, write_csv,
    write_json, COUPLING_HEADER, FIBER_HEADER, MATRIX_HEADER, RESIDUAL_HEADER, SOJOURN_HEADER,
};
use wgdelay::scenario::Scenario;
use wgdelay::spectral::MomentumProfile;
use wgdelay::timedomain::sojourn_free;
use wgdelay::verify::{run_suite, ScenarioSet};
use wgdelay::{Error, Execution};

const OUTPUT_ENV: &str = "WGDELAY_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "wgdelay", version, about = "Time delay in multichannel waveguide scattering")]
struct Cli {
    /// Worker threads for the parallel stages (1 runs everything sequentially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the environment variable and the scenario.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Thresholds, open channels and the projected coupling matrix.
    Modes {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Scattering and delay matrices over an energy sweep.
    Smatrix {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Time-domain delay compared with the stationary expectation.
    Delay {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Record the occupation trace every this many steps.
        #[arg(long, default_value_t = 50)]
        trace_every: usize,
    },
    /// Free sojourn times of the incoming packet.
    Sojourn {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Runs the built-in self-checks.
    Verify {
        /// One of free, oracle, multichannel, spectral, born, hygiene, all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Directory holding free.toml, square_well.toml and two_channel.toml;
        /// the compiled-in copies are used when absent.
        #[arg(long)]
        scenario_dir: Option<PathBuf>,
    },
}

/// Failure carried to the JSON error report.
struct Failure {
    kind: String,
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Config(_) | Error::InvalidArgument(_)) { 2 } else { 1 };
        Failure {
            kind: e.kind().into(),
            message: e.to_string(),
            code,
        }
    }
}

type CmdResult = Result<Value, Failure>;

fn output_dir(cli: &Cli, scenario: Option<&Scenario>, fallback: &str) -> PathBuf {
    if let Some(p) = &cli.output {
        return p.clone();
    }
    if let Some(p) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    match scenario {
        Some(s) => PathBuf::from(s.output_dir.clone().unwrap_or_else(|| format!("output/{}", s.name))),
        None => PathBuf::from(fallback),
    }
}

fn revalidated(s: Scenario) -> Result<Scenario, Failure> {
    s.validate()?;
    Ok(s)
}

fn execution(cli: &Cli) -> Execution {
    match cli.threads {
        Some(1) => Execution::Sequential,
        Some(n) => {
            set_thread_count(n);
            Execution::default()
        }
        None => Execution::default(),
    }
}

fn files(dir: &Path, names: &[&str]) -> Value {
    Value::from(names.iter().map(|n| dir.join(n).display().to_string()).collect::<Vec<_>>())
}

fn cmd_modes(cli: &Cli, path: &Path) -> CmdResult {
    let s = Scenario::load(path)?;
    let dir = output_dir(cli, Some(&s), "");
    let basis = s.basis()?;
    let coupling = s.coupling(&basis)?;
    let packet = s.packet()?;
    let (lo, hi) = packet.energy_support(&basis)?;
    let open = basis.thresholds().iter().filter(|&&t| t < lo).count();
    let rows: Vec<(usize, f64, bool)> = basis
        .thresholds()
        .iter()
        .enumerate()
        .map(|(a, &t)| (a + 1, t, t < lo))
        .collect();
    write_csv(&dir.join("thresholds.csv"), &["alpha", "threshold", "open_in_packet_window"], &rows)?;
    write_csv(&dir.join("coupling.csv"), &COUPLING_HEADER, &coupling_rows(&coupling))?;
    let summary = json!({
        "scenario": s.name,
        "config_hash": s.config_hash(),
        "width": basis.width(),
        "modes": basis.mode_count(),
        "thresholds": basis.thresholds(),
        "threshold_window": s.threshold_window(&basis),
        "packet_energy_support": [lo, hi],
        "open_channels_in_packet_window": open,
        "coupling_peak": coupling.peak(),
        "coupling_asymmetry": coupling.asymmetry(),
        "interaction_radius": coupling.matching_radius(s.time.options.interaction_cutoff)?,
        "files": files(&dir, &["thresholds.csv", "coupling.csv", "modes.json"]),
    });
    write_json(&dir.join("modes.json"), &summary)?;
    Ok(summary)
}

fn cmd_smatrix(cli: &Cli, path: &Path, lmin: Option<f64>, lmax: Option<f64>, points: Option<usize>) -> CmdResult {
    let mut s = Scenario::load(path)?;
    s.sweep.lambda_min = lmin.or(s.sweep.lambda_min);
    s.sweep.lambda_max = lmax.or(s.sweep.lambda_max);
    s.sweep.points = points.or(s.sweep.points);
    let s = revalidated(s)?;
    let dir = output_dir(cli, Some(&s), "");
    let st = s.stationary(execution(cli))?;
    write_csv(&dir.join("smatrix.csv"), &MATRIX_HEADER, &smatrix_rows(&st.sweep))?;
    write_csv(&dir.join("ew_delay.csv"), &MATRIX_HEADER, &delay_rows(&st.delay))?;
    write_csv(&dir.join("residuals.csv"), &RESIDUAL_HEADER, &residual_rows(&st.sweep, &st.delay))?;
    let unitarity = st.sweep.max_unitarity_residual();
    let reciprocity = st.sweep.max_reciprocity_residual();
    let segments: Vec<Value> = st
        .sweep
        .segments
        .iter()
        .map(|seg| json!({"lambda_start": seg.grid.start, "lambda_end": seg.grid.end(), "points": seg.grid.len, "open_channels": seg.open_count(), "max_jump": seg.max_jump()}))
        .collect();
    let summary = json!({
        "scenario": s.name,
        "config_hash": s.config_hash(),
        "lambda_range": [st.range.0, st.range.1],
        "segments": segments,
        "max_unitarity_residual": unitarity,
        "max_reciprocity_residual": reciprocity,
        "max_hermiticity_residual": st.delay.max_hermiticity_residual(),
        "stencil": st.delay.stencil,
        "unitarity_within_tolerance": unitarity <= s.tolerances.unitarity,
        "reciprocity_within_tolerance": reciprocity <= s.tolerances.reciprocity,
        "files": files(&dir, &["smatrix.csv", "ew_delay.csv", "residuals.csv", "smatrix.json"]),
    });
    write_json(&dir.join("smatrix.json"), &summary)?;
    Ok(summary)
}

fn cmd_delay(cli: &Cli, path: &Path, r_max: Option<f64>, t0: Option<f64>, dt: Option<f64>, trace_every: usize) -> CmdResult {
    let mut s = Scenario::load(path)?;
    s.time.r_max = r_max.or(s.time.r_max);
    s.time.options.t0 = t0.or(s.time.options.t0);
    s.time.options.dt = dt.unwrap_or(s.time.options.dt);
    s.time.options.trace_every = trace_every;
    let s = revalidated(s)?;
    let dir = output_dir(cli, Some(&s), "");
    let exec = execution(cli);
    let packet = s.packet()?;
    let st = s.stationary(exec)?;
    let summary = s.spectral_summary(&packet, &st)?;
    let rec = s.time_delay(&packet, &summary, &st.basis, exec)?;
    write_csv(&dir.join("sojourn.csv"), &SOJOURN_HEADER, &sojourn_rows(&rec))?;
    let (header, rows) = trace_table(&rec);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&dir.join("occupation.csv"), &header, &rows)?;
    write_csv(&dir.join("fiber.csv"), &FIBER_HEADER, &fiber_rows(&summary.fiber))?;
    let ew = summary.ew.value;
    let gap = (rec.plateau.value - ew).abs() / ew.abs().max(f64::MIN_POSITIVE);
    let run = &rec.run;
    let out = json!({
        "tau_plateau": rec.plateau.value,
        "ew_expectation": ew,
        "relative_gap": gap,
        "within_tolerance": gap <= s.tolerances.delay_agreement,
        "scenario": s.name,
        "config_hash": s.config_hash(),
        "tau_at_r_max": rec.delay_at_max_radius(),
        "tau_free_at_r_max": rec.free_delay_at_max_radius(),
        "plateau_slope": rec.plateau.slope,
        "commutator_expectation": summary.commutator.re,
        "commutator_within_tolerance": (summary.commutator.re - ew).abs() <= s.tolerances.commutator * ew.abs(),
        "diagnostics": {
            "ew_imaginary_part": summary.ew.imaginary,
            "commutator_imaginary_part": summary.commutator.im,
            "scattered_norm": summary.scattered.norm_sqr(),
            "max_unitarity_residual": st.sweep.max_unitarity_residual(),
            "max_reciprocity_residual": st.sweep.max_reciprocity_residual(),
            "max_hermiticity_residual": st.delay.max_hermiticity_residual(),
            "t0": run.preparation.t0,
            "t1": run.t1,
            "steps": run.steps,
            "overlap_at_t0": run.preparation.overlap,
            "edge_probability_at_t0": run.preparation.edge_probability,
            "max_edge_probability": run.max_edge_probability,
            "norm_drift": run.norm_drift,
            "energy_drift": run.energy_drift,
            "far_field_discarded": run.far_field_discarded,
            "full_tail_bound": rec.full_tail_bound,
            "free_tail_bound": rec.free_tail_bound,
        },
        "files": files(&dir, &["sojourn.csv", "occupation.csv", "fiber.csv", "delay.json"]),
    });
    write_json(&dir.join("delay.json"), &out)?;
    Ok(out)
}

fn cmd_sojourn(cli: &Cli, path: &Path, r_max: Option<f64>) -> CmdResult {
    let mut s = Scenario::load(path)?;
    s.time.r_max = r_max.or(s.time.r_max);
    let s = revalidated(s)?;
    let dir = output_dir(cli, Some(&s), "");
    let packet = s.packet()?;
    let radii = s.radii();
    let t = sojourn_free(&packet, &radii, &s.time.options.free, execution(cli))?;
    // closed form for a single Gaussian component
    let gaussian = match s.packet.as_slice() {
        [spec] => match spec.profile {
            MomentumProfile::Gaussian { center, width } => Some(GaussianPacket {
                center,
                width,
                position: spec.position,
            }),
            _ => None,
        },
        _ => None,
    };
    let mut rows = Vec::new();
    let mut worst: Option<f64> = None;
    for (i, &r) in radii.iter().enumerate() {
        let oracle = match &gaussian {
            Some(g) => Some(free_gaussian_sojourn(g, r)?.value),
            None => None,
        };
        if let Some(o) = oracle {
            worst = Some(worst.unwrap_or(0.0).max((t.values[i] - o).abs()));
        }
        rows.push((r, t.values[i], oracle));
    }
    write_csv(&dir.join("sojourn_free.csv"), &["r", "T0_phi", "T0_closed_form"], &rows)?;
    let out = json!({
        "scenario": s.name,
        "config_hash": s.config_hash(),
        "radii": radii,
        "free_sojourn": t.values,
        "tail_bound": t.tail_bound,
        "quadrature_error": t.quadrature_error,
        "max_closed_form_deviation": worst,
        "files": files(&dir, &["sojourn_free.csv", "sojourn.json"]),
    });
    write_json(&dir.join("sojourn.json"), &out)?;
    Ok(out)
}

fn cmd_verify(cli: &Cli, suite: &str, scenario_dir: Option<&Path>) -> CmdResult {
    let set = match scenario_dir {
        Some(d) => ScenarioSet::from_dir(d)?,
        None => ScenarioSet::builtin()?,
    };
    let dir = output_dir(cli, None, "output/verify");
    let report = run_suite(suite, set, execution(cli), |r| eprintln!("{}", r.line()))?;
    let value = serde_json::to_value(&report).map_err(|e| Failure {
        kind: "io".into(),
        message: e.to_string(),
        code: 1,
    })?;
    write_json(&dir.join("verify.json"), &value)?;
    if !report.passed {
        let failed: Vec<String> = report
            .criteria
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.criterion.to_string())
            .collect();
        return Err(Failure {
            kind: "verification_failed".into(),
            message: format!("criteria {} failed; see {}", failed.join(", "), dir.join("verify.json").display()),
            code: 1,
        });
    }
    Ok(value)
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Modes { scenario } => cmd_modes(cli, scenario),
        Command::Smatrix {
            scenario,
            lambda_min,
            lambda_max,
            points,
        } => cmd_smatrix(cli, scenario, *lambda_min, *lambda_max, *points),
        Command::Delay {
            scenario,
            r_max,
            t0,
            dt,
            trace_every,
        } => cmd_delay(cli, scenario, *r_max, *t0, *dt, *trace_every),
        Command::Sojourn { scenario, r_max } => cmd_sojourn(cli, scenario, *r_max),
        Command::Verify { suite, scenario_dir } => cmd_verify(cli, suite, scenario_dir.as_deref()),
    }
}

fn report_error(command: &str, f: &Failure) -> ExitCode {
    let report = json!({"error": {"kind": f.kind, "message": f.message}, "command": command});
    eprintln!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure {
                kind: "usage".into(),
                message: e.to_string().trim().to_string(),
                code: 2,
            };
            return report_error("", &f);
        }
    };
    let name = match &cli.command {
        Command::Modes { .. } => "modes",
        Command::Smatrix { .. } => "smatrix",
        Command::Delay { .. } => "delay",
        Command::Sojourn { .. } => "sojourn",
        Command::Verify { .. } => "verify",
    };
    match dispatch(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(f) => report_error(name, &f),
    }
}
