//! `rheo` command-line front end.
//!
//! Exit codes: 0 on success, 1 on invalid input or a failed check, 2 when the
//! solver gives up (a diagnostic dump is left in the output directory).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use rheo_core::config::parse_config;
use rheo_core::galerkin::energy::energy_report;
use rheo_core::galerkin::simulate;
use rheo_core::io::{read_energy_csv, write_audit};
use rheo_core::stratified::{audit, log_time_grid, RegularizerKind, SlipProfile};
use rheo_core::tensor::Dim;
use rheo_core::weakform::fd_check_all;
use rheo_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "rheo",
    version,
    about = "Large-strain viscoelastic creep solver and regularizer audit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a configured simulation.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate gradient regularizers on the sheared stripe.
    AuditHardening {
        #[arg(long, value_enum, default_value_t = ProfileArg::Both)]
        profile: ProfileArg,
        #[arg(long, default_value_t = 1.0)]
        ell: f64,
        /// Band width of the tanh profile.
        #[arg(long, default_value_t = 0.2)]
        width: f64,
        #[arg(long, default_value_t = 1.0)]
        t_min: f64,
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        /// Number of log-spaced sample times.
        #[arg(long, default_value_t = 41)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Gauss points per panel.
        #[arg(long, default_value_t = 32)]
        quad_points: usize,
        /// Output directory, or a path ending in `.csv` for the table
        /// (the summary then goes next to it).
        #[arg(long, default_value = "audit")]
        out: PathBuf,
    },
    /// Compare analytic variational derivatives with central differences.
    VerifyDerivatives {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Recompute the energy balance of a finished run.
    EnergyReport {
        /// Run directory containing `energy.csv`.
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    Linear,
    Tanh,
    Both,
}

const EXIT_INVALID: u8 = 1;
const EXIT_SOLVER: u8 = 2;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NewtonDiverged { .. }
        | Error::DeterminantBreached { .. }
        | Error::StepCollapsed { .. }
        | Error::NonPositiveDeterminant { .. }
        | Error::NonPositiveDeterminantAt { .. }
        | Error::SingularMatrix { .. } => EXIT_SOLVER,
        _ => EXIT_INVALID,
    }
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("RHEO_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!(
                "RHEO_THREADS must be a positive integer, got '{s}'"
            )),
        },
    }
}

fn run_simulate(config: &Path, out: Option<&Path>) -> u8 {
    let cfg = match parse_config(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INVALID;
        }
    };
    let start = Instant::now();
    match simulate(&cfg, out, threads) {
        Ok(run) => {
            let report = energy_report(&run.rows);
            let last = run.rows.last().expect("at least the initial row");
            println!("steps: {}", run.reports.len());
            println!("final time: {}", last.t);
            println!("max balance residual: {:e}", report.max_residual);
            println!("min det P: {:e}", report.min_det_p);
            println!("min det grad y: {:e}", report.min_det_grad_y);
            println!("output: {}", run.out_dir.display());
            println!("elapsed: {:.2} s", start.elapsed().as_secs_f64());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code(&e);
            if code == EXIT_SOLVER {
                let dir = out.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf);
                eprintln!(
                    "last accepted state: {}",
                    dir.join("fields_failed.dump").display()
                );
            }
            code
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_audit(
    profile: ProfileArg,
    ell: f64,
    width: f64,
    t_min: f64,
    t_max: f64,
    samples: usize,
    kappa: f64,
    quad_points: usize,
    out: &Path,
) -> u8 {
    if !(kappa > 0.0 && kappa.is_finite()) {
        eprintln!("error: kappa must be positive");
        return EXIT_INVALID;
    }
    if !(t_min > 0.0 && t_max > t_min) || samples < 2 {
        eprintln!("error: need 0 < t-min < t-max and at least 2 samples");
        return EXIT_INVALID;
    }
    let profiles = match profile {
        ProfileArg::Linear => vec![SlipProfile::linear(ell)],
        ProfileArg::Tanh => vec![SlipProfile::tanh(ell, width)],
        ProfileArg::Both => vec![SlipProfile::linear(ell), SlipProfile::tanh(ell, width)],
    };
    let times = log_time_grid(t_min, t_max, samples);
    let report = match audit(&profiles, &RegularizerKind::ALL, &times, kappa, quad_points) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let (csv, summary) = if out.extension().is_some_and(|e| e == "csv") {
        let dir = out.parent().unwrap_or(Path::new(""));
        (out.to_path_buf(), dir.join("summary.txt"))
    } else {
        (out.join("audit.csv"), out.join("summary.txt"))
    };
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return EXIT_INVALID;
        }
    }
    if let Err(e) = write_audit(&csv, &summary, &report) {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    println!(
        "{:<8} {:<16} {:<10} {:>10}",
        "profile", "regularizer", "class", "exponent"
    );
    for s in &report.series {
        println!(
            "{:<8} {:<16} {:<10} {:>10.4}",
            s.profile.name(),
            s.kind.name(),
            s.classification.label(),
            s.exponent
        );
    }
    println!("table: {}", csv.display());
    println!("summary: {}", summary.display());
    0
}

fn run_verify(dim: usize, trials: usize, seed: u64, tol: f64) -> u8 {
    let Some(d) = Dim::new(dim) else {
        eprintln!("error: dimension must be 2 or 3, got {dim}");
        return EXIT_INVALID;
    };
    if trials == 0 {
        eprintln!("error: trials must be positive");
        return EXIT_INVALID;
    }
    let start = Instant::now();
    let report = match fd_check_all(seed, trials, d) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    for (name, err) in report.families() {
        let verdict = if err <= tol { "ok" } else { "FAIL" };
        println!("{name:<12} max rel error {err:.3e} {verdict}");
    }
    println!(
        "max rel error {:.3e} over {trials} trials (seed {seed})",
        report.max_error()
    );
    println!("elapsed: {:.2} s", start.elapsed().as_secs_f64());
    if report.max_error() <= tol {
        0
    } else {
        EXIT_INVALID
    }
}

fn run_energy_report(run: &Path) -> u8 {
    let rows = match read_energy_csv(&run.join("energy.csv")) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if rows.is_empty() {
        eprintln!("error: {} has no rows", run.join("energy.csv").display());
        return EXIT_INVALID;
    }
    let r = energy_report(&rows);
    let last = rows.last().expect("non-empty");
    println!("rows: {}", rows.len());
    println!("final time: {}", last.t);
    println!("max balance residual: {:e}", r.max_residual);
    println!("residual per unit time: {:e}", r.residual_per_unit_time);
    println!("peak stored energy increase: {:e}", r.peak_stored_increase);
    println!("min det P: {:e}", r.min_det_p);
    println!("min det grad y: {:e}", r.min_det_grad_y);
    0
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Simulate { config, out } => run_simulate(&config, out.as_deref()),
        Command::AuditHardening {
            profile,
            ell,
            width,
            t_min,
            t_max,
            samples,
            kappa,
            quad_points,
            out,
        } => run_audit(
            profile,
            ell,
            width,
            t_min,
            t_max,
            samples,
            kappa,
            quad_points,
            &out,
        ),
        Command::VerifyDerivatives {
            dim,
            trials,
            seed,
            tol,
        } => run_verify(dim, trials, seed, tol),
        Command::EnergyReport { run } => run_energy_report(&run),
    };
    ExitCode::from(code)
}
