//! Configured runs: initial state, time loop and file output.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{InitialDeformation, InitialVelocity, RunConfig};
use crate::error::{Error, Result};
use crate::io::{energy_csv_row, read_dump, write_dump, ENERGY_HEADER};
use crate::tensor::Mat;

use super::assembly::Problem;
use super::energy::EnergyRow;
use super::project::project_initial;
use super::space::SplineSpace;
use super::state::{EnergyAccount, StepReport};
use super::stepper::{run_time_loop, Checkpoint, TimeControl};

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// Row for the starting state followed by one row per accepted step.
    pub rows: Vec<EnergyRow>,
    pub reports: Vec<StepReport>,
    pub final_checkpoint: Checkpoint,
    pub dumps: Vec<PathBuf>,
}

/// Builds the discrete problem of a configuration.
pub fn build_problem<const D: usize>(config: &RunConfig) -> Result<Problem<D>> {
    let space = SplineSpace::<D>::new(&config.grid, config.quadrature_points)?;
    Problem::new(
        space,
        config.material,
        config.mode,
        config.loads.clone(),
        config.solver,
    )
}

/// Starting checkpoint: a projected analytic state or a restored dump.
pub fn initial_checkpoint<const D: usize>(
    config: &RunConfig,
    problem: &Problem<D>,
) -> Result<Checkpoint> {
    if let InitialDeformation::File(path) = &config.initial_y {
        let (grid, cp) = read_dump(path)?;
        if &grid != problem.space.grid() {
            return Err(Error::Dump {
                path: path.clone(),
                message: "grid differs from the configured grid".into(),
            });
        }
        return Ok(cp);
    }
    let l2 = config.grid.lengths[1];
    let shear = match config.initial_y {
        InitialDeformation::Shear(g) => g,
        _ => 0.0,
    };
    let initial_v = config.initial_v;
    let state = project_initial(
        &problem.space,
        |x| {
            let mut y = x;
            y[0] += shear * x[1];
            y
        },
        |x| {
            let mut v = [0.0; D];
            if let InitialVelocity::Shear { rate, bump } = initial_v {
                v[0] = rate * x[1] + bump * (PI * x[1] / l2).sin();
            }
            v
        },
        |_| Mat::identity(),
        config.solver.det_threshold,
    )?;
    let energy = problem.energies(&state)?;
    Ok(Checkpoint {
        state,
        account: EnergyAccount::starting_from(&energy),
        step: 0,
        dt: config.time.dt0,
        easy_steps: 0,
    })
}

/// Energy row describing a checkpoint without a step behind it.
pub fn checkpoint_row<const D: usize>(problem: &Problem<D>, cp: &Checkpoint) -> Result<EnergyRow> {
    let mut energy = problem.energies(&cp.state)?;
    let balance_residual = cp.account.close(&mut energy);
    let dets = problem.monitor_determinants(&cp.state);
    Ok(EnergyRow {
        t: cp.state.t,
        energy,
        balance_residual,
        min_det_p: dets.min_det_p,
        min_det_grad_y: dets.min_det_grad_y,
        newton_iters: 0,
    })
}

/// Runs a configuration, writing `energy.csv` and `fields_<step>.dump` into
/// `out_dir` (or the configured directory). `threads` bounds the assembly
/// workers; results do not depend on it.
///
/// On a solver failure the last accepted state is written to
/// `fields_failed.dump` before the error is returned.
pub fn simulate(
    config: &RunConfig,
    out_dir: Option<&Path>,
    threads: Option<usize>,
) -> Result<RunOutcome> {
    let run = || match config.dim {
        2 => simulate_dim::<2>(config, out_dir),
        3 => simulate_dim::<3>(config, out_dir),
        d => Err(Error::Invalid(format!("dimension must be 2 or 3, got {d}"))),
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn simulate_dim<const D: usize>(config: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let dir = out_dir.map_or_else(|| config.output.dir.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir)?;
    let problem = build_problem::<D>(config)?;
    let mut cp = initial_checkpoint(config, &problem)?;
    let grid = config.grid.clone();

    let mut csv = BufWriter::new(File::create(dir.join("energy.csv"))?);
    writeln!(csv, "{ENERGY_HEADER}")?;
    let first = checkpoint_row(&problem, &cp)?;
    writeln!(csv, "{}", energy_csv_row(&first))?;
    csv.flush()?;

    let mut dumps = Vec::new();
    let dump_path = |step: usize| dir.join(format!("fields_{step}.dump"));
    write_dump(&dump_path(cp.step), &grid, &cp)?;
    dumps.push(dump_path(cp.step));

    let mut rows = vec![first];
    let mut reports = Vec::new();
    let control = TimeControl {
        t_end: config.time.t_end,
        dt_max: config.time.dt_max,
        dt_min: 1e-10 * config.time.t_end,
    };
    let every = config.output.every.max(1);
    let result = run_time_loop(&problem, &mut cp, &control, |cp, report| {
        let row = EnergyRow::from(report);
        writeln!(csv, "{}", energy_csv_row(&row))?;
        csv.flush()?;
        rows.push(row);
        reports.push(report.clone());
        if cp.step % every == 0 {
            write_dump(&dump_path(cp.step), &grid, cp)?;
            dumps.push(dump_path(cp.step));
        }
        Ok(())
    });
    if let Err(e) = result {
        let _ = write_dump(&dir.join("fields_failed.dump"), &grid, &cp);
        return Err(e);
    }
    if dumps.last() != Some(&dump_path(cp.step)) {
        write_dump(&dump_path(cp.step), &grid, &cp)?;
        dumps.push(dump_path(cp.step));
    }
    Ok(RunOutcome {
        out_dir: dir,
        rows,
        reports,
        final_checkpoint: cp,
        dumps,
    })
}
