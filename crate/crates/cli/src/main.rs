//! `pnpns`: runs scenarios and convergence studies of the PNP-NS solver.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use pnpns_core::mms::forcing_residual;
use pnpns_core::oracle::check_all;
use pnpns_core::run::write_study;
use pnpns_core::{
    convergence_study, preset, run_scenario, Assembler, DiagnosticsRecord, Discretization, Error, FormParams,
    RunConfig, RunOptions, StudyMode, TriMesh, PRESET_NAMES,
};

/// Sets the worker thread count; unset means one per core.
const THREADS_VAR: &str = "PNPNS_THREADS";

const ORACLE_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "pnpns", version, about = "DG solver for the Poisson-Nernst-Planck-Navier-Stokes system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML file.
    Run { config: PathBuf },
    /// Manufactured-solution convergence study.
    Convergence {
        /// spatial-l2, spatial-h1 or temporal
        #[arg(long)]
        mode: String,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        levels: usize,
        /// Coarsest mesh of a temporal study, in cells per side.
        #[arg(long, default_value_t = 8)]
        base_cells: usize,
        /// Directory for `convergence.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Compare assembled operators with the reference quadrature and check the manufactured forcing.
    OracleCheck,
}

#[derive(Subcommand)]
enum PresetAction {
    /// Names and sizes of the presets.
    List,
    /// Print a preset as TOML.
    Show { name: String },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::SolverFailure { .. } => 3,
        Error::Io { .. } => 4,
    }
}

fn summary(r: &DiagnosticsRecord) -> String {
    let total = r.energies.total.map_or("undefined".to_string(), |v| format!("{v:.6e}"));
    let mut s = format!(
        "step {} t = {:.6}\n  mass        {:.12e} {:.12e}\n  mass dev    {:.3e} {:.3e}\n  min c       {:.6e} {:.6e}\n  max c       {:.6e} {:.6e}\n  E_elec      {:.6e}\n  E_total     {total}\n  E_kin       {:.6e}",
        r.step,
        r.t,
        r.mass[0],
        r.mass[1],
        r.mass_deviation[0],
        r.mass_deviation[1],
        r.min_c[0],
        r.min_c[1],
        r.max_c[0],
        r.max_c[1],
        r.energies.elec,
        r.energies.kinetic,
    );
    if let Some(e) = &r.errors {
        for (name, v) in pnpns_core::ErrorBundle::COLUMNS.iter().zip(e.values()) {
            s += &format!("\n  {name:<11} {v:.6e}");
        }
    }
    s
}

fn run(config: PathBuf) -> Result<(), Error> {
    let resolved = RunConfig::load(&config)?.resolve()?;
    let s = &resolved.scenario;
    println!(
        "{}: {}x{} cells, k = {}, dt = {}, T = {}, output in {}",
        s.name,
        s.cells[0],
        s.cells[1],
        s.k,
        s.dt,
        s.t_final,
        resolved.plan.dir.display()
    );
    let out = run_scenario(s, &resolved.options, &resolved.plan)?;
    println!("{}", summary(&out.last));
    println!("{} steps, {} snapshots, diagnostics in {}", out.steps, out.snapshots.len(), out.csv.display());
    Ok(())
}

fn convergence(mode: &str, degree: usize, levels: usize, base_cells: usize, out: Option<PathBuf>) -> Result<(), Error> {
    let mode = StudyMode::parse(mode)?;
    if !(1..=2).contains(&degree) {
        return Err(Error::Config(format!("degree must be 1 or 2, got {degree}")));
    }
    if levels < 3 {
        return Err(Error::Config(format!("a study needs at least 3 levels, got {levels}")));
    }
    if base_cells == 0 {
        return Err(Error::Config("base cells must be positive".into()));
    }
    let result = convergence_study(mode, degree, levels, base_cells, &RunOptions::default())?;
    print!("{}", result.to_csv());
    if let Some(dir) = out {
        let path = dir.join("convergence.csv");
        write_study(&result, &path)?;
        println!("written to {}", path.display());
    }
    Ok(())
}

fn presets(action: PresetAction) -> Result<(), Error> {
    match action {
        PresetAction::List => {
            for name in PRESET_NAMES {
                let p = preset(name)?;
                println!(
                    "{name:<10} {}x{} on {}x{}, k = {}, dt = {}, T = {}",
                    p.cells[0], p.cells[1], p.extents[0], p.extents[1], p.k, p.dt, p.t_final
                );
            }
        }
        PresetAction::Show { name } => {
            let p = preset(&name).map_err(|e| Error::Config(e.to_string()))?;
            print!("{}", toml::to_string(&p).map_err(|e| Error::Config(e.to_string()))?);
        }
    }
    Ok(())
}

/// Returns whether every check passed.
fn oracle_check() -> Result<bool, Error> {
    let mut ok = true;
    for k in [1, 2] {
        let mesh = TriMesh::rectangle(1.0, 1.0, 1, 1)?;
        let assembler = Assembler::new(Arc::new(Discretization::new(mesh, k)?));
        for c in check_all(&assembler, 10.0) {
            let pass = c.max_difference <= ORACLE_TOL;
            ok &= pass;
            println!(
                "{} k={k} {:<40} max |diff| {:.2e} (largest entry {:.2e})",
                if pass { "ok  " } else { "FAIL" },
                c.name,
                c.max_difference,
                c.max_entry
            );
        }
    }
    let r = forcing_residual(&FormParams::default(), 200, 2024);
    let pass = r <= RESIDUAL_TOL;
    ok &= pass;
    println!("{} manufactured forcing residual {r:.2e} at 200 points", if pass { "ok  " } else { "FAIL" });
    Ok(ok)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run { config } => run(config).map(|()| true),
        Command::Convergence {
            mode,
            degree,
            levels,
            base_cells,
            out,
        } => convergence(&mode, degree, levels, base_cells, out).map(|()| true),
        Command::Presets { action } => presets(action).map(|()| true),
        Command::OracleCheck => oracle_check(),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
