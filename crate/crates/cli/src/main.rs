mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subsys_core::compare::compare;
use subsys_core::decomposition::{decompose, verify_theorem_with, DecompositionReport, DEFAULT_CLUSTER_TOL};
use subsys_core::dynamics::{make_kernel, no_gain_check, propagate_full, propagate_reduced, ForcingSignal, ForcingTarget, KernelSide, TimeGrid};
use subsys_core::lattice::{build_lattice_system, LatticeMetadata, LatticeSpec};
use subsys_core::system::{assemble_full, random_system, SystemFile, DEFAULT_TOL};

use crate::io::{emit, load_state, load_system, render, write_atomic, CliError, CliResult};

#[derive(Parser)]
#[command(name = "subsys", version, about = "Observable/hidden decomposition of conservative linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic random system file.
    GenRandom(GenRandom),
    /// Generate the lattice example: a cube observed inside a box.
    GenLattice(GenLattice),
    /// Compute the four-way decomposition and report its dimensions.
    Decompose(Decompose),
    /// Check the orbit identities, block form and multiplicity bound.
    VerifyTheorem(VerifyTheorem),
    /// Sample a response kernel on a time grid (CSV).
    Kernel(KernelCmd),
    /// Propagate the full system from a given state (CSV).
    SimulateFull(Simulate),
    /// Propagate the reduced observable dynamics with memory (CSV).
    SimulateReduced(Simulate),
    /// Compare reduced and full dynamics and estimate the convergence order.
    Compare(CompareCmd),
    /// Evaluate the no-gain quadratic form on random test signals.
    NoGain(NoGain),
}

#[derive(Args)]
struct TolArg {
    /// Relative tolerance; defaults to the system file's value, or 1e-10.
    #[arg(long, env = "SUBSYS_TOL")]
    tol: Option<f64>,
}

impl TolArg {
    fn get(&self) -> CliResult<Option<f64>> {
        match self.tol {
            Some(t) if !(t > 0.0 && t.is_finite()) => Err(CliError::Usage(format!("--tol must be positive, got {t}"))),
            t => Ok(t),
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// End of the time interval.
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    /// Number of steps (at least 2).
    #[arg(long, default_value_t = 2000)]
    steps: usize,
}

impl GridArgs {
    fn grid(&self) -> CliResult<TimeGrid> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(CliError::Usage(format!("--t-max must be positive, got {}", self.t_max)));
        }
        Ok(TimeGrid::uniform(self.t_max, self.steps)?)
    }
}

#[derive(Args)]
struct GenRandom {
    #[arg(long)]
    d1: usize,
    #[arg(long)]
    d2: usize,
    /// Rank of the coupling block.
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct GenLattice {
    /// Lattice dimension (1, 2 or 3).
    #[arg(long, default_value_t = 3)]
    dims: usize,
    /// Box side M.
    #[arg(long = "box")]
    box_size: usize,
    /// Cube side N.
    #[arg(long)]
    cube: usize,
    /// Low corner of the cube, comma separated; centred when omitted.
    #[arg(long, value_delimiter = ',')]
    offset: Option<Vec<usize>>,
    #[arg(long)]
    output: PathBuf,
    /// Also write the metadata on its own to this file.
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct Decompose {
    #[arg(long)]
    input: PathBuf,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct VerifyTheorem {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Relative eigenvalue gap below which eigenvalues are merged.
    #[arg(long, default_value_t = DEFAULT_CLUSTER_TOL)]
    cluster_tol: f64,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Observable,
    Hidden,
}

impl From<Side> for KernelSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Observable => KernelSide::Observable,
            Side::Hidden => KernelSide::Hidden,
        }
    }
}

#[derive(Args)]
struct KernelCmd {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Side::Observable)]
    side: Side,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct Simulate {
    #[arg(long)]
    input: PathBuf,
    /// JSON array of [re, im] pairs; defaults to the first unit vector.
    #[arg(long)]
    initial: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct CompareCmd {
    #[arg(long)]
    input: PathBuf,
    /// Observable initial state, JSON array of [re, im] pairs.
    #[arg(long)]
    initial: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    /// Fail (exit 1) if the sup-norm discrepancy exceeds this.
    #[arg(long)]
    max_diff: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct NoGain {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Side::Observable)]
    side: Side,
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    #[arg(long, default_value_t = 400)]
    steps: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::GenRandom(a) => {
            let tol = a.tol.get()?.unwrap_or(DEFAULT_TOL);
            let sys = random_system(a.d1, a.d2, a.rank, a.seed)?.with_tol(tol);
            write_atomic(&a.output, &(SystemFile::from_system(&sys).to_json() + "\n"))?;
            println!("wrote {} (d1={}, d2={}, rank={}, seed={}, tol={tol:e})", a.output.display(), a.d1, a.d2, a.rank, a.seed);
            Ok(())
        }
        Command::GenLattice(a) => gen_lattice(a),
        Command::Decompose(a) => {
            let (sys, tol) = load_system(&a.input, a.tol.get()?)?;
            let dec = decompose(&sys)?;
            let report = DecompositionReport::new(&sys, &dec);
            emit(a.output.as_deref(), &render("decompose", tol, &report))?;
            if a.output.is_some() {
                println!(
                    "tol={tol:e} dims (h1d, h1c, h2c, h2d) = ({}, {}, {}, {})",
                    report.dim_h1d, report.dim_h1c, report.dim_h2c, report.dim_h2d
                );
            }
            if !report.passed {
                return Err(CliError::Verification(format!(
                    "block form residual {:e} > {:e}",
                    report.block_form_residual, report.threshold
                )));
            }
            Ok(())
        }
        Command::VerifyTheorem(a) => {
            let (sys, tol) = load_system(&a.input, a.tol.get()?)?;
            if !(a.cluster_tol > 0.0 && a.cluster_tol.is_finite()) {
                return Err(CliError::Usage(format!("--cluster-tol must be positive, got {}", a.cluster_tol)));
            }
            let report = verify_theorem_with(&sys, a.cluster_tol)?;
            println!("tol={tol:e} threshold={:e}", report.threshold);
            for d in report.orbit_equalities.iter().chain(&report.chain_identities).chain(&report.containment_residuals) {
                println!("{}: {:e}", d.name, d.distance);
            }
            println!("block form residual: {:e}", report.block_form_residual);
            println!("multiplicity {} <= bound {}", report.multiplicity_omega_c, report.bound);
            if let Some(p) = &a.output {
                write_atomic(p, &render("verify-theorem", tol, &report))?;
            }
            let failures = report.failures();
            if !failures.is_empty() {
                return Err(CliError::Verification(failures.join("; ")));
            }
            Ok(())
        }
        Command::Kernel(a) => {
            let (sys, tol) = load_system(&a.input, a.tol.get()?)?;
            let grid = a.grid.grid()?;
            let kernel = make_kernel(&sys, a.side.into());
            write_atomic(&a.output, &kernel.to_csv(&grid))?;
            println!("tol={tol:e} wrote {} ({} samples, kernel dim {})", a.output.display(), grid.len(), kernel.dim());
            Ok(())
        }
        Command::SimulateFull(a) => {
            let (sys, tol) = load_system(&a.input, a.tol.get()?)?;
            let grid = a.grid.grid()?;
            let v0 = load_state(a.initial.as_deref(), sys.dim())?;
            let traj = propagate_full(&assemble_full(&sys), &v0, &ForcingSignal::zero(ForcingTarget::Full), &grid)?;
            write_atomic(&a.output, &traj.to_csv())?;
            println!("tol={tol:e} wrote {} ({} steps)", a.output.display(), grid.steps());
            Ok(())
        }
        Command::SimulateReduced(a) => {
            let (sys, tol) = load_system(&a.input, a.tol.get()?)?;
            let grid = a.grid.grid()?;
            let v0 = load_state(a.initial.as_deref(), sys.d1())?;
            let traj = propagate_reduced(&sys, &v0, &ForcingSignal::zero(ForcingTarget::Observable), &grid)?;
            write_atomic(&a.output, &traj.to_csv())?;
            println!("tol={tol:e} wrote {} ({} steps)", a.output.display(), grid.steps());
            Ok(())
        }
        Command::Compare(a) => {
            let (sys, tol) = load_system(&a.input, a.tol.get()?)?;
            let grid = a.grid.grid()?;
            let v0 = load_state(a.initial.as_deref(), sys.d1())?;
            let report = compare(&sys, &v0, &grid)?;
            println!(
                "tol={tol:e} sup-norm discrepancy {:e} at h={:e}, {:e} at h/2, order {:.4}",
                report.sup_diff,
                report.step,
                report.sup_diff_refined,
                report.order
            );
            if let Some(p) = &a.output {
                write_atomic(p, &render("compare", tol, &report))?;
            }
            match a.max_diff {
                Some(limit) if !(report.sup_diff <= limit) => Err(CliError::Verification(format!(
                    "sup-norm discrepancy {:e} > {limit:e}",
                    report.sup_diff
                ))),
                _ => Ok(()),
            }
        }
        Command::NoGain(a) => {
            let (sys, tol) = load_system(&a.input, a.tol.get()?)?;
            let grid = GridArgs { t_max: a.t_max, steps: a.steps }.grid()?;
            let report = no_gain_check(&make_kernel(&sys, a.side.into()), a.trials, &grid, a.seed);
            println!(
                "tol={tol:e} {} signals: min form {:e}, eps_quad {:e}, negative excursion {:e}",
                report.trials.len(),
                report.min_value,
                report.eps_quad,
                report.negative_excursion
            );
            if let Some(p) = &a.output {
                write_atomic(p, &render("no-gain", tol, &report))?;
            }
            if !report.passed {
                let worst = report
                    .trials
                    .iter()
                    .map(|t| t.value + t.eps_quad)
                    .fold(f64::INFINITY, f64::min);
                return Err(CliError::Verification(format!("no-gain form below -eps_quad by {:e}", -worst)));
            }
            Ok(())
        }
    }
}

fn gen_lattice(a: GenLattice) -> CliResult<()> {
    let tol = a.tol.get()?.unwrap_or(DEFAULT_TOL);
    let mut spec = LatticeSpec::centered(a.dims, a.box_size, a.cube);
    if let Some(offset) = &a.offset {
        if offset.len() != a.dims {
            return Err(CliError::Usage(format!(
                "--offset has {} entries, expected {}",
                offset.len(),
                a.dims
            )));
        }
        spec.offset = [0; 3];
        spec.offset[..a.dims].copy_from_slice(offset);
    }
    let sys = build_lattice_system(&spec)?.with_tol(tol);
    let meta = LatticeMetadata::new(&spec)?;
    let meta_json = serde_json::to_value(&meta).expect("metadata serializes");
    let mut file = SystemFile::from_system(&sys);
    file.metadata = Some(meta_json);
    write_atomic(&a.output, &(file.to_json() + "\n"))?;
    if let Some(p) = &a.metadata {
        write_atomic(p, &render("gen-lattice", tol, &meta))?;
    }
    println!(
        "wrote {} (d1={}, d2={}, surface_count={}, multiplicity_bound={}, tol={tol:e})",
        a.output.display(),
        sys.d1(),
        sys.d2(),
        meta.surface_count,
        meta.multiplicity_bound
    );
    if !spec.is_interior() {
        eprintln!("note: cube touches the box boundary; the surface bound assumes an interior cube");
    }
    Ok(())
}
