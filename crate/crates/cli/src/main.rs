//! `nondiv-fem`: experiments with the least-squares gradient-recovery solver.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "nondiv-fem", version, about = "Least-squares finite elements for nondivergence-form PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a linear problem on a sequence of meshes.
    SolveLinear(SolveArgs),
    /// Solve the Monge-Ampere equation by Newton's method.
    SolveMa {
        #[command(flatten)]
        solve: SolveArgs,
        /// Radius of the sphere-cap test solution (ignored with --problem).
        #[arg(long = "R", default_value_t = std::f64::consts::SQRT_2)]
        radius: f64,
    },
    /// Solve a Hamilton-Jacobi-Bellman problem by policy iteration.
    SolveHjb(SolveArgs),
    /// Check the Cordes condition of a problem's coefficients.
    CordesCheck(CordesArgs),
    /// Recompute convergence rates from a records.csv file.
    Eoc(EocArgs),
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    /// Built-in problem name or path to a problem file.
    #[arg(long)]
    problem: Option<String>,
    /// Polynomial degree of both unknowns.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    degree: u8,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Number of refinement levels.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Initial mesh resolution.
    #[arg(long, default_value_t = 2)]
    resolution: usize,
    /// Refine adaptively with Dörfler marking.
    #[arg(long)]
    adapt: bool,
    #[arg(long, default_value_t = 0.3)]
    mark_fraction: f64,
    /// Stop after the first level with more unknowns than this.
    #[arg(long)]
    max_dofs: Option<usize>,
    /// Size of the control grid (HJB) and of the Cordes control sampling.
    #[arg(long, default_value_t = 64)]
    alpha_samples: usize,
    #[arg(long, default_value_t = 8)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = SolverChoice::Cholesky)]
    solver: SolverChoice,
    /// Boundary condition of the gradient unknown.
    #[arg(long, value_enum, default_value_t = GSpace::Relaxed)]
    g_space: GSpace,
    /// Override the problem's reaction to failed Cordes checks.
    #[arg(long, value_enum)]
    cordes: Option<PolicyChoice>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct CordesArgs {
    #[arg(long)]
    problem: String,
    /// Degree whose quadrature points are sampled.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    degree: u8,
    #[arg(long, default_value_t = 4)]
    resolution: usize,
    #[arg(long, default_value_t = 64)]
    alpha_samples: usize,
    /// Also write the sampled ratios to <OUT>/cordes.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct EocArgs {
    /// A records.csv file written by one of the solve commands.
    #[arg(long)]
    input: PathBuf,
    /// Measure rates against the mesh size or against dofs^(-1/2).
    #[arg(long, value_enum, default_value_t = BasisChoice::H)]
    basis: BasisChoice,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SolverChoice {
    Cholesky,
    Cg,
    Dense,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GSpace {
    /// No boundary condition on the gradient.
    Relaxed,
    /// Zero tangential trace; axis-aligned polygons only.
    Tangential,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PolicyChoice {
    Enforce,
    Warn,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BasisChoice {
    H,
    Dofs,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("NONDIV_FEM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("NONDIV_FEM_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("NONDIV_FEM_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = init_threads().map_err(commands::Failure::Input).and_then(|_| match cli.command {
        Command::SolveLinear(args) => commands::solve(&args, commands::Kind::Linear, None),
        Command::SolveMa { solve, radius } => commands::solve(&solve, commands::Kind::MongeAmpere, Some(radius)),
        Command::SolveHjb(args) => commands::solve(&args, commands::Kind::Hjb, None),
        Command::CordesCheck(args) => commands::cordes_check(&args),
        Command::Eoc(args) => commands::eoc(&args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
