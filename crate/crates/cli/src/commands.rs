use std::path::Path;

use anyhow::{anyhow, Context};
use nondiv_core::analysis::{records_from_csv, EocBasis};
use nondiv_core::cordes::{cordes_samples, CordesPolicy};
use nondiv_core::linsolve::SolveError;
use nondiv_core::problems::file::load_problem;
use nondiv_core::study::{run_study, StudyConfig};
use nondiv_core::{builtin, check_cordes, eoc as rates, Constraint, Error, LinearSolver, NewtonConfig, ProblemKind, ProblemSpec};

use crate::output;
use crate::{BasisChoice, CordesArgs, EocArgs, GSpace, PolicyChoice, SolveArgs, SolverChoice};

pub enum Failure {
    /// Bad flags, files or problem data: exit code 1.
    Input(anyhow::Error),
    /// Newton or a linear solver did not converge: exit code 2.
    NotConverged(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::NotConverged(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        let e = match self {
            Failure::Input(e) | Failure::NotConverged(e) => e,
        };
        format!("{e:#}")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let numerical = matches!(
            e,
            Error::Diverged { .. }
                | Error::ConvexityLost { .. }
                | Error::Solve(SolveError::NotConverged { .. } | SolveError::Breakdown { .. } | SolveError::NotPositiveDefinite(_))
        );
        if numerical {
            Failure::NotConverged(e.into())
        } else {
            Failure::Input(e.into())
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Linear,
    MongeAmpere,
    Hjb,
}

impl Kind {
    fn matches(self, k: ProblemKind) -> bool {
        matches!(
            (self, k),
            (Kind::Linear, ProblemKind::Linear) | (Kind::MongeAmpere, ProblemKind::MongeAmpere) | (Kind::Hjb, ProblemKind::Hjb)
        )
    }
}

/// A built-in name, or else a problem file.
pub fn resolve_problem(name: &str) -> std::result::Result<ProblemSpec, Failure> {
    match builtin(name) {
        Ok(spec) => Ok(spec),
        Err(Error::UnknownProblem(_)) if Path::new(name).is_file() => {
            load_problem(Path::new(name)).map_err(|e| Failure::Input(anyhow!(e).context(format!("reading problem file `{name}`"))))
        }
        Err(Error::UnknownProblem(_)) => Err(Failure::Input(anyhow!(
            "`{name}` is neither a built-in problem ({}) nor a readable file",
            nondiv_core::problems::BUILTIN_NAMES.join(", ")
        ))),
        Err(e) => Err(e.into()),
    }
}

fn study_config(args: &SolveArgs) -> StudyConfig {
    let solver = match args.solver {
        SolverChoice::Cholesky => LinearSolver::SparseCholesky,
        SolverChoice::Cg => LinearSolver::cg(),
        SolverChoice::Dense => LinearSolver::DenseCholesky,
    };
    StudyConfig {
        degree: args.degree as usize,
        resolution: args.resolution,
        levels: args.levels,
        adaptive: args.adapt,
        mark_fraction: args.mark_fraction,
        max_dofs: args.max_dofs,
        g_constraint: match args.g_space {
            GSpace::Relaxed => Constraint::None,
            GSpace::Tangential => Constraint::ZeroTangential,
        },
        newton: NewtonConfig {
            tol: args.tol,
            max_iter: args.max_iter,
            theta: args.theta,
            alpha_samples: args.alpha_samples,
            solver,
            // divergence is reported through the exit code once outputs are written
            fail_on_divergence: false,
            ..NewtonConfig::default()
        },
        cordes_policy: args.cordes.map(|p| match p {
            PolicyChoice::Enforce => CordesPolicy::Enforce,
            PolicyChoice::Warn => CordesPolicy::Warn,
        }),
    }
}

pub fn solve(args: &SolveArgs, kind: Kind, radius: Option<f64>) -> Outcome {
    let name = match (&args.problem, kind) {
        (Some(p), _) => p.clone(),
        (None, Kind::Linear) => "linear-cordes".into(),
        (None, Kind::MongeAmpere) => format!("ma-{}", radius.unwrap_or(std::f64::consts::SQRT_2)),
        (None, Kind::Hjb) => "hjb-aniso".into(),
    };
    let spec = resolve_problem(&name)?;
    if !kind.matches(spec.kind) {
        return Err(Failure::Input(anyhow!("problem `{}` is of kind {}, which this command does not solve", spec.name, spec.kind)));
    }
    if args.levels == 0 || args.resolution == 0 {
        return Err(Failure::Input(anyhow!("--levels and --resolution must be at least 1")));
    }
    let cfg = study_config(args);
    let result = run_study(&spec, &cfg)?;
    output::write_study(&args.out, &spec, &cfg, &result)
        .with_context(|| format!("writing results to {}", args.out.display()))
        .map_err(Failure::Input)?;
    print!("{}", nondiv_core::analysis::records_to_csv(&result.records));
    if !result.converged {
        return Err(Failure::NotConverged(anyhow!(
            "Newton iteration did not reach tolerance {:e} within {} iterations; see {}",
            args.tol,
            args.max_iter,
            args.out.join("trace.csv").display()
        )));
    }
    Ok(())
}

pub fn cordes_check(args: &CordesArgs) -> Outcome {
    let spec = resolve_problem(&args.problem)?;
    if spec.kind == ProblemKind::MongeAmpere {
        return Err(Failure::Input(anyhow!(
            "`{}` is a Monge-Ampere problem; its coefficients exist only along the Newton iteration",
            spec.name
        )));
    }
    let degree = args.degree as usize;
    let mesh = spec.initial_mesh(args.resolution, degree)?;
    let points = cordes_samples(&mesh, 2 * degree + 2)?;
    let report = check_cordes(spec.coefficients()?, &points, args.alpha_samples)?;
    println!("problem         {}", spec.name);
    println!("{report}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(dir.join("cordes.csv"), report.to_csv()))
            .with_context(|| format!("writing {}", dir.join("cordes.csv").display()))
            .map_err(Failure::Input)?;
    }
    if !report.passed {
        return Err(Failure::Input(anyhow!("problem `{}` does not satisfy the Cordes condition", spec.name)));
    }
    Ok(())
}

pub fn eoc(args: &EocArgs) -> Outcome {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))
        .map_err(Failure::Input)?;
    let records = records_from_csv(&text)?;
    if records.len() < 2 {
        return Err(Failure::Input(anyhow!("need at least two records to compute rates")));
    }
    let basis = match args.basis {
        BasisChoice::H => EocBasis::MeshSize,
        BasisChoice::Dofs => EocBasis::Dofs,
    };
    let sizes: Vec<f64> = records.iter().map(|r| r.size(basis)).collect();
    let column = |f: &dyn Fn(&nondiv_core::ConvergenceRecord) -> Option<f64>| -> std::result::Result<Vec<Option<f64>>, Failure> {
        let vals: Option<Vec<f64>> = records.iter().map(f).collect();
        match vals {
            Some(v) => Ok(std::iter::once(None).chain(rates(&sizes, &v)?.into_iter().map(Some)).collect()),
            None => Ok(vec![None; records.len()]),
        }
    };
    let cols = [
        column(&|r| r.errors.map(|e| e.u_l2))?,
        column(&|r| r.errors.map(|e| e.u_h1))?,
        column(&|r| r.errors.map(|e| e.g_l2))?,
        column(&|r| r.errors.map(|e| e.g_h1))?,
        column(&|r| r.errors.map(|e| e.y))?,
        column(&|r| Some(r.eta))?,
    ];
    println!("level,dofs,eoc_u_l2,eoc_u_h1,eoc_g_l2,eoc_g_h1,eoc_Y,eoc_eta");
    for (i, r) in records.iter().enumerate() {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| c[i].map_or_else(|| "nan".to_string(), |v| format!("{v:.4}")))
            .collect();
        println!("{},{},{}", r.level, r.dofs, cells.join(","));
    }
    Ok(())
}
