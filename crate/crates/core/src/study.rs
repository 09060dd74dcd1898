//! Experiment drivers: uniform and adaptive refinement sequences.

use std::sync::Arc;

use crate::adapt::{compute_indicators, dorfler_mark, ErrorIndicators};
use crate::analysis::{error_norms, ConvergenceRecord, EocBasis};
use crate::assembly::{assemble_system, CoefficientField, ThetaOperatorContext};
use crate::cordes::{check_cordes, cordes_samples, CordesPolicy, CordesReport};
use crate::error::{Error, Result};
use crate::mesh::{refine_marked, refine_uniform, TriangleMesh};
use crate::nonlinear::{hjb_select_control, ma_linearisation, newton_solve, NewtonConfig, NewtonTrace, NonlinearProblem};
use crate::problems::{ProblemKind, ProblemSpec};
use crate::space::{Constraint, FeFunction, FeSpace};

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub degree: usize,
    /// Initial mesh resolution, see [`crate::problems::ProblemDomain::mesh`].
    pub resolution: usize,
    /// Maximum number of levels.
    pub levels: usize,
    pub adaptive: bool,
    pub mark_fraction: f64,
    /// Stop once a level has more free unknowns than this.
    pub max_dofs: Option<usize>,
    /// Boundary condition of the gradient space; the relaxed space by default.
    pub g_constraint: Constraint,
    /// Newton parameters; `theta`, `solver` and `quad_degree` also drive linear solves.
    pub newton: NewtonConfig,
    /// Overrides the problem's own policy when set.
    pub cordes_policy: Option<CordesPolicy>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            resolution: 2,
            levels: 4,
            adaptive: false,
            mark_fraction: 0.3,
            max_dofs: None,
            g_constraint: Constraint::None,
            newton: NewtonConfig::default(),
            cordes_policy: None,
        }
    }
}

pub struct Level {
    pub mesh: Arc<TriangleMesh>,
    pub u: FeFunction,
    pub g: FeFunction,
    pub indicators: ErrorIndicators,
    pub trace: Option<NewtonTrace>,
}

pub struct StudyResult {
    pub records: Vec<ConvergenceRecord>,
    pub levels: Vec<Level>,
    pub cordes: Option<CordesReport>,
    pub g_constraint: Constraint,
    /// False if any Newton solve stopped without reaching the tolerance.
    pub converged: bool,
}

impl StudyResult {
    pub fn traces_csv(&self) -> String {
        let mut s = String::from(crate::nonlinear::TRACE_HEADER);
        s.push('\n');
        for (level, l) in self.levels.iter().enumerate() {
            if let Some(t) = &l.trace {
                s.push_str(&t.to_csv(level));
            }
        }
        s
    }
}

/// Checks the problem's coefficients on the quadrature points of `mesh`.
pub fn cordes_report(spec: &ProblemSpec, mesh: &TriangleMesh, cfg: &StudyConfig) -> Result<Option<CordesReport>> {
    if spec.kind == ProblemKind::MongeAmpere {
        return Ok(None);
    }
    let points = cordes_samples(mesh, cfg.newton.quad_degree.unwrap_or(2 * cfg.degree + 2))?;
    Ok(Some(check_cordes(spec.coefficients()?, &points, cfg.newton.alpha_samples)?))
}

pub fn run_study(spec: &ProblemSpec, cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.levels == 0 {
        return Err(Error::InvalidInput("at least one level is required".into()));
    }
    if !(cfg.mark_fraction > 0.0 && cfg.mark_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("marking fraction must lie in (0, 1], got {}", cfg.mark_fraction)));
    }
    let policy = cfg.cordes_policy.unwrap_or(spec.cordes_policy);
    let mut newton = cfg.newton.clone();
    newton.cordes_policy = policy;
    let qdeg = newton.quad_degree.unwrap_or(2 * cfg.degree + 2);

    let mut mesh = Arc::new(spec.initial_mesh(cfg.resolution, cfg.degree)?);
    let cordes = cordes_report(spec, &mesh, cfg)?;
    if let Some(report) = &cordes {
        if !report.passed {
            let msg = format!("problem `{}`: {}", spec.name, report.to_string().lines().last().unwrap_or_default());
            match policy {
                CordesPolicy::Enforce => return Err(Error::CordesViolation(msg)),
                CordesPolicy::Warn => log::warn!("{msg}"),
            }
        }
    }
    let nonlinear = match spec.kind {
        ProblemKind::Linear => None,
        _ => Some(spec.nonlinear_problem()?),
    };

    let mut records = Vec::new();
    let mut levels: Vec<Level> = Vec::new();
    let mut converged = true;
    for level in 0..cfg.levels {
        let space_u = Arc::new(FeSpace::new(mesh.clone(), cfg.degree, 1, Constraint::ZeroTrace)?);
        let space_g = Arc::new(FeSpace::new(mesh.clone(), cfg.degree, 2, cfg.g_constraint)?);
        let dofs = space_u.n_free() + space_g.n_free();

        let (u, g, ctx, trace) = match &nonlinear {
            None => {
                let ctx = ThetaOperatorContext::from_coefficients(newton.theta, spec.coefficients()?.clone())?.with_quad_degree(qdeg);
                let system = assemble_system(&space_u, &space_g, &ctx)?;
                let (u, g, stats) = system.solve(&newton.solver)?;
                log::info!("level {level}: {dofs} unknowns, {} residual {:.2e}", stats.method, stats.residual);
                (u, g, ctx, None)
            }
            Some(problem) => {
                let result = newton_solve(&space_u, &space_g, problem, &newton, None)?;
                converged &= result.trace.converged;
                let values = match problem {
                    NonlinearProblem::MongeAmpere { f } => ma_linearisation(&result.u, &result.g, f, &newton)?.0,
                    NonlinearProblem::Hjb { coefficients } => {
                        hjb_select_control(&result.u, &result.g, coefficients, &newton)?.values
                    }
                };
                // at the final iterate the frozen residual is the nonlinear residual
                let ctx = ThetaOperatorContext::new(newton.theta, CoefficientField::Frozen(Arc::new(values)))?.with_quad_degree(qdeg);
                (result.u, result.g, ctx, Some(result.trace))
            }
        };

        let indicators = compute_indicators(&ctx, &u, &g)?;
        let errors = match &spec.exact {
            Some(exact) => Some(error_norms(&u, &g, exact.as_ref(), None)?),
            None => None,
        };
        records.push(ConvergenceRecord {
            level,
            h: mesh.h(),
            dofs,
            errors,
            eta: indicators.eta(),
            eoc_y: None,
            newton_iters: trace.as_ref().map_or(0, |t| t.iterations),
        });
        log::info!(
            "level {level}: h = {:.4e}, dofs = {dofs}, eta = {:.4e}, Y error = {}",
            mesh.h(),
            indicators.eta(),
            errors.map_or("n/a".to_string(), |e| format!("{:.4e}", e.y))
        );

        let last = level + 1 == cfg.levels || cfg.max_dofs.is_some_and(|m| dofs > m);
        let next = if last {
            None
        } else if cfg.adaptive {
            let marked = dorfler_mark(&indicators, cfg.mark_fraction)?;
            if marked.is_empty() {
                None
            } else {
                Some(refine_marked(&mesh, &marked)?)
            }
        } else {
            Some(refine_uniform(&mesh)?)
        };
        levels.push(Level {
            mesh: mesh.clone(),
            u,
            g,
            indicators,
            trace,
        });
        match next {
            Some(m) => mesh = Arc::new(m),
            None => break,
        }
    }

    let basis = if cfg.adaptive { EocBasis::Dofs } else { EocBasis::MeshSize };
    ConvergenceRecord::fill_eoc(&mut records, basis)?;
    Ok(StudyResult {
        records,
        levels,
        cordes,
        g_constraint: cfg.g_constraint,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;

    #[test]
    fn poisson_uniform_levels() {
        let spec = builtin("poisson-disk").unwrap();
        let cfg = StudyConfig {
            degree: 1,
            levels: 3,
            ..Default::default()
        };
        let res = run_study(&spec, &cfg).unwrap();
        assert_eq!(res.records.len(), 3);
        assert!(res.records.windows(2).all(|w| w[1].dofs > w[0].dofs && w[1].h < w[0].h));
        assert!(res.records[2].eoc_y.unwrap() > 0.7);
        assert!(res.cordes.unwrap().passed);
    }

    #[test]
    fn budget_stops_the_loop() {
        let spec = builtin("poisson-disk").unwrap();
        let cfg = StudyConfig {
            degree: 1,
            levels: 10,
            max_dofs: Some(200),
            ..Default::default()
        };
        let res = run_study(&spec, &cfg).unwrap();
        let last = res.records.last().unwrap();
        assert!(last.dofs > 200);
        assert!(res.records[..res.records.len() - 1].iter().all(|r| r.dofs <= 200));
    }

    #[test]
    fn violating_problem_is_rejected_before_solving() {
        let spec = builtin("cordes-violating").unwrap();
        assert!(matches!(run_study(&spec, &StudyConfig::default()), Err(Error::CordesViolation(_))));
    }
}
