use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Result;
use nondiv_core::analysis::records_to_csv;
use nondiv_core::study::{Level, StudyConfig, StudyResult};
use nondiv_core::{Constraint, ProblemKind, ProblemSpec};

const CORNERS: [(f64, f64); 3] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];

/// Writes every artefact of a study into `dir`, creating it if needed.
pub fn write_study(dir: &Path, spec: &ProblemSpec, cfg: &StudyConfig, result: &StudyResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("records.csv"), records_to_csv(&result.records))?;
    if spec.kind != ProblemKind::Linear {
        fs::write(dir.join("trace.csv"), result.traces_csv())?;
    }
    for (l, level) in result.levels.iter().enumerate() {
        level.mesh.write_text(BufWriter::new(File::create(dir.join(format!("mesh_{l}.txt")))?))?;
        level.mesh.write_gnuplot(BufWriter::new(File::create(dir.join(format!("mesh_{l}.dat")))?))?;
        write_solution(&dir.join(format!("solution_{l}.dat")), level)?;
        write_indicators(&dir.join(format!("indicators_{l}.dat")), level)?;
    }
    fs::write(dir.join("run.txt"), summary(spec, cfg, result))?;
    Ok(())
}

/// One block per cell: `x y u g1 g2` at the three corners, the first repeated.
fn write_solution(path: &Path, level: &Level) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# x y u g1 g2")?;
    for k in 0..level.mesh.n_cells() {
        let p = level.mesh.cell_points(k);
        let u = level.u.evaluate_scalar(k, &CORNERS)?;
        let g = level.g.evaluate_vector(k, &CORNERS)?;
        for i in [0, 1, 2, 0] {
            writeln!(w, "{:.10e} {:.10e} {:.10e} {:.10e} {:.10e}", p[i][0], p[i][1], u[i].0, g[i].0[0], g[i].0[1])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// `x y eta` at each cell centroid.
fn write_indicators(path: &Path, level: &Level) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# x y eta")?;
    for (k, e2) in level.indicators.eta_sq.iter().enumerate() {
        let p = level.mesh.cell_points(k);
        let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        writeln!(w, "{:.10e} {:.10e} {:.10e}", c[0], c[1], e2.sqrt())?;
    }
    w.flush()?;
    Ok(())
}

fn summary(spec: &ProblemSpec, cfg: &StudyConfig, result: &StudyResult) -> String {
    let mut s = String::new();
    let g_space = match result.g_constraint {
        Constraint::ZeroTangential => "tangential",
        _ => "relaxed",
    };
    let _ = writeln!(s, "problem      {}", spec.name);
    let _ = writeln!(s, "kind         {}", spec.kind);
    let _ = writeln!(s, "degree       {}", cfg.degree);
    let _ = writeln!(s, "theta        {}", cfg.newton.theta);
    let _ = writeln!(s, "g-space      {g_space}");
    let _ = writeln!(s, "refinement   {}", if cfg.adaptive { "adaptive" } else { "uniform" });
    let _ = writeln!(s, "levels       {}", result.levels.len());
    match &result.cordes {
        Some(r) => {
            let _ = writeln!(s, "cordes       {}", r.to_string().lines().last().unwrap_or_default());
        }
        None => {
            let _ = writeln!(s, "cordes       checked along the Newton iteration");
        }
    }
    let _ = writeln!(s, "converged    {}", result.converged);
    s
}
