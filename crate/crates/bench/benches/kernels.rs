use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nondiv_core::mesh::{refine_marked, refine_uniform};
use nondiv_core::nonlinear::hjb_select_control;
use nondiv_core::problems::builtin;
use nondiv_core::*;

fn pair(resolution: usize, degree: usize) -> (Arc<FeSpace>, Arc<FeSpace>) {
    let mesh = Arc::new(builtin("linear-cordes").unwrap().initial_mesh(resolution, degree).unwrap());
    (
        Arc::new(FeSpace::new(mesh.clone(), degree, 1, Constraint::ZeroTrace).unwrap()),
        Arc::new(FeSpace::new(mesh, degree, 2, Constraint::None).unwrap()),
    )
}

fn context() -> ThetaOperatorContext {
    ThetaOperatorContext::from_coefficients(0.5, builtin("linear-cordes").unwrap().coefficients.unwrap()).unwrap()
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    let ctx = context();
    for degree in [1, 2] {
        let (su, sg) = pair(16, degree);
        group.bench_with_input(BenchmarkId::new("linear-cordes", format!("P{degree}")), &degree, |b, _| {
            b.iter(|| assemble_system(&su, &sg, &ctx).unwrap())
        });
    }
    group.finish();
}

fn linear_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let (su, sg) = pair(16, 2);
    let system = assemble_system(&su, &sg, &context()).unwrap();
    for (name, solver) in [("sparse-cholesky", LinearSolver::SparseCholesky), ("jacobi-cg", LinearSolver::cg())] {
        group.bench_function(BenchmarkId::new(name, system.n()), |b| b.iter(|| system.solve(&solver).unwrap()));
    }
    group.finish();
}

fn refinement(c: &mut Criterion) {
    let mut group = c.benchmark_group("refine");
    let mesh = builtin("linear-cordes").unwrap().initial_mesh(16, 2).unwrap();
    group.bench_function("uniform", |b| b.iter(|| refine_uniform(&mesh).unwrap()));
    let marked: Vec<usize> = (0..mesh.n_cells()).step_by(7).collect();
    group.bench_function("marked-1/7", |b| b.iter(|| refine_marked(&mesh, &marked).unwrap()));
    group.finish();
}

fn control_selection(c: &mut Criterion) {
    let spec = builtin("hjb-aniso").unwrap();
    let mesh = Arc::new(spec.initial_mesh(8, 2).unwrap());
    let su = Arc::new(FeSpace::new(mesh.clone(), 2, 1, Constraint::ZeroTrace).unwrap());
    let sg = Arc::new(FeSpace::new(mesh, 2, 2, Constraint::None).unwrap());
    let exact = spec.exact.clone().unwrap();
    let e2 = exact.clone();
    let u = nondiv_core::space::interpolate(su, move |x| exact.value(x)).unwrap();
    let g = nondiv_core::space::interpolate_vector(sg, move |x| e2.gradient(x)).unwrap();
    let coeffs = spec.coefficients().unwrap().clone();
    let cfg = NewtonConfig::default();
    c.bench_function("hjb-control-selection", |b| b.iter(|| hjb_select_control(&u, &g, &coeffs, &cfg).unwrap()));
}

criterion_group!(benches, assembly, linear_solve, refinement, control_selection);
criterion_main!(benches);
