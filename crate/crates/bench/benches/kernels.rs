use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;

use relaxlab_core::criteria::{
    check_all, limit_residual_compare, validate_theorem4, SamplePlan, Tolerances, DEFAULT_SAMPLES, DEFAULT_SEED,
};
use relaxlab_core::solver::{relax_initial, solve_target_reference, step_relax, Grid, GridField, Scheme, TimePlan, WInit};
use relaxlab_core::{build_model, ModelOptions};

fn criteria(c: &mut Criterion) {
    let mut group = c.benchmark_group("check_all");
    for id in ["cde1d:burgers", "viscous-cons:2d", "lbe-d2q5:linear", "kinetic-bgk:scalar"] {
        let built = build_model(id, ModelOptions::default()).unwrap();
        let plan = SamplePlan::for_model(built.model.as_ref(), DEFAULT_SAMPLES, DEFAULT_SEED).unwrap();
        let tol = Tolerances::default();
        group.bench_function(id, |b| b.iter(|| check_all(built.model.as_ref(), &plan, &tol)));
    }
    group.finish();
}

fn limit(c: &mut Criterion) {
    let built = build_model("nldiff:cubic-2d", ModelOptions::default()).unwrap();
    let field = |x: &[f64]| (built.initial)(x, 0.0);
    c.bench_function("limit_residual_compare/nldiff:cubic-2d", |b| {
        b.iter(|| limit_residual_compare(built.model.as_ref(), &built.target, &field, 0.01).unwrap())
    });
}

fn relax_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step_relax");
    group.sample_size(20);
    for (id, cells) in [("cde1d:burgers", 256), ("nldiff:cubic", 256), ("lbe-d2q5:linear", 64)] {
        let built = build_model(id, ModelOptions::default()).unwrap();
        let m = built.model.as_ref();
        let grid = Grid::periodic(m.dims().d(), cells).unwrap();
        let eps = 0.05;
        let init = relax_initial(m, &grid, |x| (built.initial)(x, 0.0), eps, WInit::WellPrepared).unwrap();
        for scheme in [Scheme::Imex1, Scheme::Imex2] {
            let plan = TimePlan::new(1.0, 0.5, scheme).unwrap();
            group.bench_with_input(BenchmarkId::new(id, scheme), &init, |b, f| {
                b.iter(|| step_relax(m, f, eps, &plan).unwrap())
            });
        }
    }
    group.finish();
}

fn reference(c: &mut Criterion) {
    let built = build_model("cde1d:burgers", ModelOptions::default()).unwrap();
    let grid = Grid::periodic(1, 256).unwrap();
    let init = GridField::from_fn(grid, 1, |x| DVector::from_element(1, 1.0 + 0.5 * x[0].sin())).unwrap();
    let mut group = c.benchmark_group("reference");
    group.sample_size(10);
    group.bench_function("cde1d:burgers/256/t=0.005", |b| {
        b.iter(|| solve_target_reference(&built.target, &init, 0.005).unwrap())
    });
    group.finish();
}

fn theorem4(c: &mut Criterion) {
    let dims = [(2, 1, 1), (2, 2, 2), (3, 2, 2)];
    let mut group = c.benchmark_group("validate_theorem4");
    group.sample_size(10);
    group.bench_function("10 trials", |b| b.iter(|| validate_theorem4(10, DEFAULT_SEED, &dims, false).unwrap()));
    group.finish();
}

criterion_group!(benches, criteria, limit, relax_step, reference, theorem4);
criterion_main!(benches);
