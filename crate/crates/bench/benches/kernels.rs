use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use ptgeom::control::ControlProblem;
use ptgeom::lindblad::integrate_master;
use ptgeom::operators::{biorthogonal_eig, matrix_exponential, spectrum};
use ptgeom::{ControlSchedule, DensityMatrix, GammaPolicy, LindbladSpec, TimeGrid, C64};
use ptgeom_bench::{two_level_control, yang_lee, yang_lee_hamiltonian};

fn dense_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("dense");
    for n in 1..=4 {
        let h = yang_lee_hamiltonian(n);
        let generator = h.scale(C64::new(0.0, -0.1));
        group.bench_with_input(BenchmarkId::new("expm", n), &generator, |b, a| {
            b.iter(|| matrix_exponential(black_box(a)))
        });
        group.bench_with_input(BenchmarkId::new("spectrum", n), &h, |b, h| b.iter(|| spectrum(black_box(h))));
        group.bench_with_input(BenchmarkId::new("biorthogonal_eig", n), &h, |b, h| {
            b.iter(|| biorthogonal_eig(black_box(h), 1e-10))
        });
    }
    group.finish();
}

fn master_equation(c: &mut Criterion) {
    let mut group = c.benchmark_group("lindblad");
    group.sample_size(10);
    let grid = TimeGrid::new(0.0, 10.0, 200).unwrap();
    for n in 1..=3 {
        let model = yang_lee(n);
        let spec = LindbladSpec::from_model(&model, GammaPolicy::Shift).unwrap();
        let rho0 = DensityMatrix::pure(&ptgeom::StateVector::plus(n));
        group.bench_with_input(BenchmarkId::new("integrate_master", n), &n, |b, _| {
            b.iter(|| integrate_master(black_box(&spec), &rho0, &grid))
        });
    }
    group.finish();
}

fn control(c: &mut Criterion) {
    let mut group = c.benchmark_group("control");
    group.sample_size(10);
    let spec = two_level_control();
    let rho0 = DensityMatrix::pure(&spec.initial().unwrap());
    let problem = ControlProblem::new(&spec, "s", &rho0).unwrap();
    let schedule = ControlSchedule::zeros(10.0, 100, 0.0).unwrap();
    group.bench_function("objective", |b| b.iter(|| problem.objective(black_box(&schedule))));
    group.bench_function("gradient", |b| b.iter(|| problem.gradient(black_box(&schedule), 1e-4)));
    group.finish();
}

criterion_group!(benches, dense_kernels, master_equation, control);
criterion_main!(benches);
