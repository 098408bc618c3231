use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nmsse_core::{
    accumulate_range, lindblad_rhs, EnlargedSpace, MemoryKernel, ProviderSpec, RngStreamSpec,
    Simulation, StateKet, StepperConfig, SystemModel, TrajectoryConfig, Unravelling,
};

fn simulation(unravelling: Unravelling, order: usize, t_final: f64) -> Simulation {
    let cfg = TrajectoryConfig {
        unravelling,
        provider: ProviderSpec::perturbative(order),
        stepper: StepperConfig {
            t_final,
            ..StepperConfig::default()
        },
        ..TrajectoryConfig::default()
    };
    Simulation::new(
        SystemModel::driven_tla(3.0, 5.0).unwrap(),
        MemoryKernel::tla(1.0, 1.0).unwrap(),
        cfg,
        StateKet::excited(),
    )
    .unwrap()
}

// one trajectory of 1000 steps
fn trajectory(c: &mut Criterion) {
    let mut g = c.benchmark_group("trajectory_1000_steps");
    for (name, u, order) in [
        ("coherent_o0", Unravelling::Coherent, 0),
        ("coherent_o1", Unravelling::Coherent, 1),
        ("coherent_o2", Unravelling::Coherent, 2),
        ("quadrature_o1", Unravelling::Quadrature, 1),
    ] {
        let sim = simulation(u, order, 1.0);
        let mut i = 0;
        g.bench_function(name, |b| {
            b.iter(|| {
                i += 1;
                sim.run_trajectory(RngStreamSpec::new(1, i)).unwrap()
            })
        });
    }
    g.finish();
}

fn enlarged_rhs(c: &mut Criterion) {
    let model = SystemModel::driven_tla(3.0, 5.0).unwrap();
    let kernel = MemoryKernel::tla(1.0, 1.0).unwrap();
    let mut g = c.benchmark_group("enlarged_rhs");
    for nmax in [10, 20, 40] {
        let space = EnlargedSpace::uniform(2, 1, nmax).unwrap();
        let w = space.vacuum_ket(&StateKet::excited()).unwrap().outer();
        g.bench_with_input(BenchmarkId::from_parameter(nmax), &w, |b, w| {
            b.iter(|| lindblad_rhs(w, &space, &model, &kernel, 0.3).unwrap())
        });
    }
    g.finish();
}

fn ensemble_chunk(c: &mut Criterion) {
    let sim = simulation(Unravelling::Coherent, 1, 1.0);
    let mut g = c.benchmark_group("ensemble_chunk");
    g.sample_size(10);
    g.bench_function("64_trajectories", |b| b.iter(|| accumulate_range(&sim, 5, 0..64).unwrap()));
    g.finish();
}

criterion_group!(benches, trajectory, enlarged_rhs, ensemble_chunk);
criterion_main!(benches);
