//! Statistical and scheduling properties of the trajectory ensemble.

use nmsse_core::{
    run_ensemble, EnsembleConfig, MemoryKernel, ProviderSpec, Simulation, StateKet, StepperConfig,
    SystemModel, TrajectoryConfig, Variant,
};

fn sim(variant: Variant) -> Simulation {
    let cfg = TrajectoryConfig {
        variant,
        provider: ProviderSpec::perturbative(1),
        stepper: StepperConfig {
            dt: 1e-2,
            t_final: 2.0,
            record_stride: 20,
            ..Default::default()
        },
        ..Default::default()
    };
    Simulation::new(
        SystemModel::driven_tla(3.0, 5.0).unwrap(),
        MemoryKernel::tla(1.0, 1.0).unwrap(),
        cfg,
        StateKet::excited(),
    )
    .unwrap()
}

#[test]
fn result_independent_of_worker_count() {
    let s = sim(Variant::Nonlinear);
    let one = run_ensemble(&s, &EnsembleConfig::new(97, 4).with_workers(1)).unwrap();
    for w in [2, 3] {
        let r = run_ensemble(&s, &EnsembleConfig::new(97, 4).with_workers(w)).unwrap();
        assert_eq!(r.mean, one.mean);
        assert_eq!(r.stderr, one.stderr);
    }
}

#[test]
fn stderr_shrinks_like_inverse_sqrt_n() {
    let s = sim(Variant::Nonlinear);
    let a = run_ensemble(&s, &EnsembleConfig::new(400, 11)).unwrap();
    let b = run_ensemble(&s, &EnsembleConfig::new(800, 11)).unwrap();
    let (mut sa, mut sb) = (0.0, 0.0);
    for (ea, eb) in a.stderr.iter().zip(&b.stderr).skip(1) {
        sa += ea.iter().sum::<f64>();
        sb += eb.iter().sum::<f64>();
    }
    let ratio = sb / sa;
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.15 * 0.5f64.sqrt(), "ratio {ratio}");
}

#[test]
fn linear_and_nonlinear_agree_statistically() {
    let n = EnsembleConfig::new(2000, 21);
    let a = run_ensemble(&sim(Variant::Nonlinear), &n).unwrap();
    let b = run_ensemble(&sim(Variant::Linear), &n).unwrap();
    for i in 0..a.times.len() {
        let (va, vb) = (a.mean[i], b.mean[i]);
        for (k, (x, y)) in [(va.x, vb.x), (va.y, vb.y), (va.z, vb.z)].into_iter().enumerate() {
            let s = (a.stderr[i][k].powi(2) + b.stderr[i][k].powi(2)).sqrt();
            assert!((x - y).abs() <= 5.0 * s + 1e-12, "t = {}, component {k}", a.times[i]);
        }
    }
}
