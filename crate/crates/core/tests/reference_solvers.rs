mod common;

use common::*;
use nmsse_core::{
    bloch_from_density, compare, evolve_enlarged, lindblad_reference_markov, EnlargedConfig,
    EnlargedSpace, KernelComponent, MemoryKernel, StateKet, SystemModel,
};

fn cfg(dt: f64, t_final: f64) -> EnlargedConfig {
    EnlargedConfig {
        dt,
        t_final,
        record_stride: (0.1 / dt).round() as usize,
    }
}

#[test]
fn enlarged_undriven_matches_scalar_oracle() {
    let space = EnlargedSpace::uniform(2, 1, 20).unwrap();
    let model = SystemModel::driven_tla(0.0, 0.0).unwrap();
    let r = evolve_enlarged(
        &space,
        &model,
        &MemoryKernel::tla(GAMMA, KAPPA).unwrap(),
        &StateKet::excited(),
        &cfg(1e-3, 10.0),
    )
    .unwrap();
    let b = r.bloch().unwrap();
    let worst = b
        .times
        .iter()
        .zip(&b.values)
        .map(|(&t, v)| (v.z - undriven_z(GAMMA, KAPPA, t)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst:e}");
    for rho in &r.states {
        assert!((rho.as_operator().trace().re - 1.0).abs() < 1e-10);
    }
}

#[test]
fn enlarged_detuned_two_mode_matches_single_excitation_oracle() {
    let modes = [(0.3, 1.5, 0.8), (0.1, 0.6, -1.7)];
    let kernel = MemoryKernel::new(
        modes
            .iter()
            .map(|&(a, k, o)| KernelComponent::new(a, k, o).unwrap())
            .collect(),
    )
    .unwrap();
    let delta = 0.4;
    let model = SystemModel::driven_tla(delta, 0.0).unwrap();
    let space = EnlargedSpace::uniform(2, 2, 4).unwrap();
    let r = evolve_enlarged(&space, &model, &kernel, &StateKet::excited(), &cfg(1e-3, 5.0)).unwrap();
    let want = single_excitation_population(delta, &modes, &r.times);
    for (rho, p) in r.states.iter().zip(want) {
        let z = bloch_from_density(rho).unwrap().z;
        assert!((0.5 * (1.0 + z) - p).abs() < 1e-9);
    }
}

#[test]
fn detuning_and_mode_frequency_enter_only_through_their_difference() {
    let space = EnlargedSpace::uniform(2, 1, 6).unwrap();
    let run = |delta: f64, omega: f64| {
        let k = MemoryKernel::single(0.4, 1.2, omega).unwrap();
        let m = SystemModel::driven_tla(delta, 0.0).unwrap();
        evolve_enlarged(&space, &m, &k, &StateKet::excited(), &cfg(1e-3, 4.0))
            .unwrap()
            .bloch()
            .unwrap()
    };
    let a = run(0.7, 0.0);
    let b = run(0.0, -0.7);
    let zs = |s: &nmsse_core::BlochSeries| s.values.iter().map(|v| v.z).collect::<Vec<_>>();
    let worst = zs(&a)
        .iter()
        .zip(zs(&b))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn markov_reference_matches_optical_bloch_equations() {
    let model = SystemModel::driven_tla(DELTA, CHI).unwrap();
    let r = lindblad_reference_markov(&model, GAMMA, &StateKet::excited(), &cfg(1e-3, 10.0)).unwrap();
    let want = optical_bloch(DELTA, CHI, GAMMA, [0.0, 0.0, 1.0], 10.0, 0.1);
    for (rho, w) in r.states.iter().zip(want) {
        let b = bloch_from_density(rho).unwrap().components();
        for i in 0..3 {
            assert!((b[i] - w[i]).abs() < 1e-9, "{b:?} vs {w:?}");
        }
    }
}

#[test]
fn broad_bath_approaches_markov_limit() {
    let model = SystemModel::driven_tla(DELTA, CHI).unwrap();
    let c = cfg(1e-3, 10.0);
    let space = EnlargedSpace::uniform(2, 1, 20).unwrap();
    let kernel = MemoryKernel::tla(GAMMA, 100.0).unwrap();
    let e = evolve_enlarged(&space, &model, &kernel, &StateKet::excited(), &c).unwrap();
    let m = lindblad_reference_markov(&model, GAMMA, &StateKet::excited(), &c).unwrap();
    let metrics = compare(&e.bloch().unwrap(), &m.bloch().unwrap()).unwrap();
    assert!(metrics.sup_norm <= 0.05, "{}", metrics.sup_norm);
}

#[test]
fn enlarged_output_is_converged_in_dt_and_fock_cutoff() {
    let model = SystemModel::driven_tla(DELTA, CHI).unwrap();
    let kernel = MemoryKernel::tla(GAMMA, KAPPA).unwrap();
    let run = |dt: f64, nmax: usize| {
        let space = EnlargedSpace::uniform(2, 1, nmax).unwrap();
        evolve_enlarged(&space, &model, &kernel, &StateKet::excited(), &cfg(dt, 10.0))
            .unwrap()
            .bloch()
            .unwrap()
    };
    let base = run(1e-3, 20);
    let half = run(5e-4, 20);
    let big = run(1e-3, 30);
    assert!(compare(&base, &half).unwrap().sup_norm <= 1e-6);
    assert!(compare(&base, &big).unwrap().sup_norm <= 1e-8);
}
