//! Single-trajectory integration of the linear and normalized
//! non-Markovian SSEs.
//!
//! The ket, the evolved functionals and (normalized variant) the Girsanov
//! accumulators form one flat ODE state advanced by a fixed-step scheme.
//! The ostensible noise is advanced exactly once per step and held at its
//! step average across the scheme stages.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::functionals::{Hierarchy, HierarchyLayout, HierarchyState};
use crate::kernel::{ydgs_weights, MemoryKernel, YdgsWeights};
use crate::noise::{init_noise, NoiseState, RngStreamSpec};
use crate::ode::{Scheme, Stepper};
use crate::quantum::linalg::{inner, matvec_into, norm_sqr};
use crate::quantum::{bloch_from_operator, BlochVector, Operator, StateKet, SystemModel};
use crate::Unravelling;

pub use crate::functionals::{Method, ProviderSpec};

/// Norm below which a trajectory is declared failed.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Ostensible noise, unnormalized ket.
    Linear,
    /// Actual (Girsanov-shifted) noise, normalized ket.
    #[default]
    Nonlinear,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Linear => "linear",
            Variant::Nonlinear => "nonlinear",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Variant::Linear),
            "nonlinear" => Ok(Variant::Nonlinear),
            other => Err(Error::invalid(format!(
                "unknown variant `{other}` (expected linear or nonlinear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_final: f64,
    /// Record every `record_stride` steps (the initial state is always
    /// recorded).
    pub record_stride: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::Heun,
            t_final: 10.0,
            record_stride: 100,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        self.n_steps().map(|_| ())
    }

    /// Number of steps; `t_final` must be a whole number of `dt`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid(format!(
                "t_final must be >= 0, got {}",
                self.t_final
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be >= 1"));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::invalid(format!(
                "t_final = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Times at which states are recorded.
    pub fn record_times(&self) -> Result<Vec<f64>> {
        let n = self.n_steps()?;
        Ok((0..=n)
            .step_by(self.record_stride)
            .map(|k| k as f64 * self.dt)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub unravelling: Unravelling,
    pub variant: Variant,
    pub provider: ProviderSpec,
    pub stepper: StepperConfig,
    /// Exact OU sub-steps per integration step; the held noise value is the
    /// average over the sub-step path.
    pub noise_substeps: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            unravelling: Unravelling::Coherent,
            variant: Variant::Nonlinear,
            provider: ProviderSpec::default(),
            stepper: StepperConfig::default(),
            noise_substeps: 1,
        }
    }
}

/// A validated trajectory problem, shareable across threads.
#[derive(Debug, Clone)]
pub struct Simulation {
    model: SystemModel,
    kernel: MemoryKernel,
    config: TrajectoryConfig,
    initial: StateKet,
    layout: HierarchyLayout,
    weights: Option<Arc<YdgsWeights>>,
    n_steps: usize,
}

impl Simulation {
    pub fn new(
        model: SystemModel,
        kernel: MemoryKernel,
        config: TrajectoryConfig,
        initial: StateKet,
    ) -> Result<Self> {
        let n_steps = config.stepper.n_steps()?;
        if config.noise_substeps == 0 {
            return Err(Error::invalid("noise_substeps must be >= 1"));
        }
        if initial.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: initial.dim(),
            });
        }
        if config.unravelling == Unravelling::Quadrature {
            kernel.require_quadrature()?;
        }
        let layout = HierarchyLayout::new(model.dim(), kernel.len(), config.unravelling, config.provider)?;
        let weights = if config.provider.method == Method::Ydgs {
            let h = 0.5 * config.stepper.dt;
            let grid: Vec<f64> = (0..=2 * n_steps.max(1)).map(|i| i as f64 * h).collect();
            Some(Arc::new(ydgs_weights(&kernel, &grid)?))
        } else {
            None
        };
        let initial = initial.normalized()?;
        Ok(Self {
            model,
            kernel,
            config,
            initial,
            layout,
            weights,
            n_steps,
        })
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.config
    }

    pub fn initial(&self) -> &StateKet {
        &self.initial
    }

    pub fn layout(&self) -> &HierarchyLayout {
        &self.layout
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.config
            .stepper
            .record_times()
            .expect("validated at construction")
    }

    /// Length of the flat ODE state.
    pub fn ode_len(&self) -> usize {
        self.layout.ode_len(self.config.variant == Variant::Nonlinear)
    }

    pub fn integrator(&self) -> Result<Integrator<'_>> {
        Integrator::new(self)
    }

    /// Runs one trajectory and keeps the recorded kets.
    pub fn run_trajectory(&self, rng: RngStreamSpec) -> Result<Trajectory> {
        let mut integ = self.integrator()?;
        let mut times = Vec::new();
        let mut kets = Vec::new();
        let summary = integ.run(rng, |_, t, psi| {
            times.push(t);
            kets.push(psi.to_vec());
        })?;
        Ok(Trajectory {
            times,
            kets: kets
                .into_iter()
                .map(|k| StateKet::new(k).expect("finite by construction"))
                .collect(),
            max_norm_drift: summary.max_norm_drift,
            variant: self.config.variant,
        })
    }

    /// Time derivative of the ket for the given state: `ops` are the evolved
    /// functionals, `girsanov` the accumulators (ignored for the linear
    /// variant) and `z` the ostensible noise.
    pub fn drift(
        &self,
        t: f64,
        psi: &StateKet,
        ops: &HierarchyState,
        girsanov: &[C64],
        z: C64,
    ) -> Result<StateKet> {
        let mut integ = self.integrator()?;
        let d = self.model.dim();
        let nonlinear = self.config.variant == Variant::Nonlinear;
        if psi.dim() != d || ops.as_slice().len() != self.layout.op_len() {
            return Err(Error::invalid("drift inputs do not match the simulation layout"));
        }
        if nonlinear && girsanov.len() != self.kernel.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.len(),
                found: girsanov.len(),
            });
        }
        let mut y = Vec::with_capacity(self.ode_len());
        y.extend_from_slice(psi.amplitudes());
        y.extend_from_slice(ops.as_slice());
        if nonlinear {
            y.extend_from_slice(girsanov);
        }
        let mut dy = vec![C64::new(0.0, 0.0); y.len()];
        let Integrator {
            ctx,
            hierarchy,
            work,
            ..
        } = &mut integ;
        sse_rhs(ctx, hierarchy, work, t, z, &y, &mut dy)?;
        StateKet::new(dy[..d].to_vec())
    }
}

/// Recorded output of one trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `|psi(t)>` (normalized) or `|psi~(t)>` (linear, unnormalized).
    pub kets: Vec<StateKet>,
    pub max_norm_drift: f64,
    pub variant: Variant,
}

impl Trajectory {
    /// Pure-state contributions `|psi><psi|`, unnormalized for the linear
    /// variant.
    pub fn projectors(&self) -> Vec<Operator> {
        self.kets.iter().map(|k| k.outer()).collect()
    }

    /// Bloch vector of each normalized state.
    pub fn bloch(&self) -> Result<Vec<BlochVector>> {
        self.kets
            .iter()
            .map(|k| {
                let n = k.norm_sqr();
                let b = bloch_from_operator(&k.outer())?;
                Ok(BlochVector::new(b.x / n, b.y / n, b.z / n))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub max_norm_drift: f64,
}

/// Constant data for the right-hand side.
#[derive(Debug, Clone)]
struct Ctx {
    d: usize,
    op_len: usize,
    nonlinear: bool,
    quadrature: bool,
    l: Vec<C64>,
    meas: Vec<C64>,
    minus_ih: Vec<C64>,
    lambda: Vec<C64>,
    amplitude: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Work {
    f: Vec<C64>,
    hpsi: Vec<C64>,
    lpsi: Vec<C64>,
    fpsi: Vec<C64>,
    kfpsi: Vec<C64>,
}

/// Reusable per-thread trajectory integrator.
pub struct Integrator<'a> {
    sim: &'a Simulation,
    ctx: Ctx,
    hierarchy: Hierarchy,
    noise: Option<NoiseState>,
    stepper: Stepper,
    work: Work,
    y: Vec<C64>,
}

impl<'a> Integrator<'a> {
    fn new(sim: &'a Simulation) -> Result<Self> {
        let d = sim.model.dim();
        let l = sim.model.coupling();
        let ldag = l.adjoint();
        let meas = match sim.config.unravelling {
            Unravelling::Coherent => ldag,
            Unravelling::Quadrature => l + &ldag,
        };
        let ctx = Ctx {
            d,
            op_len: sim.layout.op_len(),
            nonlinear: sim.config.variant == Variant::Nonlinear,
            quadrature: sim.config.unravelling == Unravelling::Quadrature,
            l: l.as_slice().to_vec(),
            meas: meas.as_slice().to_vec(),
            minus_ih: sim.model.hamiltonian().scale(C64::new(0.0, -1.0)).as_slice().to_vec(),
            lambda: sim.kernel.components().iter().map(|c| c.lambda()).collect(),
            amplitude: sim.kernel.components().iter().map(|c| c.amplitude).collect(),
        };
        let hierarchy = Hierarchy::new(
            &sim.model,
            &sim.kernel,
            sim.config.unravelling,
            sim.config.provider,
            sim.weights.clone(),
        )?;
        let z = vec![C64::new(0.0, 0.0); d];
        let len = sim.ode_len();
        Ok(Self {
            sim,
            ctx,
            hierarchy,
            noise: None,
            stepper: Stepper::new(sim.config.stepper.scheme, len),
            work: Work {
                f: vec![C64::new(0.0, 0.0); d * d],
                hpsi: z.clone(),
                lpsi: z.clone(),
                fpsi: z.clone(),
                kfpsi: z,
            },
            y: vec![C64::new(0.0, 0.0); len],
        })
    }

    /// Integrates one trajectory, calling `record(k, t, psi)` at each record
    /// time. Allocation-free after the first call.
    pub fn run<R>(&mut self, rng: RngStreamSpec, mut record: R) -> Result<RunSummary>
    where
        R: FnMut(usize, f64, &[C64]),
    {
        let sim = self.sim;
        let cfg = sim.config;
        match &mut self.noise {
            Some(n) => n.reset(rng),
            None => self.noise = Some(init_noise(&sim.kernel, cfg.unravelling, rng)?),
        }
        let d = self.ctx.d;
        self.y.fill(C64::new(0.0, 0.0));
        self.y[..d].copy_from_slice(sim.initial.amplitudes());
        record(0, 0.0, &self.y[..d]);

        let dt = cfg.stepper.dt;
        let stride = cfg.stepper.record_stride;
        let mut max_drift = 0.0f64;
        let Self {
            ctx,
            hierarchy,
            noise,
            stepper,
            work,
            y,
            ..
        } = self;
        let noise = noise.as_mut().expect("initialized above");
        for step in 0..sim.n_steps {
            let t = step as f64 * dt;
            let z = noise.advance_held(dt, cfg.noise_substeps);
            stepper.step(|ts, ys, dys| sse_rhs(ctx, hierarchy, work, ts, z, ys, dys), t, dt, y)?;
            let t_next = (step + 1) as f64 * dt;
            let n2 = norm_sqr(&y[..d]);
            if !n2.is_finite() {
                return Err(Error::TrajectoryFailure {
                    t: t_next,
                    reason: "non-finite state".into(),
                });
            }
            if ctx.nonlinear {
                let norm = n2.sqrt();
                if norm < NORM_FLOOR {
                    return Err(Error::TrajectoryFailure {
                        t: t_next,
                        reason: format!("norm underflow ({norm:.3e})"),
                    });
                }
                max_drift = max_drift.max((1.0 - norm).abs());
                let inv = 1.0 / norm;
                y[..d].iter_mut().for_each(|a| *a *= inv);
            } else if !(n2 > 0.0) {
                return Err(Error::TrajectoryFailure {
                    t: t_next,
                    reason: "linear ket vanished".into(),
                });
            }
            if (step + 1) % stride == 0 {
                record((step + 1) / stride, t_next, &y[..d]);
            }
        }
        Ok(RunSummary {
            max_norm_drift: max_drift,
        })
    }
}

/// Right-hand side of the joint (ket, functionals, accumulators) system.
fn sse_rhs(
    ctx: &Ctx,
    hierarchy: &mut Hierarchy,
    w: &mut Work,
    t: f64,
    z_ostensible: C64,
    y: &[C64],
    dy: &mut [C64],
) -> Result<()> {
    let d = ctx.d;
    let (psi, rest) = y.split_at(d);
    let (ops, acc) = rest.split_at(ctx.op_len);
    let (dpsi, drest) = dy.split_at_mut(d);
    let (dops, dacc) = drest.split_at_mut(ctx.op_len);

    hierarchy.drift_into(t, ops, &mut w.f)?;
    matvec_into(&ctx.minus_ih, psi, &mut w.hpsi);
    matvec_into(&ctx.l, psi, &mut w.lpsi);
    matvec_into(&w.f, psi, &mut w.fpsi);
    matvec_into(&ctx.meas, &w.fpsi, &mut w.kfpsi);

    if !ctx.nonlinear {
        let c = if ctx.quadrature { z_ostensible } else { z_ostensible.conj() };
        hierarchy.rhs(t, c, ops, &w.f, dops);
        for i in 0..d {
            dpsi[i] = w.hpsi[i] + c * w.lpsi[i] - w.kfpsi[i];
        }
        return Ok(());
    }

    let n2 = norm_sqr(psi);
    if !(n2.sqrt() >= NORM_FLOOR) {
        return Err(Error::TrajectoryFailure {
            t,
            reason: format!("norm underflow ({:.3e})", n2.sqrt()),
        });
    }
    let inv = 1.0 / n2;
    let e_l = inner(psi, &w.lpsi) * inv;
    let (c, e_meas, forcing) = if ctx.quadrature {
        let shift: f64 = acc.iter().map(|m| m.re).sum();
        let e_x = 2.0 * e_l.re;
        (C64::new(z_ostensible.re + shift, 0.0), C64::new(e_x, 0.0), C64::new(e_x, 0.0))
    } else {
        let shift: C64 = acc.iter().sum();
        ((z_ostensible + shift).conj(), e_l.conj(), e_l)
    };
    hierarchy.rhs(t, c, ops, &w.f, dops);
    let e_f = inner(psi, &w.fpsi) * inv;
    let e_kf = inner(psi, &w.kfpsi) * inv;
    let scalar = e_kf - e_meas * e_f - c * e_l;
    for i in 0..d {
        dpsi[i] = w.hpsi[i] - w.kfpsi[i] + e_meas * w.fpsi[i] + c * w.lpsi[i] + scalar * psi[i];
    }
    for (k, (dm, &m)) in dacc.iter_mut().zip(acc).enumerate() {
        *dm = -ctx.lambda[k] * m + ctx.amplitude[k] * forcing;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{pauli, sigma_minus};
    use approx::assert_abs_diff_eq;

    fn driven_config() -> TrajectoryConfig {
        TrajectoryConfig::default()
    }

    #[test]
    fn stepper_config_validation() {
        let mut s = StepperConfig::default();
        assert_eq!(s.n_steps().unwrap(), 10_000);
        assert_eq!(s.record_times().unwrap().len(), 101);
        s.t_final = 0.0105;
        assert!(s.n_steps().is_err());
        s.t_final = 1.0;
        s.record_stride = 0;
        assert!(s.n_steps().is_err());
    }

    #[test]
    fn zero_final_time_records_initial_state() {
        let mut cfg = driven_config();
        cfg.stepper.t_final = 0.0;
        let sim = Simulation::new(
            SystemModel::driven_tla(3.0, 5.0).unwrap(),
            MemoryKernel::tla(1.0, 1.0).unwrap(),
            cfg,
            StateKet::excited(),
        )
        .unwrap();
        let tr = sim.run_trajectory(RngStreamSpec::new(1, 0)).unwrap();
        assert_eq!(tr.times, vec![0.0]);
        assert_eq!(tr.projectors()[0], StateKet::excited().outer());
    }

    #[test]
    fn weak_coupling_reduces_to_rabi_rotation() {
        // A tiny amplitude leaves only the Hamiltonian; compare <sigma_z>
        // with the closed-form two-level unitary.
        let (delta, chi) = (3.0, 5.0);
        let mut cfg = driven_config();
        cfg.stepper = StepperConfig {
            dt: 1e-3,
            scheme: Scheme::Rk4,
            t_final: 2.0,
            record_stride: 100,
        };
        let sim = Simulation::new(
            SystemModel::driven_tla(delta, chi).unwrap(),
            MemoryKernel::tla(1e-22, 1.0).unwrap(),
            cfg,
            StateKet::excited(),
        )
        .unwrap();
        let tr = sim.run_trajectory(RngStreamSpec::new(3, 0)).unwrap();
        let w = (delta * delta + chi * chi).sqrt();
        for (t, b) in tr.times.iter().zip(tr.bloch().unwrap()) {
            let oracle = 1.0 - 2.0 * (chi / w).powi(2) * (0.5 * w * t).sin().powi(2);
            assert_abs_diff_eq!(b.z, oracle, epsilon = 1e-8);
        }
    }

    fn random_ket_and_noise(seed: u64) -> (StateKet, Vec<C64>, C64, Vec<C64>) {
        use rand::Rng;
        let mut r = RngStreamSpec::new(seed, 0).rng();
        let mut c = || C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let psi = StateKet::new(vec![c(), c()]).unwrap().normalized().unwrap();
        let acc = vec![c()];
        let z = c();
        let ops = (0..4 * 2).map(|_| c()).collect();
        (psi, acc, z, ops)
    }

    #[test]
    fn nonlinear_drift_preserves_norm() {
        for u in [Unravelling::Coherent, Unravelling::Quadrature] {
            let mut cfg = driven_config();
            cfg.unravelling = u;
            cfg.provider = ProviderSpec::perturbative(u.max_order());
            let sim = Simulation::new(
                SystemModel::driven_tla(3.0, 5.0).unwrap(),
                MemoryKernel::tla(1.0, 1.0).unwrap(),
                cfg,
                StateKet::excited(),
            )
            .unwrap();
            let layout = *sim.layout();
            for seed in 0..50 {
                let (psi, acc, z, ops) = random_ket_and_noise(seed);
                // both layouts here evolve two 2x2 operators
                let state = HierarchyState::from_flat(layout, 0.7, ops).unwrap();
                let z = if u == Unravelling::Quadrature { C64::new(z.re, 0.0) } else { z };
                let dpsi = sim.drift(0.7, &psi, &state, &acc, z).unwrap();
                let re = inner(psi.amplitudes(), dpsi.amplitudes()).re;
                assert!(re.abs() < 1e-12, "{u:?} {re}");
            }
        }
    }

    #[test]
    fn eigenstate_noise_term() {
        // <sigma> = 0 in |e>: with no functional the drift is -iH psi + z* sigma psi
        let mut cfg = driven_config();
        cfg.provider = ProviderSpec::perturbative(0);
        let sim = Simulation::new(
            SystemModel::driven_tla(0.0, 0.0).unwrap(),
            MemoryKernel::tla(1.0, 1.0).unwrap(),
            cfg,
            StateKet::excited(),
        )
        .unwrap();
        let state = HierarchyState::zeros(*sim.layout(), 0.0);
        let z = C64::new(0.3, 0.8);
        let dpsi = sim.drift(0.0, &StateKet::excited(), &state, &[C64::new(0.0, 0.0)], z).unwrap();
        let expect = sigma_minus().apply(&StateKet::excited()).unwrap();
        assert!((dpsi.amplitudes()[1] - z.conj() * expect.amplitudes()[1]).norm() < 1e-15);
        assert_eq!(dpsi.amplitudes()[0], C64::new(0.0, 0.0));
    }

    #[test]
    fn linear_drift_without_noise_decays_excited_amplitude() {
        let mut cfg = driven_config();
        cfg.variant = Variant::Linear;
        cfg.provider = ProviderSpec::perturbative(0);
        let sim = Simulation::new(
            SystemModel::driven_tla(0.0, 0.0).unwrap(),
            MemoryKernel::tla(1.0, 1.0).unwrap(),
            cfg,
            StateKet::excited(),
        )
        .unwrap();
        let state = HierarchyState::zeros(*sim.layout(), 2.0);
        let dpsi = sim.drift(2.0, &StateKet::excited(), &state, &[], C64::new(0.0, 0.0)).unwrap();
        let i0 = sim.kernel().cumulative_total(2.0).unwrap();
        assert!((dpsi.amplitudes()[0] + i0).norm() < 1e-15);
        assert_eq!(dpsi.amplitudes()[1], C64::new(0.0, 0.0));
    }

    #[test]
    fn linear_norm_is_not_conserved() {
        let mut cfg = driven_config();
        cfg.variant = Variant::Linear;
        cfg.stepper.t_final = 1.0;
        let sim = Simulation::new(
            SystemModel::driven_tla(3.0, 5.0).unwrap(),
            MemoryKernel::tla(1.0, 1.0).unwrap(),
            cfg,
            StateKet::excited(),
        )
        .unwrap();
        let tr = sim.run_trajectory(RngStreamSpec::new(4, 2)).unwrap();
        assert!((tr.kets.last().unwrap().norm_sqr() - 1.0).abs() > 1e-3);
    }

    #[test]
    fn nonlinear_norm_drift_is_small_and_deterministic() {
        let sim = Simulation::new(
            SystemModel::driven_tla(3.0, 5.0).unwrap(),
            MemoryKernel::tla(1.0, 1.0).unwrap(),
            driven_config(),
            StateKet::excited(),
        )
        .unwrap();
        let a = sim.run_trajectory(RngStreamSpec::new(11, 5)).unwrap();
        let b = sim.run_trajectory(RngStreamSpec::new(11, 5)).unwrap();
        assert!(a.max_norm_drift <= 1e-6, "{}", a.max_norm_drift);
        assert_eq!(a.kets, b.kets);
        let p = pauli();
        for k in &a.kets {
            assert!(k.is_normalized());
            assert!(crate::quantum::expectation(&p.z, k).unwrap().re.abs() <= 1.0 + 1e-12);
        }
    }
}
