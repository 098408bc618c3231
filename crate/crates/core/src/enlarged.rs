//! Exact reference dynamics: the system coupled to one damped pseudomode
//! per kernel component, evolved under a Markovian Lindblad equation and
//! traced back down to the system. Also hosts the plain Markovian Lindblad
//! solver.
//!
//! Both master equations are written as `dW = K W + W K^dagger + sum_j
//! r_j C_j W C_j^dagger` with a non-Hermitian `K`, which needs only the one
//! product `K W` per evaluation since `W` is Hermitian.

use num_complex::Complex64 as C64;

use crate::ensemble::BlochSeries;
use crate::error::{Error, Result};
use crate::kernel::MemoryKernel;
use crate::ode::{Scheme, Stepper};
use crate::quantum::linalg::{add_product, axpy, mul_into};
use crate::quantum::{
    bloch_from_density, DensityMatrix, Operator, StateKet, SystemModel, DEFAULT_DIM_CAP,
};
use crate::sse::StepperConfig;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest population tolerated in the top Fock level of any mode.
pub const TOP_POPULATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnlargedConfig {
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
}

impl Default for EnlargedConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 10.0,
            record_stride: 100,
        }
    }
}

impl EnlargedConfig {
    fn as_stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            scheme: Scheme::Rk4,
            t_final: self.t_final,
            record_stride: self.record_stride,
        }
    }
}

/// System space times truncated Fock spaces, index `s * M + m` with the
/// mode index `m` mixed-radix, first mode most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnlargedSpace {
    d: usize,
    nmax: Vec<usize>,
    strides: Vec<usize>,
    modes_dim: usize,
    dim: usize,
}

impl EnlargedSpace {
    pub fn new(d: usize, nmax: &[usize]) -> Result<Self> {
        Self::with_cap(d, nmax, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(d: usize, nmax: &[usize], cap: usize) -> Result<Self> {
        if d == 0 || nmax.is_empty() {
            return Err(Error::invalid("enlarged space needs d >= 1 and at least one mode"));
        }
        let mut modes_dim = 1usize;
        for &n in nmax {
            modes_dim = modes_dim.checked_mul(n + 1).unwrap_or(usize::MAX);
        }
        let dim = d.checked_mul(modes_dim).unwrap_or(usize::MAX);
        if dim > cap {
            return Err(Error::Capacity { requested: dim, cap });
        }
        let mut strides = vec![1; nmax.len()];
        for j in (0..nmax.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * (nmax[j + 1] + 1);
        }
        Ok(Self {
            d,
            nmax: nmax.to_vec(),
            strides,
            modes_dim,
            dim,
        })
    }

    /// Same truncation for every kernel component.
    pub fn uniform(d: usize, modes: usize, nmax: usize) -> Result<Self> {
        Self::new(d, &vec![nmax; modes])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn system_dim(&self) -> usize {
        self.d
    }

    pub fn nmax(&self) -> &[usize] {
        &self.nmax
    }

    /// Occupation of mode `j` in full-space basis index `idx`.
    #[inline]
    pub fn occupation(&self, idx: usize, j: usize) -> usize {
        (idx % self.modes_dim) / self.strides[j] % (self.nmax[j] + 1)
    }

    /// Embeds a system ket with every mode in vacuum.
    pub fn vacuum_ket(&self, psi: &StateKet) -> Result<StateKet> {
        if psi.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: psi.dim(),
            });
        }
        let mut amps = vec![ZERO; self.dim];
        for (s, &a) in psi.amplitudes().iter().enumerate() {
            amps[s * self.modes_dim] = a;
        }
        StateKet::new(amps)
    }

    /// Trace over all pseudomodes.
    pub fn partial_trace(&self, w: &[C64]) -> Operator {
        let (d, m, n) = (self.d, self.modes_dim, self.dim);
        let mut out = Operator::zeros(d);
        for s in 0..d {
            for sp in 0..d {
                let mut acc = ZERO;
                for k in 0..m {
                    acc += w[(s * m + k) * n + sp * m + k];
                }
                out.set(s, sp, acc);
            }
        }
        out
    }

    /// Population in basis states where any mode sits at its top level.
    pub fn top_population(&self, w: &[C64]) -> f64 {
        (0..self.dim)
            .filter(|&i| (0..self.nmax.len()).any(|j| self.occupation(i, j) == self.nmax[j]))
            .map(|i| w[i * self.dim + i].re)
            .sum()
    }
}

/// How one kernel component is wired into the enlarged model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeWiring {
    pub coupling: f64,
    pub kappa: f64,
    pub omega: f64,
}

pub fn mode_wiring(kernel: &MemoryKernel) -> Vec<ModeWiring> {
    kernel
        .components()
        .iter()
        .map(|c| ModeWiring {
            coupling: c.coupling(),
            kappa: c.kappa,
            omega: c.omega,
        })
        .collect()
}

/// Largest deviation between the kernel and the pseudomode correlation
/// `G_j^2 exp(-(kappa_j / 2 + i omega_j) tau)` on the grid.
pub fn kernel_identity_check(kernel: &MemoryKernel, grid: &[f64]) -> Result<f64> {
    let wiring = mode_wiring(kernel);
    let mut worst = 0.0f64;
    for &tau in grid {
        let tau = tau.abs();
        let modes: C64 = wiring
            .iter()
            .map(|w| w.coupling * w.coupling * (-C64::new(0.5 * w.kappa, w.omega) * tau).exp())
            .sum();
        worst = worst.max((modes - kernel.alpha_eval(tau)?).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    row: usize,
    col: usize,
    value: C64,
    /// 0: none, 2j+1: e^{i omega_j t}, 2j+2: e^{-i omega_j t}
    phase: usize,
}

/// Sparse generator of the enlarged Lindblad equation.
#[derive(Debug, Clone)]
struct Generator {
    dim: usize,
    entries: Vec<Entry>,
    omegas: Vec<f64>,
    phases: Vec<C64>,
    jumps: Vec<(f64, usize, Vec<f64>)>,
    y: Vec<C64>,
}

impl Generator {
    fn new(space: &EnlargedSpace, model: &SystemModel, kernel: &MemoryKernel) -> Result<Self> {
        let d = model.dim();
        if d != space.d {
            return Err(Error::DimensionMismatch {
                expected: space.d,
                found: d,
            });
        }
        if kernel.len() != space.nmax.len() {
            return Err(Error::DimensionMismatch {
                expected: space.nmax.len(),
                found: kernel.len(),
            });
        }
        let (m, n) = (space.modes_dim, space.dim);
        let h = model.hamiltonian();
        let l = model.coupling();
        let ldag = l.adjoint();
        let wiring = mode_wiring(kernel);
        let mut entries = Vec::new();
        for s in 0..d {
            for sp in 0..d {
                let hv = h.get(s, sp);
                if hv != ZERO {
                    for k in 0..m {
                        entries.push(Entry {
                            row: s * m + k,
                            col: sp * m + k,
                            value: C64::new(0.0, -1.0) * hv,
                            phase: 0,
                        });
                    }
                }
            }
        }
        for (j, w) in wiring.iter().enumerate() {
            let st = space.strides[j];
            for s in 0..d {
                for sp in 0..d {
                    let lv = l.get(s, sp);
                    let ldv = ldag.get(s, sp);
                    for k in 0..m {
                        let occ = space.occupation(k, j);
                        // G L c^dagger e^{i omega t}
                        if lv != ZERO && occ < space.nmax[j] {
                            entries.push(Entry {
                                row: s * m + k + st,
                                col: sp * m + k,
                                value: w.coupling * ((occ + 1) as f64).sqrt() * lv,
                                phase: 2 * j + 1,
                            });
                        }
                        // -G L^dagger c e^{-i omega t}
                        if ldv != ZERO && occ > 0 {
                            entries.push(Entry {
                                row: s * m + k - st,
                                col: sp * m + k,
                                value: -w.coupling * (occ as f64).sqrt() * ldv,
                                phase: 2 * j + 2,
                            });
                        }
                    }
                }
            }
        }
        for i in 0..n {
            let damping: f64 = wiring
                .iter()
                .enumerate()
                .map(|(j, w)| 0.5 * w.kappa * space.occupation(i, j) as f64)
                .sum();
            if damping != 0.0 {
                entries.push(Entry {
                    row: i,
                    col: i,
                    value: C64::new(-damping, 0.0),
                    phase: 0,
                });
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        let jumps = wiring
            .iter()
            .enumerate()
            .map(|(j, w)| {
                // sqrt(n + 1) for states that c^dagger can raise
                let factors = (0..n)
                    .map(|i| {
                        let occ = space.occupation(i, j);
                        if occ < space.nmax[j] {
                            ((occ + 1) as f64).sqrt()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                (w.kappa, space.strides[j], factors)
            })
            .collect();
        Ok(Self {
            dim: n,
            entries,
            omegas: wiring.iter().map(|w| w.omega).collect(),
            phases: vec![ZERO; 2 * wiring.len() + 1],
            jumps,
            y: vec![ZERO; n * n],
        })
    }

    fn apply(&mut self, t: f64, w: &[C64], dw: &mut [C64]) {
        let n = self.dim;
        self.phases[0] = C64::new(1.0, 0.0);
        for (j, &om) in self.omegas.iter().enumerate() {
            let p = C64::new(0.0, om * t).exp();
            self.phases[2 * j + 1] = p;
            self.phases[2 * j + 2] = p.conj();
        }
        self.y.fill(ZERO);
        for e in &self.entries {
            let v = e.value * self.phases[e.phase];
            let (src, dst) = (&w[e.col * n..(e.col + 1) * n], e.row * n);
            axpy(v, src, &mut self.y[dst..dst + n]);
        }
        for r in 0..n {
            for c in 0..n {
                dw[r * n + c] = self.y[r * n + c] + self.y[c * n + r].conj();
            }
        }
        for (kappa, st, f) in &self.jumps {
            for r in 0..n {
                if f[r] == 0.0 {
                    continue;
                }
                let fr = kappa * f[r];
                let src = (r + st) * n + st;
                for c in 0..n {
                    if f[c] != 0.0 {
                        dw[r * n + c] += fr * f[c] * w[src + c];
                    }
                }
            }
        }
    }
}

/// Time derivative of the enlarged density operator `w` at time `t`.
pub fn lindblad_rhs(
    w: &Operator,
    space: &EnlargedSpace,
    model: &SystemModel,
    kernel: &MemoryKernel,
    t: f64,
) -> Result<Operator> {
    if w.dim() != space.dim {
        return Err(Error::DimensionMismatch {
            expected: space.dim,
            found: w.dim(),
        });
    }
    let mut g = Generator::new(space, model, kernel)?;
    let mut out = Operator::zeros(space.dim);
    g.apply(t, w.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Reduced states on a record grid.
#[derive(Debug, Clone)]
pub struct ReducedSeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Largest top-Fock-level population seen (zero for Markovian runs).
    pub max_top_population: f64,
}

impl ReducedSeries {
    pub fn bloch(&self) -> Result<BlochSeries> {
        let values = self
            .states
            .iter()
            .map(bloch_from_density)
            .collect::<Result<Vec<_>>>()?;
        Ok(BlochSeries::reference(self.times.clone(), values))
    }
}

fn reduce(op: Operator) -> Result<DensityMatrix> {
    DensityMatrix::with_tolerances(op, 1e-9, 1e-8)
}

/// Evolves `|psi><psi| (x) vacuum` with RK4 and records the reduced state.
pub fn evolve_enlarged(
    space: &EnlargedSpace,
    model: &SystemModel,
    kernel: &MemoryKernel,
    initial: &StateKet,
    cfg: &EnlargedConfig,
) -> Result<ReducedSeries> {
    let stepper_cfg = cfg.as_stepper();
    let n_steps = stepper_cfg.n_steps()?;
    let mut gen = Generator::new(space, model, kernel)?;
    let psi = space.vacuum_ket(&initial.normalized()?)?;
    let mut w = psi.outer().as_slice().to_vec();
    let mut stepper = Stepper::new(Scheme::Rk4, w.len());
    let mut times = vec![0.0];
    let mut states = vec![reduce(space.partial_trace(&w))?];
    let mut max_top = space.top_population(&w);
    let max_nmax = *space.nmax.iter().max().expect("at least one mode");
    for step in 0..n_steps {
        let t = step as f64 * cfg.dt;
        stepper.step(
            |ts, ws, dws| {
                gen.apply(ts, ws, dws);
                Ok(())
            },
            t,
            cfg.dt,
            &mut w,
        )?;
        let t_next = (step + 1) as f64 * cfg.dt;
        let top = space.top_population(&w);
        max_top = max_top.max(top);
        if !(top < TOP_POPULATION_LIMIT) {
            return Err(Error::Truncation {
                t: t_next,
                population: top,
                suggested: 2 * max_nmax.max(1),
            });
        }
        if (step + 1) % cfg.record_stride == 0 {
            times.push(t_next);
            states.push(reduce(space.partial_trace(&w))?);
        }
    }
    Ok(ReducedSeries {
        times,
        states,
        max_top_population: max_top,
    })
}

/// Markovian reference `d rho = -i[H, rho] + gamma D[L] rho`.
pub fn lindblad_reference_markov(
    model: &SystemModel,
    gamma: f64,
    initial: &StateKet,
    cfg: &EnlargedConfig,
) -> Result<ReducedSeries> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    let n_steps = cfg.as_stepper().n_steps()?;
    let d = model.dim();
    let l = model.coupling();
    let ldag = l.adjoint();
    // K = -iH - (gamma / 2) L^dagger L
    let k = &model.hamiltonian().scale(C64::new(0.0, -1.0)) - &(&ldag * l).scale_real(0.5 * gamma);
    let (k, l) = (k.as_slice().to_vec(), l.as_slice().to_vec());
    let ldag = ldag.as_slice().to_vec();
    let mut y = vec![ZERO; d * d];
    let mut tmp = vec![ZERO; d * d];
    let mut rhs = |_: f64, rho: &[C64], drho: &mut [C64]| -> Result<()> {
        mul_into(&k, rho, &mut y, d);
        for r in 0..d {
            for c in 0..d {
                drho[r * d + c] = y[r * d + c] + y[c * d + r].conj();
            }
        }
        mul_into(&l, rho, &mut tmp, d);
        add_product(&tmp, &ldag, C64::new(gamma, 0.0), drho, d);
        Ok(())
    };
    let mut rho = initial.normalized()?.outer().as_slice().to_vec();
    let mut stepper = Stepper::new(Scheme::Rk4, rho.len());
    let mut times = vec![0.0];
    let mut states = vec![reduce(Operator::from_vec(d, rho.clone())?)?];
    for step in 0..n_steps {
        stepper.step(&mut rhs, step as f64 * cfg.dt, cfg.dt, &mut rho)?;
        if (step + 1) % cfg.record_stride == 0 {
            times.push((step + 1) as f64 * cfg.dt);
            states.push(reduce(Operator::from_vec(d, rho.clone())?)?);
        }
    }
    Ok(ReducedSeries {
        times,
        states,
        max_top_population: 0.0,
    })
}
