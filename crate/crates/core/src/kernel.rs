//! Exponential-sum bath memory kernels.
//!
//! A kernel is `alpha(tau) = sum_j A_j exp(-lambda_j tau)` with
//! `lambda_j = kappa_j / 2 + i omega_j`. The same amplitude `A_j` is used as
//! `alpha_j(0)` for the coherent unravelling and as `beta_j(0)` for the
//! quadrature one, so a pseudomode coupling is always `sqrt(A_j)`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative tolerance used when pairing `+omega` / `-omega` components.
const PAIR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelComponent {
    pub amplitude: f64,
    pub kappa: f64,
    pub omega: f64,
}

impl KernelComponent {
    pub fn new(amplitude: f64, kappa: f64, omega: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::invalid(format!(
                "kernel amplitude must be positive and finite, got {amplitude}"
            )));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::invalid(format!(
                "kernel decay rate must be positive and finite, got {kappa}"
            )));
        }
        if !omega.is_finite() {
            return Err(Error::invalid("kernel frequency must be finite"));
        }
        Ok(Self {
            amplitude,
            kappa,
            omega,
        })
    }

    /// `kappa / 2 + i omega`
    #[inline]
    pub fn lambda(&self) -> C64 {
        C64::new(0.5 * self.kappa, self.omega)
    }

    /// Pseudomode coupling `G_j = sqrt(A_j)`.
    pub fn coupling(&self) -> f64 {
        self.amplitude.sqrt()
    }

    #[inline]
    pub fn alpha(&self, tau: f64) -> C64 {
        self.amplitude * (-self.lambda() * tau).exp()
    }

    /// `int_0^t alpha_j`
    #[inline]
    pub fn cumulative(&self, t: f64) -> C64 {
        self.amplitude * t * phi1(self.lambda() * t)
    }

    /// `int_0^t alpha_j(tau) tau dtau`
    #[inline]
    pub fn first_moment(&self, t: f64) -> C64 {
        self.amplitude * t * t * phi2(self.lambda() * t)
    }
}

/// `(1 - e^{-x}) / x`, accurate near zero.
fn phi1(x: C64) -> C64 {
    if x.norm() < 0.1 {
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..14 {
            term *= -x / (n as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (1.0 - (-x).exp()) / x
    }
}

/// `(1 - e^{-x}(1 + x)) / x^2`, accurate near zero.
fn phi2(x: C64) -> C64 {
    if x.norm() < 0.1 {
        // sum_n (-x)^n (n+1)/(n+2)!
        let mut power = C64::new(1.0, 0.0);
        let mut fact = 2.0;
        let mut sum = C64::new(0.5, 0.0);
        for n in 1..14 {
            power *= -x;
            fact *= n as f64 + 2.0;
            sum += power * ((n + 1) as f64 / fact);
        }
        sum
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (x * x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    components: Vec<KernelComponent>,
    quadrature_ok: bool,
}

impl MemoryKernel {
    pub fn new(components: Vec<KernelComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("kernel needs at least one component"));
        }
        for c in &components {
            KernelComponent::new(c.amplitude, c.kappa, c.omega)?;
        }
        let quadrature_ok = is_real_symmetric(&components);
        Ok(Self {
            components,
            quadrature_ok,
        })
    }

    pub fn single(amplitude: f64, kappa: f64, omega: f64) -> Result<Self> {
        Self::new(vec![KernelComponent::new(amplitude, kappa, omega)?])
    }

    /// Lorentzian bath of a two-level atom: `A = gamma kappa / 4`, no detuning.
    pub fn tla(gamma: f64, kappa: f64) -> Result<Self> {
        Self::single(0.25 * gamma * kappa, kappa, 0.0)
    }

    pub fn components(&self) -> &[KernelComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// True when every `omega != 0` component has a partner with the same
    /// amplitude and decay at `-omega`, so that `alpha` is real and equals
    /// its cosine form.
    pub fn quadrature_ok(&self) -> bool {
        self.quadrature_ok
    }

    pub fn require_quadrature(&self) -> Result<()> {
        if self.quadrature_ok {
            Ok(())
        } else {
            Err(Error::KernelNotReal)
        }
    }

    pub fn alpha_eval(&self, tau: f64) -> Result<C64> {
        check_time(tau, "tau")?;
        Ok(self.components.iter().map(|c| c.alpha(tau)).sum())
    }

    /// Per-component `I0_j(t) = int_0^t alpha_j`.
    pub fn cumulative_integral(&self, t: f64) -> Result<Vec<C64>> {
        check_time(t, "t")?;
        Ok(self.components.iter().map(|c| c.cumulative(t)).collect())
    }

    /// Allocation-free form of [`Self::cumulative_integral`]; `t >= 0` is the
    /// caller's responsibility.
    #[inline]
    pub fn cumulative_into(&self, t: f64, out: &mut [C64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.cumulative(t);
        }
    }

    pub fn cumulative_total(&self, t: f64) -> Result<C64> {
        Ok(self.cumulative_integral(t)?.into_iter().sum())
    }

    /// Cosine and sine parts of each component of `beta`.
    pub fn beta_split(&self, tau: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.require_quadrature()?;
        check_time(tau, "tau")?;
        Ok(self
            .components
            .iter()
            .map(|c| {
                let env = c.amplitude * (-0.5 * c.kappa * tau).exp();
                let (s, co) = (c.omega * tau).sin_cos();
                (env * co, env * s)
            })
            .unzip())
    }

    pub fn beta_eval(&self, tau: f64) -> Result<f64> {
        Ok(self.beta_split(tau)?.0.iter().sum())
    }

    /// Integrals over `[0, t]` of the cosine and sine parts: `Re I0_j` and
    /// `-Im I0_j`.
    pub fn beta_cumulative(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.require_quadrature()?;
        check_time(t, "t")?;
        Ok(self
            .components
            .iter()
            .map(|c| {
                let i0 = c.cumulative(t);
                (i0.re, -i0.im)
            })
            .unzip())
    }

    /// `int_0^t alpha(tau) tau dtau`
    pub fn first_moment(&self, t: f64) -> Result<C64> {
        check_time(t, "t")?;
        Ok(self.components.iter().map(|c| c.first_moment(t)).sum())
    }

    /// Decay rate of the Markov limit, `2 Re int_0^inf alpha`.
    pub fn markov_rate(&self) -> f64 {
        2.0 * self
            .components
            .iter()
            .map(|c| (c.amplitude / c.lambda()).re)
            .sum::<f64>()
    }

    pub fn min_kappa(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.kappa)
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_time(t: f64, name: &str) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and >= 0, got {t}")))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PAIR_TOL * a.abs().max(b.abs()).max(1.0)
}

fn is_real_symmetric(components: &[KernelComponent]) -> bool {
    let mut used = vec![false; components.len()];
    for i in 0..components.len() {
        if used[i] {
            continue;
        }
        let c = components[i];
        if c.omega == 0.0 {
            used[i] = true;
            continue;
        }
        let partner = (0..components.len()).find(|&k| {
            !used[k]
                && k != i
                && close(components[k].omega, -c.omega)
                && close(components[k].amplitude, c.amplitude)
                && close(components[k].kappa, c.kappa)
        });
        match partner {
            Some(k) => {
                used[i] = true;
                used[k] = true;
            }
            None => return false,
        }
    }
    true
}

/// Weight functions of the first-order post-Markovian closure on a uniform
/// grid starting at zero.
///
/// `g0 = int alpha`, `g1 = int alpha(tau) tau`, `g2(t) = int_0^t alpha(t-s)
/// (t-s) g0(s) ds`; the `h` series are the same with `beta`.
#[derive(Debug, Clone)]
pub struct YdgsWeights {
    spacing: f64,
    g0: Vec<C64>,
    g1: Vec<C64>,
    g2: Vec<C64>,
    h: Option<[Vec<f64>; 3]>,
}

/// Builds [`YdgsWeights`] on `grid`. The `h` series are only produced for
/// kernels with [`MemoryKernel::quadrature_ok`].
pub fn ydgs_weights(kernel: &MemoryKernel, grid: &[f64]) -> Result<YdgsWeights> {
    let spacing = check_uniform(grid)?;
    let n = grid.len();
    let mut g0 = Vec::with_capacity(n);
    let mut g1 = Vec::with_capacity(n);
    for &t in grid {
        g0.push(kernel.cumulative_total(t)?);
        g1.push(kernel.first_moment(t)?);
    }
    let g2 = second_weight(kernel, grid, spacing, |t| kernel.cumulative_total(t).unwrap());
    let h = if kernel.quadrature_ok() {
        let h0: Vec<f64> = g0.iter().map(|x| x.re).collect();
        let h1: Vec<f64> = g1.iter().map(|x| x.re).collect();
        let h2 = second_weight(kernel, grid, spacing, |t| {
            C64::new(kernel.cumulative_total(t).unwrap().re, 0.0)
        })
        .into_iter()
        .map(|x| x.re)
        .collect();
        Some([h0, h1, h2])
    } else {
        None
    };
    Ok(YdgsWeights {
        spacing,
        g0,
        g1,
        g2,
        h,
    })
}

/// Integrates `P' = -lambda P + A f(t)`, `g' = -lambda g + P` per component
/// with classical RK4 and returns `sum_j g_j` on the grid.
fn second_weight(
    kernel: &MemoryKernel,
    grid: &[f64],
    h: f64,
    forcing: impl Fn(f64) -> C64,
) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    for c in kernel.components() {
        let lam = c.lambda();
        let a = c.amplitude;
        let rhs = |t: f64, p: C64, g: C64| (-lam * p + a * forcing(t), -lam * g + p);
        let (mut p, mut g) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for i in 1..grid.len() {
            let t = grid[i - 1];
            let (k1p, k1g) = rhs(t, p, g);
            let (k2p, k2g) = rhs(t + 0.5 * h, p + 0.5 * h * k1p, g + 0.5 * h * k1g);
            let (k3p, k3g) = rhs(t + 0.5 * h, p + 0.5 * h * k2p, g + 0.5 * h * k2g);
            let (k4p, k4g) = rhs(t + h, p + h * k3p, g + h * k3g);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
            out[i] += g;
        }
    }
    out
}

fn check_uniform(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::invalid("weight grid needs at least two points"));
    }
    if grid[0] != 0.0 {
        return Err(Error::invalid("weight grid must start at t = 0"));
    }
    let h = grid[1] - grid[0];
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("weight grid must be increasing"));
    }
    for (i, &t) in grid.iter().enumerate() {
        if (t - i as f64 * h).abs() > 1e-9 * h.max(t.abs() * 1e-3) {
            return Err(Error::invalid(format!(
                "weight grid is not uniform at index {i} (t = {t})"
            )));
        }
    }
    Ok(h)
}

impl YdgsWeights {
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.g0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g0.is_empty()
    }

    pub fn g0(&self) -> &[C64] {
        &self.g0
    }

    pub fn g1(&self) -> &[C64] {
        &self.g1
    }

    pub fn g2(&self) -> &[C64] {
        &self.g2
    }

    /// `[h0, h1, h2]`, present for real-symmetric kernels.
    pub fn h(&self) -> Option<&[Vec<f64>; 3]> {
        self.h.as_ref()
    }

    /// Grid index of `t`; `t` must lie on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.spacing;
        let i = x.round();
        if !(i >= 0.0) || (x - i).abs() > 1e-6 || i as usize >= self.len() {
            return Err(Error::invalid(format!(
                "t = {t} is not on the weight grid (spacing {}, {} points)",
                self.spacing,
                self.len()
            )));
        }
        Ok(i as usize)
    }

    pub fn coherent_at(&self, t: f64) -> Result<[C64; 3]> {
        let i = self.index_of(t)?;
        Ok([self.g0[i], self.g1[i], self.g2[i]])
    }

    pub fn quadrature_at(&self, t: f64) -> Result<[f64; 3]> {
        let h = self.h.as_ref().ok_or(Error::KernelNotReal)?;
        let i = self.index_of(t)?;
        Ok([h[0][i], h[1][i], h[2][i]])
    }
}
