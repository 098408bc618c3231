//! Colored Ornstein-Uhlenbeck noise for the ostensible measure and the
//! Girsanov shift to the actual noise.
//!
//! Each kernel component drives one complex OU process
//! `dw_j = -lambda_j w_j dt + dW`, advanced with its exact transition law,
//! so `E[w_j(t) w_j*(s)] = alpha_j(t - s)` holds at any step size.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::MemoryKernel;
use crate::Unravelling;

/// Identifies one trajectory's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub trajectory_index: u64,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        Self {
            master_seed,
            trajectory_index,
        }
    }

    /// ChaCha8 keyed by the master seed, on the stream selected by the
    /// trajectory index. Independent of thread count and scheduling.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trajectory_index);
        rng
    }
}

#[derive(Debug, Clone)]
pub struct NoiseState {
    mode: Unravelling,
    lambda: Vec<C64>,
    amplitude: Vec<f64>,
    kappa: Vec<f64>,
    w: Vec<C64>,
    rng: ChaCha8Rng,
    // transition coefficients for the last step size used
    cached_h: f64,
    decay: Vec<C64>,
    kick: Vec<f64>,
}

/// Draws every component from its stationary law.
pub fn init_noise(kernel: &MemoryKernel, mode: Unravelling, spec: RngStreamSpec) -> Result<NoiseState> {
    if mode == Unravelling::Quadrature {
        kernel.require_quadrature()?;
    }
    let comps = kernel.components();
    let j = comps.len();
    let mut state = NoiseState {
        mode,
        lambda: comps.iter().map(|c| c.lambda()).collect(),
        amplitude: comps.iter().map(|c| c.amplitude).collect(),
        kappa: comps.iter().map(|c| c.kappa).collect(),
        w: vec![C64::new(0.0, 0.0); j],
        rng: spec.rng(),
        cached_h: f64::NAN,
        decay: vec![C64::new(0.0, 0.0); j],
        kick: vec![0.0; j],
    };
    state.draw_stationary();
    Ok(state)
}

/// `exp(-(kappa/2 + i omega) h)`
pub fn decay_factor(kappa: f64, omega: f64, h: f64) -> C64 {
    (-C64::new(0.5 * kappa, omega) * h).exp()
}

impl NoiseState {
    /// Restarts on a new stream without reallocating.
    pub fn reset(&mut self, spec: RngStreamSpec) {
        self.rng = spec.rng();
        self.draw_stationary();
    }

    fn draw_stationary(&mut self) {
        for (w, &a) in self.w.iter_mut().zip(&self.amplitude) {
            let s = (0.5 * a).sqrt();
            let re: f64 = self.rng.sample(StandardNormal);
            let im: f64 = self.rng.sample(StandardNormal);
            *w = C64::new(s * re, s * im);
        }
    }

    pub fn mode(&self) -> Unravelling {
        self.mode
    }

    /// Per-component OU values.
    pub fn components(&self) -> &[C64] {
        &self.w
    }

    /// Ostensible noise at the current time. In quadrature mode the value
    /// is `sum_j sqrt(2) Re w_j` with an exactly zero imaginary part.
    #[inline]
    pub fn current(&self) -> C64 {
        match self.mode {
            Unravelling::Coherent => self.w.iter().sum(),
            Unravelling::Quadrature => C64::new(
                std::f64::consts::SQRT_2 * self.w.iter().map(|w| w.re).sum::<f64>(),
                0.0,
            ),
        }
    }

    /// Advances every component by the exact OU transition over `h` and
    /// returns the ostensible noise at the new time.
    pub fn step_noise(&mut self, h: f64) -> Result<C64> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("noise step must be positive, got {h}")));
        }
        Ok(self.step_unchecked(h))
    }

    #[inline]
    pub(crate) fn step_unchecked(&mut self, h: f64) -> C64 {
        if h != self.cached_h {
            for k in 0..self.w.len() {
                self.decay[k] = (-self.lambda[k] * h).exp();
                // E|eta|^2 = A (1 - e^{-kappa h}), split evenly over re/im
                self.kick[k] = (0.5 * self.amplitude[k] * -(-self.kappa[k] * h).exp_m1()).sqrt();
            }
            self.cached_h = h;
        }
        for k in 0..self.w.len() {
            let re: f64 = self.rng.sample(StandardNormal);
            let im: f64 = self.rng.sample(StandardNormal);
            self.w[k] = self.w[k] * self.decay[k] + C64::new(self.kick[k] * re, self.kick[k] * im);
        }
        self.current()
    }

    /// Advances over `dt` in `substeps` exact sub-steps and returns the
    /// time average of the piecewise-linear path through the sub-step
    /// values. A run at `dt` with two sub-steps and a run at `dt / 2` with
    /// one consume the same draws and see the same step integrals.
    #[inline]
    pub(crate) fn advance_held(&mut self, dt: f64, substeps: usize) -> C64 {
        let h = dt / substeps as f64;
        let mut prev = self.current();
        let mut acc = C64::new(0.0, 0.0);
        for _ in 0..substeps {
            let next = self.step_unchecked(h);
            acc += 0.5 * (prev + next);
            prev = next;
        }
        acc / substeps as f64
    }
}

/// Stand-alone Girsanov accumulators `M_j' = -lambda_j M_j + A_j e(t)`.
///
/// The trajectory integrator carries the same variables inside its ODE
/// state; this type advances them exactly for an expectation held fixed
/// over each step.
#[derive(Debug, Clone)]
pub struct GirsanovAccumulator {
    mode: Unravelling,
    lambda: Vec<C64>,
    amplitude: Vec<f64>,
    m: Vec<C64>,
}

impl GirsanovAccumulator {
    pub fn new(kernel: &MemoryKernel, mode: Unravelling) -> Result<Self> {
        if mode == Unravelling::Quadrature {
            kernel.require_quadrature()?;
        }
        Ok(Self {
            mode,
            lambda: kernel.components().iter().map(|c| c.lambda()).collect(),
            amplitude: kernel.components().iter().map(|c| c.amplitude).collect(),
            m: vec![C64::new(0.0, 0.0); kernel.len()],
        })
    }

    /// `expectation` is `<L>` (coherent) or `<L + L^dagger>` (quadrature)
    /// in the normalized state, taken constant over the step.
    pub fn girsanov_shift(&mut self, expectation: C64, h: f64) -> Result<C64> {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("step must be >= 0, got {h}")));
        }
        let e = match self.mode {
            Unravelling::Coherent => expectation,
            Unravelling::Quadrature => C64::new(expectation.re, 0.0),
        };
        for k in 0..self.m.len() {
            let lam = self.lambda[k];
            let decay = (-lam * h).exp();
            let gain = self.amplitude[k] * h * phi1(lam * h);
            self.m[k] = self.m[k] * decay + gain * e;
        }
        Ok(self.shift())
    }

    /// Current shift: `sum_j M_j`, or `sum_j Re M_j` (real) for quadrature.
    pub fn shift(&self) -> C64 {
        match self.mode {
            Unravelling::Coherent => self.m.iter().sum(),
            Unravelling::Quadrature => C64::new(self.m.iter().map(|m| m.re).sum(), 0.0),
        }
    }

    pub fn accumulators(&self) -> &[C64] {
        &self.m
    }
}

fn phi1(x: C64) -> C64 {
    if x.norm() < 1e-3 {
        1.0 - 0.5 * x + x * x / 6.0
    } else {
        (1.0 - (-x).exp()) / x
    }
}

/// Empirical two-time moments of the ostensible noise at one `(t, s)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub t: f64,
    pub s: f64,
    /// `E[z(t) z*(s)]`, which should equal the kernel at `t - s`.
    pub cross: C64,
    /// Standard errors of the real and imaginary parts of `cross`.
    pub cross_err: [f64; 2],
    /// `E[z(t) z(s)]`: zero for the coherent noise.
    pub pair: C64,
    pub pair_err: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    pub mode: Unravelling,
    pub n_paths: usize,
    pub estimates: Vec<CorrelationEstimate>,
    /// `E|z(t)|^2` at the last requested time, with its standard error.
    pub variance: f64,
    pub variance_err: f64,
    /// Largest `|Im z|` seen (exactly zero in quadrature mode).
    pub max_imag: f64,
}

#[derive(Default, Clone, Copy)]
struct Moments {
    sum: C64,
    sq: [f64; 2],
}

impl Moments {
    fn push(&mut self, v: C64) {
        self.sum += v;
        self.sq[0] += v.re * v.re;
        self.sq[1] += v.im * v.im;
    }

    fn finish(&self, n: f64) -> (C64, [f64; 2]) {
        let m = self.sum / n;
        let err = |sq: f64, mean: f64| ((sq / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt();
        (m, [err(self.sq[0], m.re), err(self.sq[1], m.im)])
    }
}

/// Samples `n_paths` independent noise paths on a grid of spacing `dt`
/// (streams `(seed, 0..n_paths)`) and estimates the two-time moments at
/// `pairs`, whose times must lie on the grid.
pub fn noise_statistics(
    kernel: &MemoryKernel,
    mode: Unravelling,
    seed: u64,
    n_paths: usize,
    dt: f64,
    pairs: &[(f64, f64)],
) -> Result<NoiseReport> {
    if n_paths < 2 {
        return Err(Error::invalid("noise statistics need at least two paths"));
    }
    if !(dt > 0.0 && dt.is_finite()) || pairs.is_empty() {
        return Err(Error::invalid("need dt > 0 and at least one (t, s) pair"));
    }
    let index = |t: f64| -> Result<usize> {
        let k = (t / dt).round();
        if t < 0.0 || (k * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::invalid(format!("time {t} is not on the grid of spacing {dt}")));
        }
        Ok(k as usize)
    };
    let idx: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(t, s)| Ok((index(t)?, index(s)?)))
        .collect::<Result<_>>()?;
    let last = idx.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0);
    let mut wanted = vec![false; last + 1];
    for &(a, b) in &idx {
        wanted[a] = true;
        wanted[b] = true;
    }
    let mut path = vec![C64::new(0.0, 0.0); last + 1];
    let mut cross = vec![Moments::default(); pairs.len()];
    let mut pair = vec![Moments::default(); pairs.len()];
    let (mut var, mut var_sq) = (0.0, 0.0);
    let mut max_imag = 0.0f64;
    let mut noise = init_noise(kernel, mode, RngStreamSpec::new(seed, 0))?;
    for p in 0..n_paths as u64 {
        noise.reset(RngStreamSpec::new(seed, p));
        path[0] = noise.current();
        for k in 1..=last {
            let z = noise.step_unchecked(dt);
            if wanted[k] {
                path[k] = z;
            }
            max_imag = max_imag.max(z.im.abs());
        }
        max_imag = max_imag.max(path[0].im.abs());
        for (i, &(a, b)) in idx.iter().enumerate() {
            cross[i].push(path[a] * path[b].conj());
            pair[i].push(path[a] * path[b]);
        }
        let v = path[last].norm_sqr();
        var += v;
        var_sq += v * v;
    }
    let n = n_paths as f64;
    let estimates = pairs
        .iter()
        .zip(cross.iter().zip(&pair))
        .map(|(&(t, s), (c, q))| {
            let (cross, cross_err) = c.finish(n);
            let (pair, pair_err) = q.finish(n);
            CorrelationEstimate {
                t,
                s,
                cross,
                cross_err,
                pair,
                pair_err,
            }
        })
        .collect();
    let mean = var / n;
    Ok(NoiseReport {
        mode,
        n_paths,
        estimates,
        variance: mean,
        variance_err: ((var_sq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt(),
        max_imag,
    })
}
