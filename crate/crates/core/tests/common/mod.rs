//! Independent oracles shared by the integration tests and the acceptance
//! harness. Only `symbolic` calls into the library, to compare its
//! matrix-level right-hand sides with the component formulas here.

#![allow(dead_code)]

pub mod symbolic;

use nmsse_core::{Complex64 as C64, Operator};

pub const GAMMA: f64 = 1.0;
pub const KAPPA: f64 = 1.0;
pub const CHI: f64 = 5.0;
pub const DELTA: f64 = 3.0;

/// Excited amplitude of the undriven atom in a Lorentzian bath:
/// `c'' + (kappa / 2) c' + (gamma kappa / 4) c = 0`, `c(0) = 1`, `c'(0) = 0`.
pub fn undriven_amplitude(gamma: f64, kappa: f64, t: f64) -> C64 {
    let disc = C64::new(kappa * kappa / 16.0 - gamma * kappa / 4.0, 0.0).sqrt();
    let rp = -kappa / 4.0 + disc;
    let rm = -kappa / 4.0 - disc;
    if (rp - rm).norm() < 1e-12 {
        // critical damping: c = (1 - r t) e^{r t}
        let r = rp;
        return (1.0 - r * t) * (r * t).exp();
    }
    (rp * (rm * t).exp() - rm * (rp * t).exp()) / (rp - rm)
}

pub fn undriven_z(gamma: f64, kappa: f64, t: f64) -> f64 {
    2.0 * undriven_amplitude(gamma, kappa, t).norm_sqr() - 1.0
}

/// Markovian optical Bloch equations for `H = delta/2 sz + chi/2 sx`,
/// `L = sigma` at rate `gamma`, integrated with a fine RK4 and sampled
/// every `record` time units.
pub fn optical_bloch(
    delta: f64,
    chi: f64,
    gamma: f64,
    start: [f64; 3],
    t_final: f64,
    record: f64,
) -> Vec<[f64; 3]> {
    let f = |v: [f64; 3]| {
        let [x, y, z] = v;
        [
            -delta * y - 0.5 * gamma * x,
            delta * x - chi * z - 0.5 * gamma * y,
            chi * y - gamma * (z + 1.0),
        ]
    };
    let sub = 2000usize;
    let h = record / sub as f64;
    let n_rec = (t_final / record).round() as usize;
    let mut v = start;
    let mut out = vec![v];
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    for _ in 0..n_rec {
        for _ in 0..sub {
            let k1 = f(v);
            let k2 = f(add(v, k1, 0.5 * h));
            let k3 = f(add(v, k2, 0.5 * h));
            let k4 = f(add(v, k3, h));
            for i in 0..3 {
                v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.push(v);
    }
    out
}

/// Coefficients of `X = a sigma + b sigma^dagger + c sigma_z + d I` for a
/// 2x2 operator in the `(e, g)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tla {
    pub s: C64,
    pub p: C64,
    pub z: C64,
    pub i: C64,
}

impl Tla {
    pub fn zero() -> Self {
        let o = C64::new(0.0, 0.0);
        Self { s: o, p: o, z: o, i: o }
    }

    pub fn decompose(op: &Operator) -> Self {
        Self {
            s: op.get(1, 0),
            p: op.get(0, 1),
            z: 0.5 * (op.get(0, 0) - op.get(1, 1)),
            i: 0.5 * (op.get(0, 0) + op.get(1, 1)),
        }
    }

    pub fn compose(&self) -> Operator {
        Operator::from_rows(&[&[self.z + self.i, self.p], &[self.s, self.i - self.z]]).unwrap()
    }

    pub fn max_diff(&self, o: &Tla) -> f64 {
        [self.s - o.s, self.p - o.p, self.z - o.z, self.i - o.i]
            .iter()
            .fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Parameters of the component-form two-level equations.
#[derive(Debug, Clone, Copy)]
pub struct TlaCase {
    pub gamma: f64,
    pub kappa: f64,
    pub delta: f64,
    pub chi: f64,
    pub t: f64,
}

impl TlaCase {
    /// `gamma (1 - e^{-kappa t / 2})`, the closure prefactor times two.
    fn decay(&self) -> f64 {
        self.gamma * (1.0 - (-0.5 * self.kappa * self.t).exp())
    }

    /// Next-order coherent functional implied by the closure.
    pub fn closure(&self, f: &Tla) -> Tla {
        let o = C64::new(0.0, 0.0);
        Tla {
            s: self.decay() * f.z,
            z: -0.5 * self.decay() * f.p,
            p: o,
            i: o,
        }
    }

    /// Zero-order coherent functional derivative given the next order `f1`.
    pub fn coherent_f0(&self, f: &Tla, f1: &Tla, zs: C64) -> Tla {
        let i = C64::new(0.0, 1.0);
        let (g, k, d, x) = (self.gamma, self.kappa, self.delta, self.chi);
        Tla {
            s: 0.25 * g * k - 0.5 * k * f.s + i * d * f.s - i * x * f.z + 2.0 * zs * f.z + f.s * f.s,
            p: -0.5 * k * f.p + i * x * f.z - i * d * f.p + 2.0 * f.z * (f.i - f.z) - f.p * f.s
                - (f1.i - f1.z),
            z: -0.5 * k * f.z + 0.5 * i * x * f.p - 0.5 * i * x * f.s - f.s * (f.i - f.z) - zs * f.p
                - 0.5 * f1.s,
            i: -0.5 * k * f.i - 0.5 * f1.s,
        }
    }

    /// First-order coherent functional derivative given `f0`, `f1` and the
    /// closure `f2`.
    pub fn coherent_f1(&self, f0: &Tla, f1: &Tla, f2: &Tla, zs: C64) -> Tla {
        let i = C64::new(0.0, 1.0);
        let (g, k, d, x) = (self.gamma, self.kappa, self.delta, self.chi);
        Tla {
            s: 0.5 * g * k * f0.z - k * f1.s + i * d * f1.s - i * x * f1.z + 2.0 * zs * f1.z
                + 2.0 * f0.s * f1.s,
            p: -k * f1.p + i * x * f1.z - i * d * f1.p + 2.0 * f1.z * (f0.i - f0.z)
                + 2.0 * f0.z * (f1.i - f1.z)
                - (f1.p * f0.s + f0.p * f1.s)
                - f2.i
                + f2.z,
            z: -0.25 * g * k * f0.p - k * f1.z + 0.5 * i * x * f1.p - 0.5 * i * x * f1.s
                - f1.s * (f0.i - f0.z)
                - f0.s * (f1.i - f1.z)
                - zs * f1.p
                - 0.5 * f2.s,
            i: -k * f1.i - 0.5 * f2.s,
        }
    }

    /// Zero-order quadrature functional derivative for real noise `z`.
    pub fn quadrature_q0(&self, q: &Tla, q1: &Tla, z: f64) -> Tla {
        let i = C64::new(0.0, 1.0);
        let (g, k, d, x) = (self.gamma, self.kappa, self.delta, self.chi);
        Tla {
            s: 0.25 * g * k - 0.5 * k * q.s + i * d * q.s - i * x * q.z + 2.0 * z * q.z + q.s * q.s
                - 2.0 * q.z * (q.i + q.z)
                - q.p * q.s
                - (q1.i + q1.z),
            p: -0.5 * k * q.p + i * x * q.z - i * d * q.p + 2.0 * q.z * (q.i - q.z) - q.p * q.s
                + q.p * q.p
                - q1.i
                + q1.z,
            z: -0.5 * k * q.z + 0.5 * i * x * q.p - 0.5 * i * x * q.s - q.s * (q.i - q.z)
                + q.p * (q.i + q.z)
                - z * q.p
                - 0.5 * (q1.s - q1.p),
            i: -0.5 * k * q.i - 0.5 * (q1.s + q1.p),
        }
    }
}

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Excited population of an undriven atom (`H = delta/2 sz`, `L = sigma`)
/// coupled to damped modes `(G_j^2, kappa_j, omega_j)`, from the
/// single-excitation amplitude equations in the frame that removes the
/// bare energies:
/// `a' = -sum_j G_j b_j`, `b_j' = (i (delta - omega_j) - kappa_j / 2) b_j + G_j a`.
pub fn single_excitation_population(delta: f64, modes: &[(f64, f64, f64)], times: &[f64]) -> Vec<f64> {
    let n = modes.len();
    let rhs = |y: &[C64]| -> Vec<C64> {
        let mut d = vec![C64::new(0.0, 0.0); n + 1];
        for (j, &(g2, k, om)) in modes.iter().enumerate() {
            let g = g2.sqrt();
            d[0] -= g * y[j + 1];
            d[j + 1] = C64::new(-0.5 * k, delta - om) * y[j + 1] + g * y[0];
        }
        d
    };
    let h: f64 = 1e-4;
    let mut y = vec![C64::new(0.0, 0.0); n + 1];
    y[0] = C64::new(1.0, 0.0);
    let mut t = 0.0;
    let mut out = Vec::new();
    for &target in times {
        while t < target - 1e-12 {
            let step = h.min(target - t);
            let k1 = rhs(&y);
            let y2: Vec<C64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * step * b).collect();
            let k2 = rhs(&y2);
            let y3: Vec<C64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * step * b).collect();
            let k3 = rhs(&y3);
            let y4: Vec<C64> = y.iter().zip(&k3).map(|(a, b)| a + step * b).collect();
            let k4 = rhs(&y4);
            for i in 0..=n {
                y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += step;
        }
        out.push(y[0].norm_sqr());
    }
    out
}
