//! Fixed-step explicit integrators over flat complex state vectors.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Explicit trapezoid (improved Euler), second order.
    #[default]
    Heun,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Heun => "heun",
            Scheme::Rk4 => "rk4",
        }
    }

    /// Stage times as fractions of the step.
    pub fn stage_offsets(self) -> &'static [f64] {
        match self {
            Scheme::Heun => &[0.0, 1.0],
            Scheme::Rk4 => &[0.0, 0.5, 1.0],
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heun" => Ok(Scheme::Heun),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(Error::invalid(format!(
                "unknown scheme `{other}` (expected heun or rk4)"
            ))),
        }
    }
}

/// Scratch space for one integrator; reuse across steps to avoid
/// allocation in the hot loop.
#[derive(Debug, Clone)]
pub struct Stepper {
    scheme: Scheme,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Stepper {
    pub fn new(scheme: Scheme, len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        let (k3, k4) = match scheme {
            Scheme::Heun => (Vec::new(), Vec::new()),
            Scheme::Rk4 => (z.clone(), z.clone()),
        };
        Self {
            scheme,
            k1: z.clone(),
            k2: z.clone(),
            k3,
            k4,
            tmp: z,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Advances `y` from `t` to `t + h`. `f(t, y, dy)` writes the derivative.
    pub fn step<F>(&mut self, mut f: F, t: f64, h: f64, y: &mut [C64]) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    {
        debug_assert_eq!(y.len(), self.k1.len());
        match self.scheme {
            Scheme::Heun => {
                f(t, y, &mut self.k1)?;
                for ((o, &yi), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
                    *o = yi + h * k;
                }
                f(t + h, &self.tmp, &mut self.k2)?;
                let hh = 0.5 * h;
                for ((yi, &a), &b) in y.iter_mut().zip(&self.k1).zip(&self.k2) {
                    *yi += hh * (a + b);
                }
            }
            Scheme::Rk4 => {
                f(t, y, &mut self.k1)?;
                stage(&mut self.tmp, y, &self.k1, 0.5 * h);
                f(t + 0.5 * h, &self.tmp, &mut self.k2)?;
                stage(&mut self.tmp, y, &self.k2, 0.5 * h);
                f(t + 0.5 * h, &self.tmp, &mut self.k3)?;
                stage(&mut self.tmp, y, &self.k3, h);
                f(t + h, &self.tmp, &mut self.k4)?;
                let h6 = h / 6.0;
                for i in 0..y.len() {
                    y[i] += h6 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn stage(out: &mut [C64], y: &[C64], k: &[C64], h: f64) {
    for ((o, &yi), &ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + h * ki;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(scheme: Scheme, h: f64) -> f64 {
        // y' = i w y, exact solution e^{i w t}
        let w = 3.0;
        let mut s = Stepper::new(scheme, 1);
        let mut y = vec![C64::new(1.0, 0.0)];
        let n = (1.0 / h).round() as usize;
        for k in 0..n {
            s.step(
                |_, y, dy| {
                    dy[0] = C64::new(0.0, w) * y[0];
                    Ok(())
                },
                k as f64 * h,
                h,
                &mut y,
            )
            .unwrap();
        }
        (y[0] - C64::new(0.0, w).exp()).norm()
    }

    #[test]
    fn convergence_orders() {
        let heun = run(Scheme::Heun, 0.01) / run(Scheme::Heun, 0.005);
        assert!((heun - 4.0).abs() < 0.2, "{heun}");
        let rk4 = run(Scheme::Rk4, 0.02) / run(Scheme::Rk4, 0.01);
        assert!((rk4 - 16.0).abs() < 1.0, "{rk4}");
    }

    #[test]
    fn parse() {
        assert_eq!("rk4".parse::<Scheme>().unwrap(), Scheme::Rk4);
        assert!("euler".parse::<Scheme>().is_err());
    }
}
