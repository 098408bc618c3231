//! Flat `key = value` run configuration. Defaults reproduce the driven
//! two-level atom with a Lorentzian bath (gamma = kappa = 1, chi = 5,
//! delta = 3, starting in the excited state).

use std::fmt;
use std::path::PathBuf;

use nmsse_core::{
    KernelComponent, MemoryKernel, Method, ProviderSpec, Scheme, StateKet, StepperConfig,
    TrajectoryConfig, Unravelling, Variant,
};

/// Bad configuration input; maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub kappa: f64,
    pub omega: f64,
    /// Explicit components `A,kappa,omega;...`; overrides gamma/kappa/omega.
    pub kernel: Option<Vec<(f64, f64, f64)>>,
    pub delta: f64,
    pub chi: f64,
    pub initial: char,
    pub unravelling: Unravelling,
    pub order: usize,
    pub method: Method,
    pub variant: Variant,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub noise_substeps: usize,
    pub ntraj: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub nmax: usize,
    pub enlarged_dt: f64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            kappa: 1.0,
            omega: 0.0,
            kernel: None,
            delta: 3.0,
            chi: 5.0,
            initial: 'e',
            unravelling: Unravelling::Coherent,
            order: 1,
            method: Method::Perturbative,
            variant: Variant::Nonlinear,
            scheme: Scheme::Heun,
            dt: 1e-3,
            t_final: 10.0,
            record_stride: 100,
            noise_substeps: 1,
            ntraj: 1000,
            seed: 1,
            workers: None,
            nmax: 20,
            enlarged_dt: 1e-3,
            output: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| ConfigError(format!("{key}: cannot parse `{v}`")))
}

fn positive(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        err(format!("{key}: must be positive and finite, got {v}"))
    }
}

fn non_negative(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        err(format!("{key}: must be >= 0 and finite, got {v}"))
    }
}

fn finite(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        err(format!("{key}: must be finite, got {v}"))
    }
}

fn at_least_one(key: &str, v: &str) -> Result<usize> {
    match num::<usize>(key, v)? {
        0 => err(format!("{key}: must be >= 1")),
        n => Ok(n),
    }
}

fn parse_kernel(v: &str) -> Result<Vec<(f64, f64, f64)>> {
    v.split(';')
        .map(|part| {
            let f: Vec<&str> = part.split(',').map(str::trim).collect();
            match f.as_slice() {
                [a, k, o] => Ok((
                    positive("kernel", a)?,
                    positive("kernel", k)?,
                    finite("kernel", o)?,
                )),
                _ => err(format!(
                    "kernel: expected `A,kappa,omega` triples separated by `;`, got `{part}`"
                )),
            }
        })
        .collect()
}

impl RunConfig {
    /// Applies one setting; the value is validated against the key's range.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "gamma" => self.gamma = positive(key, v)?,
            "kappa" => self.kappa = positive(key, v)?,
            "omega" => self.omega = finite(key, v)?,
            "kernel" => self.kernel = Some(parse_kernel(v)?),
            "delta" => self.delta = finite(key, v)?,
            "chi" => self.chi = finite(key, v)?,
            "initial" => {
                self.initial = match v {
                    "e" | "g" => v.chars().next().unwrap(),
                    _ => return err(format!("initial: expected e or g, got `{v}`")),
                }
            }
            "unravelling" => {
                self.unravelling = v.parse().map_err(|e| ConfigError(format!("{key}: {e}")))?
            }
            "order" => self.order = num(key, v)?,
            "method" => self.method = v.parse().map_err(|e| ConfigError(format!("{key}: {e}")))?,
            "variant" => {
                self.variant = match v {
                    "nonlinear" => Variant::Nonlinear,
                    "linear" => Variant::Linear,
                    _ => return err(format!("variant: expected linear or nonlinear, got `{v}`")),
                }
            }
            "scheme" => self.scheme = v.parse().map_err(|e| ConfigError(format!("{key}: {e}")))?,
            "dt" => self.dt = positive(key, v)?,
            "t_final" => self.t_final = non_negative(key, v)?,
            "record_stride" => self.record_stride = at_least_one(key, v)?,
            "noise_substeps" => self.noise_substeps = at_least_one(key, v)?,
            "ntraj" => self.ntraj = at_least_one(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "workers" => self.workers = Some(at_least_one(key, v)?),
            "nmax" => self.nmax = at_least_one(key, v)?,
            "enlarged_dt" => self.enlarged_dt = positive(key, v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            other => return err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parses the text of a config file on top of the defaults.
    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", n + 1));
            };
            self.set(k.trim(), v)
                .map_err(|e| ConfigError(format!("line {}: {}", n + 1, e.0)))?;
        }
        Ok(())
    }

    /// Cross-field checks that single keys cannot express.
    pub fn validate(&self) -> Result<()> {
        let max = self.unravelling.max_order();
        if self.method == Method::Perturbative && self.order > max {
            return err(format!(
                "order: {} is not supported for the {} unravelling (0..={max})",
                self.order,
                self.unravelling.name()
            ));
        }
        self.stepper()
            .validate()
            .map_err(|e| ConfigError(format!("dt/t_final/record_stride: {e}")))?;
        Ok(())
    }

    pub fn memory_kernel(&self) -> nmsse_core::Result<MemoryKernel> {
        match &self.kernel {
            Some(parts) => MemoryKernel::new(
                parts
                    .iter()
                    .map(|&(a, k, o)| KernelComponent::new(a, k, o))
                    .collect::<nmsse_core::Result<_>>()?,
            ),
            None => MemoryKernel::single(0.25 * self.gamma * self.kappa, self.kappa, self.omega),
        }
    }

    pub fn initial_state(&self) -> StateKet {
        if self.initial == 'g' {
            StateKet::ground()
        } else {
            StateKet::excited()
        }
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            scheme: self.scheme,
            t_final: self.t_final,
            record_stride: self.record_stride,
        }
    }

    pub fn provider(&self) -> ProviderSpec {
        match self.method {
            Method::Perturbative => ProviderSpec::perturbative(self.order),
            Method::Ydgs => ProviderSpec::ydgs(),
        }
    }

    pub fn trajectory(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            unravelling: self.unravelling,
            variant: self.variant,
            provider: self.provider(),
            stepper: self.stepper(),
            noise_substeps: self.noise_substeps,
        }
    }
}
