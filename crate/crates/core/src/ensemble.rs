//! Trajectory ensembles and comparison metrics.
//!
//! Per-record sums are kept in 2^-48 fixed point, so merging partial
//! results is exactly associative and commutative: the answer for a given
//! `(seed, N)` does not depend on how trajectories were split across
//! workers.

use std::ops::Range;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::BlochVector;
use crate::sse::{Simulation, Variant};
use crate::RngStreamSpec;

const SCALE: f64 = (1u64 << 48) as f64;

#[inline]
fn fix(v: f64) -> i128 {
    (v * SCALE).round() as i128
}

#[inline]
fn unfix(v: i128) -> f64 {
    v as f64 / SCALE
}

/// Bloch components over time, with optional per-component standard errors
/// (zero for deterministic reference solutions).
#[derive(Debug, Clone, PartialEq)]
pub struct BlochSeries {
    pub times: Vec<f64>,
    pub values: Vec<BlochVector>,
    pub stderr: Vec<[f64; 3]>,
}

impl BlochSeries {
    pub fn new(times: Vec<f64>, values: Vec<BlochVector>, stderr: Vec<[f64; 3]>) -> Result<Self> {
        if times.len() != values.len() || times.len() != stderr.len() {
            return Err(Error::invalid("series columns have different lengths"));
        }
        Ok(Self {
            times,
            values,
            stderr,
        })
    }

    /// A deterministic series (all standard errors zero).
    pub fn reference(times: Vec<f64>, values: Vec<BlochVector>) -> Self {
        let stderr = vec![[0.0; 3]; times.len()];
        Self {
            times,
            values,
            stderr,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleConfig {
    pub ntraj: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Index of the first trajectory stream.
    pub first_index: u64,
}

impl EnsembleConfig {
    pub fn new(ntraj: usize, seed: u64) -> Self {
        Self {
            ntraj,
            seed,
            workers: None,
            first_index: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    /// Allowed failures: one per thousand trajectories, rounded down.
    pub fn failure_budget(&self) -> usize {
        self.ntraj / 1000
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Sums {
    w: i128,
    w2: i128,
    x: [i128; 3],
    x2: [i128; 3],
    xw: [i128; 3],
}

impl Sums {
    fn add(&mut self, w: f64, x: [f64; 3]) {
        self.w += fix(w);
        self.w2 += fix(w * w);
        for i in 0..3 {
            self.x[i] += fix(x[i]);
            self.x2[i] += fix(x[i] * x[i]);
            self.xw[i] += fix(x[i] * w);
        }
    }

    fn merge(&mut self, o: &Sums) {
        self.w += o.w;
        self.w2 += o.w2;
        for i in 0..3 {
            self.x[i] += o.x[i];
            self.x2[i] += o.x2[i];
            self.xw[i] += o.xw[i];
        }
    }
}

/// Partial ensemble statistics; merge in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    times: Vec<f64>,
    sums: Vec<Sums>,
    completed: usize,
    failed: usize,
    first_failure: Option<(u64, Error)>,
    max_norm_drift: f64,
    drift_sum: i128,
}

impl EnsembleAccumulator {
    pub fn new(times: Vec<f64>) -> Self {
        let n = times.len();
        Self {
            times,
            sums: vec![Sums::default(); n],
            completed: 0,
            failed: 0,
            first_failure: None,
            max_norm_drift: 0.0,
            drift_sum: 0,
        }
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn failed(&self) -> usize {
        self.failed
    }

    fn record_failure(&mut self, index: u64, err: Error) {
        self.failed += 1;
        if self.first_failure.as_ref().is_none_or(|(i, _)| index < *i) {
            self.first_failure = Some((index, err));
        }
    }

    pub fn merge(mut self, other: EnsembleAccumulator) -> Result<Self> {
        if self.times != other.times {
            return Err(Error::GridMismatch("accumulators use different record times".into()));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.merge(b);
        }
        self.completed += other.completed;
        self.drift_sum += other.drift_sum;
        self.max_norm_drift = self.max_norm_drift.max(other.max_norm_drift);
        if let Some((i, e)) = other.first_failure {
            self.failed += other.failed - 1;
            self.record_failure(i, e);
        }
        Ok(self)
    }

    /// Checks the failure budget and turns sums into means and standard
    /// errors (ratio estimator with delta-method variance).
    pub fn finish(self, budget: usize) -> Result<EnsembleResult> {
        let total = self.completed + self.failed;
        if self.failed > budget {
            let (i, e) = self.first_failure.expect("failures recorded");
            return Err(Error::EnsembleFailure {
                failed: self.failed,
                total,
                budget,
                first: format!("trajectory {i}: {e}"),
            });
        }
        if self.completed == 0 {
            return Err(Error::invalid("no trajectory completed"));
        }
        let n = self.completed as f64;
        let mut mean = Vec::with_capacity(self.sums.len());
        let mut stderr = Vec::with_capacity(self.sums.len());
        for s in &self.sums {
            let (sw, sw2) = (unfix(s.w), unfix(s.w2));
            let wbar = sw / n;
            let mut m = [0.0; 3];
            let mut e = [0.0; 3];
            for i in 0..3 {
                let r = unfix(s.x[i]) / sw;
                m[i] = r;
                if self.completed > 1 {
                    let ss = unfix(s.x2[i]) - 2.0 * r * unfix(s.xw[i]) + r * r * sw2;
                    e[i] = (ss.max(0.0) / (n - 1.0) / n).sqrt() / wbar;
                }
            }
            mean.push(BlochVector::from_components(m));
            stderr.push(e);
        }
        Ok(EnsembleResult {
            times: self.times,
            mean,
            stderr,
            n_completed: self.completed,
            n_failed: self.failed,
            max_norm_drift: self.max_norm_drift,
            mean_norm_drift: unfix(self.drift_sum) / n,
            runtime_seconds: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean: Vec<BlochVector>,
    pub stderr: Vec<[f64; 3]>,
    pub n_completed: usize,
    pub n_failed: usize,
    /// Largest per-step norm drift before renormalization (nonlinear only).
    pub max_norm_drift: f64,
    pub mean_norm_drift: f64,
    pub runtime_seconds: f64,
}

impl EnsembleResult {
    pub fn series(&self) -> BlochSeries {
        BlochSeries {
            times: self.times.clone(),
            values: self.mean.clone(),
            stderr: self.stderr.clone(),
        }
    }
}

/// Bloch vector of `|psi><psi|` for a qubit ket (unnormalized allowed).
#[inline]
fn ket_bloch(psi: &[C64]) -> (f64, [f64; 3]) {
    let (a, b) = (psi[0], psi[1]);
    let ab = a * b.conj();
    let (pa, pb) = (a.norm_sqr(), b.norm_sqr());
    (pa + pb, [2.0 * ab.re, -2.0 * ab.im, pa - pb])
}

/// Runs trajectories `range` (stream indices) serially into one
/// accumulator. Trajectory failures are counted, other errors abort.
pub fn accumulate_range(sim: &Simulation, seed: u64, range: Range<u64>) -> Result<EnsembleAccumulator> {
    if sim.model().dim() != 2 {
        return Err(Error::UnsupportedDimension(sim.model().dim()));
    }
    let times = sim.record_times();
    let mut acc = EnsembleAccumulator::new(times.clone());
    let mut local = vec![(0.0, [0.0; 3]); times.len()];
    let linear = sim.config().variant == Variant::Linear;
    let mut integ = sim.integrator()?;
    for index in range {
        let out = integ.run(RngStreamSpec::new(seed, index), |k, _, psi| {
            let (n2, x) = ket_bloch(psi);
            local[k] = if linear { (n2, x) } else { (1.0, x.map(|v| v / n2)) };
        });
        match out {
            Ok(summary) => {
                let finite = local.iter().all(|(w, x)| w.is_finite() && x.iter().all(|v| v.is_finite()));
                if !finite {
                    acc.record_failure(
                        index,
                        Error::TrajectoryFailure {
                            t: f64::NAN,
                            reason: "non-finite estimator contribution".into(),
                        },
                    );
                    continue;
                }
                for (s, &(w, x)) in acc.sums.iter_mut().zip(&local) {
                    s.add(w, x);
                }
                acc.completed += 1;
                acc.max_norm_drift = acc.max_norm_drift.max(summary.max_norm_drift);
                acc.drift_sum += fix(summary.max_norm_drift);
            }
            Err(e @ Error::TrajectoryFailure { .. }) => acc.record_failure(index, e),
            Err(e) => return Err(e),
        }
    }
    Ok(acc)
}

/// Runs `cfg.ntraj` trajectories on streams `first_index..first_index + N`.
pub fn run_ensemble(sim: &Simulation, cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    if cfg.ntraj == 0 {
        return Err(Error::invalid("ntraj must be >= 1"));
    }
    let start = Instant::now();
    let first = cfg.first_index;
    let n = cfg.ntraj as u64;
    let work = || -> Result<EnsembleAccumulator> {
        let chunks = (rayon::current_num_threads() as u64 * 8).clamp(1, n);
        let size = n.div_ceil(chunks);
        (0..n.div_ceil(size))
            .into_par_iter()
            .map(|c| {
                let lo = first + c * size;
                let hi = (lo + size).min(first + n);
                accumulate_range(sim, cfg.seed, lo..hi)
            })
            .try_reduce_with(|a, b| a.merge(b))
            .expect("at least one chunk")
    };
    let acc = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut result = acc.finish(cfg.failure_budget())?;
    result.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Differences `a - b` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMetrics {
    pub times: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dz: Vec<f64>,
    /// Mean over the grid of `|dx| + |dy| + |dz|`.
    pub l1_time_avg: f64,
    /// Largest single-component deviation.
    pub sup_norm: f64,
    pub runtime_seconds: Option<f64>,
}

pub fn compare(a: &BlochSeries, b: &BlochSeries) -> Result<ComparisonMetrics> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} record times",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::GridMismatch("empty series".into()));
    }
    for (i, (&ta, &tb)) in a.times.iter().zip(&b.times).enumerate() {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "record {i}: t = {ta} vs t = {tb}"
            )));
        }
    }
    let (mut dx, mut dy, mut dz) = (Vec::new(), Vec::new(), Vec::new());
    let (mut l1, mut sup) = (0.0, 0.0f64);
    for (u, v) in a.values.iter().zip(&b.values) {
        let d = [u.x - v.x, u.y - v.y, u.z - v.z];
        dx.push(d[0]);
        dy.push(d[1]);
        dz.push(d[2]);
        l1 += d.iter().map(|c| c.abs()).sum::<f64>();
        sup = sup.max(d.iter().fold(0.0f64, |m, c| m.max(c.abs())));
    }
    Ok(ComparisonMetrics {
        times: a.times.clone(),
        dx,
        dy,
        dz,
        l1_time_avg: l1 / a.len() as f64,
        sup_norm: sup,
        runtime_seconds: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::MemoryKernel;
    use crate::quantum::{StateKet, SystemModel};
    use crate::sse::{StepperConfig, TrajectoryConfig};

    fn sim(variant: Variant) -> Simulation {
        let cfg = TrajectoryConfig {
            variant,
            stepper: StepperConfig {
                dt: 0.01,
                t_final: 1.0,
                record_stride: 10,
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
    fn single_trajectory_matches_ensemble_of_one() {
        let s = sim(Variant::Nonlinear);
        let traj = s.run_trajectory(RngStreamSpec::new(5, 0)).unwrap();
        let r = run_ensemble(&s, &EnsembleConfig::new(1, 5)).unwrap();
        for (b, m) in traj.bloch().unwrap().iter().zip(&r.mean) {
            for (p, q) in b.components().iter().zip(m.components()) {
                assert!((p - q).abs() < 1e-13);
            }
        }
        assert!(r.stderr.iter().all(|e| *e == [0.0; 3]));
    }

    #[test]
    fn merge_is_exact_and_order_free() {
        let s = sim(Variant::Linear);
        let a = accumulate_range(&s, 3, 0..7).unwrap();
        let b = accumulate_range(&s, 3, 7..20).unwrap();
        let whole = accumulate_range(&s, 3, 0..20).unwrap();
        assert_eq!(a.clone().merge(b.clone()).unwrap(), whole);
        assert_eq!(b.merge(a).unwrap(), whole);
        let par = run_ensemble(&s, &EnsembleConfig::new(20, 3).with_workers(3)).unwrap();
        let ser = whole.finish(0).unwrap();
        assert_eq!(par.mean, ser.mean);
        assert_eq!(par.stderr, ser.stderr);
    }

    #[test]
    fn stderr_is_sample_stddev_over_sqrt_n() {
        let s = sim(Variant::Nonlinear);
        let n = 12u64;
        let trajs: Vec<_> = (0..n)
            .map(|i| s.run_trajectory(RngStreamSpec::new(1, i)).unwrap().bloch().unwrap())
            .collect();
        let r = run_ensemble(&s, &EnsembleConfig::new(n as usize, 1)).unwrap();
        let k = r.times.len() - 1;
        let zs: Vec<f64> = trajs.iter().map(|b| b[k].z).collect();
        let mean = zs.iter().sum::<f64>() / n as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((r.mean[k].z - mean).abs() < 1e-12);
        assert!((r.stderr[k][2] - (var / n as f64).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn failure_budget() {
        let mut acc = EnsembleAccumulator::new(vec![0.0]);
        acc.sums[0].add(1.0, [0.0, 0.0, 1.0]);
        acc.completed = 1;
        acc.record_failure(9, Error::TrajectoryFailure { t: 1.0, reason: "x".into() });
        acc.record_failure(4, Error::TrajectoryFailure { t: 2.0, reason: "y".into() });
        match acc.clone().finish(1).unwrap_err() {
            Error::EnsembleFailure { failed, first, .. } => {
                assert_eq!(failed, 2);
                assert!(first.starts_with("trajectory 4"));
            }
            e => panic!("{e}"),
        }
        assert_eq!(acc.finish(2).unwrap().n_failed, 2);
    }

    #[test]
    fn compare_checks_grids() {
        let a = BlochSeries::reference(vec![0.0, 1.0], vec![BlochVector::new(0.0, 0.0, 1.0); 2]);
        let m = compare(&a, &a).unwrap();
        assert_eq!(m.l1_time_avg, 0.0);
        assert!(m.dx.iter().chain(&m.dy).chain(&m.dz).all(|&v| v == 0.0));
        let b = BlochSeries::reference(vec![0.0, 1.5], a.values.clone());
        assert!(matches!(compare(&a, &b), Err(Error::GridMismatch(_))));
        let c = BlochSeries::reference(vec![0.0], vec![BlochVector::new(1.0, 0.0, 0.0)]);
        assert!(matches!(compare(&a, &c), Err(Error::GridMismatch(_))));
    }
}
