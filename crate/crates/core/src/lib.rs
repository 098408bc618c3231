//! Non-Markovian stochastic Schrodinger equations for small open quantum
//! systems with exponential-sum bath memory.
//!
//! The drift operator of the non-Markovian SSE is approximated by a
//! truncated hierarchy of operator functionals (coherent and quadrature
//! unravellings), or by the first-order post-Markovian expansion. Ensemble
//! averages are checked against an exact pseudomode (enlarged system)
//! Lindblad solver.
//!
//! ```no_run
//! use nmsse_core::{
//!     run_ensemble, EnsembleConfig, MemoryKernel, Simulation, StateKet, SystemModel,
//!     TrajectoryConfig,
//! };
//!
//! let model = SystemModel::driven_tla(3.0, 5.0).unwrap();
//! let kernel = MemoryKernel::tla(1.0, 1.0).unwrap();
//! let sim = Simulation::new(model, kernel, TrajectoryConfig::default(), StateKet::excited()).unwrap();
//! let result = run_ensemble(&sim, &EnsembleConfig::new(1000, 7)).unwrap();
//! println!("{:?}", result.mean.last());
//! ```

pub mod enlarged;
pub mod ensemble;
pub mod error;
pub mod functionals;
pub mod kernel;
pub mod noise;
pub mod ode;
pub mod quantum;
pub mod sse;

pub use num_complex::Complex64;

pub use enlarged::{
    evolve_enlarged, kernel_identity_check, lindblad_reference_markov, lindblad_rhs,
    EnlargedConfig, EnlargedSpace, ReducedSeries,
};
pub use ensemble::{
    accumulate_range, compare, run_ensemble, BlochSeries, ComparisonMetrics,
    EnsembleAccumulator, EnsembleConfig, EnsembleResult,
};
pub use error::{Error, Result};
pub use functionals::{equation_count, Hierarchy, HierarchyLayout, HierarchyState, MultiIndex};
pub use kernel::{ydgs_weights, KernelComponent, MemoryKernel, YdgsWeights};
pub use noise::{init_noise, noise_statistics, GirsanovAccumulator, NoiseReport, NoiseState, RngStreamSpec};
pub use ode::Scheme;
pub use quantum::{
    bloch_from_density, commutator, expectation, kron, normalized_expectation, BlochVector,
    DensityMatrix, Operator, StateKet, SystemModel,
};
pub use sse::{Method, ProviderSpec, Simulation, StepperConfig, Trajectory, TrajectoryConfig, Variant};

/// Which bath measurement the stochastic pure states are conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unravelling {
    /// Complex noise, coherent-state bath projection.
    Coherent,
    /// Real noise, x-quadrature bath projection.
    Quadrature,
}

impl Unravelling {
    pub fn name(self) -> &'static str {
        match self {
            Unravelling::Coherent => "coherent",
            Unravelling::Quadrature => "quadrature",
        }
    }

    /// Highest perturbative order implemented for this unravelling.
    pub fn max_order(self) -> usize {
        match self {
            Unravelling::Coherent => 2,
            Unravelling::Quadrature => 1,
        }
    }
}

impl std::str::FromStr for Unravelling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent" => Ok(Unravelling::Coherent),
            "quadrature" => Ok(Unravelling::Quadrature),
            other => Err(Error::InvalidArgument(format!(
                "unknown unravelling `{other}` (expected coherent or quadrature)"
            ))),
        }
    }
}
