//! Operator functionals that stand in for the noise functional derivative
//! in the SSE drift.
//!
//! The perturbative hierarchy evolves `F^(m)` operators (coherent) or
//! cosine/sine pairs `Q^(0)` (quadrature) up to a truncation order, where a
//! closure expresses the next level through cumulative kernel integrals. The
//! post-Markovian alternative is a deterministic weighted sum of three
//! operators.

mod engine;

pub use engine::{hierarchy_rhs_coherent, hierarchy_rhs_quadrature, ydgs_provider, Hierarchy};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quantum::Operator;
use crate::Unravelling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Method {
    #[default]
    Perturbative,
    /// First-order post-Markovian expansion with the `g`/`h` weights.
    Ydgs,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Perturbative => "perturbative",
            Method::Ydgs => "ydgs",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perturbative" => Ok(Method::Perturbative),
            "ydgs" => Ok(Method::Ydgs),
            other => Err(Error::invalid(format!(
                "unknown method `{other}` (expected perturbative or ydgs)"
            ))),
        }
    }
}

/// Which drift operator provider a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProviderSpec {
    pub method: Method,
    /// Truncation order; ignored by [`Method::Ydgs`].
    pub order: usize,
}

impl ProviderSpec {
    pub fn perturbative(order: usize) -> Self {
        Self {
            method: Method::Perturbative,
            order,
        }
    }

    pub fn ydgs() -> Self {
        Self {
            method: Method::Ydgs,
            order: 1,
        }
    }
}

impl Default for ProviderSpec {
    fn default() -> Self {
        Self::perturbative(1)
    }
}

/// Component indices `(j, k, ...)`, zero-based; length `m + 1` addresses an
/// order-`m` functional.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn level(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
}

/// Cosine or sine branch of a quadrature functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Cos,
    Sin,
}

/// Number of complex ODEs for a coherent order-`n` run with `J` kernel
/// components on a `d`-level system: evolved functionals, the ket and one
/// Girsanov accumulator per component.
pub fn equation_count(d: usize, j: usize, n: usize) -> usize {
    let ops = if j == 1 {
        n
    } else {
        j * (j.pow(n as u32) - 1) / (j - 1)
    };
    d * d * ops + d + j
}

/// Shape of the evolved functional family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HierarchyLayout {
    pub dim: usize,
    pub components: usize,
    pub unravelling: Unravelling,
    pub provider: ProviderSpec,
}

impl HierarchyLayout {
    pub fn new(
        dim: usize,
        components: usize,
        unravelling: Unravelling,
        provider: ProviderSpec,
    ) -> Result<Self> {
        if provider.method == Method::Perturbative && provider.order > unravelling.max_order() {
            return Err(Error::UnsupportedOrder {
                order: provider.order,
                unravelling: unravelling.name(),
                max: unravelling.max_order(),
            });
        }
        if dim == 0 || components == 0 {
            return Err(Error::invalid("layout needs a positive dimension and component count"));
        }
        Ok(Self {
            dim,
            components,
            unravelling,
            provider,
        })
    }

    /// Number of evolved `d x d` operators.
    pub fn n_ops(&self) -> usize {
        let j = self.components;
        match (self.provider.method, self.unravelling, self.provider.order) {
            (Method::Ydgs, _, _) => 0,
            (_, _, 0) => 0,
            (_, Unravelling::Coherent, 1) => j,
            (_, Unravelling::Coherent, _) => j + j * j,
            (_, Unravelling::Quadrature, _) => 2 * j,
        }
    }

    pub fn op_len(&self) -> usize {
        self.n_ops() * self.dim * self.dim
    }

    /// Length of the flat trajectory state: ket, functionals and, for the
    /// normalized SSE, one Girsanov accumulator per component.
    pub fn ode_len(&self, nonlinear: bool) -> usize {
        self.dim + self.op_len() + if nonlinear { self.components } else { 0 }
    }

    /// Position of a functional among the evolved operators.
    pub fn slot(&self, index: &MultiIndex, branch: Option<Branch>) -> Result<usize> {
        let j = self.components;
        let bad = || Error::invalid(format!("no evolved functional at {index:?} / {branch:?}"));
        if index.0.iter().any(|&x| x >= j) {
            return Err(bad());
        }
        let slot = match (self.unravelling, index.0.as_slice(), branch) {
            (Unravelling::Coherent, [a], None) => *a,
            (Unravelling::Coherent, [a, b], None) => j + a * j + b,
            (Unravelling::Quadrature, [a], Some(Branch::Cos)) => *a,
            (Unravelling::Quadrature, [a], Some(Branch::Sin)) => j + a,
            _ => return Err(bad()),
        };
        if slot < self.n_ops() {
            Ok(slot)
        } else {
            Err(bad())
        }
    }
}

/// Evolved functionals at one time, addressed by [`MultiIndex`].
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    layout: HierarchyLayout,
    pub t: f64,
    data: Vec<C64>,
}

impl HierarchyState {
    /// All functionals vanish at `t = 0`.
    pub fn zeros(layout: HierarchyLayout, t: f64) -> Self {
        Self {
            layout,
            t,
            data: vec![C64::new(0.0, 0.0); layout.op_len()],
        }
    }

    pub fn from_flat(layout: HierarchyLayout, t: f64, data: Vec<C64>) -> Result<Self> {
        if data.len() != layout.op_len() {
            return Err(Error::DimensionMismatch {
                expected: layout.op_len(),
                found: data.len(),
            });
        }
        Ok(Self { layout, t, data })
    }

    pub fn layout(&self) -> &HierarchyLayout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn operator(&self, index: &MultiIndex, branch: Option<Branch>) -> Result<Operator> {
        let s = self.layout.slot(index, branch)?;
        let dd = self.layout.dim * self.layout.dim;
        Operator::from_vec(self.layout.dim, self.data[s * dd..(s + 1) * dd].to_vec())
    }

    pub fn set_operator(&mut self, index: &MultiIndex, branch: Option<Branch>, op: &Operator) -> Result<()> {
        if op.dim() != self.layout.dim {
            return Err(Error::DimensionMismatch {
                expected: self.layout.dim,
                found: op.dim(),
            });
        }
        let s = self.layout.slot(index, branch)?;
        let dd = self.layout.dim * self.layout.dim;
        self.data[s * dd..(s + 1) * dd].copy_from_slice(op.as_slice());
        Ok(())
    }
}
