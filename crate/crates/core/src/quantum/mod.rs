//! Small dense operator algebra, kets, density matrices and the system model.
//!
//! Qubit basis convention: index 0 is the excited state `|e>`, index 1 the
//! ground state `|g>`. The lowering operator is `sigma = |g><e|` and
//! `sigma_z = |e><e| - |g><g|`.

pub mod linalg;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest system dimension accepted by [`SystemModel`].
pub const MAX_SYSTEM_DIM: usize = 64;
/// Default cap on tensor-product dimensions.
pub const DEFAULT_DIM_CAP: usize = 4096;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

fn check_finite(values: &[C64]) -> Result<()> {
    if values.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("non-finite entry"))
    }
}

/// Dense `d x d` complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = self
                .row(i)
                .iter()
                .map(|c| format!("{:+.4}{:+.4}i", c.re, c.im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "operator dimension must be positive");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.data[i * dim + i] = ONE;
        }
        op
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("operator dimension must be positive"));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(dim, data)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let owned: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        let views: Vec<&[C64]> = owned.iter().map(|r| r.as_slice()).collect();
        Self::from_rows(&views)
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut op = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            op.data[i * values.len() + i] = v;
        }
        op
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn row(&self, row: usize) -> &[C64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        linalg::adjoint_into(&self.data, &mut out.data, self.dim);
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = Self::zeros(self.dim);
        linalg::mul_into(&self.data, &other.data, &mut out.data, self.dim);
        Ok(out)
    }

    pub fn apply(&self, ket: &StateKet) -> Result<StateKet> {
        if ket.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: ket.dim(),
            });
        }
        let mut out = vec![ZERO; self.dim];
        linalg::matvec_into(&self.data, ket.amplitudes(), &mut out);
        Ok(StateKet { amps: out })
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        linalg::max_abs_diff(&self.data, &other.data)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            })
        }
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in operator sum");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in operator difference");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs).expect("dimension mismatch in operator product")
    }
}

/// `AB - BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.check_dim(b)?;
    let mut out = Operator::zeros(a.dim);
    linalg::commutator_into(&a.data, &b.data, &mut out.data, a.dim);
    Ok(out)
}

/// Tensor product with the first factor's index major.
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    kron_with_cap(a, b, DEFAULT_DIM_CAP)
}

pub fn kron_with_cap(a: &Operator, b: &Operator, cap: usize) -> Result<Operator> {
    let (da, db) = (a.dim, b.dim);
    let dim = da
        .checked_mul(db)
        .filter(|&d| d <= cap)
        .ok_or(Error::Capacity {
            requested: da.saturating_mul(db),
            cap,
        })?;
    let mut out = Operator::zeros(dim);
    for i1 in 0..da {
        for j1 in 0..da {
            let aij = a.get(i1, j1);
            if aij == ZERO {
                continue;
            }
            for i2 in 0..db {
                for j2 in 0..db {
                    out.set(i1 * db + i2, j1 * db + j2, aij * b.get(i2, j2));
                }
            }
        }
    }
    Ok(out)
}

/// `<psi|A|psi>`, without normalization.
pub fn expectation(a: &Operator, psi: &StateKet) -> Result<C64> {
    let applied = a.apply(psi)?;
    Ok(linalg::inner(psi.amplitudes(), applied.amplitudes()))
}

/// `<psi|A|psi> / <psi|psi>`.
pub fn normalized_expectation(a: &Operator, psi: &StateKet) -> Result<C64> {
    let n = psi.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::DegenerateState);
    }
    Ok(expectation(a, psi)? / n)
}

/// Pure state amplitudes. Normalization is not enforced here; see
/// [`StateKet::normalized`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateKet {
    amps: Vec<C64>,
}

impl StateKet {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::invalid("ket must have at least one amplitude"));
        }
        check_finite(&amps)?;
        Ok(Self { amps })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self { amps }
    }

    /// Qubit excited state `|e>`.
    pub fn excited() -> Self {
        Self::basis(2, 0)
    }

    /// Qubit ground state `|g>`.
    pub fn ground() -> Self {
        Self::basis(2, 1)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::norm_sqr(&self.amps)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) {
            return Err(Error::DegenerateState);
        }
        Ok(Self {
            amps: self.amps.iter().map(|a| a / n).collect(),
        })
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= 1e-9
    }

    /// `|psi><psi|` as a plain operator (no trace normalization).
    pub fn outer(&self) -> Operator {
        let d = self.dim();
        let mut op = Operator::zeros(d);
        for i in 0..d {
            for j in 0..d {
                op.set(i, j, self.amps[i] * self.amps[j].conj());
            }
        }
        op
    }

    pub fn projector(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.normalized()?.outer())
    }
}

/// Hermitian, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerances(op, HERMITIAN_TOL, TRACE_TOL)
    }

    pub fn with_tolerances(op: Operator, herm_tol: f64, trace_tol: f64) -> Result<Self> {
        let defect = op.hermiticity_defect();
        if defect > herm_tol {
            return Err(Error::invalid(format!(
                "density matrix not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::invalid(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        Ok(Self { op })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: Operator::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    /// Smallest eigenvalue for qubits (closed form); `None` for larger
    /// dimensions, where [`Self::is_positive`] falls back to Cholesky.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        if self.dim() != 2 {
            return None;
        }
        let a = self.op.get(0, 0).re;
        let d = self.op.get(1, 1).re;
        let b = self.op.get(0, 1);
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
        Some(mean - radius)
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        match self.min_eigenvalue() {
            Some(ev) => ev >= -tol,
            None => cholesky_succeeds(&self.op, tol),
        }
    }
}

/// Attempts a Cholesky factorization of `A + shift * I`.
fn cholesky_succeeds(a: &Operator, shift: f64) -> bool {
    let d = a.dim;
    let mut l = vec![ZERO; d * d];
    for j in 0..d {
        let mut diag = a.get(j, j).re + shift;
        for k in 0..j {
            diag -= l[j * d + k].norm_sqr();
        }
        if !(diag > 0.0) {
            return false;
        }
        let ljj = diag.sqrt();
        l[j * d + j] = C64::new(ljj, 0.0);
        for i in j + 1..d {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k].conj();
            }
            l[i * d + j] = s / ljj;
        }
    }
    true
}

/// Real Bloch components `(<sigma_x>, <sigma_y>, <sigma_z>)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_components(c: [f64; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    pub fn length(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let p = pauli();
        let mut op = Operator::identity(2);
        for (s, c) in [(&p.x, self.x), (&p.y, self.y), (&p.z, self.z)] {
            op = &op + &s.scale_real(c);
        }
        DensityMatrix {
            op: op.scale_real(0.5),
        }
    }
}

/// Bloch components of a qubit state. The imaginary residue of each trace
/// must be below 1e-10.
pub fn bloch_from_density(rho: &DensityMatrix) -> Result<BlochVector> {
    bloch_from_operator(rho.as_operator())
}

/// Bloch components `Tr[A sigma_i]` of any qubit operator (used for
/// unnormalized trajectory contributions).
pub fn bloch_from_operator(op: &Operator) -> Result<BlochVector> {
    if op.dim() != 2 {
        return Err(Error::UnsupportedDimension(op.dim()));
    }
    let (c, r) = qubit_bloch_raw(op.as_slice());
    if r > 1e-10 * (1.0 + op.max_abs()) {
        return Err(Error::invalid(format!(
            "Bloch component has imaginary residue {r:.3e}"
        )));
    }
    Ok(BlochVector::from_components(c))
}

/// Bloch components of a row-major 2x2 slice plus the largest discarded
/// imaginary residue.
#[inline]
pub(crate) fn qubit_bloch_raw(m: &[C64]) -> ([f64; 3], f64) {
    let x = m[1] + m[2];
    let y = I * (m[1] - m[2]);
    let z = m[0] - m[3];
    let residue = x.im.abs().max(y.im.abs()).max(z.im.abs());
    ([x.re, y.re, z.re], residue)
}

pub fn density_from_ket(psi: &StateKet) -> Result<DensityMatrix> {
    psi.projector()
}

/// Pauli matrices in the `(e, g)` basis.
pub struct Pauli {
    pub x: Operator,
    pub y: Operator,
    pub z: Operator,
}

pub fn pauli() -> Pauli {
    Pauli {
        x: Operator::from_vec(2, vec![ZERO, ONE, ONE, ZERO]).unwrap(),
        y: Operator::from_vec(2, vec![ZERO, -I, I, ZERO]).unwrap(),
        z: Operator::from_vec(2, vec![ONE, ZERO, ZERO, -ONE]).unwrap(),
    }
}

/// Qubit lowering operator `|g><e|`.
pub fn sigma_minus() -> Operator {
    Operator::from_vec(2, vec![ZERO, ZERO, ONE, ZERO]).unwrap()
}

/// Qubit raising operator `|e><g|`.
pub fn sigma_plus() -> Operator {
    sigma_minus().adjoint()
}

/// Truncated bosonic annihilation operator on `n_max + 1` Fock levels.
pub fn annihilation(n_max: usize) -> Operator {
    let dim = n_max + 1;
    let mut op = Operator::zeros(dim);
    for n in 1..dim {
        op.set(n - 1, n, C64::new((n as f64).sqrt(), 0.0));
    }
    op
}

/// Coupling operator `L` and (time-independent) Hamiltonian, with hbar = 1.
#[derive(Debug, Clone)]
pub struct SystemModel {
    l: Operator,
    h: Operator,
    tla: Option<TlaParams>,
}

/// Detuning and Rabi frequency of a driven two-level atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlaParams {
    pub delta: f64,
    pub chi: f64,
}

impl SystemModel {
    pub fn new(l: Operator, h: Operator) -> Result<Self> {
        if l.dim() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: l.dim(),
                found: h.dim(),
            });
        }
        if l.dim() > MAX_SYSTEM_DIM {
            return Err(Error::Capacity {
                requested: l.dim(),
                cap: MAX_SYSTEM_DIM,
            });
        }
        if !h.is_hermitian(1e-12 * (1.0 + h.max_abs())) {
            return Err(Error::invalid("Hamiltonian must be Hermitian"));
        }
        Ok(Self { l, h, tla: None })
    }

    /// Driven two-level atom in the drive frame:
    /// `H = (delta/2) sigma_z + (chi/2) sigma_x`, `L = sigma`.
    pub fn driven_tla(delta: f64, chi: f64) -> Result<Self> {
        if !delta.is_finite() || !chi.is_finite() {
            return Err(Error::invalid("detuning and Rabi frequency must be finite"));
        }
        let p = pauli();
        let h = &p.z.scale_real(0.5 * delta) + &p.x.scale_real(0.5 * chi);
        let mut model = Self::new(sigma_minus(), h)?;
        model.tla = Some(TlaParams { delta, chi });
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn coupling(&self) -> &Operator {
        &self.l
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn tla_params(&self) -> Option<TlaParams> {
        self.tla
    }
}
