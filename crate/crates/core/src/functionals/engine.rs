use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::{Branch, HierarchyLayout, HierarchyState, Method, MultiIndex, ProviderSpec};
use crate::error::{Error, Result};
use crate::kernel::{KernelComponent, MemoryKernel, YdgsWeights};
use crate::quantum::linalg::{add_commutator, add_product, axpy, commutator_into, mul_into};
use crate::quantum::{Operator, SystemModel};
use crate::Unravelling;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Drift-operator provider and right-hand side of the functional
/// hierarchy, working on flat row-major buffers.
///
/// With `c` the noise coefficient (`z*` coherent, real `z` quadrature) and
/// `K` the measured operator (`L^dagger` coherent, `L + L^dagger`
/// quadrature), every evolved functional `X` obeys
/// `dX/dt = source - rate X + [G, X] - K (next level)` with
/// `G = -iH + c L - K F`.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    layout: HierarchyLayout,
    l: Vec<C64>,
    meas: Vec<C64>,
    minus_ih: Vec<C64>,
    ydgs_ops: [Vec<C64>; 2],
    weights: Option<Arc<YdgsWeights>>,
    comps: Vec<KernelComponent>,
    i0: Vec<C64>,
    g: Vec<C64>,
    c: Vec<C64>,
    t1: Vec<C64>,
    s1: Vec<C64>,
    u: Vec<C64>,
    v: Vec<C64>,
}

impl Hierarchy {
    pub fn new(
        model: &SystemModel,
        kernel: &MemoryKernel,
        unravelling: Unravelling,
        provider: ProviderSpec,
        weights: Option<Arc<YdgsWeights>>,
    ) -> Result<Self> {
        let d = model.dim();
        let j = kernel.len();
        let layout = HierarchyLayout::new(d, j, unravelling, provider)?;
        if unravelling == Unravelling::Quadrature {
            kernel.require_quadrature()?;
        }
        let l = model.coupling();
        let ldag = l.adjoint();
        let meas = match unravelling {
            Unravelling::Coherent => ldag,
            Unravelling::Quadrature => l + &ldag,
        };
        let minus_ih = model.hamiltonian().scale(C64::new(0.0, -1.0));
        let ydgs_ops = if provider.method == Method::Ydgs {
            let w = weights
                .as_ref()
                .ok_or_else(|| Error::invalid("post-Markovian provider needs weights"))?;
            if unravelling == Unravelling::Quadrature && w.h().is_none() {
                return Err(Error::KernelNotReal);
            }
            // i[H, L] and [K L, L]
            let k1 = crate::quantum::commutator(model.hamiltonian(), l)?.scale(C64::new(0.0, 1.0));
            let kl = &meas * l;
            let k2 = crate::quantum::commutator(&kl, l)?;
            [k1.as_slice().to_vec(), k2.as_slice().to_vec()]
        } else {
            [Vec::new(), Vec::new()]
        };
        let dd = d * d;
        let z = vec![ZERO; dd];
        let zj = vec![ZERO; if layout.n_ops() > j { j * dd } else { 0 }];
        Ok(Self {
            layout,
            l: l.as_slice().to_vec(),
            meas: meas.as_slice().to_vec(),
            minus_ih: minus_ih.as_slice().to_vec(),
            ydgs_ops,
            weights,
            comps: kernel.components().to_vec(),
            i0: vec![ZERO; j],
            g: z.clone(),
            c: z.clone(),
            t1: z,
            s1: zj.clone(),
            u: zj.clone(),
            v: zj,
        })
    }

    pub fn layout(&self) -> &HierarchyLayout {
        &self.layout
    }

    fn refresh_i0(&mut self, t: f64) {
        for (o, c) in self.i0.iter_mut().zip(&self.comps) {
            *o = c.cumulative(t);
        }
    }

    /// Writes the drift operator `F^(0)` (coherent) or `Q^(0)` (quadrature)
    /// for evolved functionals `ops` at time `t` into `f`.
    pub fn drift_into(&mut self, t: f64, ops: &[C64], f: &mut [C64]) -> Result<()> {
        let dd = self.layout.dim * self.layout.dim;
        let quad = self.layout.unravelling == Unravelling::Quadrature;
        if self.layout.provider.method == Method::Ydgs {
            let w = self.weights.as_ref().expect("checked at construction");
            let coef: [C64; 3] = if quad {
                let [a, b, c] = w.quadrature_at(t)?;
                [a.into(), b.into(), c.into()]
            } else {
                w.coherent_at(t)?
            };
            for i in 0..dd {
                f[i] = coef[0] * self.l[i] - coef[1] * self.ydgs_ops[0][i] - coef[2] * self.ydgs_ops[1][i];
            }
            return Ok(());
        }
        if self.layout.provider.order == 0 {
            self.refresh_i0(t);
            let total: C64 = if quad {
                self.i0.iter().map(|x| x.re).sum::<f64>().into()
            } else {
                self.i0.iter().sum()
            };
            for (o, &li) in f.iter_mut().zip(&self.l) {
                *o = total * li;
            }
            return Ok(());
        }
        f.fill(ZERO);
        for j in 0..self.layout.components {
            axpy(ONE, &ops[j * dd..(j + 1) * dd], f);
        }
        Ok(())
    }

    /// Time derivatives of the evolved functionals. `f` must be the drift
    /// operator from [`Self::drift_into`] for the same `ops` and `t`.
    pub fn rhs(&mut self, t: f64, noise_coeff: C64, ops: &[C64], f: &[C64], dops: &mut [C64]) {
        let n_ops = self.layout.n_ops();
        if n_ops == 0 {
            return;
        }
        let d = self.layout.dim;
        let dd = d * d;
        let jn = self.layout.components;
        self.refresh_i0(t);

        // G = -iH + c L - K F
        self.g.copy_from_slice(&self.minus_ih);
        axpy(noise_coeff, &self.l, &mut self.g);
        add_product(&self.meas, f, -ONE, &mut self.g, d);

        match (self.layout.unravelling, self.layout.provider.order) {
            (Unravelling::Coherent, 1) => {
                // closure: sum_k F1_jk = I0_j [L, F]
                commutator_into(&self.l, f, &mut self.c, d);
                mul_into(&self.meas, &self.c, &mut self.t1, d);
                for j in 0..jn {
                    let comp = self.comps[j];
                    let x = &ops[j * dd..(j + 1) * dd];
                    let out = &mut dops[j * dd..(j + 1) * dd];
                    out.fill(ZERO);
                    axpy(comp.amplitude.into(), &self.l, out);
                    axpy(-comp.lambda(), x, out);
                    add_commutator(&self.g, x, ONE, out, d);
                    axpy(-self.i0[j], &self.t1, out);
                }
            }
            (Unravelling::Coherent, _) => {
                let f1 = &ops[jn * dd..];
                for j in 0..jn {
                    let s = &mut self.s1[j * dd..(j + 1) * dd];
                    s.fill(ZERO);
                    for k in 0..jn {
                        axpy(ONE, &f1[(j * jn + k) * dd..(j * jn + k + 1) * dd], s);
                    }
                }
                for j in 0..jn {
                    let s = &self.s1[j * dd..(j + 1) * dd];
                    // v_j = K S1_j, u_j = K [L, S1_j]
                    mul_into(&self.meas, s, &mut self.v[j * dd..(j + 1) * dd], d);
                    commutator_into(&self.l, s, &mut self.c, d);
                    mul_into(&self.meas, &self.c, &mut self.u[j * dd..(j + 1) * dd], d);
                }
                for j in 0..jn {
                    let comp = self.comps[j];
                    let x = &ops[j * dd..(j + 1) * dd];
                    let out = &mut dops[j * dd..(j + 1) * dd];
                    out.fill(ZERO);
                    axpy(comp.amplitude.into(), &self.l, out);
                    axpy(-comp.lambda(), x, out);
                    add_commutator(&self.g, x, ONE, out, d);
                    axpy(-ONE, &self.v[j * dd..(j + 1) * dd], out);
                }
                for j in 0..jn {
                    let cj = self.comps[j];
                    for k in 0..jn {
                        let ck = self.comps[k];
                        let slot = jn + j * jn + k;
                        let x = &ops[slot * dd..(slot + 1) * dd];
                        let f0k = &ops[k * dd..(k + 1) * dd];
                        let out = &mut dops[slot * dd..(slot + 1) * dd];
                        out.fill(ZERO);
                        add_commutator(&self.l, f0k, cj.amplitude.into(), out, d);
                        axpy(-(cj.lambda() + ck.lambda()), x, out);
                        add_commutator(&self.g, x, ONE, out, d);
                        add_commutator(&self.v[j * dd..(j + 1) * dd], f0k, -ONE, out, d);
                        // closure: sum_l F2_jkl = I0_j [L, S1_k]
                        axpy(-self.i0[j], &self.u[k * dd..(k + 1) * dd], out);
                    }
                }
            }
            (Unravelling::Quadrature, _) => {
                // closures: Q1^(a.cos)_jk summed over k = B^a_j [L, Q]
                commutator_into(&self.l, f, &mut self.c, d);
                mul_into(&self.meas, &self.c, &mut self.t1, d);
                for j in 0..jn {
                    let comp = self.comps[j];
                    let (bc, bs) = (self.i0[j].re, -self.i0[j].im);
                    let half_kappa = 0.5 * comp.kappa;
                    let (cos_part, sin_part) = dops.split_at_mut(jn * dd);
                    let qc = &ops[j * dd..(j + 1) * dd];
                    let qs = &ops[(jn + j) * dd..(jn + j + 1) * dd];

                    let out = &mut cos_part[j * dd..(j + 1) * dd];
                    out.fill(ZERO);
                    axpy(comp.amplitude.into(), &self.l, out);
                    axpy((-half_kappa).into(), qc, out);
                    axpy((-comp.omega).into(), qs, out);
                    add_commutator(&self.g, qc, ONE, out, d);
                    axpy((-bc).into(), &self.t1, out);

                    let out = &mut sin_part[j * dd..(j + 1) * dd];
                    out.fill(ZERO);
                    axpy((-half_kappa).into(), qs, out);
                    axpy(comp.omega.into(), qc, out);
                    add_commutator(&self.g, qs, ONE, out, d);
                    axpy((-bs).into(), &self.t1, out);
                }
            }
        }
    }

    /// All four order-1 quadrature closures `Q1^(a.b)_jk = B^a_j [L, Q^b_k]`,
    /// indexed `[j * J + k][a][b]` with 0 = cos, 1 = sin. Only the
    /// `(cos.cos)` and `(sin.cos)` entries feed the level-0 equations.
    pub fn quadrature_closures(&self, state: &HierarchyState) -> Result<Vec<[[Operator; 2]; 2]>> {
        if self.layout.unravelling != Unravelling::Quadrature || self.layout.n_ops() == 0 {
            return Err(Error::invalid("closures need an evolved quadrature hierarchy"));
        }
        let jn = self.layout.components;
        let l = Operator::from_vec(self.layout.dim, self.l.clone())?;
        let mut out = Vec::with_capacity(jn * jn);
        for j in 0..jn {
            let i0 = self.comps[j].cumulative(state.t);
            let b = [i0.re, -i0.im];
            for k in 0..jn {
                let idx = MultiIndex(vec![k]);
                let qk = [
                    state.operator(&idx, Some(Branch::Cos))?,
                    state.operator(&idx, Some(Branch::Sin))?,
                ];
                let entry = |a: usize, bb: usize| -> Result<Operator> {
                    Ok(crate::quantum::commutator(&l, &qk[bb])?.scale_real(b[a]))
                };
                out.push([[entry(0, 0)?, entry(0, 1)?], [entry(1, 0)?, entry(1, 1)?]]);
            }
        }
        Ok(out)
    }
}

fn rhs_state(
    state: &HierarchyState,
    model: &SystemModel,
    kernel: &MemoryKernel,
    unravelling: Unravelling,
    noise_coeff: C64,
) -> Result<HierarchyState> {
    let layout = *state.layout();
    if layout.unravelling != unravelling {
        return Err(Error::invalid("hierarchy state has the wrong unravelling"));
    }
    if layout.dim != model.dim() || layout.components != kernel.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.dim * 1000 + layout.components,
            found: model.dim() * 1000 + kernel.len(),
        });
    }
    let mut h = Hierarchy::new(model, kernel, unravelling, layout.provider, None)?;
    let dd = layout.dim * layout.dim;
    let mut f = vec![ZERO; dd];
    h.drift_into(state.t, state.as_slice(), &mut f)?;
    let mut d = vec![ZERO; layout.op_len()];
    h.rhs(state.t, noise_coeff, state.as_slice(), &f, &mut d);
    HierarchyState::from_flat(layout, state.t, d)
}

/// Derivatives of every evolved coherent functional at `state.t`, with
/// `z_star` the conjugate noise entering the drift.
pub fn hierarchy_rhs_coherent(
    state: &HierarchyState,
    model: &SystemModel,
    kernel: &MemoryKernel,
    z_star: C64,
) -> Result<HierarchyState> {
    rhs_state(state, model, kernel, Unravelling::Coherent, z_star)
}

/// Derivatives of the quadrature cos/sin functionals for real noise `z`.
pub fn hierarchy_rhs_quadrature(
    state: &HierarchyState,
    model: &SystemModel,
    kernel: &MemoryKernel,
    z: f64,
) -> Result<HierarchyState> {
    rhs_state(state, model, kernel, Unravelling::Quadrature, z.into())
}

/// Post-Markovian drift operator at a grid time `t`.
pub fn ydgs_provider(
    model: &SystemModel,
    kernel: &MemoryKernel,
    weights: Arc<YdgsWeights>,
    unravelling: Unravelling,
    t: f64,
) -> Result<Operator> {
    let mut h = Hierarchy::new(model, kernel, unravelling, ProviderSpec::ydgs(), Some(weights))?;
    let d = model.dim();
    let mut f = vec![ZERO; d * d];
    h.drift_into(t, &[], &mut f)?;
    Operator::from_vec(d, f)
}
