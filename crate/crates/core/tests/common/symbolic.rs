//! Matrix-level hierarchy right-hand sides against the component form of
//! the two-level equations.

use nmsse_core::functionals::{hierarchy_rhs_coherent, hierarchy_rhs_quadrature, Branch};
use nmsse_core::{
    Complex64 as C64, HierarchyLayout, HierarchyState, MemoryKernel, MultiIndex, ProviderSpec,
    RngStreamSpec, SystemModel, Unravelling,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Tla, TlaCase};

fn c(r: &mut ChaCha8Rng, scale: f64) -> C64 {
    C64::new(r.random_range(-scale..scale), r.random_range(-scale..scale))
}

fn tla(r: &mut ChaCha8Rng) -> Tla {
    Tla {
        s: c(r, 1.0),
        p: c(r, 1.0),
        z: c(r, 1.0),
        i: c(r, 1.0),
    }
}

fn case(r: &mut ChaCha8Rng) -> TlaCase {
    TlaCase {
        gamma: r.random_range(0.5..2.0),
        kappa: r.random_range(0.5..3.0),
        delta: r.random_range(-5.0..5.0),
        chi: r.random_range(-5.0..5.0),
        t: r.random_range(0.0..5.0),
    }
}

fn setup(cs: &TlaCase, u: Unravelling, order: usize) -> (SystemModel, MemoryKernel, HierarchyState) {
    let model = SystemModel::driven_tla(cs.delta, cs.chi).unwrap();
    let kernel = MemoryKernel::tla(cs.gamma, cs.kappa).unwrap();
    let layout = HierarchyLayout::new(2, 1, u, ProviderSpec::perturbative(order)).unwrap();
    (model, kernel, HierarchyState::zeros(layout, cs.t))
}

fn at(s: &HierarchyState, idx: &[usize], b: Option<Branch>) -> Tla {
    Tla::decompose(&s.operator(&MultiIndex(idx.to_vec()), b).unwrap())
}

/// Largest component deviation over `cases` random states and noises for
/// the coherent order-1 system, the coherent order-2 system (zero- and
/// first-order functionals) and the quadrature order-1 system.
pub fn max_deviation(cases: usize, seed: u64) -> [f64; 4] {
    let mut r = RngStreamSpec::new(seed, 0).rng();
    let mut worst = [0.0f64; 4];
    for _ in 0..cases {
        let cs = case(&mut r);
        let zs = c(&mut r, 2.0);

        let (model, kernel, mut st) = setup(&cs, Unravelling::Coherent, 1);
        let f0 = tla(&mut r);
        st.set_operator(&MultiIndex(vec![0]), None, &f0.compose()).unwrap();
        let d = hierarchy_rhs_coherent(&st, &model, &kernel, zs).unwrap();
        let want = cs.coherent_f0(&f0, &cs.closure(&f0), zs);
        worst[0] = worst[0].max(at(&d, &[0], None).max_diff(&want));

        let (model, kernel, mut st) = setup(&cs, Unravelling::Coherent, 2);
        let (f0, f1) = (tla(&mut r), tla(&mut r));
        st.set_operator(&MultiIndex(vec![0]), None, &f0.compose()).unwrap();
        st.set_operator(&MultiIndex(vec![0, 0]), None, &f1.compose()).unwrap();
        let d = hierarchy_rhs_coherent(&st, &model, &kernel, zs).unwrap();
        worst[1] = worst[1].max(at(&d, &[0], None).max_diff(&cs.coherent_f0(&f0, &f1, zs)));
        let want = cs.coherent_f1(&f0, &f1, &cs.closure(&f1), zs);
        worst[2] = worst[2].max(at(&d, &[0, 0], None).max_diff(&want));

        let (model, kernel, mut st) = setup(&cs, Unravelling::Quadrature, 1);
        let q = tla(&mut r);
        let z = zs.re;
        st.set_operator(&MultiIndex(vec![0]), Some(Branch::Cos), &q.compose()).unwrap();
        let d = hierarchy_rhs_quadrature(&st, &model, &kernel, z).unwrap();
        let want = cs.quadrature_q0(&q, &cs.closure(&q), z);
        let sin = at(&d, &[0], Some(Branch::Sin)).max_diff(&Tla::zero());
        worst[3] = worst[3]
            .max(at(&d, &[0], Some(Branch::Cos)).max_diff(&want))
            .max(sin);
    }
    worst
}
