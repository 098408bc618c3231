//! Allocation-free kernels on row-major `d x d` complex slices.
//!
//! The trajectory and hierarchy hot loops keep operators packed in flat
//! buffers; these helpers work directly on those views.

use num_complex::Complex64 as C64;

/// `out = a * b`
#[inline]
pub fn mul_into(a: &[C64], b: &[C64], out: &mut [C64], d: usize) {
    debug_assert!(a.len() == d * d && b.len() == d * d && out.len() == d * d);
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        let o = &mut out[i * d..(i + 1) * d];
        o.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (k, &aik) in row.iter().enumerate() {
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let brow = &b[k * d..(k + 1) * d];
            for (oj, &bkj) in o.iter_mut().zip(brow) {
                *oj += aik * bkj;
            }
        }
    }
}

/// `out += scale * (a * b - b * a)`
#[inline]
pub fn add_commutator(a: &[C64], b: &[C64], scale: C64, out: &mut [C64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..d {
                acc += a[i * d + k] * b[k * d + j] - b[i * d + k] * a[k * d + j];
            }
            out[i * d + j] += scale * acc;
        }
    }
}

/// `out = a * b - b * a`
#[inline]
pub fn commutator_into(a: &[C64], b: &[C64], out: &mut [C64], d: usize) {
    out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
    add_commutator(a, b, C64::new(1.0, 0.0), out, d);
}

/// `out += scale * a * b`
#[inline]
pub fn add_product(a: &[C64], b: &[C64], scale: C64, out: &mut [C64], d: usize) {
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let s = scale * aik;
            for j in 0..d {
                out[i * d + j] += s * b[k * d + j];
            }
        }
    }
}

/// `out = m * v`
#[inline]
pub fn matvec_into(m: &[C64], v: &[C64], out: &mut [C64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * d..(i + 1) * d];
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// `out += scale * m * v`
#[inline]
pub fn add_matvec(m: &[C64], v: &[C64], scale: C64, out: &mut [C64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * d..(i + 1) * d];
        let acc: C64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        *o += scale * acc;
    }
}

/// `<u|v>` with the first argument conjugated.
#[inline]
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

#[inline]
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// `y += scale * x`
#[inline]
pub fn axpy(scale: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += scale * xi;
    }
}

#[inline]
pub fn adjoint_into(a: &[C64], out: &mut [C64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j].conj();
        }
    }
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
