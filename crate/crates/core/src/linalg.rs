//! Small dense complex linear algebra for `M x M` Hermitian positive definite
//! matrices of the form `I + sum_k q_k h_k^H h_k`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::math;

pub type C64 = Complex<f64>;

/// `||h||^2`
pub fn norm_sqr(h: &[C64]) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum()
}

/// `x^H y`
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Row vector times column vector, `h b`, without conjugation.
pub fn row_times_col(h: &[C64], b: &[C64]) -> C64 {
    h.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Full-storage Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian {
    n: usize,
    a: Vec<C64>,
}

impl Hermitian {
    pub fn identity(n: usize) -> Self {
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = C64::new(1.0, 0.0);
        }
        Self { n, a }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.n + j]
    }

    pub fn reset_identity(&mut self) {
        let n = self.n;
        for (idx, v) in self.a.iter_mut().enumerate() {
            *v = if idx / n == idx % n {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
        }
    }

    /// `A += q h^H h` for a row vector `h`.
    pub fn add_outer(&mut self, h: &[C64], q: f64) {
        debug_assert_eq!(h.len(), self.n);
        if q == 0.0 {
            return;
        }
        let n = self.n;
        for i in 0..n {
            let ci = h[i].conj() * q;
            for j in 0..n {
                self.a[i * n + j] += ci * h[j];
            }
        }
    }
}

/// Lower Cholesky factor `A = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<C64>,
    scratch: Vec<C64>,
}

impl Cholesky {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            l: vec![C64::new(0.0, 0.0); n * n],
            scratch: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn factor(a: &Hermitian) -> Option<Self> {
        let mut c = Self::new(a.n);
        c.refactor(a).then_some(c)
    }

    /// Factor `a` in place of the previous factor. Returns `false` if `a` is
    /// not numerically positive definite.
    pub fn refactor(&mut self, a: &Hermitian) -> bool {
        let n = self.n;
        debug_assert_eq!(a.n, n);
        let l = &mut self.l;
        for j in 0..n {
            let mut d = a.a[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let djj = math::sqrt(d);
            l[j * n + j] = C64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = a.a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
            for i in 0..j {
                l[i * n + j] = C64::new(0.0, 0.0);
            }
        }
        true
    }

    /// Natural log of the determinant.
    pub fn ln_det(&self) -> f64 {
        let n = self.n;
        (0..n).map(|i| 2.0 * math::ln(self.l[i * n + i].re)).sum()
    }

    /// `h A^{-1} h^H` for a row vector `h`.
    pub fn quad_inv(&mut self, h: &[C64]) -> f64 {
        // A^{-1} = L^{-H} L^{-1}, so h A^{-1} h^H = ||L^{-1} h^H||^2.
        let n = self.n;
        let y = &mut self.scratch;
        let mut acc = 0.0;
        for i in 0..n {
            let mut s = h[i].conj();
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
            acc += y[i].norm_sqr();
        }
        acc
    }
}

/// Orthonormal basis of the span of `vectors` by modified Gram-Schmidt.
/// Directions whose residual norm falls below `rel_tol` times the largest
/// input norm are dropped as numerically dependent.
pub fn orthonormal_basis(vectors: &[Vec<C64>], rel_tol: f64) -> Vec<Vec<C64>> {
    let scale = vectors
        .iter()
        .map(|v| math::sqrt(norm_sqr(v)))
        .fold(0.0, f64::max);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for v in vectors {
        let mut w = v.clone();
        // Two passes keep the basis orthogonal to working precision.
        for _ in 0..2 {
            for u in &basis {
                let c = inner(u, &w);
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
        }
        let nw = math::sqrt(norm_sqr(&w));
        if nw > rel_tol * scale {
            for wi in w.iter_mut() {
                *wi /= nw;
            }
            basis.push(w);
        }
    }
    basis
}

/// Remove from `v` its components along the orthonormal `basis`.
pub fn project_out(v: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for u in basis {
            let c = inner(u, v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= c * ui;
            }
        }
    }
}
