//! Scalar math on top of `libm`.

pub use core::f64::consts::LN_2;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn exp2(x: f64) -> f64 {
    libm::exp2(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `{x}^+`
#[inline]
pub fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Solves the dense system `a x = b` in place by Gaussian elimination with
/// partial pivoting. `a` is row-major `n x n`; `b` receives `x`. Returns
/// `false` if a pivot falls below `rel_tol` times the largest entry.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize, rel_tol: f64) -> bool {
    debug_assert!(a.len() == n * n && b.len() == n);
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(scale > 0.0) {
        return false;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .expect("nonempty range");
        if !(a[pivot * n + col].abs() > rel_tol * scale) {
            return false;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            b.swap(pivot, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r * n + c] * b[c]).sum();
        b[r] = (b[r] - tail) / a[r * n + r];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve_needs_pivoting() {
        let mut a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = [1.0, -2.0, 0.5];
        let mut b = [0.0; 3];
        for r in 0..3 {
            b[r] = (0..3).map(|c| a[r * 3 + c] * x[c]).sum();
        }
        assert!(solve_dense(&mut a, &mut b, 3, 1e-14));
        for i in 0..3 {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_solve_rejects_singular() {
        let mut a = [1.0, 2.0, 2.0, 4.0];
        let mut b = [1.0, 2.0];
        assert!(!solve_dense(&mut a, &mut b, 2, 1e-12));
    }
}
