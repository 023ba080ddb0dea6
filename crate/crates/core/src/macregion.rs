//! The dual SIMO-MAC capacity region at one fading state.
//!
//! For powers `q`, the region is the polymatroid
//! `{ R >= 0 : sum_{k in J} R_k <= log2 |I + sum_{k in J} q_k h_k^H h_k|, for all J }`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fading::ChannelMatrix;
use crate::linalg::{Cholesky, Hermitian};
use crate::math::{self, LN_2};

/// Largest user count for which [`in_region`] enumerates every subset.
pub const MAX_ENUMERATION_USERS: usize = 20;

/// Successive decoding order. `order[0]` is decoded last and sees no
/// interference; `order[K-1]` is decoded first and sees everyone else.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecodingOrder(Vec<usize>);

impl DecodingOrder {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &k in &perm {
            if k >= perm.len() || seen[k] {
                return Err(Error::InvalidParameter("decoding order must be a permutation"));
            }
            seen[k] = true;
        }
        Ok(Self(perm))
    }

    pub fn identity(users: usize) -> Self {
        Self((0..users).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `rank[k]` is the position of user `k` in the order.
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.0.len()];
        for (pos, &k) in self.0.iter().enumerate() {
            rank[k] = pos;
        }
        rank
    }

    /// Cyclic shift by `by` positions.
    pub fn rotated(&self, by: usize) -> Self {
        let mut v = self.0.clone();
        if !v.is_empty() {
            let by = by % v.len();
            v.rotate_left(by);
        }
        Self(v)
    }
}

fn check_powers(h: &ChannelMatrix, q: &[f64]) -> Result<()> {
    if q.len() != h.users() {
        return Err(Error::Dimension("one power per user"));
    }
    if q.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidParameter("powers must be nonnegative"));
    }
    Ok(())
}

fn log2_det(a: &Hermitian) -> f64 {
    // I + PSD is always positive definite; a failed factorization means the
    // inputs were not finite.
    Cholesky::factor(a).map_or(f64::NAN, |c| c.ln_det() / LN_2)
}

/// `log2 |I + sum_{k in J} q_k h_k^H h_k|`
pub fn subset_bound(h: &ChannelMatrix, q: &[f64], subset: &[usize]) -> Result<f64> {
    check_powers(h, q)?;
    if subset.is_empty() {
        return Err(Error::InvalidParameter("subset must be nonempty"));
    }
    if subset.iter().any(|&k| k >= h.users()) {
        return Err(Error::Dimension("subset names an unknown user"));
    }
    let mut a = Hermitian::identity(h.antennas());
    for &k in subset {
        a.add_outer(h.row(k), q[k]);
    }
    Ok(log2_det(&a))
}

/// Sum capacity at powers `q`, i.e. the bound for the full user set.
pub fn sum_rate(h: &ChannelMatrix, q: &[f64]) -> Result<f64> {
    let all: Vec<usize> = (0..h.users()).collect();
    subset_bound(h, q, &all)
}

/// Successive-decoding rates for `order`: user `order[i]` gets
/// `log2|I + sum_{j<=i} ...| - log2|I + sum_{j<i} ...|`.
pub fn corner_rates(h: &ChannelMatrix, q: &[f64], order: &DecodingOrder) -> Result<Vec<f64>> {
    check_powers(h, q)?;
    if order.len() != h.users() {
        return Err(Error::Dimension("decoding order length must equal K"));
    }
    let mut rates = vec![0.0; h.users()];
    let mut a = Hermitian::identity(h.antennas());
    let mut prev = 0.0;
    for &k in order.as_slice() {
        if q[k] == 0.0 {
            continue;
        }
        a.add_outer(h.row(k), q[k]);
        let cur = log2_det(&a);
        // Rounding can leave a tiny negative increment for negligible powers.
        rates[k] = (cur - prev).max(0.0);
        prev = cur;
    }
    Ok(rates)
}

/// Whether `rates` satisfies every subset constraint within `tol`.
pub fn in_region(h: &ChannelMatrix, q: &[f64], rates: &[f64], tol: f64) -> Result<bool> {
    check_powers(h, q)?;
    let k = h.users();
    if k > MAX_ENUMERATION_USERS {
        return Err(Error::Capacity {
            users: k,
            limit: MAX_ENUMERATION_USERS,
        });
    }
    if rates.len() != k {
        return Err(Error::Dimension("one rate per user"));
    }
    if rates.iter().any(|&r| r < -tol) {
        return Ok(false);
    }
    let mut a = Hermitian::identity(h.antennas());
    for mask in 1u32..(1u32 << k) {
        a.reset_identity();
        let mut total = 0.0;
        for user in 0..k {
            if mask & (1 << user) != 0 {
                a.add_outer(h.row(user), q[user]);
                total += rates[user];
            }
        }
        if total > log2_det(&a) + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Affinely independent point sets in Wolfe's iteration never exceed the
/// dimension plus one; this caps the major loop well above that.
const MAX_WOLFE_STEPS: usize = 1000;
const WOLFE_WEIGHT_FLOOR: f64 = 1e-14;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weights on `points` giving the minimum-norm point of their affine hull.
fn affine_minimizer(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = points.len();
    let n = m + 1;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for i in 0..m {
        for j in 0..=i {
            let g = dot(&points[i], &points[j]);
            a[i * n + j] = g;
            a[j * n + i] = g;
        }
        a[i * n + m] = 1.0;
        a[m * n + i] = 1.0;
    }
    b[m] = 1.0;
    if !math::solve_dense(&mut a, &mut b, n, 1e-15) {
        return None;
    }
    b.truncate(m);
    Some(b)
}

fn combine(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (p, &w) in points.iter().zip(weights) {
        for (xi, pi) in x.iter_mut().zip(p) {
            *xi += w * pi;
        }
    }
    x
}

/// Euclidean projection of `point` onto the base polytope of a submodular
/// function. `vertex(order)` must return the greedy vertex for `order`:
/// coordinate `order[i]` gets `f(order[..=i]) - f(order[..i])`.
///
/// Wolfe's minimum-norm-point iteration on the polytope shifted by `-point`;
/// stops once the optimality gap `|x|^2 - min_s <x, s>` is below `tol`.
pub fn project_onto_base(point: &[f64], mut vertex: impl FnMut(&[usize]) -> Vec<f64>, tol: f64) -> Vec<f64> {
    let n = point.len();
    let mut shifted = |c: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| c[a].total_cmp(&c[b]));
        let mut v = vertex(&order);
        for (vi, pi) in v.iter_mut().zip(point) {
            *vi -= pi;
        }
        v
    };
    let mut x = shifted(point);
    let mut points = vec![x.clone()];
    let mut weights = vec![1.0];
    for _ in 0..MAX_WOLFE_STEPS {
        let s = shifted(&x);
        let scale = points.iter().map(|p| dot(p, p)).fold(dot(&s, &s), f64::max);
        if dot(&x, &x) - dot(&x, &s) <= tol * (1.0 + scale) {
            break;
        }
        points.push(s);
        weights.push(0.0);
        loop {
            let Some(alpha) = affine_minimizer(&points) else {
                // The new vertex is affinely dependent on the others up to
                // rounding; the current point is as good as it gets.
                points.pop();
                weights.pop();
                return point.iter().zip(&x).map(|(p, xi)| p + xi).collect();
            };
            if alpha.iter().all(|&a| a > WOLFE_WEIGHT_FLOOR) {
                weights = alpha;
                x = combine(&points, &weights);
                break;
            }
            let theta = weights
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= WOLFE_WEIGHT_FLOOR)
                .map(|(&w, &a)| w / (w - a))
                .fold(1.0, f64::min);
            for (w, &a) in weights.iter_mut().zip(&alpha) {
                *w = theta * a + (1.0 - theta) * *w;
            }
            let mut i = 0;
            while i < points.len() && points.len() > 1 {
                if weights[i] <= WOLFE_WEIGHT_FLOOR {
                    points.remove(i);
                    weights.remove(i);
                } else {
                    i += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            x = combine(&points, &weights);
        }
    }
    point.iter().zip(&x).map(|(p, xi)| p + xi).collect()
}
