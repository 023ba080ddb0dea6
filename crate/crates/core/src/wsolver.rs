//! Weighted power minimization at one fading state:
//!
//! ```text
//! minimize  sum_k q_k - sum_k (b_{pi(k)} - b_{pi(k+1)}) log2 |I + sum_{i<=k} q_{pi(i)} h_{pi(i)}^H h_{pi(i)}|
//! s.t.      q >= 0
//! ```
//!
//! where `pi` sorts the weights `b` in descending order and `b_{pi(K+1)} = 0`.
//! Solved by cyclic block-coordinate descent: each coordinate step solves the
//! scalar KKT condition `d(q_m) = ln 2` by bisection.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fading::ChannelMatrix;
use crate::linalg::{Cholesky, Hermitian};
use crate::macregion::{corner_rates, DecodingOrder};
use crate::math::LN_2;

/// Tolerances for [`solve_p3`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P3Config {
    /// Bisection stops once `|d(q) - ln 2|` falls below this.
    pub bisect_tol: f64,
    /// Bisection also stops when the bracket is narrower than
    /// `bisect_width * (1 + upper bound)`.
    pub bisect_width: f64,
    pub max_bisect: usize,
    /// Sweeps stop when the objective decreases by less than this...
    pub obj_tol: f64,
    /// ...and the KKT residual is below this.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
}

impl Default for P3Config {
    fn default() -> Self {
        Self {
            bisect_tol: 1e-12,
            bisect_width: 1e-15,
            max_bisect: 200,
            obj_tol: 1e-9,
            kkt_tol: 1e-9,
            max_sweeps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct P3Solution {
    pub q: Vec<f64>,
    pub order: DecodingOrder,
    pub rates: Vec<f64>,
    pub objective: f64,
    pub sweeps: usize,
    pub kkt_residual: f64,
    /// `false` if `max_sweeps` ran out first; the fields hold the last iterate.
    pub converged: bool,
}

/// Sort users by descending weight, ties by ascending index.
pub fn order_from_weights(beta: &[f64]) -> DecodingOrder {
    let mut perm: Vec<usize> = (0..beta.len()).collect();
    // Stable sort keeps ascending index among equal weights.
    perm.sort_by(|&a, &b| beta[b].total_cmp(&beta[a]));
    DecodingOrder::new(perm).expect("sorted indices form a permutation")
}

/// Weight increments `b_{pi(j)} - b_{pi(j+1)}` along `order`.
fn increments(beta: &[f64], order: &DecodingOrder) -> Vec<f64> {
    let perm = order.as_slice();
    (0..perm.len())
        .map(|j| {
            let next = perm.get(j + 1).map_or(0.0, |&k| beta[k]);
            beta[perm[j]] - next
        })
        .collect()
}

fn validate(h: &ChannelMatrix, beta: &[f64]) -> Result<()> {
    if beta.len() != h.users() {
        return Err(Error::Dimension("one weight per user"));
    }
    if beta.iter().any(|&b| !(b >= 0.0) || !b.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite and nonnegative"));
    }
    Ok(())
}

/// Objective value with the order induced by `beta`.
pub fn p3_objective(h: &ChannelMatrix, q: &[f64], beta: &[f64]) -> f64 {
    let order = order_from_weights(beta);
    objective_with(h, q, &increments(beta, &order), &order)
}

fn objective_with(h: &ChannelMatrix, q: &[f64], w: &[f64], order: &DecodingOrder) -> f64 {
    let mut a = Hermitian::identity(h.antennas());
    let mut total: f64 = q.iter().sum();
    for (j, &k) in order.as_slice().iter().enumerate() {
        a.add_outer(h.row(k), q[k]);
        if w[j] > 0.0 {
            let ln_det = Cholesky::factor(&a).map_or(f64::NAN, |c| c.ln_det());
            total -= w[j] * ln_det / LN_2;
        }
    }
    total
}

/// The left side of the coordinate KKT condition for user `m`, as a function
/// of `q_m` with every other power held fixed:
/// `d(x) = sum_j w_j s_j / (1 + x s_j)` where `s_j = h_m A_j^{-1} h_m^H` and
/// `A_j` collects the other users up to position `j`. Nonincreasing in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateKkt {
    terms: Vec<(f64, f64)>,
    weight: f64,
}

impl CoordinateKkt {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(w, s)| w * s / (1.0 + x * s)).sum()
    }

    /// `b_m`, the sum of the weight increments from user `m`'s position on.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Upper end of the bisection bracket, `b_m / ln 2`. `d` is strictly below
    /// `ln 2` there.
    pub fn upper_bound(&self) -> f64 {
        self.weight / LN_2
    }

    /// Minimizer of the scalar subproblem.
    pub fn minimize(&self, cfg: &P3Config) -> f64 {
        if self.weight <= 0.0 || self.eval(0.0) <= LN_2 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, self.upper_bound());
        let width = cfg.bisect_width * (1.0 + hi);
        let mut best = (hi, (self.eval(hi) - LN_2).abs());
        for _ in 0..cfg.max_bisect {
            let mid = 0.5 * (lo + hi);
            let d = self.eval(mid);
            let gap = (d - LN_2).abs();
            if gap < best.1 {
                best = (mid, gap);
            }
            if gap <= cfg.bisect_tol || hi - lo <= width {
                break;
            }
            if d > LN_2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best.0
    }
}

/// Reusable buffers for coordinate steps.
struct Scratch {
    a: Hermitian,
    chol: Cholesky,
}

impl Scratch {
    fn new(m: usize) -> Self {
        Self {
            a: Hermitian::identity(m),
            chol: Cholesky::new(m),
        }
    }
}

fn coordinate_kkt_with(
    h: &ChannelMatrix,
    q: &[f64],
    m: usize,
    w: &[f64],
    order: &DecodingOrder,
    rank: usize,
    scratch: &mut Scratch,
) -> CoordinateKkt {
    let perm = order.as_slice();
    let weight: f64 = w[rank..].iter().sum();
    let mut terms = Vec::with_capacity(perm.len() - rank);
    if weight > 0.0 {
        scratch.a.reset_identity();
        for &k in &perm[..rank] {
            scratch.a.add_outer(h.row(k), q[k]);
        }
        let hm = h.row(m);
        for j in rank..perm.len() {
            if j > rank {
                scratch.a.add_outer(h.row(perm[j]), q[perm[j]]);
            }
            if w[j] > 0.0 {
                let s = if scratch.chol.refactor(&scratch.a) {
                    scratch.chol.quad_inv(hm)
                } else {
                    f64::NAN
                };
                terms.push((w[j], s));
            }
        }
    }
    CoordinateKkt { terms, weight }
}

/// KKT function of user `m` at the current powers.
pub fn coordinate_kkt(h: &ChannelMatrix, q: &[f64], m: usize, beta: &[f64]) -> CoordinateKkt {
    let order = order_from_weights(beta);
    let w = increments(beta, &order);
    let rank = order.ranks()[m];
    coordinate_kkt_with(h, q, m, &w, &order, rank, &mut Scratch::new(h.antennas()))
}

/// Exact minimizer over `q_m >= 0` with the other powers fixed.
pub fn coordinate_min(h: &ChannelMatrix, q: &[f64], m: usize, beta: &[f64]) -> f64 {
    coordinate_kkt(h, q, m, beta).minimize(&P3Config::default())
}

fn residual_of(kkt: &CoordinateKkt, qm: f64) -> f64 {
    let d = kkt.eval(qm);
    if qm > 0.0 {
        (d - LN_2).abs()
    } else {
        (d - LN_2).max(0.0)
    }
}

/// Largest KKT violation over users: `|d_k(q_k) - ln 2|` for active users,
/// `{d_k(0) - ln 2}^+` for inactive ones.
pub fn kkt_residual(h: &ChannelMatrix, q: &[f64], beta: &[f64]) -> f64 {
    let order = order_from_weights(beta);
    let w = increments(beta, &order);
    let ranks = order.ranks();
    let mut scratch = Scratch::new(h.antennas());
    (0..h.users())
        .map(|m| {
            let kkt = coordinate_kkt_with(h, q, m, &w, &order, ranks[m], &mut scratch);
            residual_of(&kkt, q[m])
        })
        .fold(0.0, f64::max)
}

/// Block-coordinate descent. `warm` seeds the powers, e.g. from the previous
/// multiplier iterate at the same state.
pub fn solve_p3(
    h: &ChannelMatrix,
    beta: &[f64],
    cfg: &P3Config,
    warm: Option<&[f64]>,
) -> Result<P3Solution> {
    validate(h, beta)?;
    let k = h.users();
    let order = order_from_weights(beta);
    let w = increments(beta, &order);
    let ranks = order.ranks();
    let mut q = match warm {
        Some(init) if init.len() == k => init.iter().map(|&x| x.max(0.0)).collect(),
        Some(_) => return Err(Error::Dimension("warm start must have one power per user")),
        None => vec![0.0; k],
    };
    for (qk, &b) in q.iter_mut().zip(beta) {
        if b == 0.0 {
            *qk = 0.0;
        }
    }
    let mut scratch = Scratch::new(h.antennas());
    let mut objective = objective_with(h, &q, &w, &order);
    let mut kkt_residual = f64::INFINITY;
    let mut converged = false;
    let mut sweeps = 0;
    if beta.iter().all(|&b| b == 0.0) {
        kkt_residual = 0.0;
        converged = true;
    }
    while !converged && sweeps < cfg.max_sweeps {
        sweeps += 1;
        for m in 0..k {
            let kkt = coordinate_kkt_with(h, &q, m, &w, &order, ranks[m], &mut scratch);
            q[m] = kkt.minimize(cfg);
        }
        let next = objective_with(h, &q, &w, &order);
        let decrease = objective - next;
        objective = next;
        if decrease < cfg.obj_tol {
            kkt_residual = (0..k)
                .map(|m| {
                    let kkt = coordinate_kkt_with(h, &q, m, &w, &order, ranks[m], &mut scratch);
                    residual_of(&kkt, q[m])
                })
                .fold(0.0, f64::max);
            converged = kkt_residual <= cfg.kkt_tol;
        }
    }
    if !converged && kkt_residual.is_infinite() {
        kkt_residual = kkt_residual_with(h, &q, &w, &order, &ranks, &mut scratch);
    }
    let rates = corner_rates(h, &q, &order)?;
    Ok(P3Solution {
        q,
        order,
        rates,
        objective,
        sweeps,
        kkt_residual,
        converged,
    })
}

fn kkt_residual_with(
    h: &ChannelMatrix,
    q: &[f64],
    w: &[f64],
    order: &DecodingOrder,
    ranks: &[usize],
    scratch: &mut Scratch,
) -> f64 {
    (0..h.users())
        .map(|m| residual_of(&coordinate_kkt_with(h, q, m, w, order, ranks[m], scratch), q[m]))
        .fold(0.0, f64::max)
}
