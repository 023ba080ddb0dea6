//! Oracles shared by the integration tests. Nothing here calls the library's
//! own linear algebra.
#![allow(clippy::needless_range_loop)]

#![allow(dead_code)]

use misobc_core::fading::{generate, ChannelMatrix, ChannelSet, FadingSpec};
use misobc_core::C64;

/// `ln |det A|` by complex LU with partial pivoting.
pub fn ln_det(mut a: Vec<Vec<C64>>) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].norm().total_cmp(&a[s][col].norm()))
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        acc += p.norm().ln();
        for r in col + 1..n {
            let f = a[r][col] / p;
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
        }
    }
    acc
}

/// `I + sum_{k in subset} q_k h_k^H h_k`
pub fn gram(h: &ChannelMatrix, q: &[f64], subset: &[usize]) -> Vec<Vec<C64>> {
    let m = h.antennas();
    let mut a = vec![vec![C64::new(0.0, 0.0); m]; m];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = C64::new(1.0, 0.0);
    }
    for &k in subset {
        let r = h.row(k);
        for i in 0..m {
            for j in 0..m {
                a[i][j] += r[i].conj() * r[j] * q[k];
            }
        }
    }
    a
}

pub fn log2_det_subset(h: &ChannelMatrix, q: &[f64], subset: &[usize]) -> f64 {
    ln_det(gram(h, q, subset)) / std::f64::consts::LN_2
}

/// Sorted descending by weight, ties by index.
pub fn sorted_order(beta: &[f64]) -> Vec<usize> {
    let mut p: Vec<usize> = (0..beta.len()).collect();
    p.sort_by(|&a, &b| beta[b].partial_cmp(&beta[a]).unwrap().then(a.cmp(&b)));
    p
}

/// Weighted objective from scratch: `sum q - sum_j w_j log2 |A_j|`.
pub fn p3_objective_oracle(h: &ChannelMatrix, q: &[f64], beta: &[f64]) -> f64 {
    let order = sorted_order(beta);
    let mut total: f64 = q.iter().sum();
    for j in 0..order.len() {
        let next = order.get(j + 1).map_or(0.0, |&k| beta[k]);
        let w = beta[order[j]] - next;
        if w > 0.0 {
            total -= w * log2_det_subset(h, q, &order[..=j]);
        }
    }
    total
}

pub fn ensemble(users: usize, antennas: usize, states: usize, seed: u64) -> ChannelSet {
    generate(&FadingSpec::symmetric(users, antennas, states, seed)).unwrap()
}

pub fn state(users: usize, antennas: usize, seed: u64) -> ChannelMatrix {
    ensemble(users, antennas, 1, seed).state(0).clone()
}

pub fn members(n: usize, mask: u32) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

pub const GRID_STEP: f64 = 1e-3;
pub const GRID_POINTS: usize = 10_001;

/// Smallest value over grid indices `0..GRID_POINTS` of a function that is
/// convex along the grid: first index where the forward difference turns
/// nonnegative.
fn convex_grid_min(mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let (mut lo, mut hi) = (0usize, GRID_POINTS - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        let x = mid as f64 * GRID_STEP;
        if f(x + GRID_STEP) - f(x) >= 0.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let x = lo as f64 * GRID_STEP;
    (f(x), x)
}

/// Minimum of `f` over the grid `{0, 1e-3, ..., 10}^K` for `K <= 2`. The first
/// coordinate is enumerated; the second, along which `f` is convex, is
/// searched exactly.
pub fn grid_min(k: usize, mut f: impl FnMut(&[f64]) -> f64) -> (f64, Vec<f64>) {
    match k {
        1 => {
            let (v, x) = convex_grid_min(|x| f(&[x]));
            // Cross-check the search against plain enumeration.
            let brute = (0..GRID_POINTS).map(|i| f(&[i as f64 * GRID_STEP])).fold(f64::INFINITY, f64::min);
            assert!((brute - v).abs() < 1e-12);
            (v, vec![x])
        }
        2 => {
            let mut best = (f64::INFINITY, vec![0.0, 0.0]);
            for i in 0..GRID_POINTS {
                let a = i as f64 * GRID_STEP;
                let (v, b) = convex_grid_min(|b| f(&[a, b]));
                if v < best.0 {
                    best = (v, vec![a, b]);
                }
            }
            best
        }
        _ => panic!("grid oracle supports one or two users"),
    }
}
