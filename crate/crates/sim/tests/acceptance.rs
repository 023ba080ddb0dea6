//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run a subset with `cargo test -p misobc --test acceptance -- 1 5`.
#![allow(clippy::needless_range_loop)]

use std::time::{Duration, Instant};

use misobc::config::Scenario;
use misobc::experiments::{
    ensemble_bound, mixed_means, plateau_argmax, run_fairness, run_mixed_traffic, run_online, run_tradeoff,
    summarize_online, MixedPoint,
};
use misobc::repro;
use misobc_core::baselines::{waterfill_power, zf_precoders};
use misobc_core::fading::{empirical_rho, generate};
use misobc_core::macregion::{corner_rates, DecodingOrder};
use misobc_core::scheduler::{dual_function, solve_p1_offline, subgradient_certificate};
use misobc_core::throughput::{theorem_bound, throughput, RateProfile};
use misobc_core::wsolver::{solve_p3, P3Config};
use misobc_core::{ChannelMatrix, ChannelSet, FadingSpec, SolverConfig, TrafficClass, UserProfile, C64};

// Tolerances and budgets.
const C1_OBJECTIVE_TOL: f64 = 1e-3;
const C1_KKT_TOL: f64 = 1e-8;
const C2_SUBSET_TOL: f64 = 1e-9;
const C2_ORDER_TOL: f64 = 1e-10;
const C3_GAP_TOL: f64 = 1e-2;
const C4_RATE_TOL: f64 = 0.1;
const C5_SOLVER_TOL: f64 = 1e-2;
const C5_MIN_POINTS: usize = 7;
const C6_PENALTY_SHARE: f64 = 0.25;
const C7_SIGMAS: f64 = 3.0;
const C7_LIMIT_TOL: f64 = 1e-3;
const C8_SYMMETRIC: (f64, f64) = (0.5, 0.05);
const C8_ASYMMETRIC: (f64, f64) = (0.7, 0.1);
const C9_WATERFILL_TOL: f64 = 1e-4;
const C9_ZF_TOL: f64 = 1e-10;

const BUDGETS: [u64; 9] = [60, 30, 300, 600, 1800, 1800, 1200, 1200, 120];

/// Deterministic stream for instance parameters.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }

    fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            p.swap(i, self.below(i + 1));
        }
        p
    }
}

fn channel(k: usize, m: usize, seed: u64) -> ChannelMatrix {
    generate(&FadingSpec::symmetric(k, m, 1, seed)).unwrap().state(0).clone()
}

// ---- oracles -------------------------------------------------------------

/// `log2 det(I + sum_{k in subset} q_k h_k^H h_k)` by complex LU.
fn log2_det(h: &ChannelMatrix, q: &[f64], subset: &[usize]) -> f64 {
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
    let mut acc = 0.0;
    for col in 0..m {
        let pivot = (col..m).max_by(|&r, &s| a[r][col].norm().total_cmp(&a[s][col].norm())).unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        acc += p.norm().ln();
        for r in col + 1..m {
            let f = a[r][col] / p;
            for c in col..m {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
        }
    }
    acc / std::f64::consts::LN_2
}

/// `sum q - sum_j (beta_(j) - beta_(j+1)) log2|A_j|` with users sorted by
/// descending weight.
fn weighted_objective(h: &ChannelMatrix, q: &[f64], beta: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..beta.len()).collect();
    order.sort_by(|&a, &b| beta[b].total_cmp(&beta[a]).then(a.cmp(&b)));
    let mut total: f64 = q.iter().sum();
    for j in 0..order.len() {
        let next = order.get(j + 1).map_or(0.0, |&k| beta[k]);
        total -= (beta[order[j]] - next) * log2_det(h, q, &order[..=j]);
    }
    total
}

const GRID_STEP: f64 = 1e-3;
const GRID_POINTS: usize = 10_001;

/// Minimum over `{0, 1e-3, ..., 10}^K`, `K <= 2`. The objective is convex
/// along each axis, so the inner axis is searched for the first
/// nonnegative forward difference.
fn grid_minimum(k: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let axis = |g: &dyn Fn(f64) -> f64| {
        let (mut lo, mut hi) = (0usize, GRID_POINTS - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let x = mid as f64 * GRID_STEP;
            if g(x + GRID_STEP) >= g(x) { hi = mid } else { lo = mid + 1 }
        }
        g(lo as f64 * GRID_STEP)
    };
    match k {
        1 => (0..GRID_POINTS).map(|i| f(&[i as f64 * GRID_STEP])).fold(f64::INFINITY, f64::min),
        2 => (0..GRID_POINTS)
            .map(|i| {
                let a = i as f64 * GRID_STEP;
                axis(&|b| f(&[a, b]))
            })
            .fold(f64::INFINITY, f64::min),
        _ => unreachable!(),
    }
}

/// Water level reaching `r_star`, by refining a uniform scan of levels.
fn water_level_scan(gains: &[f64], probs: &[f64], r_star: f64) -> f64 {
    let rate = |level: f64| -> f64 {
        gains.iter().zip(probs).map(|(&g, &p)| if g * level > 1.0 { p * (g * level).log2() } else { 0.0 }).sum()
    };
    let mut lo = 1.0 / gains.iter().copied().fold(0.0, f64::max);
    let mut hi = 2.0 * lo;
    while rate(hi) < r_star {
        hi *= 2.0;
    }
    for _ in 0..8 {
        let step = (hi - lo) / 1000.0;
        let cell = (1..1000).find(|&i| rate(lo + i as f64 * step) >= r_star).unwrap_or(1000);
        lo += (cell - 1) as f64 * step;
        hi = lo + step;
    }
    hi
}

// ---- criteria ------------------------------------------------------------

type Verdict = (bool, String);

fn c1_weighted_solver() -> Verdict {
    let mut rng = SplitMix(1);
    let cfg = P3Config::default();
    let (mut worst_obj, mut worst_kkt, mut all_converged) = (0.0f64, 0.0f64, true);
    for i in 0..50u64 {
        let k = 1 + rng.below(2);
        let m = 1 + rng.below(2);
        let h = channel(k, m, 1000 + i);
        let beta: Vec<f64> = (0..k).map(|_| rng.uniform(0.2, 3.0)).collect();
        let sol = solve_p3(&h, &beta, &cfg, None).unwrap();
        all_converged &= sol.converged;
        let grid = grid_minimum(k, |q| weighted_objective(&h, q, &beta));
        let obj = weighted_objective(&h, &sol.q, &beta);
        worst_obj = worst_obj.max((obj - grid).abs()).max(obj - grid);
        worst_kkt = worst_kkt.max(sol.kkt_residual);
    }
    let ok = all_converged && worst_obj <= C1_OBJECTIVE_TOL && worst_kkt <= C1_KKT_TOL;
    (ok, format!("50 instances: max |obj - grid| {worst_obj:.2e}, max KKT residual {worst_kkt:.2e}"))
}

fn c2_polymatroid() -> Verdict {
    let mut rng = SplitMix(2);
    let (mut worst_slack, mut worst_order) = (f64::NEG_INFINITY, 0.0f64);
    for i in 0..200u64 {
        let k = 1 + rng.below(6);
        let m = 1 + rng.below(4);
        let h = channel(k, m, 2000 + i);
        let q: Vec<f64> = (0..k).map(|_| rng.uniform(0.0, 5.0)).collect();
        let order = DecodingOrder::new(rng.permutation(k)).unwrap();
        let rates = corner_rates(&h, &q, &order).unwrap();
        for mask in 1u32..(1 << k) {
            let subset: Vec<usize> = (0..k).filter(|&u| mask >> u & 1 == 1).collect();
            let sum: f64 = subset.iter().map(|&u| rates[u]).sum();
            worst_slack = worst_slack.max(sum - log2_det(&h, &q, &subset));
        }
        let other = corner_rates(&h, &q, &DecodingOrder::new(rng.permutation(k)).unwrap()).unwrap();
        worst_order = worst_order.max((rates.iter().sum::<f64>() - other.iter().sum::<f64>()).abs());
    }
    let ok = worst_slack <= C2_SUBSET_TOL && worst_order <= C2_ORDER_TOL;
    (ok, format!("200 instances: max subset excess {worst_slack:.2e}, max sum-rate change across orders {worst_order:.2e}"))
}

fn c3_duality_gap() -> Verdict {
    let cfg = SolverConfig::default();
    let mut rng = SplitMix(3);
    let (mut worst, mut all_converged) = (f64::NEG_INFINITY, true);
    for i in 0..20u64 {
        let k = 1 + rng.below(3);
        let n = 1 + rng.below(8);
        let channels = generate(&FadingSpec::symmetric(k, 2, n, 3000 + i)).unwrap();
        let profiles: Vec<UserProfile> = (0..k)
            .map(|_| {
                let target = rng.uniform(0.2, 1.5);
                if rng.below(2) == 0 { UserProfile::ndc(target) } else { UserProfile::dc(target) }
            })
            .collect();
        let sol = solve_p1_offline(&channels, &profiles, &cfg).unwrap();
        all_converged &= sol.converged;
        worst = worst.max(sol.duality_gap());
    }
    (all_converged && worst <= C3_GAP_TOL, format!("20 instances: max gap {worst:.2e}"))
}

fn c4_online() -> Verdict {
    let seed = 1;
    let run = |seed: u64| {
        let scenario = repro::online(repro::ONLINE_BLOCKS, seed);
        let channels = generate(&scenario.fading_spec()).unwrap();
        let records = run_online(&scenario, &channels, repro::ONLINE_BLOCKS).unwrap();
        let tail = &records[records.len() - 1000..];
        let tail_mean: Vec<f64> =
            (0..2).map(|k| tail.iter().map(|r| r.rbar[k]).sum::<f64>() / tail.len() as f64).collect();
        (summarize_online(&records, &[3.0, 1.0]), tail_mean)
    };
    let (summary, tail_mean) = run(seed);
    let passing = (1..=20).filter(|&s| run(s).0.max_error <= C4_RATE_TOL).count();
    (
        summary.max_error <= C4_RATE_TOL,
        format!(
            "seed {seed}: rbar[3000] = ({:.4}, {:.4}), error {:.4}; mean of last 1000 = ({:.4}, {:.4}); seeds 1..=20 within tolerance: {passing}/20",
            summary.final_rbar[0], summary.final_rbar[1], summary.max_error, tail_mean[0], tail_mean[1]
        ),
    )
}

/// At each loading factor, the scheme that uses less power on a majority of
/// seeds.
fn majority_points(points: &[MixedPoint], better: fn(&MixedPoint) -> bool) -> usize {
    repro::gamma_grid()
        .iter()
        .filter(|&&g| {
            let at: Vec<&MixedPoint> = points.iter().filter(|p| p.gamma == g).collect();
            2 * at.iter().filter(|p| better(p)).count() > at.len()
        })
        .count()
}

fn c5_mixed_traffic() -> Verdict {
    let seeds: Vec<u64> = (1..=repro::MIXED_SEEDS as u64).collect();
    let mut ok = true;
    let mut notes = Vec::new();
    for (sum, zf_should_win) in [(6.0, true), (2.0, false)] {
        let scenario = repro::mixed(sum, repro::MIXED_STATES, 1);
        let points = run_mixed_traffic(&scenario, &repro::gamma_grid(), &seeds).unwrap();
        let inf = f64::INFINITY;
        let dominated = points.iter().all(|p| {
            let prop = p.proposed.unwrap_or(inf);
            p.converged && prop <= p.tdma.unwrap_or(inf) + C5_SOLVER_TOL && prop <= p.zf.unwrap_or(inf) + C5_SOLVER_TOL
        });
        let means = mixed_means(&points);
        let mut asymmetric = true;
        for low in means.iter().filter(|m| m.gamma < 0.5) {
            let high = means.iter().find(|m| (m.gamma - (1.0 - low.gamma)).abs() < 1e-9).unwrap();
            asymmetric &= low.proposed >= high.proposed && low.tdma >= high.tdma && low.zf >= high.zf;
        }
        let zf_wins = majority_points(&points, |p| p.zf <= p.tdma);
        let tdma_wins = majority_points(&points, |p| p.tdma <= p.zf);
        let (wins, label) = if zf_should_win { (zf_wins, "ZF <= TDMA") } else { (tdma_wins, "TDMA <= ZF") };
        let mean_wins = means.iter().filter(|m| if zf_should_win { m.zf <= m.tdma } else { m.tdma <= m.zf }).count();
        ok &= dominated && asymmetric && wins >= C5_MIN_POINTS;
        notes.push(format!(
            "{sum} bits: proposed dominates {dominated}, gamma/1-gamma ordering {asymmetric}, {label} by seed majority at {wins}/9 (by seed mean {mean_wins}/9)"
        ));
    }
    (ok, notes.join("; "))
}

fn c6_tradeoff() -> Verdict {
    let scenarios = repro::tradeoff(repro::TRADEOFF_STATES, 1);
    let reports = run_tradeoff(&scenarios, &repro::TRADEOFF_BUDGETS).unwrap();
    let (two, four) = reports.split_at(repro::TRADEOFF_BUDGETS.len());
    let ordered = reports.iter().all(|r| r.c_e >= r.c_d);
    let more_users = two.iter().zip(four).all(|(a, b)| b.c_e >= a.c_e && b.c_d >= a.c_d);
    let moderate = reports.iter().filter(|r| r.p_star == 10.0).all(|r| r.delay_penalty <= C6_PENALTY_SHARE * r.c_e);
    let table: Vec<String> = reports
        .iter()
        .map(|r| format!("K={} p*={}: {:.3}/{:.3}", r.alpha.len(), r.p_star, r.c_e, r.c_d))
        .collect();
    (ordered && more_users && moderate, format!("C_e >= C_d {ordered}, K=4 >= K=2 {more_users}, penalty <= 25% at p*=10 {moderate} [{}]", table.join(", ")))
}

fn c7_bound() -> Verdict {
    let cfg = Scenario::new(1, 1, 1, 0, &[UserProfile::ndc(1.0)]).throughput_config();
    let mut ok = true;
    let mut notes = Vec::new();
    for k in [4usize, 8, 16] {
        let channels = generate(&FadingSpec::symmetric(k, 4, 50, 1)).unwrap();
        let alpha = RateProfile::uniform(k);
        let rho = empirical_rho(&channels);
        for p in [5.0, 10.0] {
            let c_d = throughput(&channels, &alpha, p, TrafficClass::Dc, &cfg).unwrap();
            let bound = ensemble_bound(&channels, &alpha, p, C7_SIGMAS).unwrap();
            ok &= c_d <= bound;
            notes.push(format!("K={k} p*={p}: C_d {c_d:.3} <= {bound:.3} (rho {:.4} +- {:.4})", rho.mean, rho.std_error));
        }
    }
    let limit = theorem_bound(10.0, 1_000_000, 1.0);
    ok &= (limit - 14.4266).abs() <= C7_LIMIT_TOL && (limit - 10.0 / std::f64::consts::LN_2).abs() <= C7_LIMIT_TOL;
    notes.push(format!("bound(10, 1e6, 1) = {limit:.4}"));
    (ok, notes.join("; "))
}

fn c8_fairness() -> Verdict {
    let grid = repro::phi_grid(repro::FAIRNESS_STEP);
    let sweep = |asymmetric: bool| {
        let scenario = repro::fairness(repro::FAIRNESS_STATES, 1, asymmetric);
        let channels: ChannelSet = generate(&scenario.fading_spec()).unwrap();
        let points = run_fairness(&scenario, &channels, &grid).unwrap();
        let best = plateau_argmax(&points, scenario.throughput_config().bisect_tol).unwrap();
        (points, best)
    };
    let at = |points: &[(f64, f64)], phi: f64| points.iter().find(|p| (p.0 - phi).abs() < 1e-9).unwrap().1;
    let (_, sym_best) = sweep(false);
    let (asym, asym_best) = sweep(true);
    let gain = at(&asym, 0.7) - at(&asym, 0.5);
    let ok = (sym_best - C8_SYMMETRIC.0).abs() <= C8_SYMMETRIC.1 + 1e-9
        && (asym_best - C8_ASYMMETRIC.0).abs() <= C8_ASYMMETRIC.1 + 1e-9
        && gain > 0.0
        && gain < 1.0;
    (ok, format!("symmetric argmax {sym_best:.3}, asymmetric argmax {asym_best:.3}, C_e(0.7) - C_e(0.5) = {gain:.3}"))
}

fn c9_properties() -> Verdict {
    let cfg = SolverConfig::default();
    let mut rng = SplitMix(9);

    let channels = generate(&FadingSpec::symmetric(3, 2, 4, 9)).unwrap();
    let profiles = [UserProfile::ndc(1.0), UserProfile::ndc(0.5), UserProfile::dc(0.3)];
    let targets: Vec<f64> = profiles.iter().map(|p| p.target).collect();
    let mut holds = 0;
    for _ in 0..100 {
        let mu: Vec<f64> = vec![rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0), 0.0];
        let theta: Vec<f64> = vec![rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0), 0.0];
        let (g_mu, rates) = dual_function(&channels, &mu, &profiles, &cfg).unwrap();
        let (g_theta, _) = dual_function(&channels, &theta, &profiles, &cfg).unwrap();
        if subgradient_certificate(&mu, &theta, g_mu, g_theta, &rates, &targets, 1e-9) {
            holds += 1;
        }
    }

    let mut worst_wf = 0.0f64;
    for _ in 0..100 {
        let n = 1 + rng.below(10);
        let gains: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 20.0)).collect();
        let probs = vec![1.0 / n as f64; n];
        let r = rng.uniform(0.05, 5.0);
        let level = water_level_scan(&gains, &probs, r);
        let oracle: f64 = gains.iter().zip(&probs).map(|(&g, &p)| p * (level - 1.0 / g).max(0.0)).sum();
        let wf = waterfill_power(&gains, &probs, r, 1.0).unwrap();
        worst_wf = worst_wf.max((wf.average_power - oracle).abs());
    }

    let mut worst_zf = 0.0f64;
    for i in 0..100u64 {
        let m = 1 + rng.below(4);
        let k = 1 + rng.below(m);
        let h = channel(k, m, 9000 + i);
        let zf = zf_precoders(&h).unwrap();
        for (u, b) in zf.b_hat.iter().enumerate() {
            for v in (0..k).filter(|&v| v != u) {
                let leak: C64 = h.row(v).iter().zip(b).map(|(x, y)| x * y).sum();
                worst_zf = worst_zf.max(leak.norm());
            }
        }
    }
    let ok = holds == 100 && worst_wf <= C9_WATERFILL_TOL && worst_zf <= C9_ZF_TOL;
    (ok, format!("subgradient inequality {holds}/100, water-filling max error {worst_wf:.2e}, ZF max leakage {worst_zf:.2e}"))
}

fn main() {
    let criteria: [fn() -> Verdict; 9] = [
        c1_weighted_solver,
        c2_polymatroid,
        c3_duality_gap,
        c4_online,
        c5_mixed_traffic,
        c6_tradeoff,
        c7_bound,
        c8_fairness,
        c9_properties,
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, criterion) in criteria.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = criterion();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(BUDGETS[i]);
        let pass = ok && in_time;
        failed += usize::from(!pass);
        println!(
            "{} criterion {number}: {detail} [{:.1} s of {} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            BUDGETS[i]
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
