//! Two-layer Lagrange-dual scheduling.
//!
//! The outer layer prices the average-rate (NDC) constraints with
//! multipliers `mu`; the inner layer prices the per-state constant-rate (DC)
//! constraints with `delta(n)`. For fixed prices every fading state reduces
//! to a weighted power minimization solved by [`crate::wsolver::solve_p3`].
//!
//! Decoding-order ties. When two users carry equal weights, the optimal power
//! vector is shared by every order within the tie and the achievable rates
//! form a face of the polymatroid (time sharing). The optimal prices often
//! sit exactly on such ties, so corner rates alone jump back and forth. The
//! solvers here detect tie blocks, evaluate constraints on the whole face and
//! return time-shared rates.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fading::{ChannelMatrix, ChannelSet, GAIN_FLOOR};
use crate::linalg::{Cholesky, Hermitian};
use crate::macregion::{self, DecodingOrder};
use crate::math::{self, LN_2};
use crate::wsolver::{solve_p3, P3Config, P3Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrafficClass {
    /// Average-rate target over the fading process.
    Ndc,
    /// Constant rate in every fading state.
    Dc,
}

/// A user's traffic class and target rate (bits per complex dimension). The
/// user id is the index into the profile list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfile {
    pub class: TrafficClass,
    pub target: f64,
}

impl UserProfile {
    pub const fn ndc(target: f64) -> Self {
        Self {
            class: TrafficClass::Ndc,
            target,
        }
    }

    pub const fn dc(target: f64) -> Self {
        Self {
            class: TrafficClass::Dc,
            target,
        }
    }

    pub fn is_dc(&self) -> bool {
        self.class == TrafficClass::Dc
    }

    /// Users with a zero target never receive power.
    fn active(&self) -> bool {
        self.target > 0.0
    }
}

pub fn validate_profiles(profiles: &[UserProfile], users: usize) -> Result<()> {
    if profiles.len() != users {
        return Err(Error::Dimension("one profile per user"));
    }
    if profiles.iter().any(|p| !(p.target >= 0.0) || !p.target.is_finite()) {
        return Err(Error::InvalidParameter("target rates must be finite and nonnegative"));
    }
    Ok(())
}

/// How the multipliers move along their subgradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `x <- {x + step (R* - R)}^+` with a fixed step.
    Constant,
    /// `x <- x 2^{c (R* - R)}` with a per-multiplier factor `c` that grows
    /// while the subgradient keeps its sign and halves when it flips.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Constant step for `mu` (online algorithm, and offline under
    /// [`StepRule::Constant`]).
    pub step_mu: f64,
    /// Constant step for `delta` under [`StepRule::Constant`].
    pub step_delta: f64,
    pub step_rule: StepRule,
    /// Initial factor `c` of the adaptive rule.
    pub log_step: f64,
    /// Averaging weight of the online rate estimate.
    pub eps: f64,
    /// Rate tolerance used to declare convergence.
    pub rate_tol: f64,
    /// Consecutive in-tolerance iterations required under the constant rule.
    pub persistence: usize,
    /// Adaptive rule: stop the outer loop once every violation is below this.
    pub outer_tol: f64,
    /// Adaptive rule: stop the inner loop once every violation is below this.
    pub inner_tol: f64,
    /// Relative gap below which two weights count as tied.
    pub tie_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub mu_init: f64,
    pub delta_init: f64,
    /// Per-state power above which a DC target is declared infeasible.
    pub power_cap: f64,
    pub p3: P3Config,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_mu: 0.01,
            step_delta: 0.01,
            step_rule: StepRule::Adaptive,
            log_step: 1.0,
            eps: 0.01,
            rate_tol: 1e-2,
            persistence: 10,
            outer_tol: 1e-6,
            inner_tol: 1e-8,
            tie_tol: 1e-9,
            max_outer: 400,
            max_inner: 400,
            mu_init: 1.0,
            delta_init: 1.0,
            power_cap: 1e6,
            p3: P3Config::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.step_mu,
            self.step_delta,
            self.log_step,
            self.eps,
            self.rate_tol,
            self.outer_tol,
            self.inner_tol,
            self.tie_tol,
            self.mu_init,
            self.delta_init,
            self.power_cap,
        ];
        if positive.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter("solver parameters must be positive and finite"));
        }
        if self.eps >= 1.0 {
            return Err(Error::InvalidParameter("averaging weight must lie in (0, 1)"));
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.persistence == 0 {
            return Err(Error::InvalidParameter("iteration limits must be positive"));
        }
        Ok(())
    }
}

/// `{mu + step (R* - E[R])}^+`, componentwise.
pub fn mu_update(mu: &[f64], targets: &[f64], avg_rates: &[f64], step: f64) -> Vec<f64> {
    mu.iter()
        .zip(targets)
        .zip(avg_rates)
        .map(|((&m, &t), &r)| math::pos(m + step * (t - r)))
        .collect()
}

/// Same rule per fading state with instantaneous rates.
pub fn delta_update(delta: &[f64], targets: &[f64], rates: &[f64], step: f64) -> Vec<f64> {
    mu_update(delta, targets, rates, step)
}

/// `(1 - eps) rbar + eps rate`
pub fn ema(rbar: f64, rate: f64, eps: f64) -> f64 {
    (1.0 - eps) * rbar + eps * rate
}

/// Subgradient inequality check:
/// `g(theta) <= g(mu) + sum_k (theta_k - mu_k)(R*_k - E[R_k(mu)]) + tol`.
pub fn subgradient_certificate(
    mu: &[f64],
    theta: &[f64],
    g_mu: f64,
    g_theta: f64,
    avg_rates_mu: &[f64],
    targets: &[f64],
    tol: f64,
) -> bool {
    let linear: f64 = (0..mu.len())
        .map(|k| (theta[k] - mu[k]) * (targets[k] - avg_rates_mu[k]))
        .sum();
    g_theta <= g_mu + linear + tol
}

/// Per-multiplier step state.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Stepper {
    factor: f64,
    sign: i8,
}

const GROW: f64 = 1.5;
const SHRINK: f64 = 0.5;
const MAX_FACTOR: f64 = 4.0;
/// Bound on a single multiplicative move, in octaves.
const MAX_OCTAVES: f64 = 16.0;
/// Adaptive factors below this mean the iteration has stalled.
const STALLED_FACTOR: f64 = 1e-13;
/// Subset enumeration inside a tie block is exhaustive up to this size.
const FULL_SUBSET_LIMIT: usize = 8;

impl Stepper {
    fn new(factor: f64) -> Self {
        Self { factor, sign: 0 }
    }

    /// Records that a move was cut short at `to`. The factor drops toward
    /// the step actually taken, by at most one halving.
    fn shrink_to(&mut self, from: f64, to: f64, violation: f64) {
        let taken = (math::log2(to) - math::log2(from)).abs() / violation.abs();
        if taken.is_finite() && taken < self.factor {
            self.factor = taken.max(self.factor * SHRINK);
        }
    }

    fn apply(&mut self, value: f64, violation: f64, rule: StepRule, step: f64) -> f64 {
        match rule {
            StepRule::Constant => math::pos(value + step * violation),
            StepRule::Adaptive => {
                let s = if violation > 0.0 {
                    1
                } else if violation < 0.0 {
                    -1
                } else {
                    return value;
                };
                if s == -self.sign {
                    self.factor *= SHRINK;
                } else if s == self.sign {
                    self.factor = (self.factor * GROW).min(MAX_FACTOR);
                }
                self.sign = s;
                let octaves = (self.factor * violation).clamp(-MAX_OCTAVES, MAX_OCTAVES);
                value * math::exp2(octaves)
            }
        }
    }
}

/// Warm-start data for one fading state, carried across outer iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDuals {
    /// `delta_k(n)` (zero for NDC users).
    pub delta: Vec<f64>,
    steps: Vec<Stepper>,
    /// NDC user whose price a DC user was tied to.
    anchor: Vec<Option<usize>>,
    q: Option<Vec<f64>>,
}

impl StateDuals {
    pub fn new(users: usize, cfg: &SolverConfig) -> Self {
        Self::from_delta(vec![cfg.delta_init; users], cfg)
    }

    pub fn from_delta(delta: Vec<f64>, cfg: &SolverConfig) -> Self {
        let k = delta.len();
        Self {
            delta,
            steps: vec![Stepper::new(cfg.log_step); k],
            anchor: vec![None; k],
            q: None,
        }
    }

    fn refresh_steps(&mut self, cfg: &SolverConfig) {
        for s in &mut self.steps {
            s.factor = s.factor.max(cfg.log_step * 1e-2);
            s.sign = 0;
        }
    }
}

/// Two or more NDC users tied inside one block. Their rates may be split in
/// any way inside `[lo, hi]` with the block total fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct NdcBlock {
    /// Members in the order used for the provisional split.
    pub users: Vec<usize>,
    /// Rate left to the NDC members after the DC members get their targets.
    pub total: f64,
    /// Largest rate each member can take on the face.
    pub hi: Vec<f64>,
}

impl NdcBlock {
    /// Smallest rate of `users[i]` on the face (exact for pairs).
    pub fn lo(&self, i: usize) -> f64 {
        let others: f64 = (0..self.users.len()).filter(|&j| j != i).map(|j| self.hi[j]).sum();
        math::pos(self.total - others).min(self.hi[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct P2Solution {
    pub q: Vec<f64>,
    /// Rates after time sharing inside tie blocks.
    pub rates: Vec<f64>,
    /// Order of the last weighted solve (ties broken by user index).
    pub order: DecodingOrder,
    pub delta: Vec<f64>,
    /// `sum_DC delta_k R*_k + min_q L(q)`: a lower bound on this state's
    /// share of the dual function at the given `mu`.
    pub lagrangian: f64,
    pub power: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest remaining DC violation.
    pub residual: f64,
    pub ndc_blocks: Vec<NdcBlock>,
}

fn check_state(h: &ChannelMatrix, mu: &[f64], profiles: &[UserProfile]) -> Result<()> {
    validate_profiles(profiles, h.users())?;
    if mu.len() != h.users() {
        return Err(Error::Dimension("one NDC multiplier slot per user"));
    }
    for (user, p) in profiles.iter().enumerate() {
        if p.is_dc() && p.active() && h.gain(user) <= GAIN_FLOOR {
            return Err(Error::Infeasible { user, state: 0 });
        }
    }
    Ok(())
}

fn weights(mu: &[f64], delta: &[f64], profiles: &[UserProfile]) -> Vec<f64> {
    profiles
        .iter()
        .enumerate()
        .map(|(k, p)| match (p.class, p.active()) {
            (_, false) => 0.0,
            (TrafficClass::Ndc, true) => mu[k],
            (TrafficClass::Dc, true) => delta[k],
        })
        .collect()
}

/// Per-state problem: DC prices found by subgradient ascent with NDC prices
/// `mu` held fixed. Entries of `mu` for DC users are ignored.
pub fn solve_p2(
    h: &ChannelMatrix,
    mu: &[f64],
    profiles: &[UserProfile],
    cfg: &SolverConfig,
) -> Result<P2Solution> {
    let mut warm = StateDuals::new(h.users(), cfg);
    solve_p2_warm(h, mu, profiles, cfg, &mut warm)
}

pub fn solve_p2_warm(
    h: &ChannelMatrix,
    mu: &[f64],
    profiles: &[UserProfile],
    cfg: &SolverConfig,
    warm: &mut StateDuals,
) -> Result<P2Solution> {
    check_state(h, mu, profiles)?;
    let k = h.users();
    if warm.delta.len() != k {
        return Err(Error::Dimension("warm start must have one price per user"));
    }
    let dc: Vec<usize> = (0..k).filter(|&j| profiles[j].is_dc() && profiles[j].active()).collect();
    for j in 0..k {
        if !dc.contains(&j) {
            warm.delta[j] = 0.0;
            warm.anchor[j] = None;
        } else if let Some(a) = warm.anchor[j].filter(|&a| mu[a] > 0.0) {
            warm.delta[j] = mu[a];
        } else if !(warm.delta[j] > 0.0) {
            warm.delta[j] = cfg.delta_init;
        }
    }
    warm.refresh_steps(cfg);
    let mut iterations = 0;
    let mut newton_after = 1;
    loop {
        iterations += 1;
        let beta = weights(mu, &warm.delta, profiles);
        let sol = solve_p3(h, &beta, &cfg.p3, warm.q.as_deref())?;
        let power: f64 = sol.q.iter().sum();
        if !(power <= cfg.power_cap) {
            let user = dc
                .iter()
                .copied()
                .max_by(|&a, &b| warm.delta[a].total_cmp(&warm.delta[b]))
                .unwrap_or(0);
            return Err(Error::Infeasible { user, state: 0 });
        }
        warm.q = Some(sol.q.clone());
        let faces = analyze_faces(h, &sol, &beta, profiles, cfg.tie_tol);
        let residual = dc.iter().map(|&j| faces.violation[j].abs()).fold(0.0, f64::max);
        let tol = match cfg.step_rule {
            StepRule::Adaptive => cfg.inner_tol,
            StepRule::Constant => cfg.rate_tol,
        };
        let stalled = cfg.step_rule == StepRule::Adaptive
            && dc
                .iter()
                .filter(|&&j| faces.violation[j].abs() > tol)
                .all(|&j| warm.steps[j].factor < STALLED_FACTOR);
        let converged = residual <= tol;
        if converged || stalled || iterations >= cfg.max_inner {
            for j in 0..k {
                warm.anchor[j] = faces.anchor[j];
            }
            let lagrangian = sol.objective + dc.iter().map(|&j| warm.delta[j] * profiles[j].target).sum::<f64>();
            return Ok(P2Solution {
                q: sol.q,
                rates: faces.rates,
                order: sol.order,
                delta: warm.delta.clone(),
                lagrangian,
                power,
                iterations,
                converged,
                residual,
                ndc_blocks: faces.ndc_blocks,
            });
        }
        for group in &faces.dc_groups {
            let level = geometric_mean(group.iter().map(|&j| warm.delta[j]));
            let fresh = group.iter().any(|&j| warm.delta[j] != level);
            let slowest = group
                .iter()
                .copied()
                .min_by(|&a, &b| warm.steps[a].factor.total_cmp(&warm.steps[b].factor))
                .expect("groups are nonempty");
            let mut stepper = warm.steps[slowest];
            if fresh {
                // Members arrive with factors shrunk by their own oscillation;
                // the common mode needs its own scale.
                stepper = Stepper::new(stepper.factor.max(cfg.log_step * 1e-2));
            }
            for &j in group {
                warm.delta[j] = level;
                warm.steps[j] = stepper;
            }
        }
        if cfg.step_rule == StepRule::Adaptive && iterations >= newton_after {
            if let Some(units) = newton_units(&faces, &dc) {
                let point = Evaluation { h, mu, profiles, cfg, q: &sol.q };
                match newton_step(&point, &warm.delta, &units, &faces, &dc, residual)? {
                    Some(delta) => {
                        warm.delta = delta;
                        for s in &mut warm.steps {
                            s.sign = 0;
                        }
                        continue;
                    }
                    None => newton_after = iterations + NEWTON_BACKOFF,
                }
            }
        }
        // Moves are applied one user at a time against current weights; a
        // user that another one lands on holds still so the tie survives.
        let start = beta.clone();
        let mut current = beta;
        let mut held = vec![false; k];
        for &j in &dc {
            let v = faces.violation[j];
            if v.abs() <= tol || held[j] {
                continue;
            }
            let old = warm.delta[j];
            let mut new = warm.steps[j].apply(old, v, cfg.step_rule, cfg.step_delta);
            if cfg.step_rule == StepRule::Adaptive {
                let snapped = snap_to_crossed(old, new, j, &current, &start, cfg.tie_tol);
                if snapped != new {
                    warm.steps[j].shrink_to(old, snapped, v);
                    new = snapped;
                }
                for &i in &dc {
                    if i != j && current[i] == new {
                        held[i] = true;
                    }
                }
            }
            warm.delta[j] = new;
            current[j] = new;
        }
    }
}

/// Finite-difference probe on a log2 price, in octaves.
const NEWTON_PROBE: f64 = 1e-5;
/// Longest Newton move on any price, in octaves.
const NEWTON_MAX_OCTAVES: f64 = 2.0;
const NEWTON_BACKTRACKS: usize = 8;
/// Iterations of plain stepping after a failed Newton attempt.
const NEWTON_BACKOFF: usize = 5;

/// Everything but the DC prices needed to re-solve one state.
struct Evaluation<'a> {
    h: &'a ChannelMatrix,
    mu: &'a [f64],
    profiles: &'a [UserProfile],
    cfg: &'a SolverConfig,
    q: &'a [f64],
}

impl Evaluation<'_> {
    fn faces(&self, delta: &[f64]) -> Result<Faces> {
        let beta = weights(self.mu, delta, self.profiles);
        let sol = solve_p3(self.h, &beta, &self.cfg.p3, Some(self.q))?;
        Ok(analyze_faces(self.h, &sol, &beta, self.profiles, self.cfg.tie_tol))
    }
}

/// Price blocks that move as one in a Newton step: DC-only tie groups and
/// untied DC users. `None` when some DC user shares a block with NDC users,
/// since its rate there is not a smooth function of the prices.
fn newton_units(faces: &Faces, dc: &[usize]) -> Option<Vec<Vec<usize>>> {
    if faces.split {
        return None;
    }
    let mut units = faces.dc_groups.clone();
    for &j in dc {
        if !faces.tied[j] {
            units.push(vec![j]);
        } else if !faces.dc_groups.iter().any(|g| g.contains(&j)) {
            return None;
        }
    }
    (!units.is_empty()).then_some(units)
}

fn unit_violation(violation: &[f64], unit: &[usize]) -> f64 {
    unit.iter().map(|&j| violation[j]).sum::<f64>() / unit.len() as f64
}

/// One damped Newton step on the log prices with a finite-difference
/// Jacobian. Returns the new prices if the largest violation went down.
fn newton_step(
    point: &Evaluation<'_>,
    delta: &[f64],
    units: &[Vec<usize>],
    faces: &Faces,
    dc: &[usize],
    residual: f64,
) -> Result<Option<Vec<f64>>> {
    let n = units.len();
    let mut base = delta.to_vec();
    for unit in units.iter().filter(|u| u.len() > 1) {
        let level = geometric_mean(unit.iter().map(|&j| delta[j]));
        for &j in unit {
            base[j] = level;
        }
    }
    let r0: Vec<f64> = units.iter().map(|u| unit_violation(&faces.violation, u)).collect();
    let mut jac = vec![0.0; n * n];
    for (c, unit) in units.iter().enumerate() {
        let mut probe = base.clone();
        for &j in unit {
            probe[j] *= math::exp2(NEWTON_PROBE);
        }
        let moved = point.faces(&probe)?;
        for (r, other) in units.iter().enumerate() {
            jac[r * n + c] = (unit_violation(&moved.violation, other) - r0[r]) / NEWTON_PROBE;
        }
    }
    let mut step: Vec<f64> = r0.iter().map(|v| -v).collect();
    if !math::solve_dense(&mut jac, &mut step, n, 1e-12) {
        return Ok(None);
    }
    let longest = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let mut t = if longest > NEWTON_MAX_OCTAVES { NEWTON_MAX_OCTAVES / longest } else { 1.0 };
    for _ in 0..NEWTON_BACKTRACKS {
        let mut trial = base.clone();
        for (unit, &s) in units.iter().zip(&step) {
            for &j in unit {
                trial[j] = base[j] * math::exp2(t * s);
            }
        }
        let moved = point.faces(&trial)?;
        let res = dc.iter().map(|&j| moved.violation[j].abs()).fold(0.0, f64::max);
        if res < residual {
            return Ok(Some(trial));
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Moving a price past another user's weight swaps their decoding order and
/// makes rates jump. Stop on the nearest crossed weight so the tie face gets
/// examined instead of stepped over. Users that started out tied with `j`
/// are leaving the tie together and are not obstacles.
fn snap_to_crossed(old: f64, new: f64, j: usize, weights: &[f64], start: &[f64], tie_tol: f64) -> f64 {
    let (lo, hi) = if new > old { (old, new) } else { (new, old) };
    weights
        .iter()
        .enumerate()
        .filter(|&(k, _)| (start[k] - old).abs() > tie_tol * old)
        .filter(|&(k, &w)| k != j && w > 0.0 && w > lo && w < hi)
        .map(|(_, &w)| w)
        .min_by(|a, b| (a - old).abs().total_cmp(&(b - old).abs()))
        .unwrap_or(new)
}

fn geometric_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += math::log2(v);
        n += 1;
    }
    math::exp2(sum / n as f64)
}

/// Time-shared view of one weighted solve.
struct Faces {
    rates: Vec<f64>,
    /// `R*_k - R_k` for active DC users, measured on the face.
    violation: Vec<f64>,
    /// DC-only tie blocks whose prices should move together.
    dc_groups: Vec<Vec<usize>>,
    anchor: Vec<Option<usize>>,
    ndc_blocks: Vec<NdcBlock>,
    /// Member of some tie block.
    tied: Vec<bool>,
    /// Some DC-only block has members that should move apart.
    split: bool,
}

/// Evaluates `f(S) = log2|B + sum_S q h^H h| - log2|B|` for subsets of one
/// block, where `B` collects everything decoded before the block.
struct BlockRates<'a> {
    h: &'a ChannelMatrix,
    q: &'a [f64],
    base: Hermitian,
    base_ln_det: f64,
    chol: Cholesky,
}

impl<'a> BlockRates<'a> {
    fn new(h: &'a ChannelMatrix, q: &'a [f64], base: &Hermitian) -> Self {
        let chol = Cholesky::factor(base).expect("identity plus PSD is positive definite");
        Self {
            h,
            q,
            base: base.clone(),
            base_ln_det: chol.ln_det(),
            chol,
        }
    }

    fn f(&mut self, subset: impl Iterator<Item = usize>) -> f64 {
        let mut a = self.base.clone();
        for k in subset {
            a.add_outer(self.h.row(k), self.q[k]);
        }
        if !self.chol.refactor(&a) {
            return f64::NAN;
        }
        math::pos(self.chol.ln_det() - self.base_ln_det) / LN_2
    }

    /// Greedy vertex of the block's rate face: `users[order[i]]` is decoded
    /// with the later entries of `order` as interference.
    fn vertex(&mut self, users: &[usize], order: &[usize]) -> Vec<f64> {
        let mut a = self.base.clone();
        let mut rates = vec![0.0; users.len()];
        let mut prev = self.base_ln_det;
        for &i in order {
            a.add_outer(self.h.row(users[i]), self.q[users[i]]);
            let cur = if self.chol.refactor(&a) { self.chol.ln_det() } else { prev };
            rates[i] = (cur - prev) / LN_2;
            prev = cur;
        }
        rates
    }
}

/// Optimality gap at which the face projection stops.
const PROJECTION_TOL: f64 = 1e-24;

/// Splits DC-only block members into sets with equal violation; those keep
/// their tie while the sets move apart.
fn equal_violation_sets(members: &[usize], violation: &[f64]) -> Vec<Vec<usize>> {
    let scale = members.iter().map(|&u| violation[u].abs()).fold(0.0, f64::max);
    let gap = 1e-10 + 1e-7 * scale;
    let mut sorted = members.to_vec();
    sorted.sort_by(|&a, &b| violation[a].total_cmp(&violation[b]));
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for u in sorted {
        match sets.last_mut() {
            Some(set) if violation[u] - violation[*set.last().expect("nonempty")] <= gap => set.push(u),
            _ => sets.push(vec![u]),
        }
    }
    sets
}

fn subsets(n: usize) -> impl Iterator<Item = u64> {
    let all = (1u64 << n) - 1;
    let full = n <= FULL_SUBSET_LIMIT;
    (1..=all).filter(move |&mask| full || mask == all || mask.count_ones() == 1)
}

fn members(set: &[usize], mask: u64) -> impl Iterator<Item = usize> + '_ {
    set.iter()
        .enumerate()
        .filter(move |(i, _)| mask >> i & 1 == 1)
        .map(|(_, &u)| u)
}

fn analyze_faces(
    h: &ChannelMatrix,
    sol: &P3Solution,
    beta: &[f64],
    profiles: &[UserProfile],
    tie_tol: f64,
) -> Faces {
    let k = h.users();
    let order = sol.order.as_slice();
    let mut faces = Faces {
        rates: sol.rates.clone(),
        violation: vec![0.0; k],
        dc_groups: Vec::new(),
        anchor: vec![None; k],
        ndc_blocks: Vec::new(),
        tied: vec![false; k],
        split: false,
    };
    for j in 0..k {
        if profiles[j].is_dc() && profiles[j].active() {
            faces.violation[j] = profiles[j].target - sol.rates[j];
        }
    }
    let mut base = Hermitian::identity(h.antennas());
    let mut pos = 0;
    while pos < k && beta[order[pos]] > 0.0 {
        let mut end = pos + 1;
        while end < k {
            let (a, b) = (beta[order[end - 1]], beta[order[end]]);
            if b > 0.0 && a - b <= tie_tol * a {
                end += 1;
            } else {
                break;
            }
        }
        if end - pos >= 2 {
            resolve_block(h, &sol.q, &order[pos..end], &base, profiles, &mut faces);
        }
        for &u in &order[pos..end] {
            base.add_outer(h.row(u), sol.q[u]);
        }
        pos = end;
    }
    faces
}

/// Rates and DC violations on the face of one tie block.
fn resolve_block(
    h: &ChannelMatrix,
    q: &[f64],
    block: &[usize],
    base: &Hermitian,
    profiles: &[UserProfile],
    faces: &mut Faces,
) {
    let dc: Vec<usize> = block.iter().copied().filter(|&u| profiles[u].is_dc()).collect();
    let ndc: Vec<usize> = block.iter().copied().filter(|&u| !profiles[u].is_dc()).collect();
    for &u in block {
        faces.tied[u] = true;
    }
    let mut eval = BlockRates::new(h, q, base);
    let target = |u: usize| profiles[u].target;
    if ndc.is_empty() {
        // The smallest supergradient on the face: targets minus their
        // projection onto the face.
        let targets: Vec<f64> = dc.iter().map(|&u| target(u)).collect();
        let rates = macregion::project_onto_base(&targets, |order| eval.vertex(&dc, order), PROJECTION_TOL);
        for (i, &u) in dc.iter().enumerate() {
            faces.rates[u] = rates[i];
            faces.violation[u] = targets[i] - rates[i];
        }
        let sets = equal_violation_sets(&dc, &faces.violation);
        faces.split |= sets.len() > 1;
        faces.dc_groups.extend(sets.into_iter().filter(|set| set.len() > 1));
        return;
    }
    let total = eval.f(block.iter().copied());

    let mut dc_rates = 0.0;
    if !dc.is_empty() {
        let n = dc.len();
        let mut up = vec![0.0f64; n];
        for mask in subsets(n) {
            let excess = members(&dc, mask).map(target).sum::<f64>() - eval.f(members(&dc, mask));
            if excess > 0.0 {
                let share = excess / mask.count_ones() as f64;
                for (i, slot) in up.iter_mut().enumerate() {
                    if mask >> i & 1 == 1 {
                        *slot = slot.max(share);
                    }
                }
            }
        }
        for (i, &u) in dc.iter().enumerate() {
            let worst = total - eval.f(block.iter().copied().filter(|&v| v != u));
            let low = math::pos(worst - target(u));
            let v = up[i] - low;
            faces.violation[u] = v;
            faces.rates[u] = target(u) - v;
            dc_rates += faces.rates[u];
            if up[i] == 0.0 && low == 0.0 {
                faces.anchor[u] = Some(ndc[0]);
            }
        }
    }

    let remainder = math::pos(total - dc_rates);
    match ndc.len() {
        1 => faces.rates[ndc[0]] = remainder,
        _ => {
            let hi: Vec<f64> = ndc
                .iter()
                .map(|&a| {
                    let n = dc.len();
                    let mut best = eval.f(core::iter::once(a));
                    for mask in subsets(n) {
                        let bound = eval.f(members(&dc, mask).chain(core::iter::once(a)))
                            - members(&dc, mask).map(|u| faces.rates[u]).sum::<f64>();
                        best = best.min(bound);
                    }
                    best.min(remainder).max(0.0)
                })
                .collect();
            let mut left = remainder;
            for (i, &a) in ndc.iter().enumerate() {
                let take = if i + 1 == ndc.len() { left } else { hi[i].min(left) };
                faces.rates[a] = take;
                left -= take;
            }
            faces.ndc_blocks.push(NdcBlock {
                users: ndc,
                total: remainder,
                hi,
            });
        }
    }
}

/// Multipliers: `mu` per user (zero for DC users) and `delta` per state and
/// user (zero for NDC users).
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateAllocation {
    pub q: Vec<f64>,
    pub rates: Vec<f64>,
    pub order: DecodingOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub states: Vec<StateAllocation>,
    /// `E_n[sum_k q_k(n)]`
    pub average_power: f64,
    pub average_rates: Vec<f64>,
}

/// One row per user per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub user: usize,
    pub mu: f64,
    pub avg_rate: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution {
    pub allocation: Allocation,
    pub duals: DualState,
    /// Best dual function value seen; a lower bound on the minimum power.
    pub dual_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest remaining violation: `|R*_k - E[R_k]|` over NDC users with a
    /// positive price and `|R*_k - R_k(n)|` over DC users and states.
    pub max_violation: f64,
    pub trace: Vec<TraceRow>,
}

impl OfflineSolution {
    pub fn duality_gap(&self) -> f64 {
        self.allocation.average_power - self.dual_value
    }
}

/// NDC users whose prices are tied, as groups of at least two.
fn ndc_groups(mu: &[f64], ndc: &[usize], tie_tol: f64) -> Vec<Vec<usize>> {
    let mut sorted: Vec<usize> = ndc.iter().copied().filter(|&a| mu[a] > 0.0).collect();
    sorted.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && mu[sorted[j - 1]] - mu[sorted[j]] <= tie_tol * mu[sorted[j - 1]] {
            j += 1;
        }
        if j - i >= 2 {
            groups.push(sorted[i..j].to_vec());
        }
        i = j;
    }
    groups
}

/// Expected range of each member's rate across the face, summed over states.
struct GroupSplit {
    total: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn group_split(group: &[usize], solutions: &[P2Solution], probs: &[f64]) -> GroupSplit {
    let mut split = GroupSplit {
        total: 0.0,
        lo: vec![0.0; group.len()],
        hi: vec![0.0; group.len()],
    };
    for (sol, &p) in solutions.iter().zip(probs) {
        match sol.ndc_blocks.iter().find(|b| group.iter().all(|u| b.users.contains(u))) {
            Some(block) => {
                split.total += p * block.total;
                for (i, u) in group.iter().enumerate() {
                    let idx = block.users.iter().position(|v| v == u).expect("member");
                    split.lo[i] += p * block.lo(idx);
                    split.hi[i] += p * block.hi[idx];
                }
            }
            None => {
                for (i, &u) in group.iter().enumerate() {
                    split.total += p * sol.rates[u];
                    split.lo[i] += p * sol.rates[u];
                    split.hi[i] += p * sol.rates[u];
                }
            }
        }
    }
    split
}

/// Subgradient components for NDC users, measured on the time-sharing faces.
fn ndc_violations(
    profiles: &[UserProfile],
    ndc: &[usize],
    groups: &[Vec<usize>],
    solutions: &[P2Solution],
    probs: &[f64],
    avg_rates: &[f64],
) -> Vec<f64> {
    let mut v = vec![0.0; profiles.len()];
    for &a in ndc {
        v[a] = profiles[a].target - avg_rates[a];
    }
    for group in groups {
        let split = group_split(group, solutions, probs);
        let wanted: f64 = group.iter().map(|&u| profiles[u].target).sum();
        let common = (wanted - split.total) / group.len() as f64;
        for (i, &u) in group.iter().enumerate() {
            let t = profiles[u].target;
            let outside = t - t.clamp(split.lo[i], split.hi[i].max(split.lo[i]));
            v[u] = common + outside;
        }
    }
    v
}

/// Offline solution of the full problem over a finite ensemble.
pub fn solve_p1_offline(
    channels: &ChannelSet,
    profiles: &[UserProfile],
    cfg: &SolverConfig,
) -> Result<OfflineSolution> {
    solve_p1_offline_warm(channels, profiles, cfg, None)
}

/// As [`solve_p1_offline`], seeding the prices from `warm`.
pub fn solve_p1_offline_warm(
    channels: &ChannelSet,
    profiles: &[UserProfile],
    cfg: &SolverConfig,
    warm: Option<&DualState>,
) -> Result<OfflineSolution> {
    cfg.validate()?;
    let k = channels.users();
    validate_profiles(profiles, k)?;
    let probs = channels.probabilities();
    let ndc: Vec<usize> = (0..k).filter(|&a| !profiles[a].is_dc() && profiles[a].active()).collect();
    let targets: Vec<f64> = profiles.iter().map(|p| p.target).collect();

    let mut mu = vec![0.0; k];
    for &a in &ndc {
        mu[a] = warm.map_or(cfg.mu_init, |w| w.mu.get(a).copied().unwrap_or(0.0));
        if !(mu[a] > 0.0) {
            mu[a] = cfg.mu_init;
        }
    }
    let mut inner: Vec<StateDuals> = match warm {
        Some(w) if w.delta.len() == channels.len() => {
            w.delta.iter().map(|d| StateDuals::from_delta(d.clone(), cfg)).collect()
        }
        _ => (0..channels.len()).map(|_| StateDuals::new(k, cfg)).collect(),
    };
    let mut steps = vec![Stepper::new(cfg.log_step); k];
    let mut trace = Vec::new();
    let mut best_dual = f64::NEG_INFINITY;
    let mut streak = 0;
    let mut iter = 0;
    loop {
        iter += 1;
        let mut solutions = Vec::with_capacity(channels.len());
        for (n, h) in channels.states().iter().enumerate() {
            let sol = solve_p2_warm(h, &mu, profiles, cfg, &mut inner[n]).map_err(|e| at_state(e, n))?;
            solutions.push(sol);
        }
        let (avg_rates, power) = averages(&solutions, probs, k);
        let dual = ndc.iter().map(|&a| mu[a] * targets[a]).sum::<f64>()
            + solutions.iter().zip(probs).map(|(s, &p)| p * s.lagrangian).sum::<f64>();
        best_dual = best_dual.max(dual);
        for user in 0..k {
            trace.push(TraceRow {
                iter,
                user,
                mu: mu[user],
                avg_rate: avg_rates[user],
                power,
            });
        }
        let groups = ndc_groups(&mu, &ndc, cfg.tie_tol);
        let v = ndc_violations(profiles, &ndc, &groups, &solutions, probs, &avg_rates);
        let outer_residual = ndc.iter().map(|&a| v[a].abs()).fold(0.0, f64::max);
        let inner_ok = solutions.iter().all(|s| s.converged);
        let done = match cfg.step_rule {
            StepRule::Adaptive => {
                let stalled = ndc
                    .iter()
                    .filter(|&&a| v[a].abs() > cfg.outer_tol)
                    .all(|&a| steps[a].factor < STALLED_FACTOR);
                (outer_residual <= cfg.outer_tol || stalled) && inner_ok
            }
            StepRule::Constant => {
                if outer_residual <= cfg.rate_tol && inner_ok {
                    streak += 1;
                } else {
                    streak = 0;
                }
                streak >= cfg.persistence
            }
        };
        if done || iter >= cfg.max_outer {
            let mut solutions = solutions;
            time_share_groups(&groups, profiles, &mut solutions, probs);
            let (avg_rates, power) = averages(&solutions, probs, k);
            let max_violation = max_violation(profiles, &mu, &solutions, &avg_rates);
            let converged = max_violation <= cfg.rate_tol && inner_ok;
            return Ok(OfflineSolution {
                allocation: Allocation {
                    states: solutions
                        .iter()
                        .map(|s| StateAllocation {
                            q: s.q.clone(),
                            rates: s.rates.clone(),
                            order: s.order.clone(),
                        })
                        .collect(),
                    average_power: power,
                    average_rates: avg_rates,
                },
                duals: DualState {
                    mu: mu.clone(),
                    delta: solutions.iter().map(|s| s.delta.clone()).collect(),
                },
                dual_value: best_dual,
                iterations: iter,
                converged,
                max_violation,
                trace,
            });
        }
        for group in &groups {
            let pinned = group.iter().all(|&u| {
                let t = targets[u];
                let split = group_split(group, &solutions, probs);
                let i = group.iter().position(|&x| x == u).expect("member");
                t >= split.lo[i] - cfg.outer_tol && t <= split.hi[i] + cfg.outer_tol
            });
            if pinned {
                let level = geometric_mean(group.iter().map(|&u| mu[u]));
                let factor = group.iter().map(|&u| steps[u].factor).fold(f64::INFINITY, f64::min);
                for &u in group {
                    mu[u] = level;
                    steps[u].factor = factor;
                }
            }
        }
        let before = mu.clone();
        for &a in &ndc {
            if v[a].abs() > 0.0 {
                mu[a] = steps[a].apply(mu[a], v[a], cfg.step_rule, cfg.step_mu);
            }
        }
        if cfg.step_rule == StepRule::Adaptive {
            merge_crossed(&before, &mut mu, &ndc);
            for &a in &ndc {
                if v[a] != 0.0 {
                    steps[a].shrink_to(before[a], mu[a], v[a]);
                }
            }
        }
    }
}

/// Two NDC prices that swapped order in one step straddle a tie where their
/// decoding order flips in every state. Land both on it.
fn merge_crossed(before: &[f64], mu: &mut [f64], ndc: &[usize]) {
    for (i, &a) in ndc.iter().enumerate() {
        for &b in &ndc[i + 1..] {
            let was = before[a] - before[b];
            let now = mu[a] - mu[b];
            if was != 0.0 && (was > 0.0) != (now > 0.0) {
                let level = math::exp2(0.5 * (math::log2(mu[a]) + math::log2(mu[b])));
                mu[a] = level;
                mu[b] = level;
            }
        }
    }
}

fn at_state(err: Error, state: usize) -> Error {
    match err {
        Error::Infeasible { user, .. } => Error::Infeasible { user, state },
        e => e,
    }
}

fn averages(solutions: &[P2Solution], probs: &[f64], k: usize) -> (Vec<f64>, f64) {
    let mut rates = vec![0.0; k];
    let mut power = 0.0;
    for (s, &p) in solutions.iter().zip(probs) {
        power += p * s.power;
        for (acc, r) in rates.iter_mut().zip(&s.rates) {
            *acc += p * r;
        }
    }
    (rates, power)
}

/// Split tied NDC pairs with one common fraction across states so that the
/// expected rates hit their targets.
fn time_share_groups(
    groups: &[Vec<usize>],
    profiles: &[UserProfile],
    solutions: &mut [P2Solution],
    probs: &[f64],
) {
    for group in groups.iter().filter(|g| g.len() == 2) {
        let split = group_split(group, solutions, probs);
        let (a, b) = (group[0], group[1]);
        let width = split.hi[0] - split.lo[0];
        let lambda = if width > 0.0 {
            ((profiles[a].target - split.lo[0]) / width).clamp(0.0, 1.0)
        } else {
            0.5
        };
        for sol in solutions.iter_mut() {
            if let Some(block) = sol.ndc_blocks.iter().find(|bl| bl.users.contains(&a) && bl.users.contains(&b)) {
                if block.users.len() != 2 {
                    continue;
                }
                let ia = block.users.iter().position(|&u| u == a).expect("member");
                let lo = block.lo(ia);
                let ra = lo + lambda * (block.hi[ia] - lo);
                sol.rates[a] = ra;
                sol.rates[b] = block.total - ra;
            }
        }
    }
}

fn max_violation(profiles: &[UserProfile], mu: &[f64], solutions: &[P2Solution], avg_rates: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, p) in profiles.iter().enumerate() {
        if !p.active() {
            continue;
        }
        match p.class {
            TrafficClass::Ndc => {
                let gap = p.target - avg_rates[k];
                // Complementary slackness: surplus is allowed only at zero price.
                worst = worst.max(if mu[k] > 0.0 { gap.abs() } else { gap });
            }
            TrafficClass::Dc => {
                for s in solutions {
                    worst = worst.max((p.target - s.rates[k]).abs());
                }
            }
        }
    }
    worst
}

/// `g(mu)`, evaluated by solving every per-state problem at `mu`. Returns the
/// value together with the expected rates of the inner solutions.
pub fn dual_function(
    channels: &ChannelSet,
    mu: &[f64],
    profiles: &[UserProfile],
    cfg: &SolverConfig,
) -> Result<(f64, Vec<f64>)> {
    let k = channels.users();
    validate_profiles(profiles, k)?;
    let mut value: f64 = (0..k)
        .filter(|&a| !profiles[a].is_dc())
        .map(|a| mu[a] * profiles[a].target)
        .sum();
    let mut rates = vec![0.0; k];
    for (n, (p, h)) in channels.iter().enumerate() {
        let sol = solve_p2(h, mu, profiles, cfg).map_err(|e| at_state(e, n))?;
        value += p * sol.lagrangian;
        for (acc, r) in rates.iter_mut().zip(&sol.rates) {
            *acc += p * r;
        }
    }
    Ok((value, rates))
}

/// State of the online scheduler between blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    pub t: usize,
    pub mu: Vec<f64>,
    pub rbar: Vec<f64>,
    duals: StateDuals,
}

impl OnlineState {
    pub fn new(profiles: &[UserProfile], cfg: &SolverConfig) -> Self {
        let k = profiles.len();
        Self {
            t: 0,
            mu: profiles
                .iter()
                .map(|p| if p.is_dc() { 0.0 } else { cfg.mu_init })
                .collect(),
            rbar: vec![0.0; k],
            duals: StateDuals::new(k, cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineStep {
    pub t: usize,
    pub rates: Vec<f64>,
    pub q: Vec<f64>,
    pub power: f64,
    pub inner_converged: bool,
}

/// One block of the online algorithm: update `mu` from the running average
/// `rbar[t-1]`, solve the current state, then fold the transmitted rates into
/// `rbar`.
pub fn online_step(
    h: &ChannelMatrix,
    profiles: &[UserProfile],
    state: &mut OnlineState,
    cfg: &SolverConfig,
) -> Result<OnlineStep> {
    validate_profiles(profiles, h.users())?;
    state.t += 1;
    for (k, p) in profiles.iter().enumerate() {
        if !p.is_dc() {
            state.mu[k] = math::pos(state.mu[k] + cfg.step_mu * (p.target - state.rbar[k]));
        }
    }
    let sol = solve_p2_warm(h, &state.mu, profiles, cfg, &mut state.duals).map_err(|e| at_state(e, state.t))?;
    for (rbar, &r) in state.rbar.iter_mut().zip(&sol.rates) {
        *rbar = ema(*rbar, r, cfg.eps);
    }
    Ok(OnlineStep {
        t: state.t,
        rates: sol.rates,
        q: sol.q,
        power: sol.power,
        inner_converged: sol.converged,
    })
}

/// One row of the online trace, taken after the block's update.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineRecord {
    pub t: usize,
    pub rbar: Vec<f64>,
    pub mu: Vec<f64>,
    pub rates: Vec<f64>,
    pub power: f64,
}

/// Runs `blocks` blocks, cycling through the ensemble's states in order.
pub fn run_online(
    channels: &ChannelSet,
    profiles: &[UserProfile],
    cfg: &SolverConfig,
    blocks: usize,
) -> Result<Vec<OnlineRecord>> {
    cfg.validate()?;
    let mut state = OnlineState::new(profiles, cfg);
    let mut out = Vec::with_capacity(blocks);
    for t in 0..blocks {
        let step = online_step(channels.state(t % channels.len()), profiles, &mut state, cfg)?;
        out.push(OnlineRecord {
            t: step.t,
            rbar: state.rbar.clone(),
            mu: state.mu.clone(),
            rates: step.rates,
            power: step.power,
        });
    }
    Ok(out)
}

/// Proportional-fair scheduler state.
#[derive(Debug, Clone, PartialEq)]
pub struct PfsState {
    pub t: usize,
    pub rbar: Vec<f64>,
    q: Option<Vec<f64>>,
}

/// Floor on `rbar` inside the proportional-fair weights.
pub const PFS_RATE_FLOOR: f64 = 1e-6;

impl PfsState {
    pub fn new(users: usize) -> Self {
        Self {
            t: 0,
            rbar: vec![0.0; users],
            q: None,
        }
    }
}

/// Maximizes `sum_k R_k / rbar_k` under the per-block sum power `budget`:
/// the weighted solve runs with weights `s / rbar` and `s` is bisected until
/// the powers add up to the budget.
pub fn pfs_step(h: &ChannelMatrix, state: &mut PfsState, budget: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let k = h.users();
    if state.rbar.len() != k {
        return Err(Error::Dimension("one average rate per user"));
    }
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::InvalidParameter("power budget must be positive"));
    }
    let w: Vec<f64> = state.rbar.iter().map(|&r| 1.0 / r.max(PFS_RATE_FLOOR)).collect();
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let w: Vec<f64> = w.iter().map(|&x| x / w_max).collect();
    let mut warm = state.q.take();
    let solve = |s: f64, warm: &mut Option<Vec<f64>>| -> Result<P3Solution> {
        let beta: Vec<f64> = w.iter().map(|&x| s * x).collect();
        let sol = solve_p3(h, &beta, &cfg.p3, warm.as_deref())?;
        *warm = Some(sol.q.clone());
        Ok(sol)
    };
    let power = |sol: &P3Solution| sol.q.iter().sum::<f64>();
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut sol = solve(1.0, &mut warm)?;
    if power(&sol) < budget {
        while power(&sol) < budget {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Bracket("proportional-fair power price"));
            }
            sol = solve(hi, &mut warm)?;
        }
    } else {
        while power(&sol) >= budget {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::Bracket("proportional-fair power price"));
            }
            sol = solve(lo, &mut warm)?;
        }
    }
    for _ in 0..100 {
        let mid = math::sqrt(lo * hi);
        sol = solve(mid, &mut warm)?;
        let p = power(&sol);
        if (p - budget).abs() <= 1e-9 * budget.max(1.0) || hi / lo - 1.0 < 1e-14 {
            break;
        }
        if p < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    state.q = warm;
    state.t += 1;
    for (rbar, &r) in state.rbar.iter_mut().zip(&sol.rates) {
        *rbar = ema(*rbar, r, cfg.eps);
    }
    Ok(sol.rates)
}
