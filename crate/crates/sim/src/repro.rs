//! Built-in setups of the reproduced experiments.

use misobc_core::UserProfile;

use crate::config::Scenario;
use crate::experiments::grid;

pub const MIXED_STATES: usize = 100;
pub const MIXED_SEEDS: usize = 20;
pub const ONLINE_BLOCKS: usize = 3000;
pub const TRADEOFF_STATES: usize = 100;
pub const TRADEOFF_BUDGETS: [f64; 4] = [2.0, 5.0, 10.0, 20.0];
pub const FAIRNESS_STATES: usize = 200;
/// The curve is flat near its peak, so the sum-rate search runs finer here.
pub const FAIRNESS_BISECT_TOL: f64 = 1e-5;
pub const FAIRNESS_BUDGET: f64 = 10.0;
pub const FAIRNESS_STEP: f64 = 0.05;
pub const ASYMMETRIC_VARIANCES: [f64; 2] = [2.0, 0.5];

pub fn gamma_grid() -> Vec<f64> {
    grid(0.1, 0.9, 0.1)
}

pub fn phi_grid(step: f64) -> Vec<f64> {
    grid(step, 1.0 - step, step)
}

/// `M = K = 4`: two NDC and two DC users sharing `sum_rate` equally at
/// `gamma = 1/2`.
pub fn mixed(sum_rate: f64, states: usize, seed: u64) -> Scenario {
    let each = sum_rate / 4.0;
    let profiles = [UserProfile::ndc(each), UserProfile::ndc(each), UserProfile::dc(each), UserProfile::dc(each)];
    Scenario::new(4, 4, states, seed, &profiles)
}

/// Two NDC users with targets 3 and 1 behind four antennas, one fresh state
/// per block.
pub fn online(states: usize, seed: u64) -> Scenario {
    let mut s = Scenario::new(2, 4, states, seed, &[UserProfile::ndc(3.0), UserProfile::ndc(1.0)]);
    s.solver.step_mu = Some(0.01);
    s.solver.eps = Some(0.01);
    s
}

/// Two and four users behind two antennas with profiles `[2/3 1/3]` and
/// `[2/6 2/6 1/6 1/6]`.
pub fn tradeoff(states: usize, seed: u64) -> [Scenario; 2] {
    let two = [UserProfile::ndc(2.0), UserProfile::ndc(1.0)];
    let four = [UserProfile::ndc(2.0), UserProfile::ndc(2.0), UserProfile::ndc(1.0), UserProfile::ndc(1.0)];
    [Scenario::new(2, 2, states, seed, &two), Scenario::new(4, 2, states, seed, &four)]
}

/// Two users behind two antennas at `p* = 10`, symmetric or with channel
/// variances 2 and 1/2.
pub fn fairness(states: usize, seed: u64, asymmetric: bool) -> Scenario {
    let mut s = Scenario::new(2, 2, states, seed, &[UserProfile::ndc(1.0), UserProfile::ndc(1.0)]);
    s.p_star = Some(FAIRNESS_BUDGET);
    s.solver.bisect_tol = Some(FAIRNESS_BISECT_TOL);
    if asymmetric {
        s.fading.variances = Some(ASYMMETRIC_VARIANCES.to_vec());
    }
    s
}
