//! Throughput under a rate profile, delay and fairness penalties.
//!
//! With a profile `alpha` and sum rate `R`, user `k` targets `R alpha_k`. The
//! expected throughput uses average-rate targets, the delay-limited
//! throughput constant per-state targets. Both are the largest `R` whose
//! minimum average power stays within `p*`, found by bisection on `R`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fading::ChannelSet;
use crate::macregion::{corner_rates, DecodingOrder};
use crate::math::{self, LN_2};
use crate::scheduler::{solve_p1_offline_warm, DualState, SolverConfig, TrafficClass, UserProfile};
use crate::wsolver::solve_p3;

/// Normalized per-user rate shares.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile(Vec<f64>);

impl RateProfile {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Dimension("rate profile needs at least one user"));
        }
        if alpha.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter("rate shares must be nonnegative"));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("rate shares must sum to one"));
        }
        Ok(Self(alpha))
    }

    /// Scales arbitrary nonnegative weights to sum to one.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidParameter("rate shares must have a positive sum"));
        }
        Self::new(weights.iter().map(|&w| w / sum).collect())
    }

    pub fn uniform(users: usize) -> Self {
        Self(vec![1.0 / users as f64; users])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn profiles(&self, r_sum: f64, class: TrafficClass) -> Vec<UserProfile> {
        self.0
            .iter()
            .map(|&a| UserProfile {
                class,
                target: r_sum * a,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputConfig {
    pub solver: SolverConfig,
    /// Bisection stops when the bracket on the sum rate is this narrow.
    pub bisect_tol: f64,
    /// Sum rates beyond this are not searched.
    pub max_rate: f64,
}

impl Default for ThroughputConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            bisect_tol: 1e-3,
            max_rate: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub p_star: f64,
    pub alpha: RateProfile,
    pub c_e: f64,
    pub c_d: f64,
    pub delay_penalty: f64,
    pub sum_capacity: Option<f64>,
    pub fairness_penalty: Option<f64>,
    pub theorem_bound: Option<f64>,
}

/// Minimum average power for targets `r_sum * alpha`, together with the
/// prices that reached it.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerEstimate {
    /// Best dual value: a lower bound on the minimum power.
    pub dual: f64,
    /// Average power of the recovered allocation.
    pub primal: f64,
    pub converged: bool,
    pub duals: DualState,
}

fn check_alpha(channels: &ChannelSet, alpha: &RateProfile) -> Result<()> {
    if alpha.len() != channels.users() {
        return Err(Error::Dimension("one rate share per user"));
    }
    Ok(())
}

pub fn min_power_estimate(
    channels: &ChannelSet,
    alpha: &RateProfile,
    r_sum: f64,
    mode: TrafficClass,
    cfg: &SolverConfig,
    warm: Option<&DualState>,
) -> Result<PowerEstimate> {
    check_alpha(channels, alpha)?;
    if !(r_sum >= 0.0) || !r_sum.is_finite() {
        return Err(Error::InvalidParameter("sum rate must be nonnegative"));
    }
    let profiles = alpha.profiles(r_sum, mode);
    let sol = solve_p1_offline_warm(channels, &profiles, cfg, warm)?;
    Ok(PowerEstimate {
        dual: sol.dual_value.max(0.0),
        primal: sol.allocation.average_power,
        converged: sol.converged,
        duals: sol.duals,
    })
}

/// Minimum average power meeting `r_sum * alpha` in the given mode.
pub fn min_power_for_profile(
    channels: &ChannelSet,
    alpha: &RateProfile,
    r_sum: f64,
    mode: TrafficClass,
    cfg: &SolverConfig,
) -> Result<f64> {
    min_power_estimate(channels, alpha, r_sum, mode, cfg, None).map(|e| e.dual)
}

/// Largest sum rate with minimum power at most `p_star`.
pub fn throughput(
    channels: &ChannelSet,
    alpha: &RateProfile,
    p_star: f64,
    mode: TrafficClass,
    cfg: &ThroughputConfig,
) -> Result<f64> {
    check_alpha(channels, alpha)?;
    if !(p_star > 0.0) || !p_star.is_finite() {
        return Err(Error::InvalidParameter("power budget must be positive"));
    }
    let mut warm: Option<DualState> = None;
    let fits = |r: f64, warm: &mut Option<DualState>| -> Result<bool> {
        match min_power_estimate(channels, alpha, r, mode, &cfg.solver, warm.as_ref()) {
            Ok(est) => {
                let ok = est.dual <= p_star;
                *warm = Some(est.duals);
                Ok(ok)
            }
            // No finite power reaches this rate: treat as above any budget.
            Err(Error::Infeasible { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while fits(hi, &mut warm)? {
        lo = hi;
        hi *= 2.0;
        if hi > cfg.max_rate {
            return Err(Error::Bracket("sum rate exceeds the search limit"));
        }
    }
    while hi - lo > cfg.bisect_tol {
        let mid = 0.5 * (lo + hi);
        if fits(mid, &mut warm)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `C_e` and `C_d` at one budget; penalty fields beyond the delay penalty
/// are left empty.
pub fn delay_penalty(
    channels: &ChannelSet,
    alpha: &RateProfile,
    p_star: f64,
    cfg: &ThroughputConfig,
) -> Result<ThroughputReport> {
    let c_e = throughput(channels, alpha, p_star, TrafficClass::Ndc, cfg)?;
    let c_d = throughput(channels, alpha, p_star, TrafficClass::Dc, cfg)?;
    Ok(ThroughputReport {
        p_star,
        alpha: alpha.clone(),
        c_e,
        c_d,
        delay_penalty: c_e - c_d,
        sum_capacity: None,
        fairness_penalty: None,
        theorem_bound: None,
    })
}

/// Maximum expected sum rate under average power `p_star`, and the rate
/// shares it realizes.
///
/// Every state is solved with equal weights `s` and `s` is bisected until
/// the average power equals `p_star`. The sum-rate face is not a single
/// point, so shares are averaged over the `K` cyclic shifts of the identity
/// decoding order.
pub fn sum_capacity_profile(
    channels: &ChannelSet,
    p_star: f64,
    cfg: &SolverConfig,
) -> Result<(f64, RateProfile)> {
    if !(p_star > 0.0) || !p_star.is_finite() {
        return Err(Error::InvalidParameter("power budget must be positive"));
    }
    let k = channels.users();
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; channels.len()];
    let solve = |s: f64, warm: &mut Vec<Option<Vec<f64>>>| -> Result<(f64, Vec<Vec<f64>>)> {
        let beta = vec![s; k];
        let mut power = 0.0;
        let mut qs = Vec::with_capacity(channels.len());
        for (n, (p, h)) in channels.iter().enumerate() {
            let sol = solve_p3(h, &beta, &cfg.p3, warm[n].as_deref())?;
            power += p * sol.q.iter().sum::<f64>();
            warm[n] = Some(sol.q.clone());
            qs.push(sol.q);
        }
        Ok((power, qs))
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    let (mut power, mut qs) = solve(1.0, &mut warm)?;
    if power < p_star {
        while power < p_star {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Bracket("sum-rate power price"));
            }
            (power, qs) = solve(hi, &mut warm)?;
        }
    } else {
        while power >= p_star {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::Bracket("sum-rate power price"));
            }
            (power, qs) = solve(lo, &mut warm)?;
        }
    }
    for _ in 0..200 {
        let mid = math::sqrt(lo * hi);
        (power, qs) = solve(mid, &mut warm)?;
        if (power - p_star).abs() <= 1e-10 * p_star.max(1.0) || hi / lo - 1.0 < 1e-15 {
            break;
        }
        if power < p_star {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let identity = DecodingOrder::identity(k);
    let mut rates = vec![0.0; k];
    for ((p, h), q) in channels.iter().zip(&qs) {
        for shift in 0..k {
            let r = corner_rates(h, q, &identity.rotated(shift))?;
            for (acc, x) in rates.iter_mut().zip(r) {
                *acc += p * x / k as f64;
            }
        }
    }
    let total: f64 = rates.iter().sum();
    let alpha = if total > 0.0 {
        RateProfile::normalized(&rates)?
    } else {
        RateProfile::uniform(k)
    };
    Ok((total, alpha))
}

/// Sum capacity minus the expected throughput under `alpha_e`.
pub fn fairness_penalty(
    channels: &ChannelSet,
    alpha_e: &RateProfile,
    p_star: f64,
    cfg: &ThroughputConfig,
) -> Result<f64> {
    let (c_sum, _) = sum_capacity_profile(channels, p_star, &cfg.solver)?;
    Ok(c_sum - throughput(channels, alpha_e, p_star, TrafficClass::Ndc, cfg)?)
}

/// `K log2(1 + p* / (K rho))`, an upper bound on the delay-limited
/// throughput with `rho = E[1 / ||h||^2]`. Tends to `p* / (rho ln 2)`.
pub fn theorem_bound(p_star: f64, users: usize, rho: f64) -> f64 {
    let k = users as f64;
    k * math::ln_1p(p_star / (k * rho)) / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::ChannelMatrix;

    #[test]
    fn bound_values() {
        assert!((theorem_bound(10.0, 4, 1.0) - 4.0 * libm::log2(3.5)).abs() < 1e-12);
        assert!((theorem_bound(10.0, 1_000_000, 1.0) - 10.0 / LN_2).abs() < 1e-3);
    }

    #[test]
    fn profile_validation() {
        assert!(RateProfile::new(vec![0.5, 0.6]).is_err());
        assert!(RateProfile::new(vec![-0.5, 1.5]).is_err());
        assert_eq!(RateProfile::normalized(&[2.0, 1.0]).unwrap().as_slice()[1], 1.0 / 3.0);
    }

    #[test]
    fn scalar_throughput() {
        let set = ChannelSet::single(ChannelMatrix::from_real_rows(&[&[1.0]]).unwrap());
        let alpha = RateProfile::uniform(1);
        let cfg = ThroughputConfig::default();
        for mode in [TrafficClass::Ndc, TrafficClass::Dc] {
            let c = throughput(&set, &alpha, 1.0, mode, &cfg).unwrap();
            assert!((c - 1.0).abs() <= 1e-3, "{c}");
            let p = min_power_for_profile(&set, &alpha, 1.0, mode, &cfg.solver).unwrap();
            assert!((p - 1.0).abs() < 1e-6);
        }
        assert_eq!(min_power_for_profile(&set, &alpha, 0.0, TrafficClass::Ndc, &cfg.solver).unwrap(), 0.0);
    }
}
