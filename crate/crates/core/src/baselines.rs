//! Suboptimal reference schemes that split the broadcast channel into `K`
//! scalar channels: TDMA with coherent (matched) precoding, and zero-forcing
//! SDMA. Each scalar channel then gets the optimal single-user power control
//! for its traffic class: water-filling for average-rate targets and channel
//! inversion for constant-rate targets.
//!
//! Slot convention: a user active for a fraction `share` of each block with
//! slot power `p` contributes `share * p` to the average power and
//! `share * log2(1 + p g)` to its rate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fading::{ChannelMatrix, ChannelSet, GAIN_FLOOR};
use crate::linalg::{norm_sqr, orthonormal_basis, project_out, row_times_col, C64};
use crate::math;
use crate::scheduler::{TrafficClass, UserProfile};

/// Relative rank tolerance for the null-space projection.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    /// Unit-norm precoders `b_k` (column vectors of length `M`).
    pub b_hat: Vec<Vec<C64>>,
    /// Effective scalar gains `|h_k b_k|^2`.
    pub gains: Vec<f64>,
    /// Users whose effective gain is (numerically) zero.
    pub degenerate: Vec<bool>,
}

fn unit(m: usize, i: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); m];
    v[i] = C64::new(1.0, 0.0);
    v
}

/// `b_k = h_k^H / ||h_k||`, gain `||h_k||^2`.
pub fn coherent_precoders(h: &ChannelMatrix) -> PrecoderSet {
    let m = h.antennas();
    let mut set = PrecoderSet {
        b_hat: Vec::with_capacity(h.users()),
        gains: Vec::with_capacity(h.users()),
        degenerate: Vec::with_capacity(h.users()),
    };
    for row in h.rows() {
        let g = norm_sqr(row);
        if g <= GAIN_FLOOR {
            set.b_hat.push(unit(m, 0));
            set.gains.push(0.0);
            set.degenerate.push(true);
        } else {
            let n = math::sqrt(g);
            set.b_hat.push(row.iter().map(|z| z.conj() / n).collect());
            set.gains.push(g);
            set.degenerate.push(false);
        }
    }
    set
}

/// Zero-forcing: `b_k` is the normalized projection of `h_k^H` onto the null
/// space of the other users' rows, which maximizes `|h_k b_k|^2` subject to
/// `h_j b_k = 0` for all `j != k`.
pub fn zf_precoders(h: &ChannelMatrix) -> Result<PrecoderSet> {
    let (k, m) = (h.users(), h.antennas());
    if k > m {
        return Err(Error::Unsupported {
            users: k,
            antennas: m,
        });
    }
    let mut set = PrecoderSet {
        b_hat: Vec::with_capacity(k),
        gains: Vec::with_capacity(k),
        degenerate: Vec::with_capacity(k),
    };
    for user in 0..k {
        let others: Vec<Vec<C64>> = (0..k)
            .filter(|&j| j != user)
            .map(|j| h.row(j).iter().map(|z| z.conj()).collect())
            .collect();
        let basis = orthonormal_basis(&others, RANK_TOL);
        let mut b: Vec<C64> = h.row(user).iter().map(|z| z.conj()).collect();
        let scale = norm_sqr(&b);
        project_out(&mut b, &basis);
        let nb = norm_sqr(&b);
        if scale <= GAIN_FLOOR || nb <= RANK_TOL * RANK_TOL * scale {
            // Any unit vector of the null space keeps the interference at zero.
            let fallback = (0..m)
                .map(|i| {
                    let mut e = unit(m, i);
                    project_out(&mut e, &basis);
                    e
                })
                .max_by(|a, b| norm_sqr(a).total_cmp(&norm_sqr(b)))
                .expect("M >= 1");
            let nf = math::sqrt(norm_sqr(&fallback));
            set.b_hat.push(fallback.into_iter().map(|z| z / nf).collect());
            set.gains.push(0.0);
            set.degenerate.push(true);
        } else {
            let n = math::sqrt(nb);
            let b: Vec<C64> = b.into_iter().map(|z| z / n).collect();
            let g = row_times_col(h.row(user), &b).norm_sqr();
            set.b_hat.push(b);
            set.gains.push(g);
            set.degenerate.push(false);
        }
    }
    Ok(set)
}

/// Per-user result of single-user power control over a scalar fading channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerControl {
    /// `E[share * p(n)]`
    pub average_power: f64,
    /// Power during the user's slot at each state.
    pub slot_powers: Vec<f64>,
    /// Achieved `E[share * log2(1 + p g)]`.
    pub average_rate: f64,
    /// Water level `1/lambda` (water-filling only).
    pub water_level: Option<f64>,
}

fn check_scalar_inputs(gains: &[f64], probs: &[f64], r_star: f64, share: f64) -> Result<()> {
    if gains.len() != probs.len() || gains.is_empty() {
        return Err(Error::Dimension("one probability per gain"));
    }
    if !(r_star >= 0.0) || !r_star.is_finite() {
        return Err(Error::InvalidParameter("rate target must be nonnegative"));
    }
    if !(share > 0.0 && share <= 1.0) {
        return Err(Error::InvalidParameter("time share must lie in (0, 1]"));
    }
    Ok(())
}

/// Average rate at water level `level`.
fn waterfill_rate(gains: &[f64], probs: &[f64], share: f64, level: f64) -> f64 {
    gains
        .iter()
        .zip(probs)
        .filter(|(&g, _)| g * level > 1.0)
        .map(|(&g, &p)| p * share * math::log2(g * level))
        .sum()
}

/// Minimum average power meeting an average-rate target: `p(n) = {1/lambda -
/// 1/g(n)}^+`, with `lambda` bisected so the rate constraint is tight.
pub fn waterfill_power(gains: &[f64], probs: &[f64], r_star: f64, share: f64) -> Result<PowerControl> {
    check_scalar_inputs(gains, probs, r_star, share)?;
    let n = gains.len();
    if r_star == 0.0 {
        return Ok(PowerControl {
            average_power: 0.0,
            slot_powers: vec![0.0; n],
            average_rate: 0.0,
            water_level: None,
        });
    }
    let g_max = gains
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&g, _)| g)
        .fold(0.0, f64::max);
    if g_max <= GAIN_FLOOR {
        return Err(Error::ZeroCapacity { user: 0 });
    }
    let rate_at = |lambda: f64| waterfill_rate(gains, probs, share, 1.0 / lambda);
    // Rate is zero at lambda = max g and grows without bound as lambda -> 0.
    let mut hi = g_max;
    let mut lo = g_max;
    for _ in 0..2000 {
        lo *= 0.5;
        if rate_at(lo) >= r_star {
            break;
        }
        hi = lo;
    }
    if rate_at(lo) < r_star {
        return Err(Error::Bracket("water level"));
    }
    for _ in 0..200 {
        let mid = math::sqrt(lo * hi);
        let r = rate_at(mid);
        if (r - r_star).abs() <= 1e-12 * r_star.max(1.0) || hi / lo - 1.0 <= 1e-15 {
            lo = mid;
            break;
        }
        if r >= r_star {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = 1.0 / lo;
    let slot_powers: Vec<f64> = gains
        .iter()
        .map(|&g| if g > GAIN_FLOOR { math::pos(level - 1.0 / g) } else { 0.0 })
        .collect();
    let average_power = slot_powers.iter().zip(probs).map(|(&p, &w)| w * share * p).sum();
    Ok(PowerControl {
        average_power,
        slot_powers,
        average_rate: rate_at(lo),
        water_level: Some(level),
    })
}

/// Constant rate `r_star` in every state: slot power
/// `(2^{r_star / share} - 1) / g(n)`.
pub fn inversion_power(gains: &[f64], probs: &[f64], r_star: f64, share: f64) -> Result<PowerControl> {
    check_scalar_inputs(gains, probs, r_star, share)?;
    let n = gains.len();
    if r_star == 0.0 {
        return Ok(PowerControl {
            average_power: 0.0,
            slot_powers: vec![0.0; n],
            average_rate: 0.0,
            water_level: None,
        });
    }
    let snr = math::exp2(r_star / share) - 1.0;
    let mut slot_powers = Vec::with_capacity(n);
    for (state, (&g, &p)) in gains.iter().zip(probs).enumerate() {
        if g <= GAIN_FLOOR {
            if p > 0.0 {
                return Err(Error::Infeasible { user: 0, state });
            }
            slot_powers.push(0.0);
        } else {
            slot_powers.push(snr / g);
        }
    }
    let average_power = slot_powers.iter().zip(probs).map(|(&s, &w)| w * share * s).sum();
    Ok(PowerControl {
        average_power,
        slot_powers,
        average_rate: r_star,
        water_level: None,
    })
}

fn with_user(err: Error, user: usize) -> Error {
    match err {
        Error::Infeasible { state, .. } => Error::Infeasible { user, state },
        Error::ZeroCapacity { .. } => Error::ZeroCapacity { user },
        e => e,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePower {
    pub total: f64,
    pub per_user: Vec<f64>,
}

fn per_user_control(
    gains: &[Vec<f64>],
    probs: &[f64],
    profiles: &[UserProfile],
    share: f64,
) -> Result<BaselinePower> {
    let mut per_user = Vec::with_capacity(profiles.len());
    for (user, profile) in profiles.iter().enumerate() {
        let control = match profile.class {
            TrafficClass::Ndc => waterfill_power(&gains[user], probs, profile.target, share),
            TrafficClass::Dc => inversion_power(&gains[user], probs, profile.target, share),
        }
        .map_err(|e| with_user(e, user))?;
        per_user.push(control.average_power);
    }
    Ok(BaselinePower {
        total: per_user.iter().sum(),
        per_user,
    })
}

fn check_profiles(channels: &ChannelSet, profiles: &[UserProfile]) -> Result<()> {
    if profiles.len() != channels.users() {
        return Err(Error::Dimension("one profile per user"));
    }
    Ok(())
}

/// TDMA: `K` equal slots per block, coherent precoding in each slot.
pub fn tdma_power(channels: &ChannelSet, profiles: &[UserProfile]) -> Result<BaselinePower> {
    check_profiles(channels, profiles)?;
    let k = channels.users();
    let gains: Vec<Vec<f64>> = (0..k)
        .map(|user| channels.states().iter().map(|h| h.gain(user)).collect())
        .collect();
    per_user_control(&gains, channels.probabilities(), profiles, 1.0 / k as f64)
}

/// Zero-forcing SDMA: all users simultaneously over interference-free beams.
pub fn zf_sdma_power(channels: &ChannelSet, profiles: &[UserProfile]) -> Result<BaselinePower> {
    check_profiles(channels, profiles)?;
    let k = channels.users();
    let mut gains = vec![Vec::with_capacity(channels.len()); k];
    for h in channels.states() {
        let set = zf_precoders(h)?;
        for (user, g) in set.gains.into_iter().enumerate() {
            gains[user].push(g);
        }
    }
    per_user_control(&gains, channels.probabilities(), profiles, 1.0)
}
