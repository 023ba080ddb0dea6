//! Experiment runners. Each sweep point owns its channel ensemble and solver
//! state, so points run in parallel; rows come back in sweep order.

use misobc_core::baselines::{tdma_power, zf_sdma_power};
use misobc_core::fading::{empirical_rho, generate};
use misobc_core::scheduler::{self, solve_p1_offline, OnlineRecord};
use misobc_core::throughput::{
    delay_penalty, fairness_penalty, theorem_bound, throughput, RateProfile, ThroughputConfig, ThroughputReport,
};
use misobc_core::{ChannelSet, Error as CoreError, TrafficClass};
use rayon::prelude::*;

use crate::config::{with_loading, Scenario};
use crate::error::{Result, SimError};
use crate::output::ResultRow;

/// `Ok(None)` for a point with no finite power.
fn flag_infeasible<T>(r: misobc_core::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CoreError::Infeasible { .. } | CoreError::ZeroCapacity { .. } | CoreError::Unsupported { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Three schemes at one loading factor and seed. `None` marks an
/// infeasible point.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPoint {
    pub gamma: f64,
    pub seed: u64,
    pub proposed: Option<f64>,
    pub tdma: Option<f64>,
    pub zf: Option<f64>,
    /// Primal power minus the best dual value of the proposed scheme.
    pub gap: Option<f64>,
    pub converged: bool,
}

/// Average power of the proposed scheduler, TDMA and ZF-SDMA for each
/// loading factor and seed. The total target is the sum of the scenario's
/// targets; `gamma` of it goes to the NDC users.
pub fn run_mixed_traffic(scenario: &Scenario, gamma_grid: &[f64], seeds: &[u64]) -> Result<Vec<MixedPoint>> {
    if let Some(g) = gamma_grid.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(SimError::Config(format!("loading factor {g} outside [0, 1]")));
    }
    let base = scenario.user_profiles();
    let cfg = scenario.solver_config();
    let per_seed: Vec<Result<Vec<MixedPoint>>> = seeds
        .par_iter()
        .map(|&seed| {
            let channels = generate(&misobc_core::FadingSpec { seed, ..scenario.fading_spec() })?;
            gamma_grid
                .iter()
                .map(|&gamma| {
                    let profiles = with_loading(&base, gamma);
                    let offline = flag_infeasible(solve_p1_offline(&channels, &profiles, &cfg))?;
                    Ok(MixedPoint {
                        gamma,
                        seed,
                        proposed: offline.as_ref().map(|s| s.allocation.average_power),
                        gap: offline.as_ref().map(|s| s.duality_gap()),
                        converged: offline.as_ref().is_none_or(|s| s.converged),
                        tdma: flag_infeasible(tdma_power(&channels, &profiles))?.map(|b| b.total),
                        zf: flag_infeasible(zf_sdma_power(&channels, &profiles))?.map(|b| b.total),
                    })
                })
                .collect()
        })
        .collect();
    let mut points: Vec<MixedPoint> = Vec::new();
    for r in per_seed {
        points.extend(r?);
    }
    points.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.seed.cmp(&b.seed)));
    Ok(points)
}

/// Seed-averaged powers at one loading factor; infinite if any seed was
/// infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedMean {
    pub gamma: f64,
    pub proposed: f64,
    pub tdma: f64,
    pub zf: f64,
}

pub fn mixed_means(points: &[MixedPoint]) -> Vec<MixedMean> {
    let mut gammas: Vec<f64> = points.iter().map(|p| p.gamma).collect();
    gammas.dedup();
    gammas
        .into_iter()
        .map(|gamma| {
            let at: Vec<&MixedPoint> = points.iter().filter(|p| p.gamma == gamma).collect();
            let mean = |f: fn(&MixedPoint) -> Option<f64>| {
                at.iter().map(|p| f(p).unwrap_or(f64::INFINITY)).sum::<f64>() / at.len() as f64
            };
            MixedMean { gamma, proposed: mean(|p| p.proposed), tdma: mean(|p| p.tdma), zf: mean(|p| p.zf) }
        })
        .collect()
}

pub fn mixed_rows(experiment: &str, points: &[MixedPoint]) -> Vec<ResultRow> {
    let value = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
    let mut rows = Vec::new();
    for p in points {
        rows.push(ResultRow::new(experiment, p.gamma, "proposed_power", value(p.proposed), p.seed));
        rows.push(ResultRow::new(experiment, p.gamma, "tdma_power", value(p.tdma), p.seed));
        rows.push(ResultRow::new(experiment, p.gamma, "zf_power", value(p.zf), p.seed));
        if let Some(gap) = p.gap {
            rows.push(ResultRow::new(experiment, p.gamma, "duality_gap", gap, p.seed));
        }
    }
    let first_seed = points.iter().map(|p| p.seed).min().unwrap_or(0);
    for m in mixed_means(points) {
        rows.push(ResultRow::new(experiment, m.gamma, "proposed_power_mean", m.proposed, first_seed));
        rows.push(ResultRow::new(experiment, m.gamma, "tdma_power_mean", m.tdma, first_seed));
        rows.push(ResultRow::new(experiment, m.gamma, "zf_power_mean", m.zf, first_seed));
    }
    rows
}

/// Online scheduler over `blocks` blocks, cycling through the scenario's
/// states. Every user must carry NDC traffic.
pub fn run_online(scenario: &Scenario, channels: &ChannelSet, blocks: usize) -> Result<Vec<OnlineRecord>> {
    let profiles = scenario.user_profiles();
    if profiles.iter().any(|p| p.is_dc()) {
        return Err(SimError::Config("the online experiment takes NDC users only".into()));
    }
    Ok(scheduler::run_online(channels, &profiles, &scenario.solver_config(), blocks)?)
}

/// How an online run ended.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineSummary {
    pub final_rbar: Vec<f64>,
    pub targets: Vec<f64>,
    /// First block whose running average reaches the target, per user.
    pub first_crossing: Vec<Option<usize>>,
    pub max_error: f64,
}

pub fn summarize_online(records: &[OnlineRecord], targets: &[f64]) -> OnlineSummary {
    let final_rbar = records.last().map_or_else(|| vec![0.0; targets.len()], |r| r.rbar.clone());
    let first_crossing = (0..targets.len())
        .map(|k| records.iter().find(|r| r.rbar[k] >= targets[k]).map(|r| r.t))
        .collect();
    let max_error = final_rbar.iter().zip(targets).map(|(r, t)| (r - t).abs()).fold(0.0, f64::max);
    OnlineSummary { final_rbar, targets: targets.to_vec(), first_crossing, max_error }
}

fn profile_of(scenario: &Scenario) -> Result<RateProfile> {
    let weights: Vec<f64> = scenario.profiles.iter().map(|p| p.target).collect();
    RateProfile::normalized(&weights).map_err(|e| SimError::Config(format!("rate profile: {e}")))
}

/// Large-`K` bound on the delay-limited throughput with `rho` estimated from
/// the ensemble itself and lowered by `sigmas` standard errors. Only stated
/// for uniform profiles.
pub fn ensemble_bound(channels: &ChannelSet, alpha: &RateProfile, p_star: f64, sigmas: f64) -> Option<f64> {
    let k = alpha.len();
    let uniform = alpha.as_slice().iter().all(|&a| (a - 1.0 / k as f64).abs() < 1e-12);
    if !uniform || channels.antennas() < 2 {
        return None;
    }
    let rho = empirical_rho(channels);
    let low = rho.mean - sigmas * rho.std_error;
    (low > 0.0).then(|| theorem_bound(p_star, k, low))
}

/// `C_e`, `C_d` and the delay penalty for every scenario and budget, with the
/// profile given by the scenario's normalized targets.
pub fn run_tradeoff(scenarios: &[Scenario], p_grid: &[f64]) -> Result<Vec<ThroughputReport>> {
    let jobs: Vec<(usize, f64)> = (0..scenarios.len()).flat_map(|s| p_grid.iter().map(move |&p| (s, p))).collect();
    let ensembles: Vec<ChannelSet> = scenarios.iter().map(|s| generate(&s.fading_spec())).collect::<std::result::Result<_, _>>()?;
    jobs.par_iter()
        .map(|&(s, p)| {
            let alpha = profile_of(&scenarios[s])?;
            let mut report = delay_penalty(&ensembles[s], &alpha, p, &scenarios[s].throughput_config())?;
            report.theorem_bound = ensemble_bound(&ensembles[s], &alpha, p, 0.0);
            Ok(report)
        })
        .collect()
}

/// One report with every penalty filled in.
pub fn penalty_report(channels: &ChannelSet, alpha: &RateProfile, p_star: f64, cfg: &ThroughputConfig) -> Result<ThroughputReport> {
    let mut report = delay_penalty(channels, alpha, p_star, cfg)?;
    report.fairness_penalty = Some(fairness_penalty(channels, alpha, p_star, cfg)?);
    report.theorem_bound = ensemble_bound(channels, alpha, p_star, 0.0);
    Ok(report)
}

/// `C_e` for the two-user profile `(phi, 1 - phi)` at each grid point.
pub fn run_fairness(scenario: &Scenario, channels: &ChannelSet, phi_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if channels.users() != 2 {
        return Err(SimError::Config("the fairness sweep needs exactly two users".into()));
    }
    let p_star = scenario.p_star()?;
    let cfg = scenario.throughput_config();
    phi_grid
        .par_iter()
        .map(|&phi| {
            let alpha = RateProfile::new(vec![phi, 1.0 - phi]).map_err(|e| SimError::Config(format!("phi {phi}: {e}")))?;
            Ok((phi, throughput(channels, &alpha, p_star, TrafficClass::Ndc, &cfg)?))
        })
        .collect()
}

/// Grid points whose value is within `tol` of the maximum count as tied; the
/// argmax is the middle of that run.
pub fn plateau_argmax(points: &[(f64, f64)], tol: f64) -> Option<f64> {
    let best = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<f64> = points.iter().filter(|p| p.1 >= best - tol).map(|p| p.0).collect();
    let (lo, hi) = (tied.first()?, tied.last()?);
    Some(0.5 * (lo + hi))
}

/// `lo, lo + step, ..., hi` without accumulated rounding.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect()
}
