//! TOML scenario files.
//!
//! ```toml
//! p_star = 10.0
//! output_path = "results.csv"
//!
//! [fading]
//! users = 2
//! antennas = 2
//! states = 100
//! seed = 1
//!
//! [[profiles]]
//! class = "ndc"
//! target = 1.0
//!
//! [solver]
//! step_mu = 0.01
//! ```

use std::path::Path;

use misobc_core::scheduler::StepRule;
use misobc_core::throughput::ThroughputConfig;
use misobc_core::{FadingSpec, SolverConfig, TrafficClass, UserProfile};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingSection {
    pub users: usize,
    pub antennas: usize,
    pub states: usize,
    #[serde(default)]
    pub seed: u64,
    /// Per-user covariance scale; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassName {
    Ndc,
    Dc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub class: ClassName,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRuleName {
    Constant,
    Adaptive,
}

/// Overrides on top of the default solver settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub step_mu: Option<f64>,
    pub step_delta: Option<f64>,
    pub step_rule: Option<StepRuleName>,
    pub log_step: Option<f64>,
    pub eps: Option<f64>,
    pub rate_tol: Option<f64>,
    pub persistence: Option<usize>,
    pub outer_tol: Option<f64>,
    pub inner_tol: Option<f64>,
    pub tie_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub mu_init: Option<f64>,
    pub delta_init: Option<f64>,
    pub power_cap: Option<f64>,
    /// Width of the sum-rate bracket in throughput searches.
    pub bisect_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub fading: FadingSection,
    pub profiles: Vec<ProfileSection>,
    /// NDC share of the total target rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<f64>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

fn config_err(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Same-shape scenario with uniform-variance fading.
    pub fn new(users: usize, antennas: usize, states: usize, seed: u64, profiles: &[UserProfile]) -> Self {
        Self {
            fading: FadingSection { users, antennas, states, seed, variances: None },
            profiles: profiles
                .iter()
                .map(|p| ProfileSection {
                    class: if p.is_dc() { ClassName::Dc } else { ClassName::Ndc },
                    target: p.target,
                })
                .collect(),
            gamma: None,
            p_star: None,
            solver: SolverSection::default(),
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fading_spec().validate().map_err(|e| config_err(format!("[fading]: {e}")))?;
        if self.profiles.len() != self.fading.users {
            return Err(config_err(format!(
                "{} profiles for {} users",
                self.profiles.len(),
                self.fading.users
            )));
        }
        if self.profiles.iter().any(|p| !(p.target >= 0.0) || !p.target.is_finite()) {
            return Err(config_err("profile targets must be finite and nonnegative"));
        }
        if let Some(g) = self.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(config_err("gamma must lie in [0, 1]"));
            }
        }
        if let Some(p) = self.p_star {
            if !(p > 0.0) || !p.is_finite() {
                return Err(config_err("p_star must be positive"));
            }
        }
        self.solver_config().validate().map_err(|e| config_err(format!("[solver]: {e}")))?;
        if let Some(t) = self.solver.bisect_tol {
            if !(t > 0.0) {
                return Err(config_err("[solver]: bisect_tol must be positive"));
            }
        }
        Ok(())
    }

    pub fn fading_spec(&self) -> FadingSpec {
        let f = &self.fading;
        FadingSpec {
            users: f.users,
            antennas: f.antennas,
            variances: f.variances.clone().unwrap_or_else(|| vec![1.0; f.users]),
            states: f.states,
            seed: f.seed,
        }
    }

    /// Profiles as written, or reloaded by `gamma` when it is set.
    pub fn user_profiles(&self) -> Vec<UserProfile> {
        let raw: Vec<UserProfile> = self
            .profiles
            .iter()
            .map(|p| match p.class {
                ClassName::Ndc => UserProfile::ndc(p.target),
                ClassName::Dc => UserProfile::dc(p.target),
            })
            .collect();
        match self.gamma {
            Some(g) => with_loading(&raw, g),
            None => raw,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let d = SolverConfig::default();
        SolverConfig {
            step_mu: s.step_mu.unwrap_or(d.step_mu),
            step_delta: s.step_delta.unwrap_or(d.step_delta),
            step_rule: match s.step_rule {
                Some(StepRuleName::Constant) => StepRule::Constant,
                Some(StepRuleName::Adaptive) => StepRule::Adaptive,
                None => d.step_rule,
            },
            log_step: s.log_step.unwrap_or(d.log_step),
            eps: s.eps.unwrap_or(d.eps),
            rate_tol: s.rate_tol.unwrap_or(d.rate_tol),
            persistence: s.persistence.unwrap_or(d.persistence),
            outer_tol: s.outer_tol.unwrap_or(d.outer_tol),
            inner_tol: s.inner_tol.unwrap_or(d.inner_tol),
            tie_tol: s.tie_tol.unwrap_or(d.tie_tol),
            max_outer: s.max_outer.unwrap_or(d.max_outer),
            max_inner: s.max_inner.unwrap_or(d.max_inner),
            mu_init: s.mu_init.unwrap_or(d.mu_init),
            delta_init: s.delta_init.unwrap_or(d.delta_init),
            power_cap: s.power_cap.unwrap_or(d.power_cap),
            p3: d.p3,
        }
    }

    pub fn throughput_config(&self) -> ThroughputConfig {
        let d = ThroughputConfig::default();
        ThroughputConfig {
            solver: self.solver_config(),
            bisect_tol: self.solver.bisect_tol.unwrap_or(d.bisect_tol),
            max_rate: d.max_rate,
        }
    }

    pub fn p_star(&self) -> Result<f64> {
        self.p_star.ok_or_else(|| config_err("p_star is required"))
    }
}

/// Rescales targets so NDC users carry `gamma` of the total and DC users the
/// rest, keeping the within-class proportions.
pub fn with_loading(profiles: &[UserProfile], gamma: f64) -> Vec<UserProfile> {
    let total: f64 = profiles.iter().map(|p| p.target).sum();
    let class_sum = |class| profiles.iter().filter(|p| p.class == class).map(|p| p.target).sum::<f64>();
    let (ndc, dc) = (class_sum(TrafficClass::Ndc), class_sum(TrafficClass::Dc));
    profiles
        .iter()
        .map(|p| {
            let (share, sum) = match p.class {
                TrafficClass::Ndc => (gamma, ndc),
                TrafficClass::Dc => (1.0 - gamma, dc),
            };
            let target = if sum > 0.0 { total * share * p.target / sum } else { 0.0 };
            UserProfile { class: p.class, target }
        })
        .collect()
}
