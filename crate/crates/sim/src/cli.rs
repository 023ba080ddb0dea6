//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use misobc_core::baselines::{tdma_power, zf_sdma_power};
use misobc_core::fading::generate;
use misobc_core::scheduler::solve_p1_offline;
use misobc_core::throughput::{throughput, RateProfile};
use misobc_core::{ChannelSet, TrafficClass, UserProfile};

use crate::channels::{load_channels, save_channels, write_channels};
use crate::config::Scenario;
use crate::error::{Result, SimError};
use crate::experiments::{
    mixed_means, mixed_rows, penalty_report, plateau_argmax, run_fairness, run_mixed_traffic, run_online,
    run_tradeoff, summarize_online,
};
use crate::output::{emit_csv, online_rows, OfflineTraceRow, ReportRow, ResultRow};
use crate::repro;

#[derive(Debug, Parser)]
#[command(name = "misobc", version, about = "Dynamic resource allocation for the fading MISO broadcast channel")]
pub struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the fading seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent and the scenario names none.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the number of fading states.
    #[arg(long, global = true)]
    pub states: Option<usize>,
    /// Reads the channel ensemble from a file instead of generating it.
    #[arg(long, global = true)]
    pub channels: Option<PathBuf>,
    /// Suppresses the summary on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ndc,
    Dc,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig5,
    Fig6,
    Fig7,
    Fig9,
    Fig10,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes a channel ensemble.
    Gen,
    /// Offline scheduler; writes the iteration trace.
    Solve,
    /// Online scheduler; writes the per-block trace.
    Online {
        #[arg(long, default_value_t = repro::ONLINE_BLOCKS)]
        blocks: usize,
    },
    /// Expected and/or delay-limited throughput at `p_star`.
    Throughput {
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
    },
    /// Throughput report with delay and fairness penalties and the bound.
    Penalty,
    /// Expected throughput over the two-user profile grid `(phi, 1 - phi)`.
    Fairness {
        #[arg(long, default_value_t = repro::FAIRNESS_STEP)]
        step: f64,
    },
    /// TDMA and zero-forcing SDMA powers.
    Baseline,
    /// Reruns one of the built-in experiments.
    Repro {
        #[arg(value_enum)]
        figure: Figure,
        /// Number of seeds for the mixed-traffic figures.
        #[arg(long, default_value_t = repro::MIXED_SEEDS)]
        seeds: usize,
    },
}

/// A run that finished but whose solver did not meet its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Done => 0,
            Outcome::NotConverged => 3,
        }
    }
}

fn default_scenario() -> Scenario {
    let mut s = Scenario::new(2, 2, 100, 0, &[UserProfile::ndc(1.0), UserProfile::ndc(1.0)]);
    s.p_star = Some(10.0);
    s
}

struct Run {
    scenario: Scenario,
    out: Option<PathBuf>,
    quiet: bool,
    channels: Option<PathBuf>,
}

impl Run {
    fn new(cli: &Cli) -> Result<Self> {
        let mut scenario = match &cli.config {
            Some(path) => Scenario::load(path)?,
            None => default_scenario(),
        };
        apply_overrides(&mut scenario, cli.seed, cli.states)?;
        let out = cli.out.clone().or_else(|| scenario.output_path.clone().map(PathBuf::from));
        Ok(Self { scenario, out, quiet: cli.quiet, channels: cli.channels.clone() })
    }

    fn ensemble(&self) -> Result<ChannelSet> {
        let set = match &self.channels {
            Some(path) => load_channels(path, self.scenario.fading.seed)?,
            None => generate(&self.scenario.fading_spec())?,
        };
        if set.users() != self.scenario.profiles.len() {
            return Err(SimError::Config(format!(
                "{} profiles for an ensemble of {} users",
                self.scenario.profiles.len(),
                set.users()
            )));
        }
        Ok(set)
    }

    fn say(&self, msg: std::fmt::Arguments) {
        if !self.quiet {
            let _ = writeln!(std::io::stderr(), "{msg}");
        }
    }

    fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

fn apply_overrides(s: &mut Scenario, seed: Option<u64>, states: Option<usize>) -> Result<()> {
    if let Some(seed) = seed {
        s.fading.seed = seed;
    }
    if let Some(n) = states {
        s.fading.states = n;
    }
    s.validate()
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    if let Command::Repro { figure, seeds } = cli.command {
        if cli.config.is_some() || cli.channels.is_some() {
            return Err(SimError::Config("repro uses built-in scenarios; drop --config and --channels".into()));
        }
        return run_repro(cli, figure, seeds);
    }
    let run = Run::new(cli)?;
    let s = &run.scenario;
    match &cli.command {
        Command::Gen => {
            let set = generate(&s.fading_spec())?;
            match run.out() {
                Some(path) => save_channels(&set, path)?,
                None => write_channels(&set, std::io::stdout().lock())?,
            }
            Ok(Outcome::Done)
        }
        Command::Solve => {
            let channels = run.ensemble()?;
            let sol = solve_p1_offline(&channels, &s.user_profiles(), &s.solver_config())?;
            let rows: Vec<OfflineTraceRow> = sol.trace.iter().map(OfflineTraceRow::from).collect();
            emit_csv(&rows, run.out())?;
            run.say(format_args!(
                "power {:.6}  dual {:.6}  gap {:.2e}  iterations {}  max violation {:.2e}",
                sol.allocation.average_power,
                sol.dual_value,
                sol.duality_gap(),
                sol.iterations,
                sol.max_violation
            ));
            Ok(if sol.converged { Outcome::Done } else { Outcome::NotConverged })
        }
        Command::Online { blocks } => {
            let channels = run.ensemble()?;
            let records = run_online(s, &channels, *blocks)?;
            emit_csv(&online_rows(&records), run.out())?;
            let targets: Vec<f64> = s.user_profiles().iter().map(|p| p.target).collect();
            let summary = summarize_online(&records, &targets);
            run.say(format_args!("final rbar {:?}  targets {:?}", summary.final_rbar, summary.targets));
            Ok(Outcome::Done)
        }
        Command::Throughput { mode } => {
            let channels = run.ensemble()?;
            let p_star = s.p_star()?;
            let alpha = profile(s)?;
            let cfg = s.throughput_config();
            let mut rows = Vec::new();
            for (m, class, name) in [(Mode::Ndc, TrafficClass::Ndc, "c_e"), (Mode::Dc, TrafficClass::Dc, "c_d")] {
                if *mode == m || *mode == Mode::Both {
                    let c = throughput(&channels, &alpha, p_star, class, &cfg)?;
                    run.say(format_args!("{name} = {c:.4}"));
                    rows.push(ResultRow::new("throughput", p_star, name, c, s.fading.seed));
                }
            }
            emit_csv(&rows, run.out())?;
            Ok(Outcome::Done)
        }
        Command::Penalty => {
            let channels = run.ensemble()?;
            let report = penalty_report(&channels, &profile(s)?, s.p_star()?, &s.throughput_config())?;
            run.say(format_args!(
                "C_e {:.4}  C_d {:.4}  delay penalty {:.4}  fairness penalty {:.4}",
                report.c_e,
                report.c_d,
                report.delay_penalty,
                report.fairness_penalty.unwrap_or(f64::NAN)
            ));
            emit_csv(&[ReportRow::from(&report)], run.out())?;
            Ok(Outcome::Done)
        }
        Command::Fairness { step } => {
            if !(*step > 0.0 && *step < 0.5) {
                return Err(SimError::Config("--step must lie in (0, 0.5)".into()));
            }
            let channels = run.ensemble()?;
            let points = run_fairness(s, &channels, &repro::phi_grid(*step))?;
            let rows: Vec<ResultRow> =
                points.iter().map(|&(phi, c)| ResultRow::new("fairness", phi, "c_e", c, s.fading.seed)).collect();
            emit_csv(&rows, run.out())?;
            if let Some(best) = plateau_argmax(&points, s.throughput_config().bisect_tol) {
                run.say(format_args!("argmax phi = {best:.3}"));
            }
            Ok(Outcome::Done)
        }
        Command::Baseline => {
            let channels = run.ensemble()?;
            let profiles = s.user_profiles();
            let value = |r: misobc_core::Result<misobc_core::baselines::BaselinePower>| -> Result<f64> {
                match r {
                    Ok(b) => Ok(b.total),
                    Err(e @ (misobc_core::Error::Infeasible { .. }
                    | misobc_core::Error::ZeroCapacity { .. }
                    | misobc_core::Error::Unsupported { .. })) => {
                        run.say(format_args!("flagged: {e}"));
                        Ok(f64::INFINITY)
                    }
                    Err(e) => Err(e.into()),
                }
            };
            let sweep = s.gamma.unwrap_or(f64::NAN);
            let rows = vec![
                ResultRow::new("baseline", sweep, "tdma_power", value(tdma_power(&channels, &profiles))?, s.fading.seed),
                ResultRow::new("baseline", sweep, "zf_power", value(zf_sdma_power(&channels, &profiles))?, s.fading.seed),
            ];
            emit_csv(&rows, run.out())?;
            Ok(Outcome::Done)
        }
        Command::Repro { .. } => unreachable!("handled above"),
    }
}

fn profile(s: &Scenario) -> Result<RateProfile> {
    let weights: Vec<f64> = s.profiles.iter().map(|p| p.target).collect();
    RateProfile::normalized(&weights).map_err(|e| SimError::Config(format!("rate profile: {e}")))
}

fn run_repro(cli: &Cli, figure: Figure, seeds: usize) -> Result<Outcome> {
    let seed = cli.seed.unwrap_or(1);
    let out = cli.out.as_deref();
    let say = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    let states = |default: usize| cli.states.unwrap_or(default);
    match figure {
        Figure::Fig5 | Figure::Fig6 => {
            let (sum, name) = if figure == Figure::Fig5 { (6.0, "fig5") } else { (2.0, "fig6") };
            let scenario = repro::mixed(sum, states(repro::MIXED_STATES), seed);
            scenario.validate()?;
            let seed_list: Vec<u64> = (seed..seed + seeds as u64).collect();
            let points = run_mixed_traffic(&scenario, &repro::gamma_grid(), &seed_list)?;
            emit_csv(&mixed_rows(name, &points), out)?;
            for m in mixed_means(&points) {
                say(format!("gamma {:.1}: proposed {:.4}  tdma {:.4}  zf {:.4}", m.gamma, m.proposed, m.tdma, m.zf));
            }
            Ok(if points.iter().all(|p| p.converged) { Outcome::Done } else { Outcome::NotConverged })
        }
        Figure::Fig7 => {
            let scenario = repro::online(states(repro::ONLINE_BLOCKS), seed);
            scenario.validate()?;
            let channels = generate(&scenario.fading_spec())?;
            let records = run_online(&scenario, &channels, repro::ONLINE_BLOCKS)?;
            emit_csv(&online_rows(&records), out)?;
            let summary = summarize_online(&records, &[3.0, 1.0]);
            say(format!(
                "final rbar {:?}  first crossing {:?}  max error {:.4}",
                summary.final_rbar, summary.first_crossing, summary.max_error
            ));
            Ok(Outcome::Done)
        }
        Figure::Fig9 => {
            let scenarios = repro::tradeoff(states(repro::TRADEOFF_STATES), seed);
            for s in &scenarios {
                s.validate()?;
            }
            let reports = run_tradeoff(&scenarios, &repro::TRADEOFF_BUDGETS)?;
            for r in &reports {
                say(format!(
                    "K={} p*={}: C_e {:.4}  C_d {:.4}  penalty {:.4}",
                    r.alpha.len(),
                    r.p_star,
                    r.c_e,
                    r.c_d,
                    r.delay_penalty
                ));
            }
            let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
            emit_csv(&rows, out)?;
            Ok(Outcome::Done)
        }
        Figure::Fig10 => {
            let mut rows = Vec::new();
            for (asymmetric, metric) in [(false, "c_e_symmetric"), (true, "c_e_asymmetric")] {
                let scenario = repro::fairness(states(repro::FAIRNESS_STATES), seed, asymmetric);
                scenario.validate()?;
                let channels = generate(&scenario.fading_spec())?;
                let points = run_fairness(&scenario, &channels, &repro::phi_grid(repro::FAIRNESS_STEP))?;
                if let Some(best) = plateau_argmax(&points, scenario.throughput_config().bisect_tol) {
                    say(format!("{metric}: argmax phi = {best:.3}"));
                }
                rows.extend(points.iter().map(|&(phi, c)| ResultRow::new("fig10", phi, metric, c, seed)));
            }
            emit_csv(&rows, out)?;
            Ok(Outcome::Done)
        }
    }
}
