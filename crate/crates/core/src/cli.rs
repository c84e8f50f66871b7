//! The `klucrl-lab` command line. Exit codes: 0 on success, 2 for usage and
//! configuration errors, 3 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::agents::{regret_bound_evaluators, AgentConfig};
use crate::concentration::{empirical_variance_check, inequality_scan, ScanConfig};
use crate::envs::{make_two_state_hard, EnvConfig, TwoStateHardConfig};
use crate::error::{Error, Result};
use crate::harness::{analyze_mdp, batch_run, write_run_outputs, write_table_csv, AnalyzeOptions};
use crate::mdp::{MdpProfile, ProfileOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "klucrl-lab", version, about = "Average-reward RL laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Profile one or more environments; prints the comparison table as CSV.
    Analyze {
        #[arg(long, required = true)]
        env: Vec<PathBuf>,
        #[arg(long, default_value_t = crate::mdp::DEFAULT_POLICY_CAP)]
        mixing_cap: usize,
        /// Horizon for the bound report.
        #[arg(short = 'T', long = "horizon", default_value_t = 100_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Directory receiving table.csv and analysis.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a learner over a range of seeds.
    Run {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        agent: PathBuf,
        #[arg(short = 'T', long = "horizon")]
        horizon: u64,
        /// `a..b` (b excluded), `a,b,c` or a single seed.
        #[arg(long, default_value = "0..20")]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the regret bounds of an environment.
    Bounds {
        #[arg(long)]
        env: PathBuf,
        #[arg(short = 'T', long = "horizon")]
        horizon: u64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify the transportation inequalities by sampling.
    ConcTest {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        stress_samples: usize,
        /// Trials of the empirical-variance check (0 skips it).
        #[arg(long, default_value_t = 1_000)]
        variance_trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed forms and the minimax lower bound of the two-state hard instance.
    LowerBound {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(short = 'A', long = "actions", default_value_t = 1)]
        actions: usize,
        #[arg(short = 'T', long = "horizon", default_value_t = 1_000_000)]
        horizon: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Analyze {
            env,
            mixing_cap,
            horizon,
            delta,
            out,
        } => {
            let options = AnalyzeOptions {
                profile: ProfileOptions {
                    mixing_cap,
                    ..Default::default()
                },
                horizon,
                delta,
            };
            let analyses = env
                .iter()
                .map(|path| analyze_mdp(&load_env(path)?, &options))
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<_> = analyses.iter().map(|a| a.row).collect();
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    write_table_csv(fs::File::create(dir.join("table.csv"))?, &rows)?;
                    fs::write(
                        dir.join("analysis.json"),
                        serde_json::to_string_pretty(&analyses)?,
                    )?;
                }
                None => write_table_csv(std::io::stdout().lock(), &rows)?,
            }
        }
        Command::Run {
            env,
            agent,
            horizon,
            seeds,
            out,
        } => {
            let env_config = load_env(&env)?;
            let agent_config = load_agent(&agent)?;
            let seeds = parse_seeds(&seeds)?;
            let batch = batch_run(&env_config, &agent_config, horizon, &seeds)?;
            write_run_outputs(&out, &env_config, &agent_config, horizon, &batch)?;
            println!(
                "{} seeds, T = {horizon}: mean regret {:.3}, std {:.3}",
                batch.traces.len(),
                batch.final_mean(),
                batch.regret_std.last().copied().unwrap_or(0.0)
            );
        }
        Command::Bounds {
            env,
            horizon,
            delta,
            out,
        } => {
            let mdp = load_env(&env)?.build()?;
            let profile = MdpProfile::compute(&mdp, &ProfileOptions::default())?;
            let report = regret_bound_evaluators(&profile, horizon, delta)?;
            emit_json(&report, out.as_deref())?;
        }
        Command::ConcTest {
            samples,
            seed,
            stress_samples,
            variance_trials,
            out,
        } => {
            let report = inequality_scan(&ScanConfig {
                samples,
                seed,
                stress_samples,
                ..Default::default()
            })?;
            let variance = if variance_trials > 0 {
                Some(empirical_variance_check(variance_trials, 0.05, seed)?)
            } else {
                None
            };
            let json = serde_json::json!({ "scan": report, "empirical_variance": variance });
            emit_json(&json, Some(&out))?;
            for (ineq, stats) in &report.inequalities {
                println!(
                    "{ineq:?}: {} violations / {} samples",
                    stats.violations, stats.samples
                );
            }
        }
        Command::LowerBound {
            delta,
            eps,
            actions,
            horizon,
            out,
        } => {
            let config = TwoStateHardConfig {
                delta,
                eps,
                n_actions: actions,
            };
            let (mdp, closed_form) = make_two_state_hard(&config)?;
            let profile = MdpProfile::compute(&mdp, &ProfileOptions::default())?;
            let bounds = regret_bound_evaluators(&profile, horizon.max(3), 0.05)?;
            let json = serde_json::json!({
                "config": config,
                "closed_form": closed_form,
                "lb": bounds.lb,
                "horizon": horizon,
            });
            emit_json(&json, out.as_deref())?;
        }
    }
    Ok(())
}

fn load_env(path: &Path) -> Result<EnvConfig> {
    EnvConfig::load(path).map_err(|e| config_error(path, e))
}

fn load_agent(path: &Path) -> Result<AgentConfig> {
    AgentConfig::load(path).map_err(|e| config_error(path, e))
}

fn config_error(path: &Path, err: Error) -> Error {
    match err {
        Error::Io(e) => Error::InvalidConfig(format!("{}: {e}", path.display())),
        other => other,
    }
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Parses `a..b` (half-open), `a,b,c` or a single seed.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidConfig(format!("cannot parse seeds `{spec}`"));
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        (a..b).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}
