//! Command-line surface.
//!
//! Global knobs can come from three places with a fixed precedence:
//! explicit flags beat `LOADSCOPE_*` environment variables, which beat
//! the config file. Exit codes partition failures: 2 for config and
//! usage problems, 3 for data problems, 4 for internal errors.

use std::env;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use super::auxcmd::{cmd_causality, cmd_cluster, cmd_synth};
use super::config::{load_config, RunConfig};
use super::forecast::{cmd_attribute, cmd_forecast, forecast_csv};
use super::pipeline::cmd_run;
use super::RunnerError;

const ENV_CONFIG: &str = "LOADSCOPE_CONFIG";
const ENV_SEED: &str = "LOADSCOPE_SEED";
const ENV_JOBS: &str = "LOADSCOPE_JOBS";
const ENV_OUT: &str = "LOADSCOPE_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "loadscope",
    version,
    about = "Multi-horizon regional electricity demand forecasting toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Execute the full experiment described by a config file.
    Run(CommonArgs),
    /// Serve one day's hourly forecasts from a finished run.
    Forecast(ForecastArgs),
    /// Cluster textual features and report centroid membership.
    Cluster(CommonArgs),
    /// Run the causal analyses and write their tables.
    Causality(CommonArgs),
    /// Recompute feature attribution from a finished run's models.
    Attribute(AttributeArgs),
    /// Generate a synthetic panel and write it as CSVs.
    Synth(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Config file (TOML or JSON; a run's manifest.json also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 = one per core. Never changes outputs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    /// Finished run directory (holding manifest.json and models/).
    #[arg(long)]
    run: PathBuf,
    /// Region to forecast.
    #[arg(long)]
    region: String,
    /// Issue date, YYYY-MM-DD; the target day is issue + horizon.
    #[arg(long)]
    issue: String,
    /// Lead time in days.
    #[arg(long)]
    horizon: u32,
    /// Model family (default: the richest one the run trained).
    #[arg(long)]
    family: Option<String>,
    /// Also write the table to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AttributeArgs {
    /// Finished run directory (holding manifest.json and models/).
    #[arg(long)]
    run: PathBuf,
    /// Model family (default: the richest one the run trained).
    #[arg(long)]
    family: Option<String>,
    /// Directory for shap_summary.csv (default: the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn env_string(name: &str) -> Option<String> {
    env::var(name).ok().filter(|s| !s.is_empty())
}

fn env_parsed<T: FromStr>(name: &str) -> Result<Option<T>, RunnerError>
where
    T::Err: Display,
{
    match env_string(name) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| RunnerError::Config(format!("{name}={raw:?}: {e}"))),
    }
}

/// Load the config named by `--config` or `LOADSCOPE_CONFIG` and fold in
/// the seed/jobs/out overrides.
fn resolved_config(args: &CommonArgs) -> Result<RunConfig, RunnerError> {
    let path = args
        .config
        .clone()
        .or_else(|| env_string(ENV_CONFIG).map(PathBuf::from))
        .ok_or_else(|| {
            RunnerError::Config(format!("no config given: pass --config or set {ENV_CONFIG}"))
        })?;
    let mut config = load_config(&path)?;
    if let Some(seed) = args.seed.or(env_parsed::<u64>(ENV_SEED)?) {
        config.seed = seed;
    }
    if let Some(jobs) = args.jobs.or(env_parsed::<usize>(ENV_JOBS)?) {
        config.jobs = jobs;
    }
    if let Some(out) = args.out.clone().or_else(|| env_string(ENV_OUT).map(PathBuf::from)) {
        config.out = out;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<(), RunnerError> {
    match cli.cmd {
        Cmd::Run(args) => {
            let config = resolved_config(&args)?;
            let manifest = cmd_run(&config)?;
            println!(
                "run complete: {} artifacts under {}",
                manifest.files.len(),
                config.out.display()
            );
            println!("manifest: {}", config.out.join("manifest.json").display());
            Ok(())
        }
        Cmd::Forecast(args) => {
            let issue = NaiveDate::parse_from_str(&args.issue, "%Y-%m-%d")
                .map_err(|e| RunnerError::Config(format!("--issue {:?}: {e}", args.issue)))?;
            let rows = cmd_forecast(
                &args.run,
                &args.region,
                issue,
                args.horizon,
                args.family.as_deref(),
            )?;
            let table = forecast_csv(&rows);
            print!("{table}");
            if let Some(path) = &args.out {
                std::fs::write(path, &table).map_err(|e| RunnerError::Internal {
                    task: format!("write {}", path.display()),
                    msg: e.to_string(),
                })?;
            }
            Ok(())
        }
        Cmd::Cluster(args) => {
            let config = resolved_config(&args)?;
            let out = config.out.clone();
            let summary = cmd_cluster(&config, &out)?;
            println!("k = {}", summary.k);
            for (centroid, members) in &summary.members {
                println!("{centroid}: {}", members.join(", "));
            }
            Ok(())
        }
        Cmd::Causality(args) => {
            let config = resolved_config(&args)?;
            let out = config.out.clone();
            let (granger_rows, dml_rows) = cmd_causality(&config, &out)?;
            println!(
                "wrote {granger_rows} direction rows to {}",
                out.join("causality_granger.csv").display()
            );
            println!(
                "wrote {dml_rows} effect rows to {}",
                out.join("causality_dml.csv").display()
            );
            Ok(())
        }
        Cmd::Attribute(args) => {
            let ranked = cmd_attribute(&args.run, args.family.as_deref(), args.out.as_deref())?;
            for (i, (name, value)) in ranked.iter().take(15).enumerate() {
                println!("{:>2}. {name}  {value:.3}", i + 1);
            }
            Ok(())
        }
        Cmd::Synth(args) => {
            let config = resolved_config(&args)?;
            let out = config.out.clone();
            let panel = cmd_synth(&config, &out)?;
            let regions = panel.regions().count();
            let days = panel
                .regions()
                .next()
                .and_then(|r| panel.demand(r))
                .map_or(0, |d| d.values().len() / 24);
            println!("wrote {regions} regions x {days} days to {}", out.display());
            Ok(())
        }
    }
}

/// Parse arguments, dispatch, and exit with the error-kind code.
/// Usage errors exit 2 through the parser itself.
pub fn cli_main() -> ! {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => std::process::exit(0),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_into_the_expected_commands() {
        let cli = Cli::try_parse_from([
            "loadscope", "run", "--config", "exp.toml", "--seed", "9", "--jobs", "2", "--out",
            "results",
        ])
        .unwrap();
        match cli.cmd {
            Cmd::Run(args) => {
                assert_eq!(args.config.as_deref(), Some(std::path::Path::new("exp.toml")));
                assert_eq!(args.seed, Some(9));
                assert_eq!(args.jobs, Some(2));
                assert_eq!(args.out.as_deref(), Some(std::path::Path::new("results")));
            }
            other => panic!("parsed as {other:?}"),
        }

        let cli = Cli::try_parse_from([
            "loadscope",
            "forecast",
            "--run",
            "results",
            "--region",
            "east",
            "--issue",
            "2021-05-20",
            "--horizon",
            "7",
        ])
        .unwrap();
        assert!(matches!(cli.cmd, Cmd::Forecast(_)));
    }

    #[test]
    fn unknown_subcommands_fail_to_parse() {
        assert!(Cli::try_parse_from(["loadscope", "destroy"]).is_err());
        assert!(Cli::try_parse_from(["loadscope"]).is_err());
    }

    #[test]
    fn malformed_issue_date_is_a_config_error() {
        let cli = Cli::try_parse_from([
            "loadscope",
            "forecast",
            "--run",
            "nowhere",
            "--region",
            "east",
            "--issue",
            "May 20th",
            "--horizon",
            "1",
        ])
        .unwrap();
        let err = dispatch(cli).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
        assert!(err.to_string().contains("May 20th"));
    }

    #[test]
    fn missing_config_source_is_a_config_error() {
        let args = CommonArgs { config: None, seed: None, jobs: None, out: None };
        // LOADSCOPE_CONFIG is never set under `cargo test`.
        let err = resolved_config(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn env_values_parse_or_fail_loudly() {
        // Unique variable names: the process environment is shared across
        // parallel tests.
        env::set_var("LOADSCOPE_TEST_GOOD_SEED", "42");
        assert_eq!(env_parsed::<u64>("LOADSCOPE_TEST_GOOD_SEED").unwrap(), Some(42));
        // A flag still wins over a set variable.
        assert_eq!(
            Some(7).or(env_parsed::<u64>("LOADSCOPE_TEST_GOOD_SEED").unwrap()),
            Some(7)
        );

        env::set_var("LOADSCOPE_TEST_BAD_SEED", "not-a-number");
        let err = env_parsed::<u64>("LOADSCOPE_TEST_BAD_SEED").unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");

        assert_eq!(env_parsed::<u64>("LOADSCOPE_TEST_UNSET_SEED").unwrap(), None);
    }
}
